//! Artifact emission: CSV files with round-trip-exact doubles and a JSON
//! manifest carrying the config echo, versions, wall time and checksums.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// 17-significant-digit decimal formatting: round-trip exact for f64 and
/// stable across platforms.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct ArtifactSink {
    out_dir: PathBuf,
    files: Vec<(String, String)>, // (name, contents)
    started: Instant,
    extras: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct ManifestFile {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    wall_time_ms: u128,
    artifacts: Vec<ManifestFile>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    extras: serde_json::Map<String, serde_json::Value>,
}

impl ArtifactSink {
    pub fn new(out_dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            extras: serde_json::Map::new(),
        })
    }

    /// Queue a CSV (or any text artifact) for emission.
    pub fn add_text(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Record an extra manifest field (fit results, summaries).
    pub fn add_extra(&mut self, key: &str, value: serde_json::Value) {
        self.extras.insert(key.to_string(), value);
    }

    /// Write every queued artifact plus `manifest.json`; returns the paths.
    pub fn finish(self, config: &RunConfig) -> std::io::Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut entries = Vec::new();
        for (name, contents) in &self.files {
            let path = self.out_dir.join(name);
            let mut f = fs::File::create(&path)?;
            f.write_all(contents.as_bytes())?;
            let mut h = Sha256::new();
            h.update(contents.as_bytes());
            entries.push(ManifestFile {
                path: name.clone(),
                bytes: contents.len(),
                sha256: format!("{:x}", h.finalize()),
            });
            written.push(path);
        }
        let manifest = Manifest {
            tool: "nilwalk",
            version: env!("CARGO_PKG_VERSION"),
            config,
            wall_time_ms: self.started.elapsed().as_millis(),
            artifacts: entries,
            extras: self.extras,
        };
        let path = self.out_dir.join("manifest.json");
        let mut f = fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.write_all(b"\n")?;
        written.push(path);
        Ok(written)
    }
}

/// Tiny gnuplot script referencing an emitted CSV; written when
/// `--plot-script` is passed.
pub fn plot_script(csv: &str, xlabel: &str, ylabel: &str, using: &str, logscale: bool) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    if logscale {
        s.push_str("set logscale xy\n");
    }
    s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    s.push_str(&format!("plot '{csv}' using {using} with linespoints\n"));
    s.push_str("pause -1\n");
    s
}
