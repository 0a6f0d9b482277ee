//! Run configuration: every sweep is reproducible from its serialized
//! config plus the seed. Values come from CLI flags, optionally backed by a
//! TOML file; flags win over file entries.

use serde::{Deserialize, Serialize};

/// Fully resolved configuration of one run, echoed into the manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[i64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cases: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_dist: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_csv: Option<String>,
    #[serde(default)]
    pub plot_script: bool,
}

/// Partial configuration loaded from a TOML file; any field a flag does not
/// set falls back to this.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub n_list: Option<Vec<u64>>,
    pub p_list: Option<Vec<u64>>,
    pub dim: Option<usize>,
    pub alpha_list: Option<Vec<f64>>,
    pub xi_list: Option<Vec<f64>>,
    pub threshold: Option<f64>,
    pub max_steps: Option<u32>,
    pub points: Option<Vec<[i64; 3]>>,
    pub cases: Option<u32>,
    pub p: Option<u64>,
    pub k_list: Option<Vec<i64>>,
    pub n1: Option<u32>,
    pub n2: Option<u32>,
    pub window: Option<[f64; 4]>,
    pub theta: Option<f64>,
    pub step: Option<f64>,
    pub atoms: Option<String>,
}

pub fn parse_u64_list(s: &str) -> Result<Vec<u64>, String> {
    if s.trim().is_empty() {
        return Err("empty list".into());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("bad entry '{t}': {e}")))
        .collect()
}

pub fn parse_i64_list(s: &str) -> Result<Vec<i64>, String> {
    if s.trim().is_empty() {
        return Err("empty list".into());
    }
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| format!("bad entry '{t}': {e}")))
        .collect()
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Err("empty list".into());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad entry '{t}': {e}")))
        .collect()
}

/// Triples `n1,n2,n3` separated by semicolons.
pub fn parse_points(s: &str) -> Result<Vec<[i64; 3]>, String> {
    s.split(';')
        .map(|t| {
            let parts = parse_i64_list(t)?;
            if parts.len() != 3 {
                return Err(format!("point '{t}' must have exactly three coordinates"));
            }
            Ok([parts[0], parts[1], parts[2]])
        })
        .collect()
}

/// Window `x_lo,y_lo,x_hi,y_hi`.
pub fn parse_window(s: &str) -> Result<[f64; 4], String> {
    let parts = parse_f64_list(s)?;
    if parts.len() != 4 {
        return Err("window needs four numbers: x_lo,y_lo,x_hi,y_hi".into());
    }
    Ok([parts[0], parts[1], parts[2], parts[3]])
}

/// Atom list `x,y,p;x,y,p;...`.
pub fn parse_atoms(s: &str) -> Result<Vec<([f64; 2], f64)>, String> {
    s.split(';')
        .map(|t| {
            let parts = parse_f64_list(t)?;
            if parts.len() != 3 {
                return Err(format!("atom '{t}' must be x,y,p"));
            }
            Ok(([parts[0], parts[1]], parts[2]))
        })
        .collect()
}
