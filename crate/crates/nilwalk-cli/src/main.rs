//! `nilwalk`: reproducible sweeps over the walk computations, emitting CSV
//! artifacts and a self-verifying JSON manifest. Identical (config, seed)
//! pairs produce byte-identical CSVs for any `--threads` value.

mod artifacts;
mod commands;
mod config;

use clap::{Args, Parser, Subcommand};

use commands::{dispatch, exit_code, CliError};
use config::{
    parse_f64_list, parse_i64_list, parse_points, parse_u64_list, parse_window, FileConfig,
    RunConfig,
};

#[derive(Parser)]
#[command(
    name = "nilwalk",
    version,
    about = "Random walks on nilpotent groups: exact distributions, characteristic functions, mixing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Master seed for every random stream in the run
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for CSV artifacts and manifest.json
    #[arg(long)]
    out: Option<String>,
    /// Optional TOML file supplying defaults for any parameter (flags win)
    #[arg(long)]
    config: Option<String>,
    /// Also emit gnuplot scripts next to the CSVs
    #[arg(long, default_value_t = false)]
    plot_script: bool,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Exact return probabilities of the five-atom lattice walk
    ReturnProb {
        #[command(flatten)]
        common: Common,
        /// Comma-separated step counts, e.g. 10,20,40,80
        #[arg(long = "N", alias = "n-list")]
        n_list: Option<String>,
        /// Dump the final distribution as a binary snapshot with this name
        #[arg(long)]
        dump_dist: Option<String>,
        /// Dump the final distribution as CSV with this name
        #[arg(long)]
        dump_csv: Option<String>,
    },
    /// Exact table against the local-limit prediction at lattice points
    LltCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N", alias = "n-list")]
        n_list: Option<String>,
        /// Semicolon-separated integer triples, e.g. "0,0,0;1,1,0"
        #[arg(long)]
        points: Option<String>,
    },
    /// Finite-N characteristic function against its closed-form limit
    Charfun {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N", alias = "n-list")]
        n_list: Option<String>,
        /// Comma-separated |alpha| values
        #[arg(long)]
        alpha: Option<String>,
        /// Comma-separated xi values
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<String>,
    },
    /// Scalar recurrence state against its closed forms
    Greek {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N", alias = "n-list")]
        n_list: Option<String>,
        #[arg(long)]
        xi: Option<String>,
    },
    /// Exact corner mixing curves and mixing times on N_n(Z/pZ)
    Mixing {
        #[command(flatten)]
        common: Common,
        /// Matrix dimension n
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated moduli, e.g. 5,7,11,13
        #[arg(long = "p", alias = "p-list")]
        p_list: Option<String>,
        /// TVD threshold (default 1/4)
        #[arg(long)]
        threshold: Option<f64>,
        /// Step cap before reporting a resource error
        #[arg(long)]
        max_steps: Option<u32>,
    },
    /// Corner characteristic-function decay and its fitted exponent
    CharfunDecay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        /// Frequency denominator: xi = k/p
        #[arg(long)]
        p: Option<u64>,
        /// Comma-separated frequency indices k
        #[arg(long = "k", alias = "k-list")]
        k_list: Option<String>,
        /// Smaller step count of the two-point rate
        #[arg(long)]
        n1: Option<u32>,
        /// Larger step count of the two-point rate
        #[arg(long)]
        n2: Option<u32>,
    },
    /// Random pair-swap and factorization identity checks
    RearrangeCheck {
        #[command(flatten)]
        common: Common,
        /// Number of random cases
        #[arg(long)]
        cases: Option<u32>,
    },
    /// Characteristic-function magnitudes and local maxima of a plane measure
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Search window "x_lo,y_lo,x_hi,y_hi"
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        /// Spectrum threshold theta in (0,1)
        #[arg(long)]
        theta: Option<f64>,
        /// Scan grid step
        #[arg(long)]
        step: Option<f64>,
        /// Atom list "x,y,p;x,y,p;..." (default: the five-atom lattice measure)
        #[arg(long, allow_hyphen_values = true)]
        atoms: Option<String>,
    },
}

fn load_file_config(path: &Option<String>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {p}: {e}")))?;
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {p}: {e}")))
        }
    }
}

fn build_config(cmd: &Command) -> Result<RunConfig, CliError> {
    let (name, common) = match cmd {
        Command::ReturnProb { common, .. } => ("return-prob", common),
        Command::LltCompare { common, .. } => ("llt-compare", common),
        Command::Charfun { common, .. } => ("charfun", common),
        Command::Greek { common, .. } => ("greek", common),
        Command::Mixing { common, .. } => ("mixing", common),
        Command::CharfunDecay { common, .. } => ("charfun-decay", common),
        Command::RearrangeCheck { common, .. } => ("rearrange-check", common),
        Command::Spectrum { common, .. } => ("spectrum", common),
    };
    let file = load_file_config(&common.config)?;
    let parse_u =
        |s: &Option<String>, fb: &Option<Vec<u64>>| -> Result<Option<Vec<u64>>, CliError> {
            match s {
                Some(t) => parse_u64_list(t).map(Some).map_err(CliError::Usage),
                None => Ok(fb.clone()),
            }
        };
    let parse_f =
        |s: &Option<String>, fb: &Option<Vec<f64>>| -> Result<Option<Vec<f64>>, CliError> {
            match s {
                Some(t) => parse_f64_list(t).map(Some).map_err(CliError::Usage),
                None => Ok(fb.clone()),
            }
        };
    let mut cfg = RunConfig {
        command: name.to_string(),
        seed: common.seed.or(file.seed).unwrap_or(0),
        threads: common.threads.or(file.threads).unwrap_or(0),
        out: common
            .out
            .clone()
            .or(file.out.clone())
            .unwrap_or_else(|| format!("out-{name}")),
        n_list: None,
        p_list: None,
        dim: None,
        alpha_list: None,
        xi_list: None,
        threshold: None,
        max_steps: None,
        points: None,
        cases: None,
        p: None,
        k_list: None,
        n1: None,
        n2: None,
        window: None,
        theta: None,
        step: None,
        atoms: None,
        dump_dist: None,
        dump_csv: None,
        plot_script: common.plot_script,
    };
    match cmd {
        Command::ReturnProb { n_list, dump_dist, dump_csv, .. } => {
            cfg.n_list = parse_u(n_list, &file.n_list)?;
            cfg.dump_dist = dump_dist.clone();
            cfg.dump_csv = dump_csv.clone();
        }
        Command::LltCompare { n_list, points, .. } => {
            cfg.n_list = parse_u(n_list, &file.n_list)?;
            cfg.points = match points {
                Some(t) => Some(parse_points(t).map_err(CliError::Usage)?),
                None => file.points.clone(),
            };
        }
        Command::Charfun { n_list, alpha, xi, .. } => {
            cfg.n_list = parse_u(n_list, &file.n_list)?;
            cfg.alpha_list = parse_f(alpha, &file.alpha_list)?;
            cfg.xi_list = parse_f(xi, &file.xi_list)?;
        }
        Command::Greek { n_list, xi, .. } => {
            cfg.n_list = parse_u(n_list, &file.n_list)?;
            cfg.xi_list = parse_f(xi, &file.xi_list)?;
        }
        Command::Mixing { n, p_list, threshold, max_steps, .. } => {
            cfg.dim = n.or(file.dim);
            cfg.p_list = parse_u(p_list, &file.p_list)?;
            cfg.threshold = threshold.or(file.threshold);
            cfg.max_steps = max_steps.or(file.max_steps);
        }
        Command::CharfunDecay { n, p, k_list, n1, n2, .. } => {
            cfg.dim = n.or(file.dim);
            cfg.p = p.or(file.p);
            cfg.k_list = match k_list {
                Some(t) => Some(parse_i64_list(t).map_err(CliError::Usage)?),
                None => file.k_list.clone(),
            };
            cfg.n1 = n1.or(file.n1);
            cfg.n2 = n2.or(file.n2);
        }
        Command::RearrangeCheck { cases, .. } => {
            cfg.cases = cases.or(file.cases);
        }
        Command::Spectrum { window, theta, step, atoms, .. } => {
            cfg.window = match window {
                Some(t) => Some(parse_window(t).map_err(CliError::Usage)?),
                None => file.window,
            };
            cfg.theta = theta.or(file.theta);
            cfg.step = step.or(file.step);
            cfg.atoms = atoms.clone().or(file.atoms.clone());
        }
    }
    Ok(cfg)
}

fn main() {
    let cli = Cli::parse();
    let cfg = match build_config(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(exit_code(&e));
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if cfg.threads > 0 {
        pool = pool.num_threads(cfg.threads);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            std::process::exit(1);
        }
    };
    let result = pool.install(|| dispatch(&cfg));
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(exit_code(&e));
    }
}
