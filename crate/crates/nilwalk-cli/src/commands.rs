//! One entry point per subcommand; each computes its sweep, emits CSV
//! artifacts plus the manifest, and reports errors with the proper class.

use std::fmt::Write as _;
use std::path::Path;

use nilwalk::gauss::{greek_closed, greek_recurrence, i_closed, i_finite, FreqPoint};
use nilwalk::lattice::{
    exact_distribution_trace, llt_prediction, FiniteMeasure, LatticeError,
    DEFAULT_MEMORY_BUDGET,
};
use nilwalk::rearrange::{f_k, pair_swap_identity, FkMode};
use nilwalk::spectrum::{find_local_maxima, write_spectrum_csv, PlaneMeasure};
use nilwalk::unitri::{
    charfun_from_marginal, corner_marginal_rowwalk, decay_exponent_fit, mixing_time,
    StepMeasureZn, UnitriError,
};
use rayon::prelude::*;

use crate::artifacts::{fmt_f64, plot_script, ArtifactSink};
use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Resource(String),
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Resource(m) => write!(f, "resource budget: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o: {e}"))
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::MemoryBudget { .. } => CliError::Resource(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<UnitriError> for CliError {
    fn from(e: UnitriError) -> Self {
        match e {
            UnitriError::ResourceBudget(_) => CliError::Resource(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => 2,
        CliError::Resource(_) => 3,
        CliError::Other(_) => 1,
    }
}

fn need<T: Clone>(opt: &Option<T>, what: &str) -> Result<T, CliError> {
    opt.clone()
        .ok_or_else(|| CliError::Usage(format!("missing required parameter: {what}")))
}

/// `return-prob`: exact DP return probabilities for the five-atom lattice
/// measure at each listed N. CSV: `N,p_return,n2p`.
pub fn run_return_prob(cfg: &RunConfig) -> Result<(), CliError> {
    let n_list = need(&cfg.n_list, "--n-list")?;
    if n_list.is_empty() {
        return Err(CliError::Usage("N list is empty".into()));
    }
    let max_n = *n_list.iter().max().unwrap() as u32;
    let mu = FiniteMeasure::mu0();
    let mut rows: Vec<(u64, f64)> = Vec::new();
    let mut dump: Option<Vec<u8>> = None;
    let mut dump_csv: Option<Vec<u8>> = None;
    exact_distribution_trace(&mu, max_n, DEFAULT_MEMORY_BUDGET, |step, dist| {
        if n_list.contains(&(step as u64)) {
            rows.push((step as u64, dist.prob_xyt(0, 0, 0)));
        }
        if step == max_n {
            if cfg.dump_dist.is_some() {
                let mut buf = Vec::new();
                dist.write_binary(&mut buf).expect("in-memory write");
                dump = Some(buf);
            }
            if cfg.dump_csv.is_some() {
                let mut buf = Vec::new();
                dist.write_csv(&mut buf).expect("in-memory write");
                dump_csv = Some(buf);
            }
        }
    })?;
    let mut csv = String::from("N,p_return,n2p\n");
    for (n, p) in &rows {
        let n2p = (*n as f64) * (*n as f64) * p;
        writeln!(csv, "{n},{},{}", fmt_f64(*p), fmt_f64(n2p)).unwrap();
    }
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text("return_prob.csv", csv);
    if cfg.plot_script {
        sink.add_text(
            "return_prob.gp",
            plot_script("return_prob.csv", "N", "N^2 P_N(id)", "1:3", false),
        );
    }
    if let (Some(name), Some(bytes)) = (&cfg.dump_dist, dump) {
        std::fs::write(Path::new(&cfg.out).join(name), bytes)?;
    }
    if let (Some(name), Some(bytes)) = (&cfg.dump_csv, dump_csv) {
        std::fs::write(Path::new(&cfg.out).join(name), bytes)?;
    }
    sink.finish(cfg)?;
    Ok(())
}

/// `llt-compare`: exact DP versus the local-limit prediction at the given
/// lattice points. CSV: `N,n1,n2,n3,exact,predicted,scaled_err` with
/// `scaled_err = |exact - predicted|·N^{5/2}`.
pub fn run_llt_compare(cfg: &RunConfig) -> Result<(), CliError> {
    let n_list = need(&cfg.n_list, "--n-list")?;
    let points = need(&cfg.points, "--points")?;
    if n_list.is_empty() || points.is_empty() {
        return Err(CliError::Usage("N list and points must be nonempty".into()));
    }
    let max_n = *n_list.iter().max().unwrap() as u32;
    let mu = FiniteMeasure::mu0();
    let params = mu.params()?;
    let mut rows = Vec::new();
    exact_distribution_trace(&mu, max_n, DEFAULT_MEMORY_BUDGET, |step, dist| {
        if n_list.contains(&(step as u64)) {
            for pt in &points {
                let t = 2 * pt[2] - pt[0] * pt[1];
                let exact = dist.prob_xyt(pt[0], pt[1], t);
                rows.push((step as u64, *pt, exact));
            }
        }
    })?;
    let mut csv = String::from("N,n1,n2,n3,exact,predicted,scaled_err\n");
    for (n, pt, exact) in &rows {
        let pred = llt_prediction(&params, *pt, *n as u32)?;
        let scaled = (exact - pred).abs() * (*n as f64).powf(2.5);
        writeln!(
            csv,
            "{n},{},{},{},{},{},{}",
            pt[0],
            pt[1],
            pt[2],
            fmt_f64(*exact),
            fmt_f64(pred),
            fmt_f64(scaled)
        )
        .unwrap();
    }
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text("llt_compare.csv", csv);
    sink.finish(cfg)?;
    Ok(())
}

/// `charfun`: recurrence route against the closed form over the grid of
/// `(N, |alpha|, xi)`. CSV: `N,alpha_norm,xi,I_finite,I_closed,rel_err`.
pub fn run_charfun(cfg: &RunConfig) -> Result<(), CliError> {
    let n_list = need(&cfg.n_list, "--n-list")?;
    let alphas = need(&cfg.alpha_list, "--alpha-list")?;
    let xis = need(&cfg.xi_list, "--xi-list")?;
    if n_list.is_empty() || alphas.is_empty() || xis.is_empty() {
        return Err(CliError::Usage("all sweep lists must be nonempty".into()));
    }
    let mut sweep = Vec::new();
    for &n in &n_list {
        for &a in &alphas {
            for &xi in &xis {
                sweep.push((n, a, xi));
            }
        }
    }
    let rows: Result<Vec<String>, CliError> = sweep
        .par_iter()
        .map(|&(n, a, xi)| {
            let p = FreqPoint::new([a, 0.0], xi);
            let fin = i_finite(p, n).map_err(|e| CliError::Other(e.to_string()))?;
            let cl = i_closed(p);
            let rel = if cl != 0.0 { fin / cl - 1.0 } else { f64::NAN };
            Ok(format!(
                "{n},{},{},{},{},{}",
                fmt_f64(a),
                fmt_f64(xi),
                fmt_f64(fin),
                fmt_f64(cl),
                fmt_f64(rel)
            ))
        })
        .collect();
    let mut csv = String::from("N,alpha_norm,xi,I_finite,I_closed,rel_err\n");
    for r in rows? {
        csv.push_str(&r);
        csv.push('\n');
    }
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text("charfun.csv", csv);
    if cfg.plot_script {
        sink.add_text(
            "charfun.gp",
            plot_script("charfun.csv", "N", "rel_err", "1:(abs($6))", true),
        );
    }
    sink.finish(cfg)?;
    Ok(())
}

/// `greek`: recurrence versus closed forms along `(n, xi)`. CSV:
/// `n,xi,eps_rec,eps_closed,pi_log_rec,pi_log_closed,delta_rec,delta_closed`.
pub fn run_greek(cfg: &RunConfig) -> Result<(), CliError> {
    let n_list = need(&cfg.n_list, "--n-list")?;
    let xis = need(&cfg.xi_list, "--xi-list")?;
    if n_list.is_empty() || xis.is_empty() {
        return Err(CliError::Usage("sweep lists must be nonempty".into()));
    }
    let mut csv = String::from(
        "n,xi,eps_rec,eps_closed,pi_log_rec,pi_log_closed,delta_rec,delta_closed\n",
    );
    for &n in &n_list {
        for &xi in &xis {
            let rec = greek_recurrence(xi, n).map_err(|e| CliError::Other(e.to_string()))?;
            let cl = greek_closed(xi, n).map_err(|e| CliError::Other(e.to_string()))?;
            writeln!(
                csv,
                "{n},{},{},{},{},{},{},{}",
                fmt_f64(xi),
                fmt_f64(rec.epsilon),
                fmt_f64(cl.epsilon),
                fmt_f64(rec.log_pi),
                fmt_f64(cl.log_pi),
                fmt_f64(rec.delta),
                fmt_f64(cl.delta)
            )
            .unwrap();
        }
    }
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text("greek.csv", csv);
    sink.finish(cfg)?;
    Ok(())
}

/// `mixing`: exact TVD mixing curves of the corner coordinate over a list of
/// moduli. Curve CSV: `n,p,N,tvd,plancherel_rhs`; summary CSV:
/// `n,p,n_mix,n_mix_over_scale` with the scale `p^{2/(n-1)}`.
pub fn run_mixing(cfg: &RunConfig) -> Result<(), CliError> {
    let n = need(&cfg.dim, "--n")?;
    let p_list = need(&cfg.p_list, "--p-list")?;
    if p_list.is_empty() {
        return Err(CliError::Usage("p list is empty".into()));
    }
    let threshold = cfg.threshold.unwrap_or(0.25);
    let max_steps = cfg.max_steps.unwrap_or(200_000);
    let mu = StepMeasureZn::default_lazy(n)?;
    let runs: Result<Vec<_>, CliError> = p_list
        .par_iter()
        .map(|&p| mixing_time(&mu, n, p, threshold, max_steps).map_err(CliError::from))
        .collect();
    let runs = runs?;
    let mut curve = String::from("n,p,N,tvd,plancherel_rhs\n");
    let mut summary = String::from("n,p,n_mix,n_mix_over_scale\n");
    for run in &runs {
        for (step, tvd, rhs) in &run.curve {
            writeln!(
                curve,
                "{n},{},{step},{},{}",
                run.p,
                fmt_f64(*tvd),
                fmt_f64(*rhs)
            )
            .unwrap();
        }
        let scale = (run.p as f64).powf(2.0 / (n as f64 - 1.0));
        writeln!(
            summary,
            "{n},{},{},{}",
            run.p,
            run.mixing_time,
            fmt_f64(run.mixing_time as f64 / scale)
        )
        .unwrap();
    }
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text("mixing.csv", curve);
    sink.add_text("mixing_times.csv", summary);
    if cfg.plot_script {
        sink.add_text(
            "mixing.gp",
            plot_script("mixing.csv", "N", "tvd", "3:4", false),
        );
    }
    sink.finish(cfg)?;
    Ok(())
}

/// `charfun-decay`: exact corner characteristic function magnitudes at
/// frequencies `k/p` for two step counts, plus the fitted decay exponent.
/// CSV: `n,N,xi,abs_zhat`.
pub fn run_charfun_decay(cfg: &RunConfig) -> Result<(), CliError> {
    let n = need(&cfg.dim, "--n")?;
    let p = need(&cfg.p, "--p")?;
    let ks = need(&cfg.k_list, "--k-list")?;
    let n1 = need(&cfg.n1, "--n1")?;
    let n2 = need(&cfg.n2, "--n2")?;
    if ks.is_empty() {
        return Err(CliError::Usage("k list is empty".into()));
    }
    if n1 >= n2 {
        return Err(CliError::Usage("need n1 < n2".into()));
    }
    let mu = StepMeasureZn::default_lazy(n)?;
    let mut csv = String::from("n,N,xi,abs_zhat\n");
    let mut full = String::from("n,N,xi,re,im,abs\n");
    for &steps in &[n1, n2] {
        let marg = corner_marginal_rowwalk(&mu, n, p, steps)?;
        for &k in &ks {
            let z = charfun_from_marginal(&marg, k);
            writeln!(
                csv,
                "{n},{steps},{},{}",
                fmt_f64(k as f64 / p as f64),
                fmt_f64(z.norm())
            )
            .unwrap();
            writeln!(
                full,
                "{n},{steps},{},{},{},{}",
                fmt_f64(k as f64 / p as f64),
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(z.norm())
            )
            .unwrap();
        }
    }
    let slope = decay_exponent_fit(n, p, n1, n2, &ks)?;
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text("charfun_decay.csv", csv);
    sink.add_text("charfun_decay_full.csv", full);
    sink.add_extra("fitted_exponent", serde_json::json!(slope));
    sink.add_extra(
        "expected_exponent",
        serde_json::json!(2.0 / (n as f64 - 1.0)),
    );
    if cfg.plot_script {
        sink.add_text(
            "charfun_decay.gp",
            plot_script("charfun_decay.csv", "xi", "|Z_hat|", "3:4", true),
        );
    }
    sink.finish(cfg)?;
    Ok(())
}

/// `rearrange-check`: random pair-swap and factorization instances. CSV:
/// `case_id,lhs,rhs,diff`.
pub fn run_rearrange_check(cfg: &RunConfig) -> Result<(), CliError> {
    let cases = cfg.cases.unwrap_or(200);
    if cases == 0 {
        return Err(CliError::Usage("cases must be positive".into()));
    }
    let mut csv = String::from("case_id,lhs,rhs,diff\n");
    let mut state = cfg.seed.wrapping_mul(2654435761).wrapping_add(12345);
    let mut rnd = move |m: i64| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as i64).rem_euclid(2 * m + 1) - m
    };
    for case in 0..cases {
        // alternate pair-swap and F_k factorization checks
        if case % 2 == 0 {
            let k = 1 + (case as usize / 2) % 3;
            let len = 2 * k * (1 + case as usize % 5);
            let word: Vec<[i64; 2]> = (0..len).map(|_| [rnd(5), rnd(5)]).collect();
            let xi = 0.21 + 0.003 * case as f64 / cases as f64;
            let (lhs, rhs) = pair_swap_identity(xi, &word, k)
                .map_err(|e| CliError::Other(e.to_string()))?;
            writeln!(
                csv,
                "pairswap-{case:04},{},{},{}",
                fmt_f64(lhs),
                fmt_f64(rhs),
                fmt_f64(lhs - rhs)
            )
            .unwrap();
        } else {
            let n = 3 + case as usize % 3;
            let k = 1 + case as usize % 2;
            let n_factors = 1 + case as usize % 2;
            let len = k * (1usize << (n - 2)) * n_factors;
            let word: Vec<Vec<i64>> =
                (0..len).map(|_| (0..n - 1).map(|_| rnd(2)).collect()).collect();
            let xi = 0.07 + 0.002 * (case as f64);
            let fe = f_k(xi, &word, n, k, FkMode::Enumerate)
                .map_err(|e| CliError::Other(e.to_string()))?;
            let ff = f_k(xi, &word, n, k, FkMode::Factored)
                .map_err(|e| CliError::Other(e.to_string()))?;
            writeln!(
                csv,
                "fk-{case:04}-n{n},{},{},{}",
                fmt_f64(fe),
                fmt_f64(ff),
                fmt_f64(fe - ff)
            )
            .unwrap();
        }
    }
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text("rearrange_check.csv", csv);
    sink.finish(cfg)?;
    Ok(())
}

/// `spectrum`: grid magnitudes of `mu_hat` plus refined local maxima.
/// CSV: `alpha1,alpha2,abs_mu_hat,is_max`.
pub fn run_spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let window = cfg.window.unwrap_or([-1.5, -1.5, 1.5, 1.5]);
    let theta = cfg.theta.unwrap_or(0.3);
    let step = cfg.step.unwrap_or(0.005);
    let measure = match &cfg.atoms {
        Some(spec) => {
            let atoms =
                crate::config::parse_atoms(spec).map_err(CliError::Usage)?;
            PlaneMeasure::new(atoms).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => PlaneMeasure::mu0_ab(),
    };
    let win = [[window[0], window[1]], [window[2], window[3]]];
    let report = find_local_maxima(&measure, win, theta, step)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    // the CSV grid reuses a coarser step to keep artifacts small
    let grid_step = (step * 10.0).min((window[2] - window[0]) / 50.0);
    write_spectrum_csv(&measure, &report, grid_step, &mut buf)?;
    let mut sink = ArtifactSink::new(Path::new(&cfg.out))?;
    sink.add_text(
        "spectrum.csv",
        String::from_utf8(buf).expect("csv is utf-8"),
    );
    sink.add_extra("maxima_count", serde_json::json!(report.maxima.len()));
    sink.finish(cfg)?;
    Ok(())
}

pub fn dispatch(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command.as_str() {
        "return-prob" => run_return_prob(cfg),
        "llt-compare" => run_llt_compare(cfg),
        "charfun" => run_charfun(cfg),
        "greek" => run_greek(cfg),
        "mixing" => run_mixing(cfg),
        "charfun-decay" => run_charfun_decay(cfg),
        "rearrange-check" => run_rearrange_check(cfg),
        "spectrum" => run_spectrum(cfg),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}
