//! Characteristic functions of finitely supported planar measures: the
//! large spectrum `Spec_theta`, local maxima of `|mu_hat|`, symmetrization,
//! and the Gaussian Taylor residual near a maximum.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid search parameters: {0}")]
    InvalidSearch(String),
}

/// Finitely supported probability measure on `R^2`.
#[derive(Debug, Clone)]
pub struct PlaneMeasure {
    atoms: Vec<([f64; 2], f64)>,
    mean: [f64; 2],
}

impl PlaneMeasure {
    pub fn new(atoms: Vec<([f64; 2], f64)>) -> Result<Self, SpectrumError> {
        if atoms.is_empty() {
            return Err(SpectrumError::InvalidMeasure("no atoms".into()));
        }
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(SpectrumError::InvalidMeasure(format!(
                "total mass {mass} differs from 1"
            )));
        }
        if atoms.iter().any(|a| !(a.1 > 0.0)) {
            return Err(SpectrumError::InvalidMeasure("non-positive atom mass".into()));
        }
        let mean = atoms
            .iter()
            .fold([0.0, 0.0], |m, (x, p)| [m[0] + p * x[0], m[1] + p * x[1]]);
        Ok(Self { atoms, mean })
    }

    /// Abelianization of the five-atom Heisenberg step measure: mass 1/5 at
    /// the origin and at `(±1, 0)`, `(0, ±1)`.
    pub fn mu0_ab() -> Self {
        Self::new(vec![
            ([0.0, 0.0], 0.2),
            ([1.0, 0.0], 0.2),
            ([-1.0, 0.0], 0.2),
            ([0.0, 1.0], 0.2),
            ([0.0, -1.0], 0.2),
        ])
        .unwrap()
    }

    pub fn atoms(&self) -> &[([f64; 2], f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean[0].abs() <= 1e-12 && self.mean[1].abs() <= 1e-12
    }

    /// Covariance about the mean, row-major 2x2.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let mut s = [[0.0f64; 2]; 2];
        for (x, p) in &self.atoms {
            let d = [x[0] - self.mean[0], x[1] - self.mean[1]];
            s[0][0] += p * d[0] * d[0];
            s[0][1] += p * d[0] * d[1];
            s[1][1] += p * d[1] * d[1];
        }
        s[1][0] = s[0][1];
        s
    }

    /// Do all atoms lie on the integer lattice?
    pub fn is_integer_supported(&self) -> bool {
        self.atoms
            .iter()
            .all(|(x, _)| x[0].fract() == 0.0 && x[1].fract() == 0.0)
    }
}

/// `mu_hat(alpha) = sum_k p_k e^{-2 pi i alpha·x_k}`.
pub fn mu_hat(m: &PlaneMeasure, alpha: [f64; 2]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, p) in &m.atoms {
        let theta = -2.0 * std::f64::consts::PI * (alpha[0] * x[0] + alpha[1] * x[1]);
        acc += Complex64::new(p * theta.cos(), p * theta.sin());
    }
    acc
}

/// Symmetrization `mu_2 = mu * mu_check`: atoms `x_i - x_j` with mass
/// `p_i p_j`, duplicates merged. Satisfies `mu2_hat = |mu_hat|^2`.
pub fn symmetrize(m: &PlaneMeasure) -> PlaneMeasure {
    let mut merged: Vec<([f64; 2], f64)> = Vec::new();
    for (xi, pi) in &m.atoms {
        for (xj, pj) in &m.atoms {
            let d = [xi[0] - xj[0], xi[1] - xj[1]];
            match merged.iter_mut().find(|(y, _)| y[0] == d[0] && y[1] == d[1]) {
                Some(slot) => slot.1 += pi * pj,
                None => merged.push((d, pi * pj)),
            }
        }
    }
    PlaneMeasure::new(merged).expect("symmetrization preserves unit mass")
}

/// A reported local maximum of `|mu_hat|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumMax {
    pub location: [f64; 2],
    pub value: f64,
}

/// Search report: threshold, window, and the local maxima of `|mu_hat|`
/// exceeding `1 - theta` found in the window.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub theta: f64,
    pub window: [[f64; 2]; 2],
    pub maxima: Vec<SpectrumMax>,
}

/// `mu2_hat` (real) with gradient and Hessian at `alpha`, from the
/// symmetrized atoms; ascent runs on `|mu_hat|^2`, which is smooth.
fn mu2_eval(m2: &PlaneMeasure, alpha: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let tau = 2.0 * std::f64::consts::PI;
    let mut f = 0.0;
    let mut g = [0.0f64; 2];
    let mut h = [[0.0f64; 2]; 2];
    for (x, p) in &m2.atoms {
        let t = tau * (alpha[0] * x[0] + alpha[1] * x[1]);
        let (s, c) = t.sin_cos();
        f += p * c;
        g[0] -= p * tau * x[0] * s;
        g[1] -= p * tau * x[1] * s;
        h[0][0] -= p * tau * tau * x[0] * x[0] * c;
        h[0][1] -= p * tau * tau * x[0] * x[1] * c;
        h[1][1] -= p * tau * tau * x[1] * x[1] * c;
    }
    h[1][0] = h[0][1];
    (f, g, h)
}

/// Scan the window on a coarse grid and refine each candidate local maximum
/// of `|mu_hat|` by Newton ascent on `|mu_hat|^2` to gradient norm 1e-10;
/// results deduplicated within 1e-6 and filtered to `|mu_hat| > 1 - theta`.
pub fn find_local_maxima(
    m: &PlaneMeasure,
    window: [[f64; 2]; 2],
    theta: f64,
    grid_step: f64,
) -> Result<SpectrumReport, SpectrumError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(SpectrumError::InvalidSearch(format!(
            "theta must be in (0,1), got {theta}"
        )));
    }
    if !(grid_step > 0.0) {
        return Err(SpectrumError::InvalidSearch("grid step must be positive".into()));
    }
    // Lipschitz bound of |mu_hat|: 2 pi sum p|x|
    let lip: f64 = m
        .atoms
        .iter()
        .map(|(x, p)| 2.0 * std::f64::consts::PI * p * (x[0] * x[0] + x[1] * x[1]).sqrt())
        .sum();
    if lip * grid_step >= theta / 10.0 {
        return Err(SpectrumError::InvalidSearch(format!(
            "grid step {grid_step} too coarse: |grad|·step = {} >= theta/10",
            lip * grid_step
        )));
    }
    let m2 = symmetrize(m);
    let [lo, hi] = window;
    let nx = ((hi[0] - lo[0]) / grid_step).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / grid_step).ceil() as usize + 1;
    let mut grid = vec![0.0f64; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            let a = [lo[0] + i as f64 * grid_step, lo[1] + j as f64 * grid_step];
            grid[i * ny + j] = mu2_eval(&m2, a).0;
        }
    }
    let mut maxima: Vec<SpectrumMax> = Vec::new();
    let floor = (1.0 - theta) * (1.0 - theta);
    for i in 0..nx {
        for j in 0..ny {
            let v = grid[i * ny + j];
            // margin below the threshold is covered by refinement
            if v < floor - 2.0 * lip * grid_step {
                continue;
            }
            let mut is_grid_max = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii >= 0
                        && jj >= 0
                        && (ii as usize) < nx
                        && (jj as usize) < ny
                        && grid[ii as usize * ny + jj as usize] > v
                    {
                        is_grid_max = false;
                    }
                }
            }
            if !is_grid_max {
                continue;
            }
            // Newton ascent on mu2_hat
            let mut a = [lo[0] + i as f64 * grid_step, lo[1] + j as f64 * grid_step];
            let mut converged = false;
            for _ in 0..100 {
                let (_, g, h) = mu2_eval(&m2, a);
                let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if gn <= 1e-10 {
                    converged = true;
                    break;
                }
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                let step = if det.abs() > 1e-14 && h[0][0] < 0.0 {
                    [
                        -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                        -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
                    ]
                } else {
                    [g[0] * grid_step / gn.max(1e-30), g[1] * grid_step / gn.max(1e-30)]
                };
                let sn = (step[0] * step[0] + step[1] * step[1]).sqrt();
                let sc = if sn > grid_step { grid_step / sn } else { 1.0 };
                a = [a[0] + sc * step[0], a[1] + sc * step[1]];
            }
            if !converged {
                continue;
            }
            // refinement may slide to a maximum outside the search box
            if a[0] < lo[0] - 1e-9
                || a[0] > hi[0] + 1e-9
                || a[1] < lo[1] - 1e-9
                || a[1] > hi[1] + 1e-9
            {
                continue;
            }
            let val = mu_hat(m, a).norm();
            if val <= 1.0 - theta {
                continue;
            }
            // strict local maximum on the refinement grid
            let eps = 1e-5;
            let strict = [[eps, 0.0], [-eps, 0.0], [0.0, eps], [0.0, -eps]]
                .iter()
                .all(|d| mu_hat(m, [a[0] + d[0], a[1] + d[1]]).norm() < val);
            if !strict {
                continue;
            }
            let dup = maxima.iter().any(|q| {
                let dx = q.location[0] - a[0];
                let dy = q.location[1] - a[1];
                (dx * dx + dy * dy).sqrt() < 1e-6
            });
            if !dup {
                maxima.push(SpectrumMax { location: a, value: val });
            }
        }
    }
    maxima.sort_by(|a, b| {
        a.location[0]
            .total_cmp(&b.location[0])
            .then(a.location[1].total_cmp(&b.location[1]))
    });
    Ok(SpectrumReport { theta, window, maxima })
}

/// `|mu_hat(alpha0 + alpha) - mu_hat(alpha0)·exp(-2 pi^2 alpha^t sigma^2 alpha)|`
/// with `sigma^2` the covariance of `mu`: the residual of the Gaussian
/// approximation near a spectrum maximum.
pub fn taylor_residual(m: &PlaneMeasure, alpha0: [f64; 2], alpha: [f64; 2]) -> f64 {
    let s = m.covariance();
    let q = alpha[0] * (s[0][0] * alpha[0] + s[0][1] * alpha[1])
        + alpha[1] * (s[1][0] * alpha[0] + s[1][1] * alpha[1]);
    let gauss = (-2.0 * std::f64::consts::PI * std::f64::consts::PI * q).exp();
    let predicted = mu_hat(m, alpha0) * gauss;
    let actual = mu_hat(m, [alpha0[0] + alpha[0], alpha0[1] + alpha[1]]);
    (actual - predicted).norm()
}

/// CSV rows `alpha1,alpha2,abs_mu_hat,is_max` for a grid sweep plus the
/// refined maxima of a report.
pub fn write_spectrum_csv<W: std::io::Write>(
    m: &PlaneMeasure,
    report: &SpectrumReport,
    grid_step: f64,
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "alpha1,alpha2,abs_mu_hat,is_max")?;
    let [lo, hi] = report.window;
    let nx = ((hi[0] - lo[0]) / grid_step).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / grid_step).ceil() as usize + 1;
    for i in 0..nx {
        for j in 0..ny {
            let a = [lo[0] + i as f64 * grid_step, lo[1] + j as f64 * grid_step];
            writeln!(w, "{:.16e},{:.16e},{:.16e},0", a[0], a[1], mu_hat(m, a).norm())?;
        }
    }
    for mx in &report.maxima {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},1",
            mx.location[0], mx.location[1], mx.value
        )?;
    }
    Ok(())
}
