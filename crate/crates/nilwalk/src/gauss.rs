//! The modified characteristic function `I(alpha, xi; N)` of the Gaussian
//! Heisenberg walk and its `N -> infinity` limit.
//!
//! `I(alpha, xi; N)` is the expectation of
//! `e_{-alpha}(x̄/sqrt(N)) · e_{-xi}(H*(x)/N)` over a word of `N` i.i.d.
//! standard 2D normals. Three independent evaluation routes are provided:
//!
//! * [`i_finite`] — O(N) scalar recurrences (epsilon/pi/delta sequences plus a
//!   rank-two spectral correction);
//! * [`i_finite_dense`] — explicit `N x N` symmetric factorization, the
//!   linear-algebra oracle for the recurrence route;
//! * [`i_monte_carlo`] — direct sampling, reproducible for any thread count.
//!
//! [`gaussian_density`] inverts the limit `I(alpha, xi)` into the density of
//! the limiting Gaussian measure in the coordinates `(u, z̃)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng::{shard_rng, shards};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussError {
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    #[error("quadrature failed to converge: requested {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Frequency point `(alpha, xi)`: abelian 2-vector frequency and central
/// scalar frequency. The finite-N rate is meaningful for
/// `(1 + |alpha|^2)(1 + xi^2) < N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPoint {
    pub alpha: [f64; 2],
    pub xi: f64,
}

impl FreqPoint {
    pub fn new(alpha: [f64; 2], xi: f64) -> Self {
        Self { alpha, xi }
    }

    pub fn alpha_norm2(&self) -> f64 {
        self.alpha[0] * self.alpha[0] + self.alpha[1] * self.alpha[1]
    }
}

/// `xi · coth(pi·xi)` with the removable singularity at 0.
///
/// Value `1/pi` at 0; even; relative error well under 1e-12 everywhere.
pub fn xi_coth(xi: f64) -> f64 {
    let u = std::f64::consts::PI * xi;
    if u.abs() < 1e-3 {
        // u·coth(u) = 1 + u²/3 − u⁴/45 + 2u⁶/945 − ...
        let u2 = u * u;
        (1.0 + u2 / 3.0 - u2 * u2 / 45.0 + 2.0 * u2 * u2 * u2 / 945.0) / std::f64::consts::PI
    } else {
        xi / u.tanh()
    }
}

/// Limit characteristic function
/// `I(alpha, xi) = exp(-2·pi·|alpha|^2 / (xi coth pi xi)) / cosh(pi xi)`.
pub fn i_closed(p: FreqPoint) -> f64 {
    let g = xi_coth(p.xi);
    (-2.0 * std::f64::consts::PI * p.alpha_norm2() / g).exp()
        / (std::f64::consts::PI * p.xi).cosh()
}

/// State of the scalar recurrences at index `n`:
/// `eps_1 = 2, eps_{i+1} = 2 - zeta^2/eps_i`; `pi_n = prod eps_i` (carried in
/// log scale); `delta_1 = 1, delta_{i+1} = 1 + zeta·delta_i/eps_i`;
/// `zeta = (1 - xi0^2)/(1 + xi0^2)` with `xi0 = pi·xi/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreekState {
    pub n: u64,
    pub epsilon: f64,
    pub log_pi: f64,
    pub delta: f64,
    pub zeta: f64,
}

fn zeta_of(xi0: f64) -> f64 {
    (1.0 - xi0 * xi0) / (1.0 + xi0 * xi0)
}

/// Forward recurrence to index `n = N`, for `xi0 = pi·xi/N`.
///
/// Iterates the shifted variable `e_n = eps_n - 1`, which satisfies
/// `e_{n+1} = (e_n + u)/(1 + e_n)` with `u = 1 - zeta^2 = 4 xi0^2/(1+xi0^2)^2`
/// computed directly; this avoids the `2 - zeta^2/eps` cancellation whose
/// sensitivity to the rounding of `zeta` is of order `N/xi`.
pub fn greek_recurrence(xi: f64, n: u64) -> Result<GreekState, GaussError> {
    if n == 0 {
        return Err(GaussError::InvalidInput("n must be >= 1".into()));
    }
    let (state, _) = greek_sweep(xi, n);
    Ok(state)
}

/// Closed forms for the recurrence state, evaluated in cancellation-free form:
/// with `a = atanh(xi0)`,
/// `eps_n = 1 + (2 xi0/(1+xi0^2)) coth(2 n a)`,
/// `delta_n = tanh(n a)/(2 xi0) + 1/2`,
/// `log pi_n = (2n+2) ln(1+xi0) - n ln(1+xi0^2) - ln(4 xi0) + ln(1 - e^{-(4n+4) a})`.
/// The `xi0 -> 0` limits are `(n+1)/n`, `(n+1)/2`, `ln(n+1)`.
pub fn greek_closed(xi: f64, n: u64) -> Result<GreekState, GaussError> {
    if n == 0 {
        return Err(GaussError::InvalidInput("n must be >= 1".into()));
    }
    let nf = n as f64;
    let xi0 = (std::f64::consts::PI * xi / nf).abs();
    if xi0 >= 1.0 {
        return Err(GaussError::NumericDomain(format!(
            "closed forms need |pi*xi/N| < 1, got {xi0}"
        )));
    }
    let zeta = zeta_of(xi0);
    if xi0 == 0.0 {
        return Ok(GreekState {
            n,
            epsilon: (nf + 1.0) / nf,
            log_pi: (nf + 1.0).ln(),
            delta: (nf + 1.0) / 2.0,
            zeta,
        });
    }
    let a = xi0.atanh();
    let epsilon = 1.0 + (2.0 * xi0 / (1.0 + xi0 * xi0)) / (2.0 * nf * a).tanh();
    let delta = (nf * a).tanh() / (2.0 * xi0) + 0.5;
    let log_pi = (2.0 * nf + 2.0) * xi0.ln_1p() - nf * (xi0 * xi0).ln_1p() - (4.0 * xi0).ln()
        + (-(-(4.0 * nf + 4.0) * a).exp_m1()).ln();
    Ok(GreekState { n, epsilon, log_pi, delta, zeta })
}

/// Rank-two spectral data of the `I_N + P` block: eigenvalues `lambda_±` and
/// squared projections `<v_±, e_1>^2` of the phase direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTwoSpectrum {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub proj_plus: f64,
    pub proj_minus: f64,
}

/// Internal: recurrence sweep returning the state at `N` plus the partial sum
/// `sum_{j=1}^{N-1} delta_j^2 / eps_j`.
fn greek_sweep(xi: f64, n: u64) -> (GreekState, f64) {
    let xi0 = std::f64::consts::PI * xi / n as f64;
    let q = 1.0 + xi0 * xi0;
    let u = 4.0 * xi0 * xi0 / (q * q); // 1 - zeta^2, cancellation-free
    let zeta = zeta_of(xi0);
    let mut e = 1.0f64; // eps_1 - 1
    let mut log_pi = e.ln_1p();
    let mut delta = 1.0f64;
    let mut partial = 0.0f64;
    for _ in 1..n {
        let eps = 1.0 + e;
        partial += delta * delta / eps;
        delta = 1.0 + zeta * delta / eps;
        e = (e + u) / eps;
        log_pi += e.ln_1p();
    }
    (GreekState { n, epsilon: 1.0 + e, log_pi, delta, zeta }, partial)
}

/// Pieces of the rank-two perturbation determinant, exposed for the spectrum
/// invariants: `(det(I+P), trace term 2 + P_11, P_11)`.
fn rank_two_terms(state: &GreekState, partial: f64, n: u64, xi0: f64) -> (f64, f64) {
    let nf = n as f64;
    let q = 1.0 + xi0 * xi0;
    // P_11 = (-4 xi0^2 delta_N + (N+1) xi0^2 - 1) / (eps_N (1+xi0^2))
    let p11 = ((nf + 1.0) * xi0 * xi0 - 4.0 * xi0 * xi0 * state.delta - 1.0)
        / (state.epsilon * q);
    // sum of squared off-diagonal entries of the first row of P
    let off2 = 4.0 * xi0.powi(4) / (q * q * state.epsilon) * partial;
    let det = 1.0 + p11 - off2;
    (det, p11)
}

/// Spectral decomposition of the rank-two block for `I(alpha, xi; N)`.
pub fn rank_two_spectrum(xi: f64, n: u64) -> Result<RankTwoSpectrum, GaussError> {
    let (state, partial, xi0) = checked_sweep(xi, n)?;
    let (det, p11) = rank_two_terms(&state, partial, n, xi0);
    spectrum_from(det, p11)
}

fn spectrum_from(det: f64, p11: f64) -> Result<RankTwoSpectrum, GaussError> {
    let trace = 2.0 + p11;
    let disc = trace * trace - 4.0 * det;
    if disc < 0.0 {
        return Err(GaussError::NumericDomain(format!(
            "complex rank-two eigenvalues (disc = {disc:e})"
        )));
    }
    let root = disc.sqrt();
    let lambda_plus = 0.5 * (trace + root);
    let lambda_minus = if lambda_plus != 0.0 { det / lambda_plus } else { 0.5 * (trace - root) };
    if lambda_minus <= 0.0 {
        return Err(GaussError::NumericDomain(format!(
            "degenerate lambda_minus = {lambda_minus:e}"
        )));
    }
    // <v+,e1>^2 + <v-,e1>^2 = 1 and lambda+ <v+,e1>^2 + lambda- <v-,e1>^2 = 1 + P_11
    let (proj_plus, proj_minus) = if lambda_plus == lambda_minus {
        (0.5, 0.5)
    } else {
        let pp = (1.0 + p11 - lambda_minus) / (lambda_plus - lambda_minus);
        (pp.clamp(0.0, 1.0), (1.0 - pp).clamp(0.0, 1.0))
    };
    Ok(RankTwoSpectrum { lambda_plus, lambda_minus, proj_plus, proj_minus })
}

fn checked_sweep(xi: f64, n: u64) -> Result<(GreekState, f64, f64), GaussError> {
    if n == 0 {
        return Err(GaussError::InvalidInput("N must be >= 1".into()));
    }
    if !xi.is_finite() {
        return Err(GaussError::InvalidInput("xi must be finite".into()));
    }
    let xi0 = std::f64::consts::PI * xi / n as f64;
    let (state, partial) = greek_sweep(xi, n);
    Ok((state, partial, xi0))
}

/// `I(alpha, xi; N)` by the O(N) recurrence route.
///
/// `1/sqrt(det) = exp(-(N ln(1+xi0^2) + log pi_N + ln(lambda_+ lambda_-))/2)`
/// times the phase damping
/// `exp(-2 pi^2 |alpha|^2 / (N eps_N (1+xi0^2)) · (proj_+/lambda_+ + proj_-/lambda_-))`.
pub fn i_finite(p: FreqPoint, n: u64) -> Result<f64, GaussError> {
    let (state, partial, xi0) = checked_sweep(p.xi, n)?;
    let (det, p11) = rank_two_terms(&state, partial, n, xi0);
    let spec = spectrum_from(det, p11)?;
    let q = 1.0 + xi0 * xi0;
    let log_i0 = -0.5 * (n as f64 * q.ln() + state.log_pi + det.ln());
    let inv_quad = spec.proj_plus / spec.lambda_plus + spec.proj_minus / spec.lambda_minus;
    let damp = -2.0 * std::f64::consts::PI * std::f64::consts::PI * p.alpha_norm2()
        / (n as f64 * state.epsilon * q)
        * inv_quad;
    Ok((log_i0 + damp).exp())
}

/// `I(alpha, xi; N)` by the dense linear-algebra oracle.
///
/// Builds `M = (1 - xi0^2) I_N + xi0^2 H` with `H_ij = N - 2|i-j|`, takes a
/// Cholesky factorization for the determinant, and for `alpha != 0` solves
/// `M u = 1` for the exact Gaussian phase damping
/// `exp(-2 pi^2 |alpha|^2 (1^t M^{-1} 1)/N)`.
pub fn i_finite_dense(p: FreqPoint, n: u64) -> Result<f64, GaussError> {
    if n == 0 {
        return Err(GaussError::InvalidInput("N must be >= 1".into()));
    }
    if n > 4096 {
        return Err(GaussError::InvalidInput(format!(
            "dense oracle budget is N <= 4096, got {n}"
        )));
    }
    let nf = n as f64;
    let xi0 = std::f64::consts::PI * p.xi / nf;
    let nu = n as usize;
    let x2 = xi0 * xi0;
    let m = DMatrix::from_fn(nu, nu, |i, j| {
        let h = nf - 2.0 * (i as f64 - j as f64).abs();
        if i == j {
            1.0 - x2 + x2 * h
        } else {
            x2 * h
        }
    });
    let chol = nalgebra::linalg::Cholesky::new(m)
        .ok_or_else(|| GaussError::NumericDomain("matrix not positive definite".into()))?;
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut damp = 0.0;
    let a2 = p.alpha_norm2();
    if a2 > 0.0 {
        let ones = nalgebra::DVector::from_element(nu, 1.0);
        let u = chol.solve(&ones);
        let s: f64 = u.iter().sum();
        damp = -2.0 * std::f64::consts::PI * std::f64::consts::PI * a2 * s / nf;
    }
    Ok((-0.5 * log_det + damp).exp())
}

/// Monte Carlo estimate of `I(alpha, xi; N)` with per-component standard
/// errors. Identical output for any thread count (fixed shard partition).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: Complex64,
    pub std_err_re: f64,
    pub std_err_im: f64,
    pub samples: u64,
}

pub fn i_monte_carlo(p: FreqPoint, n: u64, samples: u64, seed: u64) -> Result<McEstimate, GaussError> {
    if samples < 1000 {
        return Err(GaussError::InvalidInput(
            "Monte Carlo needs at least 1e3 samples".into(),
        ));
    }
    if n == 0 {
        return Err(GaussError::InvalidInput("N must be >= 1".into()));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let inv_n = 1.0 / n as f64;
    let shard_list = shards(samples);
    // (sum_re, sum_im, sum_re^2, sum_im^2) per shard, reduced in shard order.
    let partials: Vec<[f64; 4]> = shard_list
        .par_iter()
        .enumerate()
        .map(|(si, &(_start, len))| {
            let mut rng = shard_rng(seed, si as u64);
            let mut acc = [0.0f64; 4];
            for _ in 0..len {
                let mut px = 0.0f64;
                let mut py = 0.0f64;
                let mut hs = 0.0f64;
                for _ in 0..n {
                    let x: f64 = rng.sample(StandardNormal);
                    let y: f64 = rng.sample(StandardNormal);
                    hs += px * y - py * x;
                    px += x;
                    py += y;
                }
                let theta = tau
                    * (p.alpha[0] * px * inv_sqrt_n
                        + p.alpha[1] * py * inv_sqrt_n
                        + p.xi * 0.5 * hs * inv_n);
                let (s, c) = theta.sin_cos();
                acc[0] += c;
                acc[1] -= s;
                acc[2] += c * c;
                acc[3] += s * s;
            }
            acc
        })
        .collect();
    let mut tot = [0.0f64; 4];
    for sh in &partials {
        for k in 0..4 {
            tot[k] += sh[k];
        }
    }
    let m = samples as f64;
    let mean_re = tot[0] / m;
    let mean_im = tot[1] / m;
    let var_re = (tot[2] / m - mean_re * mean_re).max(0.0);
    let var_im = (tot[3] / m - mean_im * mean_im).max(0.0);
    Ok(McEstimate {
        value: Complex64::new(mean_re, mean_im),
        std_err_re: (var_re / m).sqrt(),
        std_err_im: (var_im / m).sqrt(),
        samples,
    })
}

/// Covariance rescaling: for a centered Gaussian step with covariance
/// square root `sigma` (symmetric positive definite) and `delta = det(sigma)`,
/// the modified characteristic function equals `I(sigma·alpha, delta·xi; N)`.
pub fn i_rescaled(p: FreqPoint, n: u64, sigma: [[f64; 2]; 2]) -> Result<f64, GaussError> {
    let delta = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
    if !(delta > 0.0) {
        return Err(GaussError::NumericDomain(format!(
            "sigma must be nonsingular positive definite (det = {delta})"
        )));
    }
    let sa = [
        sigma[0][0] * p.alpha[0] + sigma[0][1] * p.alpha[1],
        sigma[1][0] * p.alpha[0] + sigma[1][1] * p.alpha[1],
    ];
    i_finite(FreqPoint::new(sa, delta * p.xi), n)
}

/// Adaptive Simpson quadrature with absolute tolerance.
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, GaussError> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, GaussError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        if depth == 0 {
            return Err(GaussError::Quadrature { requested: tol, achieved: err.abs() / 15.0 });
        }
        let l = rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Tail truncation for the `xi` integral; the integrand decays like
/// `xi·e^{-pi·xi}`, so the tail beyond 40 is below `e^{-40 pi}`.
const XI_CUTOFF: f64 = 40.0;

/// Density of the limiting Gaussian measure in the coordinates `(u, z̃)`:
/// `rho(u, z̃) = ∫ g(xi)/(2 cosh pi xi) · exp(-pi g(xi) |u|^2 / 2) · cos(2 pi xi z̃) dxi`
/// with `g = xi_coth`. Absolute quadrature error at most 1e-8.
pub fn gaussian_density(u: [f64; 2], zt: f64) -> Result<f64, GaussError> {
    let u2 = u[0] * u[0] + u[1] * u[1];
    let integrand = move |xi: f64| {
        let g = xi_coth(xi);
        let ch = (std::f64::consts::PI * xi).cosh();
        g / (2.0 * ch)
            * (-0.5 * std::f64::consts::PI * g * u2).exp()
            * (2.0 * std::f64::consts::PI * xi * zt).cos()
    };
    // even integrand: integrate [0, cutoff] and double
    let half = adaptive_simpson(&integrand, 0.0, XI_CUTOFF, 5e-10)?;
    Ok(2.0 * half)
}
