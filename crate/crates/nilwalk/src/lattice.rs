//! Exact distributions of lattice walks on `H(Z)` by dense dynamic
//! programming, Monte Carlo walkers, and the local-limit prediction.
//!
//! The walk state is stored in centered coordinates `(x, y, t)` with
//! `t = 2·z̃ = 2z - xy`, which stays integral on lattice words and is the
//! natural variable of the limit density. Right multiplication by an atom
//! `(a, b, c)` updates `t' = t + (2c - ab) + x·b - y·a`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::gauss::{gaussian_density, GaussError};
use crate::heis::{HeisError, HeisZ};
use crate::rng::{shard_rng, shards};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error(
        "memory budget exceeded: step {step} needs {needed} bytes (budget {budget})"
    )]
    MemoryBudget { step: u32, needed: u64, budget: u64 },
    #[error("coordinate overflow in walk arithmetic")]
    Overflow(#[from] HeisError),
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error("singular covariance: {0}")]
    SingularCovariance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Finitely supported probability measure on `H(Z)`.
#[derive(Debug, Clone)]
pub struct FiniteMeasure {
    atoms: Vec<(HeisZ, f64)>,
}

impl FiniteMeasure {
    /// Validates positivity, unit mass (to 1e-12) and distinct atoms.
    pub fn new(atoms: Vec<(HeisZ, f64)>) -> Result<Self, LatticeError> {
        if atoms.is_empty() {
            return Err(LatticeError::InvalidMeasure("no atoms".into()));
        }
        let mut mass = 0.0;
        for (g, p) in &atoms {
            if !(*p > 0.0) {
                return Err(LatticeError::InvalidMeasure(format!(
                    "atom {g:?} has non-positive mass {p}"
                )));
            }
            mass += p;
        }
        if (mass - 1.0).abs() > 1e-12 {
            return Err(LatticeError::InvalidMeasure(format!(
                "total mass {mass} differs from 1 by more than 1e-12"
            )));
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if atoms[i].0 == atoms[j].0 {
                    return Err(LatticeError::InvalidMeasure(format!(
                        "duplicate atom {:?}",
                        atoms[i].0
                    )));
                }
            }
        }
        Ok(Self { atoms })
    }

    /// The five-atom step measure: identity, `[±1,0,0]`, `[0,±1,0]`, each
    /// with mass 1/5. The identity is listed last so that the balanced
    /// accumulation tree in the convolution makes the two lattice symmetries
    /// bitwise exact.
    pub fn mu0() -> Self {
        let fifth = 0.2;
        Self {
            atoms: vec![
                (HeisZ::new(1, 0, 0), fifth),
                (HeisZ::new(-1, 0, 0), fifth),
                (HeisZ::new(0, 1, 0), fifth),
                (HeisZ::new(0, -1, 0), fifth),
                (HeisZ::identity(), fifth),
            ],
        }
    }

    pub fn atoms(&self) -> &[(HeisZ, f64)] {
        &self.atoms
    }

    /// Abelianized moment data: covariance of `(x, y)`, its square-root
    /// determinant, and the mean of `z̃` per step.
    pub fn params(&self) -> Result<MuParams, LatticeError> {
        let mut mean = [0.0f64; 2];
        let mut zt = 0.0f64;
        for (g, p) in &self.atoms {
            mean[0] += p * g.x as f64;
            mean[1] += p * g.y as f64;
            zt += p * (g.z as f64 - 0.5 * (g.x as f64) * (g.y as f64));
        }
        let mut s = [[0.0f64; 2]; 2];
        for (g, p) in &self.atoms {
            let dx = g.x as f64 - mean[0];
            let dy = g.y as f64 - mean[1];
            s[0][0] += p * dx * dx;
            s[0][1] += p * dx * dy;
            s[1][1] += p * dy * dy;
        }
        s[1][0] = s[0][1];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if det < 0.0 {
            return Err(LatticeError::SingularCovariance(format!("det = {det}")));
        }
        Ok(MuParams { sigma2: s, delta: det.sqrt(), zbar_tilde: zt })
    }
}

/// Moment parameters of a step measure: abelianized covariance `sigma^2`,
/// `delta = det(sigma)`, and the per-step mean of `z̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuParams {
    pub sigma2: [[f64; 2]; 2],
    pub delta: f64,
    pub zbar_tilde: f64,
}

impl MuParams {
    /// Symmetric positive square root of `sigma2` (2x2 eigendecomposition).
    pub fn sigma(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, d]] = self.sigma2;
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        if b.abs() < 1e-300 {
            return [[a.max(0.0).sqrt(), 0.0], [0.0, d.max(0.0).sqrt()]];
        }
        // eigenvectors (b, l - a), normalized
        let mut m = [[0.0f64; 2]; 2];
        for (l, sl) in [(l1, l1.max(0.0).sqrt()), (l2, l2.max(0.0).sqrt())] {
            let v = [b, l - a];
            let n2 = v[0] * v[0] + v[1] * v[1];
            m[0][0] += sl * v[0] * v[0] / n2;
            m[0][1] += sl * v[0] * v[1] / n2;
            m[1][1] += sl * v[1] * v[1] / n2;
        }
        m[1][0] = m[0][1];
        m
    }

    /// Inverse of the square root; error when singular.
    pub fn sigma_inv(&self) -> Result<[[f64; 2]; 2], LatticeError> {
        let s = self.sigma();
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if det.abs() < 1e-300 {
            return Err(LatticeError::SingularCovariance(
                "sigma has vanishing determinant".into(),
            ));
        }
        Ok([
            [s[1][1] / det, -s[0][1] / det],
            [-s[1][0] / det, s[0][0] / det],
        ])
    }
}

/// Dense probability table of a lattice walk over the box
/// `x in [x_lo, x_hi], y in [y_lo, y_hi], t = 2z̃ in [t_lo, t_hi]`
/// (inclusive), stored x-major with `t` contiguous.
#[derive(Debug, Clone)]
pub struct LatticeDistribution {
    pub x_lo: i64,
    pub x_hi: i64,
    pub y_lo: i64,
    pub y_hi: i64,
    pub t_lo: i64,
    pub t_hi: i64,
    values: Vec<f64>,
}

impl LatticeDistribution {
    fn dims(&self) -> (usize, usize, usize) {
        (
            (self.x_hi - self.x_lo + 1) as usize,
            (self.y_hi - self.y_lo + 1) as usize,
            (self.t_hi - self.t_lo + 1) as usize,
        )
    }

    pub fn cells(&self) -> u64 {
        let (nx, ny, nt) = self.dims();
        nx as u64 * ny as u64 * nt as u64
    }

    fn idx(&self, x: i64, y: i64, t: i64) -> usize {
        let (_, ny, nt) = self.dims();
        (((x - self.x_lo) as usize * ny) + (y - self.y_lo) as usize) * nt
            + (t - self.t_lo) as usize
    }

    /// Probability of the group element `[x, y, z]`; zero outside the box.
    pub fn prob(&self, g: &HeisZ) -> f64 {
        let t = 2 * g.z - g.x * g.y;
        self.prob_xyt(g.x as i64, g.y as i64, t as i64)
    }

    /// Probability in the centered coordinates `(x, y, t = 2z̃)`.
    pub fn prob_xyt(&self, x: i64, y: i64, t: i64) -> f64 {
        if x < self.x_lo || x > self.x_hi || y < self.y_lo || y > self.y_hi || t < self.t_lo
            || t > self.t_hi
        {
            return 0.0;
        }
        self.values[self.idx(x, y, t)]
    }

    /// Total mass (fixed summation order).
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Marginal distribution of the abelianization `(x, y)`, x-major.
    pub fn abelian_marginal(&self) -> Vec<f64> {
        let (nx, ny, nt) = self.dims();
        let mut out = vec![0.0; nx * ny];
        for xi in 0..nx {
            for yi in 0..ny {
                let base = (xi * ny + yi) * nt;
                out[xi * ny + yi] = self.values[base..base + nt].iter().sum();
            }
        }
        out
    }

    /// Flat binary snapshot: six signed 64-bit little-endian integers
    /// `(x_lo, x_hi, y_lo, y_hi, t_lo, t_hi)` followed by the probabilities
    /// as little-endian doubles in x-major order.
    pub fn write_binary<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for v in [self.x_lo, self.x_hi, self.y_lo, self.y_hi, self.t_lo, self.t_hi] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a snapshot written by [`write_binary`](Self::write_binary).
    pub fn read_binary<R: std::io::Read>(r: &mut R) -> std::io::Result<Self> {
        let mut buf8 = [0u8; 8];
        let mut hdr = [0i64; 6];
        for h in &mut hdr {
            r.read_exact(&mut buf8)?;
            *h = i64::from_le_bytes(buf8);
        }
        let mut d = LatticeDistribution {
            x_lo: hdr[0],
            x_hi: hdr[1],
            y_lo: hdr[2],
            y_hi: hdr[3],
            t_lo: hdr[4],
            t_hi: hdr[5],
            values: Vec::new(),
        };
        let mut values = vec![0.0f64; d.cells() as usize];
        for v in &mut values {
            r.read_exact(&mut buf8)?;
            *v = f64::from_le_bytes(buf8);
        }
        d.values = values;
        Ok(d)
    }

    /// CSV rows `x,y,t2z,probability` for the nonzero cells (small boxes).
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,t2z,probability")?;
        let (nx, ny, nt) = self.dims();
        for xi in 0..nx {
            for yi in 0..ny {
                for ti in 0..nt {
                    let v = self.values[(xi * ny + yi) * nt + ti];
                    if v != 0.0 {
                        writeln!(
                            w,
                            "{},{},{},{:.16e}",
                            self.x_lo + xi as i64,
                            self.y_lo + yi as i64,
                            self.t_lo + ti as i64,
                            v
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Default memory budget for the convolution tables: 8 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

struct Box3 {
    x: (i64, i64),
    y: (i64, i64),
    t: (i64, i64),
}

impl Box3 {
    fn cells(&self) -> u64 {
        (self.x.1 - self.x.0 + 1) as u64
            * (self.y.1 - self.y.0 + 1) as u64
            * (self.t.1 - self.t.0 + 1) as u64
    }
}

/// Interval-arithmetic support box after one more step of the measure.
fn grow(b: &Box3, atoms: &[(i64, i64, i64)]) -> Box3 {
    let mut nb = Box3 { x: (i64::MAX, i64::MIN), y: (i64::MAX, i64::MIN), t: (i64::MAX, i64::MIN) };
    for &(a, bb, ta) in atoms {
        nb.x.0 = nb.x.0.min(b.x.0 + a);
        nb.x.1 = nb.x.1.max(b.x.1 + a);
        nb.y.0 = nb.y.0.min(b.y.0 + bb);
        nb.y.1 = nb.y.1.max(b.y.1 + bb);
        // t' = t + ta + x·b - y·a over the current box corners
        let xb = [b.x.0 * bb, b.x.1 * bb];
        let ya = [b.y.0 * a, b.y.1 * a];
        let lo = ta + xb[0].min(xb[1]) - ya[0].max(ya[1]);
        let hi = ta + xb[0].max(xb[1]) - ya[0].min(ya[1]);
        nb.t.0 = nb.t.0.min(b.t.0 + lo);
        nb.t.1 = nb.t.1.max(b.t.1 + hi);
    }
    nb
}

/// `N`-fold convolution of the point mass at the identity by `mu`, exact up
/// to double-precision accumulation. Fails before allocating if the step
/// tables would exceed `memory_budget` bytes.
pub fn exact_distribution(
    mu: &FiniteMeasure,
    n: u32,
    memory_budget: u64,
) -> Result<LatticeDistribution, LatticeError> {
    exact_distribution_trace(mu, n, memory_budget, |_, _| {})
}

/// Same as [`exact_distribution`] but invokes `snap` after every convolution
/// step (step 1 ..= N), so N-sweeps run in a single pass.
pub fn exact_distribution_trace<F: FnMut(u32, &LatticeDistribution)>(
    mu: &FiniteMeasure,
    n: u32,
    memory_budget: u64,
    mut snap: F,
) -> Result<LatticeDistribution, LatticeError> {
    let atoms: Vec<(i64, i64, i64, f64)> = mu
        .atoms
        .iter()
        .map(|(g, p)| {
            let t_atom = g.zt2().map(|t| t as i64)?;
            Ok((g.x as i64, g.y as i64, t_atom, *p))
        })
        .collect::<Result<Vec<_>, HeisError>>()?;
    let geom: Vec<(i64, i64, i64)> = atoms.iter().map(|&(a, b, t, _)| (a, b, t)).collect();

    // budget check across all steps before any big allocation
    let mut b = Box3 { x: (0, 0), y: (0, 0), t: (0, 0) };
    let mut prev_cells = b.cells();
    for step in 1..=n {
        let nb = grow(&b, &geom);
        let needed = 8 * (prev_cells + nb.cells());
        if needed > memory_budget {
            return Err(LatticeError::MemoryBudget { step, needed, budget: memory_budget });
        }
        prev_cells = nb.cells();
        b = nb;
    }

    let mut cur = LatticeDistribution {
        x_lo: 0,
        x_hi: 0,
        y_lo: 0,
        y_hi: 0,
        t_lo: 0,
        t_hi: 0,
        values: vec![1.0],
    };
    let mut bx = Box3 { x: (0, 0), y: (0, 0), t: (0, 0) };
    for step in 1..=n {
        bx = grow(&bx, &geom);
        cur = convolve_step(&cur, &atoms, &bx);
        snap(step, &cur);
    }
    Ok(cur)
}

/// One convolution step into the provided output box.
///
/// Each output cell is a balanced pairwise tree over the atom contributions
/// (not a running sum), so measures whose atom list is arranged in
/// inverse-pairs get bitwise-exact lattice symmetries. Parallel over output
/// x-planes; deterministic for any thread count.
fn convolve_step(
    input: &LatticeDistribution,
    atoms: &[(i64, i64, i64, f64)],
    out_box: &Box3,
) -> LatticeDistribution {
    let (_, in_ny, in_nt) = input.dims();
    let out_ny = (out_box.y.1 - out_box.y.0 + 1) as usize;
    let out_nt = (out_box.t.1 - out_box.t.0 + 1) as usize;
    let plane = out_ny * out_nt;
    let nx = (out_box.x.1 - out_box.x.0 + 1) as usize;

    let mut values = vec![0.0f64; nx * plane];
    values
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(xi, out_plane)| {
            let x_out = out_box.x.0 + xi as i64;
            for yi in 0..out_ny {
                let y_out = out_box.y.0 + yi as i64;
                let out_row = &mut out_plane[yi * out_nt..(yi + 1) * out_nt];
                // per-atom (source row, t shift, weight) for this output row
                let row_srcs: Vec<Option<(&[f64], i64, f64)>> = atoms
                    .iter()
                    .map(|&(a, b, ta, p)| {
                        let x_in = x_out - a;
                        let y_in = y_out - b;
                        if x_in < input.x_lo
                            || x_in > input.x_hi
                            || y_in < input.y_lo
                            || y_in > input.y_hi
                        {
                            return None;
                        }
                        let base = ((x_in - input.x_lo) as usize * in_ny
                            + (y_in - input.y_lo) as usize)
                            * in_nt;
                        let shift = ta + x_in * b - y_in * a;
                        Some((&input.values[base..base + in_nt], shift, p))
                    })
                    .collect();
                for (ti, out_v) in out_row.iter_mut().enumerate() {
                    let t_out = out_box.t.0 + ti as i64;
                    *out_v = tree_sum(&row_srcs, t_out, input.t_lo, input.t_hi);
                }
            }
        });

    LatticeDistribution {
        x_lo: out_box.x.0,
        x_hi: out_box.x.1,
        y_lo: out_box.y.0,
        y_hi: out_box.y.1,
        t_lo: out_box.t.0,
        t_hi: out_box.t.1,
        values,
    }
}

/// Balanced pairwise sum of atom contributions at one output cell.
#[inline]
fn tree_sum(srcs: &[Option<(&[f64], i64, f64)>], t_out: i64, t_lo: i64, t_hi: i64) -> f64 {
    #[inline]
    fn term(s: &Option<(&[f64], i64, f64)>, t_out: i64, t_lo: i64, t_hi: i64) -> f64 {
        match s {
            Some((row, shift, p)) => {
                let t_in = t_out - shift;
                if t_in < t_lo || t_in > t_hi {
                    0.0
                } else {
                    p * row[(t_in - t_lo) as usize]
                }
            }
            None => 0.0,
        }
    }
    #[inline]
    fn reduce(srcs: &[Option<(&[f64], i64, f64)>], t_out: i64, t_lo: i64, t_hi: i64) -> f64 {
        match srcs.len() {
            0 => 0.0,
            1 => term(&srcs[0], t_out, t_lo, t_hi),
            2 => term(&srcs[0], t_out, t_lo, t_hi) + term(&srcs[1], t_out, t_lo, t_hi),
            n => {
                // split at the largest power of two below n, keeping
                // inverse-pair atoms inside common subtrees
                let half = 1usize << (n - 1).ilog2();
                reduce(&srcs[..half], t_out, t_lo, t_hi)
                    + reduce(&srcs[half..], t_out, t_lo, t_hi)
            }
        }
    }
    reduce(srcs, t_out, t_lo, t_hi)
}

/// `P_N(id)` from the exact table.
pub fn return_probability(mu: &FiniteMeasure, n: u32, budget: u64) -> Result<f64, LatticeError> {
    let d = exact_distribution(mu, n, budget)?;
    Ok(d.prob_xyt(0, 0, 0))
}

/// Local-limit prediction for `P_N(n1, n2, n3)`:
/// `(1/(delta^2 N^2)) · rho(sigma^{-1} (n1,n2)^t / sqrt(N), (n3 - n1 n2/2 - N z̄̃)/(delta N))`.
pub fn llt_prediction(params: &MuParams, n_point: [i64; 3], n: u32) -> Result<f64, LatticeError> {
    if params.delta <= 0.0 {
        return Err(LatticeError::SingularCovariance(
            "llt prediction needs delta > 0".into(),
        ));
    }
    let si = params.sigma_inv()?;
    let nf = n as f64;
    let v = [n_point[0] as f64, n_point[1] as f64];
    let u = [
        (si[0][0] * v[0] + si[0][1] * v[1]) / nf.sqrt(),
        (si[1][0] * v[0] + si[1][1] * v[1]) / nf.sqrt(),
    ];
    let zt = (n_point[2] as f64 - 0.5 * v[0] * v[1] - nf * params.zbar_tilde)
        / (params.delta * nf);
    let rho = gaussian_density(u, zt)?;
    Ok(rho / (params.delta * params.delta * nf * nf))
}

/// One draw from `mu^{*N}`; deterministic per seed.
pub fn sample_walk(mu: &FiniteMeasure, n: u32, seed: u64) -> Result<HeisZ, LatticeError> {
    let mut rng = shard_rng(seed, 0);
    let mut g = HeisZ::identity();
    for _ in 0..n {
        let u: f64 = rng.random();
        g = g.mul(pick(&mu.atoms, u))?;
    }
    Ok(g)
}

fn pick(atoms: &[(HeisZ, f64)], u: f64) -> &HeisZ {
    let mut acc = 0.0;
    for (g, p) in atoms {
        acc += p;
        if u < acc {
            return g;
        }
    }
    &atoms.last().unwrap().0
}

/// Empirical frequency of a target element over `samples` independent walks,
/// with its standard error. Sharded; identical for any thread count.
pub fn empirical_frequency(
    mu: &FiniteMeasure,
    n: u32,
    target: &HeisZ,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64), LatticeError> {
    let shard_list = shards(samples);
    let hits: Vec<u64> = shard_list
        .par_iter()
        .enumerate()
        .map(|(si, &(_s, len))| {
            let mut rng = shard_rng(seed, si as u64);
            let mut h = 0u64;
            for _ in 0..len {
                let mut g = HeisZ::identity();
                for _ in 0..n {
                    let u: f64 = rng.random();
                    g = g.mul(pick(&mu.atoms, u)).expect("walk overflow");
                }
                if g == *target {
                    h += 1;
                }
            }
            h
        })
        .collect();
    let total: u64 = hits.iter().sum();
    let p = total as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    Ok((p, se))
}

/// Law selector for the `H*` moment estimator.
#[derive(Debug, Clone)]
pub enum HstarLaw {
    /// Standard 2D Gaussian letters.
    Gaussian,
    /// Abelianized letters of a lattice measure.
    Lattice(FiniteMeasure),
}

/// Monte Carlo estimate of `E[H*(w)^{2k}]` for a word of `N` i.i.d. letters,
/// with standard error.
pub fn moment_hstar(
    n: u32,
    k: u32,
    law: &HstarLaw,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64), LatticeError> {
    if k == 0 {
        return Err(LatticeError::InvalidMeasure("k must be >= 1".into()));
    }
    let shard_list = shards(samples);
    let partials: Vec<[f64; 2]> = shard_list
        .par_iter()
        .enumerate()
        .map(|(si, &(_s, len))| {
            let mut rng = shard_rng(seed, si as u64);
            let mut acc = [0.0f64; 2];
            for _ in 0..len {
                let mut px = 0.0f64;
                let mut py = 0.0f64;
                let mut hs = 0.0f64;
                for _ in 0..n {
                    let (x, y) = match law {
                        HstarLaw::Gaussian => {
                            (rng.sample(StandardNormal), rng.sample(StandardNormal))
                        }
                        HstarLaw::Lattice(m) => {
                            let u: f64 = rng.random();
                            let g = pick(&m.atoms, u);
                            (g.x as f64, g.y as f64)
                        }
                    };
                    hs += px * y - py * x;
                    px += x;
                    py += y;
                }
                let v = (0.5 * hs).powi(2 * k as i32);
                acc[0] += v;
                acc[1] += v * v;
            }
            acc
        })
        .collect();
    let tot = partials.iter().fold([0.0; 2], |mut a, s| {
        a[0] += s[0];
        a[1] += s[1];
        a
    });
    let m = samples as f64;
    let mean = tot[0] / m;
    let var = (tot[1] / m - mean * mean).max(0.0);
    Ok((mean, (var / m).sqrt()))
}

/// Empirical characteristic function `E[e_{-alpha}(w_ab) e_{-xi}(z̃)]` of the
/// lattice walk (unscaled coordinates), with per-component standard errors.
pub fn empirical_charfun(
    mu: &FiniteMeasure,
    n: u32,
    alpha: [f64; 2],
    xi: f64,
    samples: u64,
    seed: u64,
) -> Result<(num_complex::Complex64, f64, f64), LatticeError> {
    let tau = 2.0 * std::f64::consts::PI;
    let shard_list = shards(samples);
    let partials: Vec<[f64; 4]> = shard_list
        .par_iter()
        .enumerate()
        .map(|(si, &(_s, len))| {
            let mut rng = shard_rng(seed, si as u64);
            let mut acc = [0.0f64; 4];
            for _ in 0..len {
                let mut g = HeisZ::identity();
                for _ in 0..n {
                    let u: f64 = rng.random();
                    g = g.mul(pick(&mu.atoms, u)).expect("walk overflow");
                }
                let zt = (g.zt2().expect("overflow") as f64) * 0.5;
                let theta =
                    tau * (alpha[0] * g.x as f64 + alpha[1] * g.y as f64 + xi * zt);
                let (s, c) = theta.sin_cos();
                acc[0] += c;
                acc[1] -= s;
                acc[2] += c * c;
                acc[3] += s * s;
            }
            acc
        })
        .collect();
    let tot = partials.iter().fold([0.0; 4], |mut a, s| {
        for k in 0..4 {
            a[k] += s[k];
        }
        a
    });
    let m = samples as f64;
    let mean_re = tot[0] / m;
    let mean_im = tot[1] / m;
    let se_re = ((tot[2] / m - mean_re * mean_re).max(0.0) / m).sqrt();
    let se_im = ((tot[3] / m - mean_im * mean_im).max(0.0) / m).sqrt();
    Ok((num_complex::Complex64::new(mean_re, mean_im), se_re, se_im))
}

/// Exact `E[H*^2]` for Gaussian letters: `N(N-1)/4` (each of the `N(N-1)/2`
/// pairs contributes `E[(x_i y_j - y_i x_j)^2] = 2`, scaled by 1/4).
pub fn gaussian_hstar_second_moment(n: u32) -> f64 {
    let nf = n as f64;
    nf * (nf - 1.0) / 4.0
}
