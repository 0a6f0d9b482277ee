//! Word-rearrangement engine: hypercube and block-swap group actions on
//! words, the exact pair-swap averaging identity, and the corner
//! characteristic function `chi_k` with its Gowers-Cauchy-Schwarz majorant
//! `F_k` and the block factorization.
//!
//! The hypercube `C_2^d` acts on a sequence of `2^d` items with factor `j`
//! deciding the relative order of the original first and second blocks of
//! `2^{j-1}` items; higher factors move the assembled prefix as a unit.
//! Applied to an already-acted word the factors address the original blocks
//! wherever they sit, so actions compose by XOR of the bit masks — words are
//! carried as `(base, action)` views and only materialized on demand.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::heis::h_star_double;
use crate::phase::{frac_mul, unit_phase_neg};
use crate::rng::shard_rng;
use crate::unitri::{corner_from_word_permuted, UnitriError};

#[derive(Debug, Error)]
pub enum RearrangeError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(String),
    #[error(transparent)]
    Corner(#[from] UnitriError),
}

/// Element of the hypercube `C_2^d` acting on sequences of length `2^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypercubeElement {
    dim: u8,
    bits: u32,
}

impl HypercubeElement {
    pub fn new(dim: u8, bits: u32) -> Result<Self, RearrangeError> {
        if dim > 20 {
            return Err(RearrangeError::EnumerationBudget(format!(
                "hypercube dimension {dim} exceeds 20"
            )));
        }
        if dim < 32 && bits >= (1u32 << dim) {
            return Err(RearrangeError::Contract(format!(
                "bits {bits:#b} out of range for dimension {dim}"
            )));
        }
        Ok(Self { dim, bits })
    }

    pub fn identity(dim: u8) -> Self {
        Self { dim, bits: 0 }
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Group composition (bitwise XOR).
    pub fn compose(&self, o: &HypercubeElement) -> Result<Self, RearrangeError> {
        if self.dim != o.dim {
            return Err(RearrangeError::Contract("dimension mismatch".into()));
        }
        Ok(Self { dim: self.dim, bits: self.bits ^ o.bits })
    }

    /// Number of nonzero factors `|tau|`.
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Output-to-source index permutation over `2^d` slots: factor `j`
    /// (bit `j-1`) exchanges the original blocks of size `2^{j-1}`; the
    /// assembled prefix moves as a unit under higher factors.
    pub fn permutation(&self) -> Vec<usize> {
        fn build(bits: u32, d: u8, out: &mut Vec<usize>) {
            if d == 0 {
                out.push(0);
                return;
            }
            let half = 1usize << (d - 1);
            if bits >> (d - 1) & 1 == 1 {
                out.extend(half..2 * half);
                build(bits & !(1 << (d - 1)), d - 1, out);
            } else {
                build(bits & !(1 << (d - 1)), d - 1, out);
                out.extend(half..2 * half);
            }
        }
        let mut out = Vec::with_capacity(1 << self.dim);
        build(self.bits, self.dim, &mut out);
        out
    }

    /// Materialized action on a sequence of exactly `2^d` items.
    pub fn apply<T: Clone>(&self, seq: &[T]) -> Result<Vec<T>, RearrangeError> {
        if seq.len() != 1usize << self.dim {
            return Err(RearrangeError::Contract(format!(
                "sequence length {} is not 2^{}",
                seq.len(),
                self.dim
            )));
        }
        Ok(self.permutation().into_iter().map(|i| seq[i].clone()).collect())
    }
}

/// Element of `G_k = (C_2^{n-2})^{N'}`: factor `j` acts on the contiguous
/// window of `k·2^{n-2}` letters ending at `j·k·2^{n-2}`; letters beyond
/// `N'·k·2^{n-2}` are fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockAction {
    k: usize,
    hyper_dim: u8,
    factors: Vec<HypercubeElement>,
}

impl BlockAction {
    pub fn new(
        k: usize,
        hyper_dim: u8,
        factors: Vec<HypercubeElement>,
    ) -> Result<Self, RearrangeError> {
        if k == 0 {
            return Err(RearrangeError::Contract("block size k must be >= 1".into()));
        }
        if factors.iter().any(|f| f.dim() != hyper_dim) {
            return Err(RearrangeError::Contract(
                "all factors must share the hypercube dimension".into(),
            ));
        }
        Ok(Self { k, hyper_dim, factors })
    }

    pub fn identity(k: usize, hyper_dim: u8, n_factors: usize) -> Self {
        Self {
            k,
            hyper_dim,
            factors: vec![HypercubeElement::identity(hyper_dim); n_factors],
        }
    }

    /// Element of `G_k` from a packed bit string: factor `j` occupies bits
    /// `[j·(n-2), (j+1)·(n-2))`.
    pub fn from_bits(k: usize, hyper_dim: u8, n_factors: usize, bits: u64) -> Self {
        let mask = (1u64 << hyper_dim) - 1;
        let factors = (0..n_factors)
            .map(|j| HypercubeElement {
                dim: hyper_dim,
                bits: ((bits >> (j as u32 * hyper_dim as u32)) & mask) as u32,
            })
            .collect();
        Self { k, hyper_dim, factors }
    }

    pub fn window(&self) -> usize {
        self.k << self.hyper_dim
    }

    pub fn span(&self) -> usize {
        self.window() * self.factors.len()
    }

    /// Group composition (factorwise XOR).
    pub fn compose(&self, o: &BlockAction) -> Result<BlockAction, RearrangeError> {
        if self.k != o.k || self.hyper_dim != o.hyper_dim || self.factors.len() != o.factors.len()
        {
            return Err(RearrangeError::Contract("block action shape mismatch".into()));
        }
        let factors = self
            .factors
            .iter()
            .zip(&o.factors)
            .map(|(a, b)| a.compose(b))
            .collect::<Result<_, _>>()?;
        BlockAction::new(self.k, self.hyper_dim, factors)
    }

    /// Output-to-source index permutation of a word of length `word_len`.
    pub fn permutation(&self, word_len: usize) -> Result<Vec<usize>, RearrangeError> {
        if word_len < self.span() {
            return Err(RearrangeError::Contract(format!(
                "word length {} shorter than the action span {}",
                word_len,
                self.span()
            )));
        }
        let mut perm = Vec::with_capacity(word_len);
        let w = self.window();
        for (j, f) in self.factors.iter().enumerate() {
            let base = j * w;
            for slot in f.permutation() {
                let src = base + slot * self.k;
                perm.extend(src..src + self.k);
            }
        }
        perm.extend(self.span()..word_len);
        Ok(perm)
    }

    /// Index-permutation view of the word; composing actions on the view is
    /// the group operation, materialization applies it once.
    pub fn act<'a, T>(&self, word: &'a [T]) -> Result<PermutedWord<'a, T>, RearrangeError> {
        if word.len() < self.span() {
            return Err(RearrangeError::Contract(format!(
                "word length {} shorter than the action span {}",
                word.len(),
                self.span()
            )));
        }
        Ok(PermutedWord { base: word, action: self.clone() })
    }
}

/// A word carried as `(base, accumulated action)`.
#[derive(Debug, Clone)]
pub struct PermutedWord<'a, T> {
    base: &'a [T],
    action: BlockAction,
}

impl<'a, T: Clone> PermutedWord<'a, T> {
    /// Apply a further action: composes in the group.
    pub fn act(&self, a: &BlockAction) -> Result<PermutedWord<'a, T>, RearrangeError> {
        Ok(PermutedWord { base: self.base, action: a.compose(&self.action)? })
    }

    pub fn action(&self) -> &BlockAction {
        &self.action
    }

    pub fn materialize(&self) -> Result<Vec<T>, RearrangeError> {
        Ok(self
            .action
            .permutation(self.base.len())?
            .into_iter()
            .map(|i| self.base[i].clone())
            .collect())
    }
}

/// Block sums `ŵ_j` of consecutive length-`k` blocks of a 2-vector word.
fn pair_block_sums(word: &[[i64; 2]], k: usize, n_pairs: usize) -> Vec<[i128; 2]> {
    (0..2 * n_pairs)
        .map(|b| {
            let mut s = [0i128; 2];
            for w in &word[b * k..(b + 1) * k] {
                s[0] += w[0] as i128;
                s[1] += w[1] as i128;
            }
            s
        })
        .collect()
}

/// Both sides of the pair-swap averaging identity for `G_k = C_2^{N'}`
/// acting on a 2-vector word by swapping adjacent `k`-blocks:
/// `lhs = |E_tau[e_xi(H*(tau·w))]|^2` by full enumeration,
/// `rhs = prod_j (1 + cos(4 pi xi H*(ŵ_{2j-1}, ŵ_{2j})))/2`
/// (the cosine constant fixed by the enumeration oracle). They agree to
/// 1e-12; `N' = floor(len/2k)` must be at most 20.
pub fn pair_swap_identity(
    xi: f64,
    word: &[[i64; 2]],
    k: usize,
) -> Result<(f64, f64), RearrangeError> {
    if k == 0 || word.len() < 2 * k {
        return Err(RearrangeError::Contract(
            "need k >= 1 and word length >= 2k".into(),
        ));
    }
    let n_pairs = word.len() / (2 * k);
    if n_pairs > 20 {
        return Err(RearrangeError::EnumerationBudget(format!(
            "2^{n_pairs} swap patterns exceed the enumeration budget (N' <= 20)"
        )));
    }
    // lhs: enumerate the full action, H* of the permuted word each time
    let mut sum_re = 0.0;
    let mut sum_im = 0.0;
    for bits in 0u64..(1 << n_pairs) {
        let action = BlockAction::from_bits(k, 1, n_pairs, bits);
        let perm = action.permutation(word.len())?;
        let permuted: Vec<[i128; 2]> =
            perm.iter().map(|&i| [word[i][0] as i128, word[i][1] as i128]).collect();
        let h2 = h_star_double(&permuted)
            .map_err(|_| RearrangeError::Contract("H* overflow on permuted word".into()))?;
        // e_xi(H*) = e^{2 pi i xi h2/2}
        let theta = 2.0 * std::f64::consts::PI * frac_mul(xi / 2.0, h2);
        sum_re += theta.cos();
        sum_im += theta.sin();
    }
    let m = (1u64 << n_pairs) as f64;
    let lhs = (sum_re / m).powi(2) + (sum_im / m).powi(2);
    // rhs: per-block cosine over the unpermuted block sums
    let sums = pair_block_sums(word, k, n_pairs);
    let mut rhs = 1.0;
    for j in 0..n_pairs {
        let a = &sums[2 * j];
        let b = &sums[2 * j + 1];
        let wedge = a[0] * b[1] - a[1] * b[0]; // 2·H*(ŵ_{2j-1}, ŵ_{2j})
        let c = (2.0 * std::f64::consts::PI * frac_mul(xi, wedge)).cos();
        rhs *= 0.5 * (1.0 + c);
    }
    Ok((lhs, rhs))
}

/// Evaluation mode for the `G_k` averages.
#[derive(Debug, Clone, Copy)]
pub enum AverageMode {
    /// Full enumeration; requires `(n-2)·N' <= 20` bits.
    Enumerate,
    /// Uniform sampling of group elements with a seed.
    Sampled { samples: u64, seed: u64 },
}

struct GkShape {
    k: usize,
    d: u8,
    n_factors: usize,
    bits: u32,
}

fn gk_shape(word_len: usize, n: usize, k: usize) -> Result<GkShape, RearrangeError> {
    if n < 3 {
        return Err(RearrangeError::Contract("need n >= 3".into()));
    }
    if k == 0 {
        return Err(RearrangeError::Contract("need k >= 1".into()));
    }
    let d = (n - 2) as u8;
    let window = k << d;
    let n_factors = word_len / window;
    if n_factors == 0 {
        return Err(RearrangeError::Contract(format!(
            "word length {word_len} shorter than one window {window}"
        )));
    }
    Ok(GkShape { k, d, n_factors, bits: (d as u32) * n_factors as u32 })
}

/// Corner values `Z_n^N(tau·w)` for every `tau` in `G_k`, indexed by the
/// packed bits. Parallel over fixed-size chunks; result independent of the
/// thread count.
fn z_table(word: &[Vec<i64>], n: usize, shape: &GkShape) -> Result<Vec<i128>, RearrangeError> {
    let total = 1u64 << shape.bits;
    let chunk = 1usize << 10;
    let mut out = vec![0i128; total as usize];
    let results: Result<Vec<_>, RearrangeError> = out
        .par_chunks_mut(chunk)
        .enumerate()
        .map(|(ci, slot)| {
            let base = (ci * chunk) as u64;
            for (off, v) in slot.iter_mut().enumerate() {
                let action =
                    BlockAction::from_bits(shape.k, shape.d, shape.n_factors, base + off as u64);
                let perm = action.permutation(word.len())?;
                *v = corner_from_word_permuted(word, &perm, n)?;
            }
            Ok(())
        })
        .collect();
    results?;
    Ok(out)
}

/// `chi_k(xi, w) = E_{tau in G_k}[e_{-xi}(Z_n^N(tau·w))]`.
pub fn chi_k(
    xi: f64,
    word: &[Vec<i64>],
    n: usize,
    k: usize,
    mode: AverageMode,
) -> Result<Complex64, RearrangeError> {
    let shape = gk_shape(word.len(), n, k)?;
    match mode {
        AverageMode::Enumerate => {
            if shape.bits > 20 {
                return Err(RearrangeError::EnumerationBudget(format!(
                    "2^{} group elements exceed the enumeration budget; use sampling",
                    shape.bits
                )));
            }
            let table = z_table(word, n, &shape)?;
            let (re, im) = table.iter().fold((0.0, 0.0), |acc, &z| {
                let (c, s) = unit_phase_neg(xi, z);
                (acc.0 + c, acc.1 + s)
            });
            let m = table.len() as f64;
            Ok(Complex64::new(re / m, im / m))
        }
        AverageMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(RearrangeError::Contract("samples must be > 0".into()));
            }
            let mut rng = shard_rng(seed, 0);
            let mut re = 0.0;
            let mut im = 0.0;
            for _ in 0..samples {
                let bits: u64 = rng.random::<u64>() & ((1u64 << shape.bits) - 1);
                let action = BlockAction::from_bits(shape.k, shape.d, shape.n_factors, bits);
                let perm = action.permutation(word.len())?;
                let z = corner_from_word_permuted(word, &perm, n)?;
                let (c, s) = unit_phase_neg(xi, z);
                re += c;
                im += s;
            }
            Ok(Complex64::new(re / samples as f64, im / samples as f64))
        }
    }
}

/// Evaluation route for `F_k`.
#[derive(Debug, Clone, Copy)]
pub enum FkMode {
    /// Double average over `(tau, tau')` of the alternating-subset phase.
    Enumerate,
    /// Block product `prod_j (1 - 2^{-(n-2)} + F_{k,j}/2^{n-2})`.
    Factored,
}

/// The Gowers-Cauchy-Schwarz majorant of `chi_k`: satisfies
/// `|chi_k|^{2^{n-2}} <= F_k`. Returns the real part; the imaginary residue
/// must stay below 1e-12.
pub fn f_k(
    xi: f64,
    word: &[Vec<i64>],
    n: usize,
    k: usize,
    mode: FkMode,
) -> Result<f64, RearrangeError> {
    let v = f_k_complex(xi, word, n, k, mode)?;
    if v.im.abs() > 1e-12 {
        return Err(RearrangeError::Contract(format!(
            "F_k has imaginary residue {:e}",
            v.im
        )));
    }
    Ok(v.re)
}

fn f_k_complex(
    xi: f64,
    word: &[Vec<i64>],
    n: usize,
    k: usize,
    mode: FkMode,
) -> Result<Complex64, RearrangeError> {
    let shape = gk_shape(word.len(), n, k)?;
    let d = shape.d as u32;
    match mode {
        FkMode::Enumerate => {
            if 2 * shape.bits > 24 {
                return Err(RearrangeError::EnumerationBudget(format!(
                    "4^{} (tau, tau') pairs exceed the enumeration budget",
                    shape.bits
                )));
            }
            let table = z_table(word, n, &shape)?;
            // per-dimension masks across factors
            let mut dim_masks = vec![0u64; d as usize];
            for j in 0..shape.n_factors {
                for i in 0..d {
                    dim_masks[i as usize] |= 1u64 << (j as u32 * d + i);
                }
            }
            // mix masks per subset S of [d]
            let mix_masks: Vec<u64> = (0u32..(1 << d))
                .map(|s| {
                    (0..d)
                        .filter(|i| s >> i & 1 == 1)
                        .fold(0u64, |m, i| m | dim_masks[i as usize])
                })
                .collect();
            let total = 1u64 << shape.bits;
            let mut acc = Complex64::new(0.0, 0.0);
            for tau in 0..total {
                for tau_p in 0..total {
                    let mut z: i128 = 0;
                    for (s, mix) in mix_masks.iter().enumerate() {
                        let idx = (tau & mix) | (tau_p & !mix);
                        let sign = if (d - (s as u32).count_ones()) % 2 == 0 { 1 } else { -1 };
                        z += sign as i128 * table[idx as usize];
                    }
                    let (c, si) = unit_phase_neg(xi, z);
                    acc += Complex64::new(c, si);
                }
            }
            Ok(acc / (total as f64 * total as f64))
        }
        FkMode::Factored => {
            let letters = 1usize << d;
            let mut prod = Complex64::new(1.0, 0.0);
            for j in 0..shape.n_factors {
                // block sums: 2^{n-2} consecutive k-sums within window j
                let base = j * shape.k * letters;
                let omega: Vec<Vec<i64>> = (0..letters)
                    .map(|b| {
                        let mut s = vec![0i64; n - 1];
                        for w in &word[base + b * shape.k..base + (b + 1) * shape.k] {
                            for (si, wi) in s.iter_mut().zip(w.iter()) {
                                *si = si.checked_add(*wi).expect("block sum overflow");
                            }
                        }
                        s
                    })
                    .collect();
                // corner of every arrangement of the small hypercube
                let mut z_small = vec![0i128; letters];
                for (bits, zv) in z_small.iter_mut().enumerate() {
                    let h = HypercubeElement::new(shape.d, bits as u32)?;
                    let perm = h.permutation();
                    *zv = corner_from_word_permuted(&omega, &perm, n)?;
                }
                let mut fkj = Complex64::new(0.0, 0.0);
                for tau in 0..letters {
                    let mut a: i128 = 0;
                    for tau_p in 0..letters {
                        let sign = if (tau_p as u32).count_ones() % 2 == 0 { 1 } else { -1 };
                        a += sign as i128 * z_small[tau ^ tau_p];
                    }
                    let (c, s) = unit_phase_neg(xi, a);
                    fkj += Complex64::new(c, s);
                }
                fkj /= letters as f64;
                let l = letters as f64;
                prod *= Complex64::new(1.0 - 1.0 / l, 0.0) + fkj / l;
            }
            Ok(prod)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitri::ZMatrix;

    fn word_rng(seed: u64) -> impl FnMut(i64) -> i64 {
        let mut s = seed;
        move |m: i64| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as i64).rem_euclid(2 * m + 1) - m
        }
    }

    #[test]
    fn hypercube_action_examples() {
        let x = ["x1", "x2", "x3", "x4"];
        let act =
            |bits: u32| HypercubeElement::new(2, bits).unwrap().apply(&x).unwrap().join("");
        assert_eq!(act(0b00), "x1x2x3x4");
        assert_eq!(act(0b01), "x2x1x3x4"); // factor 1 set
        assert_eq!(act(0b10), "x3x4x1x2"); // factor 2 set
        assert_eq!(act(0b11), "x3x4x2x1");
        // d=3 patterns
        let y: Vec<String> = (1..=8).map(|i| format!("x{i}")).collect();
        let act3 =
            |bits: u32| HypercubeElement::new(3, bits).unwrap().apply(&y).unwrap().join("");
        assert_eq!(act3(0b010), "x3x4x1x2x5x6x7x8");
        assert_eq!(act3(0b101), "x5x6x7x8x2x1x3x4");
        assert_eq!(act3(0b111), "x5x6x7x8x3x4x2x1");
    }

    /// Label-aware single-factor application: factor `j` exchanges the
    /// positions of the original blocks `[0, 2^{j-1})` and `[2^{j-1}, 2^j)`
    /// wherever they currently sit. Independent oracle for the group law.
    fn label_aware_factor(perm: &mut Vec<usize>, j: u8) {
        let half = 1usize << (j - 1);
        // start of a block = least current position among its original indices
        // (the block stays contiguous but may be internally rearranged)
        let start_of = |perm: &Vec<usize>, lo: usize| {
            perm.iter()
                .enumerate()
                .filter(|(_, &s)| s >= lo && s < lo + half)
                .map(|(i, _)| i)
                .min()
                .unwrap()
        };
        let a0 = start_of(perm, 0);
        let b0 = start_of(perm, half);
        let (first, second) = if a0 < b0 { (a0, b0) } else { (b0, a0) };
        let block1: Vec<usize> = perm[first..first + half].to_vec();
        let block2: Vec<usize> = perm[second..second + half].to_vec();
        perm.splice(second..second + half, block1);
        perm.splice(first..first + half, block2);
    }

    #[test]
    fn hypercube_group_action_by_enumeration() {
        // (tau + tau')·x = tau·(tau'·x) with tau acting label-aware on the
        // arrangement produced by tau'
        for d in 1u8..=4 {
            for tau in 0..(1u32 << d) {
                for tau_p in 0..(1u32 << d) {
                    let direct = HypercubeElement::new(d, tau ^ tau_p).unwrap().permutation();
                    let mut arranged = HypercubeElement::new(d, tau_p).unwrap().permutation();
                    for j in 1..=d {
                        if tau >> (j - 1) & 1 == 1 {
                            label_aware_factor(&mut arranged, j);
                        }
                    }
                    assert_eq!(direct, arranged, "d={d} tau={tau:b} tau'={tau_p:b}");
                }
            }
        }
    }

    #[test]
    fn view_composition_is_group_operation() {
        let word: Vec<i32> = (0..12).collect();
        let a = BlockAction::from_bits(1, 1, 4, 0b1010);
        let b = BlockAction::from_bits(1, 1, 4, 0b0110);
        let via_view = b.act(&word).unwrap().act(&a).unwrap().materialize().unwrap();
        let direct = a.compose(&b).unwrap().act(&word).unwrap().materialize().unwrap();
        assert_eq!(via_view, direct);
        // identity leaves the word unchanged; trailing letters fixed
        let id = BlockAction::identity(1, 1, 4);
        assert_eq!(id.act(&word).unwrap().materialize().unwrap(), word);
        let sw = BlockAction::from_bits(1, 1, 1, 1);
        let out = sw.act(&word).unwrap().materialize().unwrap();
        assert_eq!(out[..3], [1, 0, 2]);
        assert_eq!(out[3..], word[3..]);
    }

    #[test]
    fn block_act_preserves_abelianized_sum() {
        let mut rnd = word_rng(5);
        let word: Vec<[i64; 2]> = (0..16).map(|_| [rnd(5), rnd(5)]).collect();
        let sum =
            |w: &[[i64; 2]]| w.iter().fold([0i64; 2], |a, v| [a[0] + v[0], a[1] + v[1]]);
        for bits in 0..(1u64 << 4) {
            let action = BlockAction::from_bits(2, 1, 4, bits);
            let perm = action.permutation(word.len()).unwrap();
            let permuted: Vec<[i64; 2]> = perm.iter().map(|&i| word[i]).collect();
            assert_eq!(sum(&word), sum(&permuted));
        }
    }

    #[test]
    fn h_star_block_decomposition_invariant() {
        // H*(w) = H_k^1(w) + sum_j H*(ŵ_{2j-1}, ŵ_{2j}) with H_k^1 invariant
        let mut rnd = word_rng(99);
        let word: Vec<[i64; 2]> = (0..24).map(|_| [rnd(4), rnd(4)]).collect();
        let k = 3usize;
        let n_pairs = word.len() / (2 * k);
        let h2_of = |w: &[[i64; 2]]| {
            let big: Vec<[i128; 2]> = w.iter().map(|v| [v[0] as i128, v[1] as i128]).collect();
            h_star_double(&big).unwrap()
        };
        let hk2_of = |w: &[[i64; 2]]| {
            let sums = pair_block_sums(w, k, n_pairs);
            let mut acc = 0i128;
            for j in 0..n_pairs {
                acc += sums[2 * j][0] * sums[2 * j + 1][1] - sums[2 * j][1] * sums[2 * j + 1][0];
            }
            acc
        };
        let h1_base = h2_of(&word) - hk2_of(&word);
        for bits in 0..(1u64 << n_pairs) {
            let action = BlockAction::from_bits(k, 1, n_pairs, bits);
            let perm = action.permutation(word.len()).unwrap();
            let permuted: Vec<[i64; 2]> = perm.iter().map(|&i| word[i]).collect();
            assert_eq!(h2_of(&permuted) - hk2_of(&permuted), h1_base, "bits={bits:b}");
        }
    }

    #[test]
    fn pair_swap_identity_cases() {
        // xi = 0 gives (1, 1)
        let word: Vec<[i64; 2]> = vec![[1, 2], [3, -1], [0, 2], [2, 2]];
        let (l, r) = pair_swap_identity(0.0, &word, 1).unwrap();
        assert_eq!((l, r), (1.0, 1.0));
        // all letters equal: every block wedge vanishes
        let same: Vec<[i64; 2]> = vec![[2, 1]; 8];
        let (l, r) = pair_swap_identity(0.37, &same, 2).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        // random words across k and xi
        let mut rnd = word_rng(1234);
        for case in 0..300 {
            let k = 1 + (case % 3);
            let len = 2 * k * (1 + case % 5) + (case % 2);
            let word: Vec<[i64; 2]> = (0..len).map(|_| [rnd(6), rnd(6)]).collect();
            let xi = 0.3 + 0.001 * (case as f64);
            let (lhs, rhs) = pair_swap_identity(xi, &word, k).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-12,
                "case {case}: lhs {lhs} rhs {rhs} diff {:e}",
                lhs - rhs
            );
        }
        // budget guard
        let long: Vec<[i64; 2]> = vec![[1, 0]; 64];
        assert!(matches!(
            pair_swap_identity(0.1, &long, 1),
            Err(RearrangeError::EnumerationBudget(_))
        ));
    }

    #[test]
    fn chi_k_basics_and_compatibility() {
        let mut rnd = word_rng(31);
        // chi at xi = 0 and on the zero word is 1
        let word: Vec<Vec<i64>> = (0..8).map(|_| vec![rnd(3), rnd(3)]).collect();
        let z = chi_k(0.0, &word, 3, 2, AverageMode::Enumerate).unwrap();
        assert!((z.re - 1.0).abs() < 1e-14 && z.im.abs() < 1e-14);
        let zeros: Vec<Vec<i64>> = vec![vec![0, 0, 0]; 8];
        let z = chi_k(0.55, &zeros, 4, 2, AverageMode::Enumerate).unwrap();
        assert!((z.re - 1.0).abs() < 1e-14);
        // |chi| <= 1 and matrix-product compatibility of the permuted corner
        for case in 0..200usize {
            let n = 3 + case % 3;
            let len = (1 + case % 2) * (1usize << (n - 2)) * 2 + case % 3;
            let word: Vec<Vec<i64>> =
                (0..len).map(|_| (0..n - 1).map(|_| rnd(3)).collect()).collect();
            if let Ok(v) = chi_k(0.21, &word, n, 2, AverageMode::Enumerate) {
                assert!(v.norm() <= 1.0 + 1e-12);
            }
            let shape = gk_shape(word.len(), n, 1).unwrap();
            let bits = (case as u64).wrapping_mul(2654435761) & ((1u64 << shape.bits) - 1);
            let action = BlockAction::from_bits(1, shape.d, shape.n_factors, bits);
            let perm = action.permutation(word.len()).unwrap();
            let via_sweep = corner_from_word_permuted(&word, &perm, n).unwrap();
            let mut m = ZMatrix::identity(n);
            for &i in &perm {
                m = m.mul(&ZMatrix::embed(&word[i])).unwrap();
            }
            assert_eq!(via_sweep, m.corner(), "case {case}");
        }
    }

    #[test]
    fn f_k_modes_agree_and_dominate_chi() {
        let mut rnd = word_rng(777);
        let mut checked = 0;
        for case in 0..300usize {
            let n = 3 + case % 3;
            let k = 1 + case % 2;
            let n_factors = 1 + case % 2;
            let len = k * (1usize << (n - 2)) * n_factors;
            let word: Vec<Vec<i64>> =
                (0..len).map(|_| (0..n - 1).map(|_| rnd(2)).collect()).collect();
            let xi = 0.05 + 0.002 * case as f64;
            let fe = f_k(xi, &word, n, k, FkMode::Enumerate).unwrap();
            let ff = f_k(xi, &word, n, k, FkMode::Factored).unwrap();
            assert!(
                (fe - ff).abs() <= 1e-12,
                "case {case} (n={n}, k={k}): enumerate {fe} vs factored {ff}"
            );
            let chi = chi_k(xi, &word, n, k, AverageMode::Enumerate).unwrap();
            let lhs = chi.norm().powi(1 << (n - 2));
            assert!(lhs <= fe + 1e-12, "case {case}: GCS violated: {lhs} > {fe}");
            checked += 1;
        }
        assert_eq!(checked, 300);
    }

    #[test]
    fn f_k_n3_equals_chi_squared() {
        // for n=3 the Gowers-Cauchy-Schwarz step is an equality
        let mut rnd = word_rng(4242);
        let word: Vec<Vec<i64>> = (0..12).map(|_| vec![rnd(3), rnd(3)]).collect();
        let xi = 0.17;
        let fe = f_k(xi, &word, 3, 2, FkMode::Enumerate).unwrap();
        let chi = chi_k(xi, &word, 3, 2, AverageMode::Enumerate).unwrap();
        assert!((fe - chi.norm_sqr()).abs() <= 1e-12);
    }

    #[test]
    fn sampled_chi_approximates_enumerated() {
        let mut rnd = word_rng(9);
        let word: Vec<Vec<i64>> = (0..16).map(|_| vec![rnd(2), rnd(2)]).collect();
        let exact = chi_k(0.13, &word, 3, 2, AverageMode::Enumerate).unwrap();
        let sampled = chi_k(
            0.13,
            &word,
            3,
            2,
            AverageMode::Sampled { samples: 200_000, seed: 5 },
        )
        .unwrap();
        assert!((exact - sampled).norm() <= 0.02, "exact {exact} sampled {sampled}");
    }
}
