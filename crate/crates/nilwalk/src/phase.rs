//! Exact reduction of integer-multiple phases.

/// `(xi * m) mod 1` computed with an exact two-product split, so the phase of
/// `e^{2 pi i xi m}` keeps full precision even when `m` is large.
///
/// `m` must be exactly representable in f64 (|m| <= 2^53).
pub(crate) fn frac_mul(xi: f64, m: i128) -> f64 {
    debug_assert!(m.unsigned_abs() <= 1u128 << 53);
    let mf = m as f64;
    let hi = xi * mf;
    let lo = xi.mul_add(mf, -hi); // exact residual of the product
    (hi - hi.round()) + lo
}

/// `e^{-2 pi i xi m}` as (re, im) with exactly reduced phase.
pub(crate) fn unit_phase_neg(xi: f64, m: i128) -> (f64, f64) {
    let theta = 2.0 * std::f64::consts::PI * frac_mul(xi, m);
    (theta.cos(), -theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_arguments_keep_precision() {
        // against direct evaluation at a modest argument
        let xi = 0.3125f64; // dyadic: exact products
        for &m in &[3i128, 16, 1 << 20] {
            let f = frac_mul(xi, m);
            let direct = (xi * m as f64).rem_euclid(1.0);
            let d = (f - direct).rem_euclid(1.0);
            assert!(d.min(1.0 - d) < 1e-12, "m={m}: {f} vs {direct}");
        }
        // huge m with dyadic xi = a/2^b: (a·m mod 2^b)/2^b exactly
        let xi = 5.0 / 16.0;
        let m = (1i128 << 50) + 1; // 5·m mod 16 = 5
        let f = frac_mul(xi, m).rem_euclid(1.0);
        assert!((f - 5.0 / 16.0).abs() < 1e-12, "got {f}");
    }
}
