//! Property suite over the group arithmetic and the evaluation routes.

use nilwalk::gauss::{i_finite, i_finite_dense, FreqPoint};
use nilwalk::heis::{
    h_star_double, product_formula, word_product, Dilation, HeisElem, HeisR, HeisZ,
};
use nilwalk::rearrange::{BlockAction, HypercubeElement};
use nilwalk::spectrum::{mu_hat, PlaneMeasure};
use nilwalk::unitri::{corner_from_word, entry_count, UnitriState, ZMatrix};
use proptest::prelude::*;

fn heis_elem() -> impl Strategy<Value = HeisZ> {
    (
        -1_000_000i128..=1_000_000,
        -1_000_000i128..=1_000_000,
        -1_000_000i128..=1_000_000,
    )
        .prop_map(|(x, y, z)| HeisElem::new(x, y, z))
}

fn mu0_letter() -> impl Strategy<Value = HeisZ> {
    prop_oneof![
        Just(HeisZ::identity()),
        Just(HeisZ::new(1, 0, 0)),
        Just(HeisZ::new(-1, 0, 0)),
        Just(HeisZ::new(0, 1, 0)),
        Just(HeisZ::new(0, -1, 0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn associativity(a in heis_elem(), b in heis_elem(), c in heis_elem()) {
        let lhs = a.mul(&b).unwrap().mul(&c).unwrap();
        let rhs = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn inverses_cancel(a in heis_elem()) {
        prop_assert!(a.mul(&a.inverse().unwrap()).unwrap().is_identity());
        prop_assert!(a.inverse().unwrap().mul(&a).unwrap().is_identity());
    }

    #[test]
    fn product_formula_equals_fold(word in prop::collection::vec(mu0_letter(), 0..1000)) {
        prop_assert_eq!(
            product_formula(&word).unwrap(),
            word_product(&word).unwrap()
        );
    }

    #[test]
    fn product_formula_on_general_words(
        word in prop::collection::vec(
            (-50i128..=50, -50i128..=50, -50i128..=50).prop_map(|(x, y, z)| HeisElem::new(x, y, z)),
            0..120,
        )
    ) {
        prop_assert_eq!(
            product_formula(&word).unwrap(),
            word_product(&word).unwrap()
        );
    }

    #[test]
    fn h_star_antisymmetric_under_adjacent_swap(
        mut word in prop::collection::vec((-9i128..=9, -9i128..=9), 2..40),
        at in 0usize..100,
    ) {
        let i = at % (word.len() - 1);
        let w: Vec<[i128; 2]> = word.iter().map(|&(a, b)| [a, b]).collect();
        let before = h_star_double(&w).unwrap();
        word.swap(i, i + 1);
        let w2: Vec<[i128; 2]> = word.iter().map(|&(a, b)| [a, b]).collect();
        let after = h_star_double(&w2).unwrap();
        // the wedge of the swapped pair flips; the rest is unchanged
        let pair = [w[i], w[i + 1]];
        let wedge = pair[0][0] * pair[1][1] - pair[0][1] * pair[1][0];
        prop_assert_eq!(before - after, 2 * wedge);
    }

    #[test]
    fn dilation_automorphism(
        ax in -100.0f64..100.0, ay in -100.0f64..100.0, az in -100.0f64..100.0,
        bx in -100.0f64..100.0, by in -100.0f64..100.0, bz in -100.0f64..100.0,
        t in 0.01f64..50.0,
    ) {
        let a = HeisR::new(ax, ay, az);
        let b = HeisR::new(bx, by, bz);
        let d = Dilation::new(t).unwrap();
        let lhs = d.apply(&a.mul(&b).unwrap());
        let rhs = d.apply(&a).mul(&d.apply(&b)).unwrap();
        let scale = lhs.z.abs().max(1.0);
        prop_assert!((lhs.x - rhs.x).abs() <= 1e-12 * lhs.x.abs().max(1.0));
        prop_assert!((lhs.y - rhs.y).abs() <= 1e-12 * lhs.y.abs().max(1.0));
        prop_assert!((lhs.z - rhs.z).abs() <= 1e-9 * scale);
    }

    #[test]
    fn unitri_encode_decode_roundtrip(n in 3usize..6, idx in 0u64..100_000) {
        let p = 5u64;
        let size = p.pow(entry_count(n) as u32);
        let i = idx % size;
        prop_assert_eq!(UnitriState::decode(n, p, i).encode(), i);
    }

    #[test]
    fn corner_sweep_matches_matrix(
        word in prop::collection::vec(prop::collection::vec(-3i64..=3, 3), 0..60)
    ) {
        let n = 4;
        let mut m = ZMatrix::identity(n);
        for v in &word {
            m = m.mul(&ZMatrix::embed(v)).unwrap();
        }
        prop_assert_eq!(corner_from_word(&word, n).unwrap(), m.corner());
    }

    #[test]
    fn hypercube_views_compose(a in 0u32..64, b in 0u32..64) {
        let word: Vec<u32> = (0..50).collect();
        let act_a = BlockAction::from_bits(2, 2, 3, a as u64);
        let act_b = BlockAction::from_bits(2, 2, 3, b as u64);
        let via_view = act_b
            .act(&word).unwrap()
            .act(&act_a).unwrap()
            .materialize().unwrap();
        let direct = act_a
            .compose(&act_b).unwrap()
            .act(&word).unwrap()
            .materialize().unwrap();
        prop_assert_eq!(via_view, direct);
        // the action preserves the multiset of letters
        let mut sorted = act_a.act(&word).unwrap().materialize().unwrap();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, word);
    }

    #[test]
    fn hypercube_identity_action(d in 1u8..5) {
        let len = 1usize << d;
        let seq: Vec<usize> = (0..len).collect();
        let id = HypercubeElement::identity(d);
        prop_assert_eq!(id.apply(&seq).unwrap(), seq);
    }

    #[test]
    fn mu_hat_bounded_and_conjugate(a1 in -4.0f64..4.0, a2 in -4.0f64..4.0) {
        let m = PlaneMeasure::mu0_ab();
        let v = mu_hat(&m, [a1, a2]);
        prop_assert!(v.norm() <= 1.0 + 1e-12);
        let w = mu_hat(&m, [-a1, -a2]);
        prop_assert!((v - w.conj()).norm() <= 1e-12);
    }
}

proptest! {
    // the dense oracle is O(N^3); keep the case count modest
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn i_finite_routes_agree(
        an in 0.0f64..2.0,
        dir in 0.0f64..std::f64::consts::TAU,
        xi in -3.0f64..3.0,
        n in 1u64..192,
    ) {
        let p = FreqPoint::new([an * dir.cos(), an * dir.sin()], xi);
        let a = i_finite(p, n).unwrap();
        let b = i_finite_dense(p, n).unwrap();
        prop_assert!(
            (a - b).abs() <= 1e-8 * b.abs().max(1e-280),
            "recurrence {} vs dense {} at n={}", a, b, n
        );
    }
}
