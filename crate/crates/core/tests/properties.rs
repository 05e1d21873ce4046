//! Property tests for the algebraic invariants that hold on whole input
//! ranges rather than at hand-picked points.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qac_core::family::{quantize_turns, InterpolationFamily};
use qac_core::linalg::{expm_i, spectral_norm, unitarity_defect, HermitianOperator};
use qac_core::qac::{filter_w, weight_integral, weights, QacParams};
use qac_core::state_prep::rotation_bit_decomposition;

fn hermitian_2x2(a: f64, d: f64, re: f64, im: f64) -> HermitianOperator {
    let m = DMatrix::from_fn(2, 2, |r, c| match (r, c) {
        (0, 0) => Complex64::new(a, 0.0),
        (1, 1) => Complex64::new(d, 0.0),
        (0, 1) => Complex64::new(re, im),
        _ => Complex64::new(re, -im),
    });
    HermitianOperator::new(m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_is_unitary_and_additive(
        a in -2.0f64..2.0, d in -2.0f64..2.0,
        re in -2.0f64..2.0, im in -2.0f64..2.0,
        t1 in -3.0f64..3.0, t2 in -3.0f64..3.0,
    ) {
        let h = hermitian_2x2(a, d, re, im);
        let u1 = expm_i(&h, t1).unwrap();
        let u2 = expm_i(&h, t2).unwrap();
        let u12 = expm_i(&h, t1 + t2).unwrap();
        prop_assert!(unitarity_defect(&u1) < 1e-10);
        prop_assert!(spectral_norm(&(u1 * u2 - u12)) < 1e-10);
    }

    #[test]
    fn filter_is_odd_and_consistent_with_its_integral(
        t in 0.01f64..4.0,
        delta in 0.1f64..4.0,
    ) {
        prop_assert!((filter_w(-t, delta) + filter_w(t, delta)).abs() < 1e-15);
        // the antiderivative is additive over adjacent windows
        let a = 0.2 * t;
        let b = t;
        let c = 1.7 * t;
        let whole = weight_integral(a, c, delta).unwrap();
        let split = weight_integral(a, b, delta).unwrap() + weight_integral(b, c, delta).unwrap();
        prop_assert!((whole - split).abs() < 1e-14);
    }

    #[test]
    fn weight_tables_are_normalized_and_monotone(
        delta in 0.2f64..3.0,
        t_total in 0.5f64..8.0,
        n in 1u64..200,
    ) {
        let params = QacParams::new(delta, t_total, n, 0.1, 1.0, 1.0, 1.0, delta).unwrap();
        let table = weights(&params).unwrap();
        let sum: f64 = table.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        for pair in table.weights.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-13);
        }
        prop_assert!(table.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn angle_quantization_stays_within_half_a_step(
        theta in 0.0f64..0.25,
        bits in 1u32..16,
    ) {
        let q = quantize_turns(theta, bits);
        prop_assert!((theta - q).abs() <= 2f64.powi(-(bits as i32 + 1)) + 1e-15);
    }

    #[test]
    fn rotation_bits_compose_exactly(x in 0u64..256, bits in 8u32..12) {
        let x = x % (1 << bits);
        prop_assert!(rotation_bit_decomposition(x, bits).is_ok());
    }

    #[test]
    fn interpolation_is_affine(
        a in -1.0f64..1.0, d in -1.0f64..1.0,
        re in -1.0f64..1.0, im in -1.0f64..1.0,
        s in 0.0f64..1.0,
    ) {
        let h0 = hermitian_2x2(a, d, re, im);
        let h1 = hermitian_2x2(d, a, -re, im);
        let fam = InterpolationFamily::with_measured_bounds(h0.clone(), h1.clone()).unwrap();
        let lhs = fam.evaluate(s).unwrap();
        let rhs = h0.linear_combination(1.0 - s, &h1, s).unwrap();
        for (x, y) in lhs.matrix().iter().zip(rhs.matrix().iter()) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }
}
