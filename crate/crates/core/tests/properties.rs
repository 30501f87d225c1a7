use proptest::prelude::*;

use rmnp_core::dominance::{row_ratios, row_ratios_streaming};
use rmnp_core::precond::{newton_schulz5, row_normalize, NsCoefficients, DEFAULT_RN_EPS};
use rmnp_core::Matrix;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-10.0f64..10.0, m * n).prop_map(move |v| Matrix::from_vec(m, n, v).unwrap())
    })
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn norm_ordering(v in matrix(12, 20)) {
        let (f, s12, i2) = (v.frobenius_norm(), v.one_two_norm(), v.inf_two_norm());
        let m = v.rows() as f64;
        let tol = 1e-12 * (1.0 + s12);
        prop_assert!(i2 <= f + tol);
        prop_assert!(f <= s12 + tol);
        prop_assert!(s12 <= m.sqrt() * f + tol);
        prop_assert!(s12 <= m * i2 + tol);
    }

    #[test]
    fn holder_pairing_of_one_two_and_inf_two(a in matrix(8, 8), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = Matrix::random_normal(a.rows(), a.cols(), &mut rng);
        let ip = a.inner(&b).unwrap().abs();
        prop_assert!(ip <= a.one_two_norm() * b.inf_two_norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn rn_is_idempotent(v in matrix(10, 16)) {
        let once = row_normalize(&v, DEFAULT_RN_EPS);
        let twice = row_normalize(&once, DEFAULT_RN_EPS);
        prop_assert!(close(&once, &twice, 1e-14));
    }

    #[test]
    fn rn_ignores_positive_row_scaling(v in matrix(10, 16), c in 1e-3f64..1e3) {
        prop_assert!(close(&row_normalize(&v, DEFAULT_RN_EPS), &row_normalize(&v.scale(c), DEFAULT_RN_EPS), 1e-13));
    }

    #[test]
    fn rn_flips_sign_with_input(v in matrix(10, 16)) {
        let pos = row_normalize(&v, DEFAULT_RN_EPS);
        let neg = row_normalize(&v.scale(-1.0), DEFAULT_RN_EPS);
        prop_assert!(close(&pos, &neg.scale(-1.0), 0.0));
    }

    #[test]
    fn dominance_is_scale_invariant(v in matrix(9, 12), c in 1e-3f64..1e3) {
        prop_assume!(v.rows() >= 2);
        let a = row_ratios(&v).unwrap();
        let b = row_ratios(&v.scale(c)).unwrap();
        for (x, y) in a.r.iter().zip(&b.r) {
            prop_assert!(x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()));
        }
    }

    #[test]
    fn dominance_permutes_with_rows(v in matrix(9, 12), shift in 0usize..9) {
        prop_assume!(v.rows() >= 2);
        let m = v.rows();
        let rows: Vec<Vec<f64>> = (0..m).map(|i| v.row((i + shift) % m).to_vec()).collect();
        let p = Matrix::from_rows(&rows).unwrap();
        let a = row_ratios_streaming(&v).unwrap();
        let b = row_ratios_streaming(&p).unwrap();
        for i in 0..m {
            let (x, y) = (b.r[i], a.r[(i + shift) % m]);
            prop_assert!(x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()));
        }
    }

    #[test]
    fn ns5_commutes_with_transpose(v in matrix(8, 12)) {
        let c = NsCoefficients::default();
        let a = newton_schulz5(&v.transpose(), &c);
        let b = newton_schulz5(&v, &c).transpose();
        prop_assert!(close(&a, &b, 1e-10));
    }
}
