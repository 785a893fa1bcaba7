use std::f64::consts::PI;

use nalgebra::DMatrix;
use ncd_core::depth::{bochner_check, depth, is_regularized, MinSearchConfig};
use ncd_core::scaling::lambda_map;
use ncd_core::{char_normal, regularize, CharPoly, CoherentPoint, FockOperator, C64};
use proptest::prelude::*;

fn density(dims: Vec<usize>, raw: &[f64]) -> FockOperator {
    let n: usize = dims.iter().product();
    let g = DMatrix::from_fn(n, n, |r, c| C64::new(raw[2 * (r * n + c)], raw[2 * (r * n + c) + 1]));
    let m = &g * g.adjoint();
    let tr = m.trace();
    let m = m / tr;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    FockOperator::new(dims, m).unwrap()
}

fn single_mode() -> impl Strategy<Value = FockOperator> {
    (2usize..6)
        .prop_flat_map(|d| prop::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |raw| density(vec![d], &raw)))
}

fn two_mode() -> impl Strategy<Value = FockOperator> {
    (2usize..4, 2usize..4).prop_flat_map(|(a, b)| {
        prop::collection::vec(-1.0f64..1.0, 2 * (a * b).pow(2)).prop_map(move |raw| density(vec![a, b], &raw))
    })
}

fn point(modes: usize) -> impl Strategy<Value = CoherentPoint> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), modes)
        .prop_map(|v| CoherentPoint(v.into_iter().map(|(re, im)| C64::new(re, im)).collect()))
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_transpose_is_an_involution(rho in two_mode(), mode in 0usize..2) {
        let back = rho.partial_transpose(mode).unwrap().partial_transpose(mode).unwrap();
        prop_assert_eq!(back.matrix(), rho.matrix());
    }

    #[test]
    fn eigendecomposition_reconstructs(rho in two_mode()) {
        let spec = rho.eigen_hermitian().unwrap();
        prop_assert!(max_diff(&spec.reconstruct(), rho.matrix()) < 1e-12);
        let blocked = rho.partial_transpose(1).unwrap().eigenvalues_blocked().unwrap();
        let dense = rho.partial_transpose(1).unwrap().eigen_hermitian().unwrap().values;
        for (x, y) in blocked.iter().zip(&dense) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_trace_multiplies(a in single_mode(), b in single_mode(), wa in 0.1f64..3.0, wb in 0.1f64..3.0) {
        let t = a.scale(wa).tensor(&b.scale(wb)).unwrap().trace();
        prop_assert!((t - C64::new(wa * wb, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn scaling_preserves_trace_and_composes(rho in single_mode(), a in 0.3f64..2.0, b in 0.3f64..2.0) {
        let once = lambda_map(&rho, a).unwrap();
        prop_assert!((once.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        let twice = lambda_map(&once, b).unwrap();
        let direct = lambda_map(&rho, a * b).unwrap();
        prop_assert!(max_diff(twice.matrix(), direct.matrix()) < 1e-10);
    }

    #[test]
    fn contraction_keeps_states_positive(rho in two_mode(), a in 0.0f64..1.0) {
        let mapped = lambda_map(&rho, a).unwrap();
        prop_assert!(mapped.eigen_hermitian().unwrap().min() > -1e-12);
    }

    #[test]
    fn regularisation_is_a_semigroup(rho in two_mode(), s in 0.05f64..1.0, t in 0.05f64..1.0, z in point(2)) {
        let split = regularize(&rho, s).unwrap().convolve_further(t).unwrap().eval(&z).unwrap();
        let direct = regularize(&rho, s + t).unwrap().eval(&z).unwrap();
        prop_assert!((split - direct).abs() < 1e-9);
    }

    #[test]
    fn scaling_commutes_with_regularisation(rho in single_mode(), a in 0.3f64..2.0, tau in 0.1f64..1.5, z in point(1)) {
        let lhs = regularize(&lambda_map(&rho, a).unwrap(), a * a * tau).unwrap().eval(&z).unwrap();
        let rhs = regularize(&rho, tau).unwrap().dilate(a).unwrap().eval(&z).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn husimi_level_is_nonnegative(rho in two_mode(), z in point(2)) {
        prop_assert!(regularize(&rho, 1.0).unwrap().eval(&z).unwrap() > -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Direct quadrature of the damped characteristic function.
    #[test]
    fn regularisation_matches_fourier_quadrature(rho in single_mode(), tau in 0.6f64..1.5, z in point(1)) {
        let poly = CharPoly::from_operator(&rho);
        let (h, half) = (0.05, 9.0);
        let n = (2.0 * half / h) as i64;
        let zc = z.0[0];
        let mut sum = C64::new(0.0, 0.0);
        for i in 0..=n {
            for j in 0..=n {
                let beta = C64::new(-half + h * i as f64, -half + h * j as f64);
                let chi = poly.eval(&CoherentPoint::single(beta)).unwrap();
                let phase = zc * beta.conj() - zc.conj() * beta;
                sum += chi * (phase - tau * beta.norm_sqr()).exp();
            }
        }
        let quad = sum * h * h / (PI * PI);
        let exact = regularize(&rho, tau).unwrap().eval(&z).unwrap();
        prop_assert!(quad.im.abs() < 1e-9);
        prop_assert!((quad.re - exact).abs() < 1e-9, "{} vs {}", quad.re, exact);
    }

    #[test]
    fn characteristic_polynomial_matches_trace_formula(rho in two_mode(), beta in point(2)) {
        let direct = char_normal(&rho, &beta).unwrap();
        let poly = CharPoly::from_operator(&rho).eval(&beta).unwrap();
        prop_assert!((direct - poly).norm() < 1e-9 * (1.0 + direct.norm()));
    }

    #[test]
    fn positivity_is_monotone_in_tau(rho in single_mode(), tau in 0.05f64..1.0, step in 0.01f64..0.5) {
        let cfg = MinSearchConfig::default();
        let lo = is_regularized(&rho, tau, &cfg).unwrap();
        let hi = is_regularized(&rho, tau + step, &cfg).unwrap();
        prop_assert!(!lo.regularized || hi.regularized);
        if lo.regularized {
            // sampled Bochner matrices of a regularised state are positive
            prop_assert!(bochner_check(&rho, tau, 32, 7).unwrap());
        }
    }

    #[test]
    fn product_depth_is_the_larger_marginal(a in single_mode(), b in single_mode()) {
        let cfg = MinSearchConfig::default();
        let (da, db) = (depth(&a, &cfg).unwrap().tau_m, depth(&b, &cfg).unwrap().tau_m);
        let joint = depth(&a.tensor(&b).unwrap(), &cfg).unwrap().tau_m;
        prop_assert!((joint - da.max(db)).abs() < 2.0 * cfg.bisection_tol, "{joint} vs {da}, {db}");
    }
}
