//! Property tests of the numerical core: orthogonality of the Hermite
//! family, expansion round trips, representation agreement, quadrature
//! exactness and invariances of the model maps.

use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ssi_lab::hermite::*;
use ssi_lab::models::*;
use ssi_lab::quadrature::*;
use ssi_lab::sgd::{spherical_step, WeightGrad};

#[test]
fn hermite_orthogonality_up_to_six() {
    // E[He_j He_k] = δ_jk·k! under the 17-node rule, which integrates
    // degree 12 exactly
    let rule = gh_rule(17).unwrap();
    let mut fact = [1.0f64; 7];
    for k in 1..=6 {
        fact[k] = fact[k - 1] * k as f64;
    }
    for j in 0..=6usize {
        for k in 0..=6usize {
            let est: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(x, w)| w * hermite_poly(j, *x) * hermite_poly(k, *x))
                .sum();
            let expect = if j == k { fact[k] } else { 0.0 };
            assert!(
                (est - expect).abs() < 1e-8,
                "E[He_{j}·He_{k}] = {est}, expected {expect}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Reconstructing a random degree ≤ 6 polynomial from its 1D Hermite
    /// coefficients reproduces it pointwise.
    #[test]
    fn hermite_1d_round_trip(coeffs in proptest::collection::vec(-3.0f64..3.0, 1..=7)) {
        let eval = |x: f64| -> f64 {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * hermite_poly(k, x))
                .sum()
        };
        let k_max = coeffs.len() - 1;
        let got = hermite_coeffs_1d(eval, k_max, 24).unwrap();
        // coefficients match ...
        for (k, c) in coeffs.iter().enumerate() {
            prop_assert!((got[k] - c).abs() < 1e-8, "c_{k}: {} vs {c}", got[k]);
        }
        // ... and the reconstruction matches on sample points
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            let rec: f64 = got
                .iter()
                .enumerate()
                .map(|(k, c)| c * hermite_poly(k, x))
                .sum();
            prop_assert!((rec - eval(x)).abs() < 1e-8);
        }
    }

    /// Dense and odeco representations agree on contractions and norms.
    #[test]
    fn odeco_dense_agreement(
        lam1 in -4.0f64..4.0,
        lam2 in -4.0f64..4.0,
        angle in 0.0f64..std::f64::consts::PI,
        order in 1usize..=4,
    ) {
        let v1 = vec![angle.cos(), angle.sin()];
        let v2 = vec![-angle.sin(), angle.cos()];
        let od = HermiteTensor::odeco(order, 2, vec![(lam1, v1), (lam2, v2)]).unwrap();
        let dense = od.densify().unwrap();
        let tol = if order <= 2 { 1e-10 } else { 1e-6 };
        prop_assert!((od.contract_all_ones() - dense.contract_all_ones()).abs() < 1e-10);
        prop_assert!(
            (od.operator_norm() - dense.operator_norm()).abs()
                < tol * (1.0 + od.operator_norm())
        );
        // entry-level agreement
        let m = [0.3, -0.7];
        prop_assert!((od.contract_vector_power(&m) - dense.contract_vector_power(&m)).abs() < 1e-10);
    }

    /// Tensor-product quadrature integrates random low-degree monomial
    /// sums exactly against the standard Gaussian in up to 3 variables.
    #[test]
    fn polynomial_exactness(
        exps in proptest::collection::vec((0usize..=3, 0usize..=2, 0usize..=2), 1..4),
        coefs in proptest::collection::vec(-2.0f64..2.0, 4),
    ) {
        let p = 3;
        let rule = gh_rule(7).unwrap(); // exact to degree 13
        let spec = GaussianSpec::new(Array1::zeros(p), Array2::eye(p)).unwrap();
        let f = |x: &[f64]| -> f64 {
            exps.iter()
                .zip(&coefs)
                .map(|((a, b, c), coef)| coef * x[0].powi(*a as i32) * x[1].powi(*b as i32) * x[2].powi(*c as i32))
                .sum()
        };
        let quad = gaussian_expectation_1(f, &spec, &rule).unwrap();
        // symbolic moments: E[x^k] = (k-1)!! for even k, 0 for odd
        let moment = |k: usize| -> f64 {
            if k % 2 == 1 { 0.0 } else {
                let mut m = 1.0;
                let mut j = k as i64 - 1;
                while j >= 1 { m *= j as f64; j -= 2; }
                m
            }
        };
        let exact: f64 = exps
            .iter()
            .zip(&coefs)
            .map(|((a, b, c), coef)| coef * moment(*a) * moment(*b) * moment(*c))
            .sum();
        prop_assert!((quad - exact).abs() < 1e-8 * (1.0 + exact.abs()), "{quad} vs {exact}");
    }

    /// Row softmax is invariant under per-row constant shifts.
    #[test]
    fn softmax_shift_invariance(
        scores in proptest::collection::vec(-3.0f64..3.0, 9),
        shifts in proptest::collection::vec(-5.0f64..5.0, 3),
    ) {
        let l = 3;
        let mut shifted = scores.clone();
        for i in 0..l {
            for j in 0..l {
                shifted[i * l + j] += shifts[i];
            }
        }
        let mut a = vec![0.0; 9];
        let mut b = vec![0.0; 9];
        softmax_rows(&scores, l, &mut a);
        softmax_rows(&shifted, l, &mut b);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    /// The spherical step preserves the norm constraint to 1e-9 for any
    /// gradient and step size.
    #[test]
    fn spherical_step_preserves_norms(
        seed in 0u64..1000,
        gamma in 1e-4f64..10.0,
        untied in proptest::bool::ANY,
    ) {
        let d = 40;
        let l = 3;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let state = if untied {
            WeightState::sample_untied(l, d, &mut rng)
        } else {
            WeightState::sample_tied(d, &mut rng)
        };
        let grad = if untied {
            WeightGrad::Untied(Array2::from_shape_fn((l, d), |_| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            }))
        } else {
            WeightGrad::Tied(Array1::from_shape_fn(d, |_| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            }))
        };
        let next = spherical_step(&state, &grad, gamma, 0).unwrap();
        prop_assert!(next.norm_defect() < 1e-9, "defect {}", next.norm_defect());
    }

    /// Even link functions have an even sequence information exponent and
    /// zero odd-order coefficients.
    #[test]
    fn sie_parity_for_even_targets(order in 1usize..=2, l in 2usize..=3) {
        let k = 2 * order; // even Hermite order
        let part = move |x: f64| hermite_poly(k, x);
        let parts: Vec<&dyn Fn(f64) -> f64> = (0..l).map(|_| &part as _).collect();
        let exp = separable_expansion(&parts, 2 * k, 24).unwrap();
        for odd in (1..=2 * k).step_by(2) {
            prop_assert!(exp.coefficient(odd).unwrap().max_abs_entry() < 1e-10);
        }
        match sequence_information_exponent(&exp, None) {
            Sie::Order(s) => prop_assert!(s % 2 == 0, "SIE {s} not even"),
            Sie::BeyondTruncation => prop_assert!(false, "target has mass within truncation"),
        }
    }
}

#[test]
fn reduction_adjoint_identity() {
    // ⟨adjoint(u), M⟩ = ⟨u, apply(M)⟩ for every reduction map
    let l = 3;
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let reds = [
        ReductionMap::Trace,
        ReductionMap::FullMatrix,
        ReductionMap::Bilinear {
            left: array![0.3, -1.0, 0.5],
            right: array![1.2, 0.1, -0.4],
        },
    ];
    for red in &reds {
        let k = red.out_dim(l);
        for _ in 0..20 {
            let m: Vec<f64> = (0..l * l)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let u: Vec<f64> = (0..k)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let mut applied = vec![0.0; k];
            red.apply(&m, l, &mut applied);
            let mut adj = vec![0.0; l * l];
            red.adjoint(&u, l, &mut adj);
            let lhs: f64 = adj.iter().zip(&m).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&applied).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12, "adjoint identity broken");
        }
    }
}

#[test]
fn quadrature_monte_carlo_agreement_on_mixture_loss() {
    // the §-style loss integrand at random interior points
    use ssi_lab::landscape::{LossSurface, SurfaceSpec};
    let surface = LossSurface::new(SurfaceSpec::positional_semantic(0.42, 0.85, 17)).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    for trial in 0..20 {
        let r: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        let theta: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        let radius = 0.9 * (r.abs() % 1.0);
        let (e, m) = (radius * theta.sin(), radius * theta.cos());
        let quad = surface.population_loss(e, m).unwrap();
        let (mc, se) = surface.mc_loss(e, m, 200_000, 100 + trial).unwrap();
        assert!(
            (quad - mc).abs() < 5.0 * se.max(1e-9),
            "trial {trial} at ({e:.3},{m:.3}): {quad} vs {mc} ± {se}"
        );
    }
}
