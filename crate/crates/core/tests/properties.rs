use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqn_core::direction::regularized_direction;
use sqn_core::gp::{GpPrior, HessianGp, MeasurementMode, ObservationPair};
use sqn_core::linesearch::{schedule_initial, stochastic_backtrack, LineSearchConfig};
use sqn_core::nalgebra::{DMatrix, DVector};
use sqn_core::oracle::{AnalyticOracle, Quadratic};
use sqn_core::ssm::{to_natural, to_unconstrained, LgssModel, NlBenchModel};
use sqn_core::symtools::{
    dbar, elimination_matrix, half_dim, unvech, vec, vech, DuplicationMatrix,
};

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0..10.0f64, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.transpose()) * 0.5
    })
}

fn sized_symmetric() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=5).prop_flat_map(symmetric)
}

fn vector(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(lo..hi, n).prop_map(DVector::from_vec)
}

proptest! {
    #[test]
    fn vech_roundtrip(a in sized_symmetric()) {
        prop_assert_eq!(unvech(&vech(&a).unwrap()), a);
    }

    #[test]
    fn duplication_and_elimination(a in sized_symmetric()) {
        let n = a.nrows();
        let h = vech(&a).unwrap();
        let d = DuplicationMatrix::new(n);
        prop_assert_eq!(d.matrix() * h.as_vector(), vec(&a));
        prop_assert_eq!(elimination_matrix(n) * vec(&a), h.as_vector().clone());
    }

    #[test]
    fn dbar_is_matrix_vector_product((a, s) in (1usize..=5).prop_flat_map(|n| (symmetric(n), vector(n, -5.0, 5.0)))) {
        let n = a.nrows();
        let out = dbar(&s, &DuplicationMatrix::new(n)).unwrap() * vech(&a).unwrap().as_vector();
        let direct = &a * &s;
        prop_assert!((out - direct).amax() <= 1e-12 * (1.0 + a.amax() * s.amax()));
        prop_assert_eq!(half_dim(n), vech(&a).unwrap().as_vector().len());
    }

    #[test]
    fn shifted_spectrum_is_bounded_below(
        (h, g) in (1usize..=5).prop_flat_map(|n| (symmetric(n), vector(n, -5.0, 5.0))),
        eps in 1e-4..1.0f64,
    ) {
        let d = regularized_direction(&h, &g, eps).unwrap();
        let n = h.nrows();
        let shifted = &h + DMatrix::identity(n, n) * d.lambda;
        let min_eig = shifted.symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= eps - 1e-9 * (1.0 + h.amax()), "{} < {}", min_eig, eps);
        prop_assert!(d.b.clone().cholesky().is_some());
    }

    #[test]
    fn direction_never_ascends(
        (h, g) in (1usize..=5).prop_flat_map(|n| (symmetric(n), vector(n, -5.0, 5.0))),
    ) {
        let d = regularized_direction(&h, &g, 1e-3).unwrap();
        let slope = d.p.dot(&g);
        prop_assert!(slope <= 0.0);
        if g.iter().any(|&v| v != 0.0) {
            prop_assert!(slope < 0.0);
        }
        let zero = DVector::zeros(g.len());
        prop_assert_eq!(regularized_direction(&h, &zero, 1e-3).unwrap().p.dot(&zero), 0.0);
    }

    #[test]
    fn line_search_step_on_the_backtracking_grid(
        k in 1usize..150,
        seed in any::<u64>(),
        x0 in -5.0..5.0f64,
        noise in 0.0..4.0f64,
    ) {
        let cfg = LineSearchConfig { c: 0.3, rho: 0.5, xi: 10.0, tau: 40 };
        let oracle = AnalyticOracle::new(
            Quadratic::new(DMatrix::from_element(1, 1, 2.0)),
            0.0,
            noise,
            DMatrix::zeros(1, 1),
        ).unwrap();
        let x = DVector::from_element(1, x0);
        let g = DVector::from_element(1, 2.0 * x0);
        let p = -&g;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = stochastic_backtrack(k, &x, &p, &g, x0 * x0, &oracle, &cfg, &mut rng);
        let a0 = schedule_initial(k, cfg.xi);
        let budget = cfg.budget(k);
        prop_assert!(res.trials <= budget);
        let j = if res.satisfied { res.trials.saturating_sub(1) } else { res.trials };
        prop_assert_eq!(res.alpha, a0 * cfg.rho.powi(j as i32));
        prop_assert!(res.alpha >= a0 * cfg.rho.powi(budget as i32));
    }

    #[test]
    fn posterior_never_exceeds_prior_covariance(
        pts in prop::collection::vec((vector(2, -2.0, 2.0), vector(2, -1.0, 1.0), vector(2, -3.0, 3.0)), 1..5),
        x in vector(2, -2.0, 2.0),
        full in any::<bool>(),
    ) {
        let mode = if full { MeasurementMode::Full } else { MeasurementMode::Simplified };
        let prior = GpPrior::isotropic(2, 5.0, 0.8, 1.0).unwrap();
        let mut gp = HessianGp::new(prior, DMatrix::identity(2, 2) * 0.3, 2, mode).unwrap();
        for (i, (start, step, y)) in pts.iter().enumerate() {
            gp.push_observation(ObservationPair::new(i, start.clone(), start + step, y.clone()).unwrap()).unwrap();
            prop_assert_eq!(gp.window_len(), (i + 1).min(3));
        }
        let post = gp.posterior(&x).unwrap();
        let reduction = gp.prior().kernel.output_cov() - &post.sigma;
        let min_eig = reduction.symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-9, "min eigenvalue {}", min_eig);
        prop_assert_eq!(post.sigma.clone(), post.sigma.transpose());
    }

    #[test]
    fn variance_transform_roundtrip(
        a in -0.99..0.99f64,
        c in 0.1..3.0f64,
        q in 1e-6..10.0f64,
        r in 1e-6..10.0f64,
    ) {
        let model = LgssModel::default();
        let theta = [a, c, q, r];
        let back = to_natural(&model, &to_unconstrained(&model, &theta));
        for (x, y) in theta.iter().zip(&back) {
            prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs());
        }
        let nl = NlBenchModel::default();
        let u = [0.4, 20.0, 7.0, 0.04, q.ln(), r.ln()];
        prop_assert_eq!(to_unconstrained(&nl, &to_natural(&nl, &u)), u.to_vec());
    }
}
