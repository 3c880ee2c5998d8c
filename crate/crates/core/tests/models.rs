mod oracles;

use oracles::{central_diff, central_grad};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqn_core::direction::McEstimate;
use sqn_core::nalgebra::{DMatrix, DVector};
use sqn_core::oracle::{
    estimate_gradient_noise, toy1d_f, toy1d_grad, toy1d_hess, AnalyticOracle, NoisyOracle, Toy1d,
};
use sqn_core::ssm::{
    bootstrap_pf, kalman_loglik, kalman_loglik_grad, simulate, to_unconstrained, LgssModel,
    LgssOracle, NlBenchModel, NlBenchOracle, ParticleFilterConfig, ScoreMethod,
};
use sqn_core::streams::{SeedTree, StreamId};

fn lgss_series(seed: u64, n: usize) -> Vec<f64> {
    simulate(
        &LgssModel::default(),
        &LgssModel::TRUE_PARAMS,
        n,
        &mut SeedTree::new(seed).stream(StreamId::DATA),
    )
}

#[test]
fn particle_likelihood_is_unbiased() {
    let model = LgssModel::default();
    let theta = LgssModel::TRUE_PARAMS;
    let y = lgss_series(8, 50);
    let exact = kalman_loglik(&model, &theta, &y).unwrap();
    let cfg = ParticleFilterConfig::default();
    let tree = SeedTree::new(17);
    // likelihood ratios against the exact value keep the numbers O(1)
    let ratios = (0..500).map(|i| {
        let mut rng = tree.child(i).stream(StreamId::PARTICLE_FILTER);
        let est = bootstrap_pf(&model, &theta, &y, &cfg, &mut rng).unwrap();
        (est.loglik - exact).exp()
    });
    let mc = McEstimate::from_samples(ratios);
    assert!(
        mc.within(1.0, 3.0),
        "mean ratio {} (se {})",
        mc.mean,
        mc.std_err
    );
}

#[test]
fn toy_derivatives_match_finite_differences() {
    for i in 0..=240 {
        let x = -5.0 + 0.05 * i as f64;
        let g = central_diff(toy1d_f, x, 1e-5);
        assert!(
            (g - toy1d_grad(x)).abs() < 1e-6,
            "x = {x}: {g} vs {}",
            toy1d_grad(x)
        );
        let h = central_diff(toy1d_grad, x, 1e-5);
        assert!(
            (h - toy1d_hess(x)).abs() < 1e-5,
            "x = {x}: {h} vs {}",
            toy1d_hess(x)
        );
    }
}

#[test]
fn lgss_oracle_gradient_matches_finite_differences() {
    let model = LgssModel::default();
    let oracle = LgssOracle::with_noise(model, lgss_series(4, 100), 0.0, 0.0);
    let u = DVector::from_vec(to_unconstrained(&model, &[0.85, 1.1, 0.12, 0.45]));
    let (_, g) = oracle.evaluate(&u).unwrap();
    let fd = central_grad(
        |v| oracle.evaluate(&DVector::from_column_slice(v)).unwrap().0,
        u.as_slice(),
        1e-6,
    );
    for i in 0..4 {
        assert!(
            (fd[i] - g[i]).abs() < 1e-6 * g[i].abs().max(1.0),
            "component {i}"
        );
    }
}

#[test]
fn likelihood_prefers_the_true_parameters() {
    let model = LgssModel::default();
    let perturbed: Vec<f64> = LgssModel::TRUE_PARAMS.iter().map(|v| v + 0.2).collect();
    let mut gap = 0.0;
    for seed in 0..20 {
        let y = lgss_series(100 + seed, 100);
        gap += kalman_loglik(&model, &LgssModel::TRUE_PARAMS, &y).unwrap()
            - kalman_loglik(&model, &perturbed, &y).unwrap();
    }
    assert!(gap > 0.0);
}

#[test]
fn lgss_oracle_noise_moments() {
    let model = LgssModel::default();
    let oracle = LgssOracle::new(model, lgss_series(5, 100));
    let u = DVector::from_vec(to_unconstrained(&model, &LgssModel::TRUE_PARAMS));
    let exact = oracle.exact_cost(&u).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 10_000;
    let costs: Vec<f64> = (0..draws)
        .map(|_| oracle.cost(&u, &mut rng) - exact)
        .collect();
    let mean = costs.iter().sum::<f64>() / draws as f64;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    // sd of a normal sample variance is sqrt(2 / n)
    assert!(mean.abs() < 4.0 / (draws as f64).sqrt());
    assert!(
        (var - 1.0).abs() < 4.0 * (2.0 / draws as f64).sqrt(),
        "cost variance {var}"
    );

    let cov = estimate_gradient_noise(&oracle, &u, draws, &mut rng).unwrap();
    let dev = (cov - DMatrix::identity(4, 4)).amax();
    assert!(
        dev < 4.0 * (2.0 / draws as f64).sqrt(),
        "gradient covariance deviation {dev}"
    );
}

#[test]
fn analytic_oracle_noise_moments() {
    let r = DMatrix::from_row_slice(1, 1, &[100.0]);
    let oracle = AnalyticOracle::new(Toy1d, 0.7, 4.0, r).unwrap();
    let x = DVector::from_element(1, 1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 10_000;
    let bias =
        McEstimate::from_samples((0..draws).map(|_| oracle.cost(&x, &mut rng) - toy1d_f(1.5)));
    assert!(bias.within(0.7, 4.0), "{bias:?}");
    let cov = estimate_gradient_noise(&oracle, &x, draws, &mut rng).unwrap()[(0, 0)];
    assert!(
        (cov / 100.0 - 1.0).abs() < 4.0 * (2.0 / draws as f64).sqrt(),
        "gradient variance {cov}"
    );
}

fn nl_setup() -> (NlBenchModel, Vec<f64>) {
    let model = NlBenchModel::default();
    let y = simulate(
        &model,
        &NlBenchModel::TRUE_PARAMS,
        100,
        &mut SeedTree::new(1).stream(StreamId::DATA),
    );
    (model, y)
}

#[test]
fn more_particles_reduce_loglik_variance() {
    let (model, y) = nl_setup();
    let theta = [0.5, 25.0, 8.0, 0.05, 0.01, 0.1];
    let spread = |m: usize| {
        let cfg = ParticleFilterConfig {
            particles: m,
            ..Default::default()
        };
        let tree = SeedTree::new(m as u64);
        let ll: Vec<f64> = (0..100)
            .map(|i| {
                let mut rng = tree.child(i).stream(StreamId::PARTICLE_FILTER);
                bootstrap_pf(&model, &theta, &y, &cfg, &mut rng)
                    .unwrap()
                    .loglik
            })
            .collect();
        let mean = ll.iter().sum::<f64>() / ll.len() as f64;
        ll.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ll.len() - 1) as f64
    };
    assert!(spread(500) < spread(50));
}

#[test]
fn score_at_truth_averages_to_zero_over_datasets() {
    // E_y[∇ log p(y | θ*)] = 0, so fresh data for every run
    let model = NlBenchModel::default();
    let u = DVector::from_vec(to_unconstrained(&model, &NlBenchModel::TRUE_PARAMS));
    let cfg = ParticleFilterConfig {
        score: ScoreMethod::NoiseSpace,
        ..Default::default()
    };
    let tree = SeedTree::new(2);
    let scores: Vec<DVector<f64>> = (0..200)
        .map(|i| {
            let child = tree.child(i);
            let y = simulate(
                &model,
                &NlBenchModel::TRUE_PARAMS,
                100,
                &mut child.stream(StreamId::DATA),
            );
            let oracle = NlBenchOracle::new(model, y, cfg);
            oracle.grad(&u, &mut child.stream(StreamId::PARTICLE_FILTER))
        })
        .collect();
    for k in 0..4 {
        let mc = McEstimate::from_samples(scores.iter().map(|g| g[k]));
        assert!(
            mc.within(0.0, 4.0),
            "component {k}: mean {} se {}",
            mc.mean,
            mc.std_err
        );
    }
}

#[test]
fn kalman_gradient_is_consistent_with_finite_differences_near_truth() {
    let model = LgssModel::default();
    let y = lgss_series(12, 100);
    let theta = [0.88, 0.95, 0.11, 0.52];
    let (_, g) = kalman_loglik_grad(&model, &theta, &y).unwrap();
    let fd = central_grad(|t| kalman_loglik(&model, t, &y).unwrap(), &theta, 1e-6);
    for i in 0..4 {
        assert!(
            (fd[i] - g[i]).abs() < 1e-6 * g[i].abs().max(1.0),
            "component {i}"
        );
    }
}
