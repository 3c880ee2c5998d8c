mod oracles;

use oracles::{joint_conditioning, SecantPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqn_core::gp::{GpPrior, HessianGp, MeasurementMode, ObservationPair, PriorMean, SeKernel};
use sqn_core::nalgebra::{DMatrix, DVector};
use sqn_core::symtools::{half_dim, SymVec};

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, scale: f64, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a * a.transpose()) * (scale / n as f64) + DMatrix::identity(n, n) * floor
}

struct Instance {
    mu: DVector<f64>,
    m: DMatrix<f64>,
    v: DMatrix<f64>,
    r: DMatrix<f64>,
    x: DVector<f64>,
    pairs: Vec<SecantPair>,
}

fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=3);
    let dh = half_dim(n);
    let w = rng.random_range(1..=4);
    let first = rng.random_range(0..20);
    let pairs = (0..w)
        .map(|i| {
            let start = uniform_vec(rng, n, -2.0, 2.0);
            let end = &start + uniform_vec(rng, n, -1.0, 1.0);
            SecantPair {
                index: first + i,
                start,
                end,
                y: uniform_vec(rng, n, -3.0, 3.0),
            }
        })
        .collect();
    Instance {
        mu: uniform_vec(rng, dh, -2.0, 2.0),
        m: random_spd(rng, dh, 4.0, 0.5),
        v: random_spd(rng, n, 1.0, 0.2),
        r: random_spd(rng, n, 0.5, 0.1),
        x: uniform_vec(rng, n, -2.0, 2.0),
        pairs,
    }
}

fn library_gp(inst: &Instance, mode: MeasurementMode) -> HessianGp {
    let prior = GpPrior {
        mean: PriorMean::Constant(SymVec::new(inst.mu.clone()).unwrap()),
        kernel: SeKernel::new(inst.m.clone(), inst.v.clone()).unwrap(),
    };
    let mut gp = HessianGp::new(prior, inst.r.clone(), 3, mode).unwrap();
    for p in &inst.pairs {
        gp.push_observation(
            ObservationPair::new(p.index, p.start.clone(), p.end.clone(), p.y.clone()).unwrap(),
        )
        .unwrap();
    }
    gp
}

#[test]
fn simplified_posterior_matches_joint_gaussian_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let inst = instance(&mut rng);
        let gp = library_gp(&inst, MeasurementMode::Simplified);
        let post = gp.posterior(&inst.x).unwrap();
        let (phi, sigma) =
            joint_conditioning(&inst.mu, &inst.m, &inst.v, &inst.r, &inst.x, &inst.pairs);
        worst = worst
            .max((&post.phi - phi).amax())
            .max((&post.sigma - sigma).amax());
    }
    assert!(worst < 1e-10, "max deviation {worst:e}");
}

#[test]
fn full_mode_collapses_to_simplified_on_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let mut inst = instance(&mut rng);
        for p in &mut inst.pairs {
            p.end = p.start.clone();
        }
        let full = library_gp(&inst, MeasurementMode::Full);
        let simple = library_gp(&inst, MeasurementMode::Simplified);
        assert_eq!(full.gram(), simple.gram());
        assert_eq!(
            full.posterior(&inst.x).unwrap(),
            simple.posterior(&inst.x).unwrap()
        );
    }
}

#[test]
fn gram_converges_when_doubling_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let inst = instance(&mut rng);
        let coarse = library_gp(&inst, MeasurementMode::Full)
            .with_quad_nodes(16)
            .unwrap();
        let fine = library_gp(&inst, MeasurementMode::Full)
            .with_quad_nodes(32)
            .unwrap();
        let delta = (coarse.gram() - fine.gram()).amax();
        assert!(delta < 1e-8, "gram delta {delta:e}");
        let dp =
            (coarse.posterior(&inst.x).unwrap().phi - fine.posterior(&inst.x).unwrap().phi).amax();
        assert!(dp < 1e-8, "posterior delta {dp:e}");
    }
}

fn recovery_error(mode: MeasurementMode) -> f64 {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, -0.5, 1.0, 3.0, 0.2, -0.5, 0.2, 2.0]);
    let n = 3;
    let prior = GpPrior::isotropic(n, 10.0, 1e-8, 1.0).unwrap();
    let mut gp = HessianGp::new(prior, DMatrix::identity(n, n) * 1e-12, 5, mode).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = uniform_vec(&mut rng, n, -1.0, 1.0);
    for i in 0..6 {
        let next = &x + uniform_vec(&mut rng, n, -1.0, 1.0);
        let y = &a * (&next - &x);
        gp.push_observation(ObservationPair::new(i, x.clone(), next.clone(), y).unwrap())
            .unwrap();
        x = next;
    }
    let h = gp.hessian_mean(&x).unwrap();
    (&h - &a).norm() / a.norm()
}

#[test]
fn recovers_quadratic_hessian_from_six_pairs() {
    for mode in [MeasurementMode::Full, MeasurementMode::Simplified] {
        let err = recovery_error(mode);
        assert!(err < 1e-6, "{mode:?}: relative error {err:e}");
    }
}
