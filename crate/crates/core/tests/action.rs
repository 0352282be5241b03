mod common;

use common::{max_abs, models, random_path};
use ldrate::{
    action_gradient, builtin_model, continuous_action, discrete_action, ActionSpec, GridPath,
    Model, Quadrature,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fd_gradient(spec: &ActionSpec, model: &Model, path: &GridPath, step: f64) -> Vec<f64> {
    let d = path.dim();
    let n = path.steps();
    let mut out = Vec::with_capacity((n - 1) * d);
    for k in d..n * d {
        let bump = |delta: f64| {
            let mut nodes = path.nodes().to_vec();
            nodes[k] += delta;
            let p = GridPath::new(path.t_end(), n, d, nodes).unwrap();
            spec.value(model, &p).unwrap()
        };
        out.push((bump(step) - bump(-step)) / (2.0 * step));
    }
    out
}

fn gradient_error(spec: &ActionSpec, model: &Model, path: &GridPath) -> f64 {
    let g = action_gradient(spec, model, path).unwrap();
    let fd = fd_gradient(spec, model, path, 1e-6);
    let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
    max_abs(&diff) / max_abs(&fd).max(1.0)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for model in models() {
        for _ in 0..10 {
            let path = random_path(&mut rng, model.dim(), 1.0, 8, 1.5);
            for q in [Quadrature::Midpoint, Quadrature::GaussLegendre2, Quadrature::GaussLegendre3] {
                let e = gradient_error(&ActionSpec::Continuous { quadrature: q }, &model, &path);
                assert!(e <= 1e-6, "{} {q:?}: {e}", model.name());
            }
            let theta = rng.random_range(0.0..=1.0);
            for steps in [2, 4, 8] {
                let e = gradient_error(&ActionSpec::discrete(theta, steps), &model, &path);
                assert!(e <= 1e-6, "{} θ={theta} N={steps}: {e}", model.name());
            }
        }
    }
}

#[test]
fn jensen_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for model in models() {
        let d = model.dim();
        for _ in 0..10 {
            let coarse = random_path(&mut rng, d, 1.0, 4, 1.0);
            let theta = rng.random_range(0.0..=1.0);
            let linear = coarse.refine(4).unwrap();
            let base = discrete_action(&model, &linear, theta, 4).unwrap();
            let mut nodes = linear.nodes().to_vec();
            for n in 0..linear.steps() {
                if n % 4 != 0 {
                    for v in &mut nodes[n * d..(n + 1) * d] {
                        *v += rng.random_range(-0.1..0.1);
                    }
                }
            }
            let perturbed = GridPath::new(1.0, 16, d, nodes).unwrap();
            let bumped = discrete_action(&model, &perturbed, theta, 4).unwrap();
            assert!(bumped - base > 1e-12, "{}: {bumped} vs {base}", model.name());
        }
    }
}

#[test]
fn discrete_action_vanishes_on_deterministic_scheme() {
    let ou = builtin_model("ou-additive(-1)").unwrap().model;
    for theta in [0.0, 0.5, 1.0] {
        let h: f64 = 0.25;
        let r = (1.0 - (1.0 - theta) * h) / (1.0 + theta * h);
        let nodes: Vec<f64> = (0..=4).map(|n| 1.5 * r.powi(n)).collect();
        let p = GridPath::new(1.0, 4, 1, nodes).unwrap();
        assert!(discrete_action(&ou, &p, theta, 4).unwrap() < 1e-28);
        let p = p.refine(3).unwrap();
        assert!(discrete_action(&ou, &p, theta, 4).unwrap() < 1e-28);
    }
}

#[test]
fn refinement_converges_for_smooth_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for model in models() {
        let path = random_path(&mut rng, model.dim(), 1.0, 4, 1.0);
        let fine = continuous_action(&model, &path.refine(256).unwrap(), Quadrature::GaussLegendre3).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1, 2, 4, 8] {
            let v = continuous_action(&model, &path.refine(k).unwrap(), Quadrature::GaussLegendre2).unwrap();
            let e = (v - fine).abs();
            assert!(e <= prev * 1.0001 + 1e-13, "{}: {e} after {prev}", model.name());
            prev = e;
        }
        assert!(prev < 1e-3 * fine.max(1.0), "{}: {prev}", model.name());
    }
}

fn sup_gap(model: &Model, paths: &[GridPath], steps: usize) -> f64 {
    paths
        .iter()
        .map(|p| {
            let p = p.resample(steps).unwrap().refine(64).unwrap();
            let a = continuous_action(model, &p, Quadrature::GaussLegendre3).unwrap();
            let b = discrete_action(model, &p, 0.5, steps).unwrap();
            (a - b).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn discrete_and_continuous_actions_agree_as_h_shrinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (name, bound) in [("ou-additive(-1)", 1.0), ("mult-sine", 0.5)] {
        let model = builtin_model(name).unwrap().model;
        let paths: Vec<GridPath> = (0..5).map(|_| random_path(&mut rng, 1, 1.0, 4, 1.0)).collect();
        let steps = [8, 16, 32, 64, 128];
        let gaps: Vec<f64> = steps.iter().map(|&n| sup_gap(&model, &paths, n)).collect();
        // `gap · h^{-bound}` stays bounded
        let scaled: Vec<f64> = steps
            .iter()
            .zip(&gaps)
            .map(|(&n, g)| g * (n as f64).powf(bound))
            .collect();
        assert!(scaled[4] <= 2.0 * scaled[0] + 1e-9, "{name}: {scaled:?}");
        assert!(gaps[4] < gaps[0], "{name}: {gaps:?}");
    }
}

proptest! {
    #[test]
    fn actions_are_nonnegative(
        nodes in prop::collection::vec(-3.0f64..3.0, 9),
        theta in 0.0f64..=1.0,
    ) {
        let path = GridPath::new(2.0, 8, 1, nodes).unwrap();
        for name in ["brownian", "ou-additive(-1)", "mult-sine"] {
            let m = builtin_model(name).unwrap().model;
            prop_assert!(continuous_action(&m, &path, Quadrature::GaussLegendre2).unwrap() >= 0.0);
            prop_assert!(discrete_action(&m, &path, theta, 4).unwrap() >= 0.0);
        }
    }
}
