use ldrate::GridPath;
use proptest::prelude::*;

fn path_strategy() -> impl Strategy<Value = GridPath> {
    (1usize..12, 1usize..3, 0.1f64..4.0).prop_flat_map(|(steps, dim, t_end)| {
        prop::collection::vec(-5.0f64..5.0, (steps + 1) * dim)
            .prop_map(move |nodes| GridPath::new(t_end, steps, dim, nodes).unwrap())
    })
}

proptest! {
    #[test]
    fn refine_preserves_path(path in path_strategy(), factor in 1usize..6, frac in 0.0f64..=1.0) {
        let fine = path.refine(factor).unwrap();
        prop_assert_eq!(fine.start(), path.start());
        prop_assert_eq!(fine.end(), path.end());
        prop_assert!((fine.h1_seminorm() - path.h1_seminorm()).abs() <= 1e-12 * path.h1_seminorm().max(1.0));
        for n in 0..=path.steps() {
            let a = path.interpolate(path.time(n)).unwrap();
            let b = fine.interpolate(path.time(n)).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
        let t = frac * path.t_end();
        let a = path.interpolate(t).unwrap();
        let b = fine.interpolate(t).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-11);
        }
    }

    #[test]
    fn holder_bound(path in path_strategy(), s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        let (s, t) = (s * path.t_end(), t * path.t_end());
        let a = path.interpolate(s).unwrap();
        let b = path.interpolate(t).unwrap();
        let lhs: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum();
        let rhs = (t - s) * energy_on(&path, s, t);
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }
}

/// `∫ₛᵗ |φ'|²` summed over the overlap with each grid cell.
fn energy_on(path: &GridPath, s: f64, t: f64) -> f64 {
    let d = path.dim();
    (0..path.steps())
        .map(|n| {
            let (lo, hi) = (path.time(n).max(s), path.time(n + 1).min(t));
            if hi <= lo {
                return 0.0;
            }
            let slope2: f64 = (0..d)
                .map(|i| ((path.node(n + 1)[i] - path.node(n)[i]) / path.step()).powi(2))
                .sum();
            slope2 * (hi - lo)
        })
        .sum()
}

#[test]
fn holder_bound_exact_on_grid_times() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let steps = rng.random_range(1..20);
        let nodes = (0..=steps).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = GridPath::new(1.0, steps, 1, nodes).unwrap();
        let i = rng.random_range(0..=steps);
        let j = rng.random_range(i..=steps);
        let lhs = (p.node(j)[0] - p.node(i)[0]).powi(2);
        assert!(lhs <= (p.time(j) - p.time(i)) * p.energy_between(i, j) + 1e-12);
    }
}

#[test]
fn collinear_midpoints_leave_seminorm_unchanged() {
    let p = GridPath::new(2.0, 3, 2, vec![0.0, 0.0, 1.0, -1.0, 0.5, 2.0, 3.0, 3.0]).unwrap();
    let r = p.refine(2).unwrap();
    assert!((r.h1_seminorm() - p.h1_seminorm()).abs() < 1e-12);
    let back = r.resample(3).unwrap();
    for (u, v) in back.nodes().iter().zip(p.nodes()) {
        assert!((u - v).abs() < 1e-12);
    }
}
