//! Minimum action method: minimizes `A` or `B_h` over the interior nodes of
//! a grid path with both endpoints pinned.
//!
//! The descent is limited-memory BFGS with Armijo backtracking, falling back
//! to an approximate Wolfe test once value differences reach round-off. The initial
//! inverse Hessian of the two-loop recursion is the inverse of the discrete
//! Dirichlet Laplacian on the path grid (the Hessian of `½∫|φ'|²`), scaled
//! by the usual secant ratio. This makes the iteration count essentially
//! independent of the grid size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{matvec, ActionSpec};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::path::GridPath;

/// Relative rise in the action tolerated by the approximate Wolfe test.
pub const ROUNDOFF_SLACK: f64 = 8.0 * f64::EPSILON;

/// Backtracking line-search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPath {
    StraightLine,
    /// Resampled onto the target grid; its endpoints are overwritten by
    /// `x₀` and `x`.
    UserSupplied(GridPath),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the max-norm of the interior gradient.
    pub gradient_tolerance: f64,
    /// Number of coarse solves (each on a grid half as fine) before the
    /// final one.
    pub continuation_levels: usize,
    pub initial_path: InitialPath,
    pub step_control: StepControl,
    /// Number of secant pairs kept.
    pub memory: usize,
    /// Extra randomly perturbed starts; `0` disables multistart.
    pub multistart: usize,
    pub multistart_seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-9,
            continuation_levels: 3,
            initial_path: InitialPath::StraightLine,
            step_control: StepControl::default(),
            memory: 8,
            multistart: 0,
            multistart_seed: 0,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let sc = &self.step_control;
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Config("gradient_tolerance must be positive".into()));
        }
        if !(sc.shrink > 0.0 && sc.shrink < 1.0) {
            return Err(Error::Config("step shrink factor must lie in (0, 1)".into()));
        }
        if !(sc.sufficient_decrease > 0.0 && sc.sufficient_decrease < 1.0) {
            return Err(Error::Config("sufficient-decrease constant must lie in (0, 1)".into()));
        }
        if self.memory == 0 {
            return Err(Error::Config("secant memory must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub path: GridPath,
    pub value: f64,
    /// Max-norm of the interior gradient at `path`.
    pub gradient_norm: f64,
    /// Iterations spent on the final grid.
    pub iterations: usize,
    pub converged: bool,
    /// H¹ seminorm of the optimal path, reported as a diagnostic.
    pub h1_seminorm: f64,
    /// Action value after each accepted iteration on the final grid,
    /// starting with the initial value.
    pub value_history: Vec<f64>,
}

/// Minimizes the action over paths from `x0` at `t = 0` to `x` at `t = T`
/// on a grid of `path_steps` subintervals.
pub fn minimize_action(
    spec: &ActionSpec,
    model: &Model,
    x0: &[f64],
    x: &[f64],
    t_end: f64,
    path_steps: usize,
    options: &MinimizeOptions,
) -> Result<MinimizeResult> {
    options.validate()?;
    if path_steps == 0 {
        return Err(Error::Domain("path grid needs at least one step".into()));
    }
    if x0.len() != model.dim() || x.len() != model.dim() {
        return Err(Error::Domain(format!(
            "endpoints must have dimension {}",
            model.dim()
        )));
    }
    if x0.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::Domain("endpoints must be finite".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {t_end}")));
    }
    if let ActionSpec::Discrete { steps, .. } = *spec {
        if steps == 0 || path_steps % steps != 0 {
            return Err(Error::Config(format!(
                "path grid of {path_steps} steps does not refine the θ-grid of {steps} steps"
            )));
        }
    }

    let mut starts = vec![start_path(options, x0, x, t_end, path_steps)?];
    let mut rng = ChaCha8Rng::seed_from_u64(options.multistart_seed);
    for _ in 0..options.multistart {
        starts.push(perturbed_start(&mut rng, x0, x, t_end, path_steps)?);
    }
    let user_start = matches!(options.initial_path, InitialPath::UserSupplied(_));

    let results: Vec<Result<MinimizeResult>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, start)| {
            if user_start && i == 0 {
                descend(spec, model, start, options, options.gradient_tolerance)
            } else {
                solve_with_continuation(spec, model, start, options)
            }
        })
        .collect();

    let mut best: Option<MinimizeResult> = None;
    for r in results {
        let r = r?;
        best = match best {
            None => Some(r),
            Some(b) => {
                let better = r.value < b.value
                    || (r.value == b.value && r.h1_seminorm < b.h1_seminorm);
                Some(if better { r } else { b })
            }
        };
    }
    Ok(best.expect("at least one start"))
}

fn start_path(
    options: &MinimizeOptions,
    x0: &[f64],
    x: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<GridPath> {
    match &options.initial_path {
        InitialPath::StraightLine => GridPath::straight_line(x0, x, t_end, steps),
        InitialPath::UserSupplied(p) => {
            if p.dim() != x0.len() || (p.t_end() - t_end).abs() > 1e-12 * t_end {
                return Err(Error::Domain(
                    "initial path does not match the problem's dimension or horizon".into(),
                ));
            }
            let mut p = p.resample(steps)?;
            let d = p.dim();
            let mut nodes = p.nodes().to_vec();
            nodes[..d].copy_from_slice(x0);
            nodes[steps * d..].copy_from_slice(x);
            p = GridPath::new(t_end, steps, d, nodes)?;
            Ok(p)
        }
    }
}

/// Straight line plus a few random sine modes, vanishing at both ends.
fn perturbed_start(
    rng: &mut ChaCha8Rng,
    x0: &[f64],
    x: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<GridPath> {
    let d = x0.len();
    let span = crate::model::norm_diff(x0, x);
    let amp = 0.5 * (1.0 + span);
    let coeffs: Vec<f64> = (0..4 * d)
        .map(|i| rng.random_range(-amp..=amp) / (1 + i / d) as f64)
        .collect();
    let line = GridPath::straight_line(x0, x, t_end, steps)?;
    let mut nodes = line.nodes().to_vec();
    for n in 1..steps {
        let s = n as f64 / steps as f64;
        for i in 0..d {
            let bump: f64 = (0..4)
                .map(|k| coeffs[k * d + i] * ((k + 1) as f64 * std::f64::consts::PI * s).sin())
                .sum();
            nodes[n * d + i] += bump;
        }
    }
    GridPath::new(t_end, steps, d, nodes)
}

/// Grid sizes of the coarse levels, coarsest first, excluding the final one.
fn coarse_levels(spec: &ActionSpec, path_steps: usize, levels: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut n = path_steps;
    let theta_steps = match *spec {
        ActionSpec::Discrete { steps, .. } => Some(steps),
        ActionSpec::Continuous { .. } => None,
    };
    let mut factor = 1;
    for _ in 0..levels {
        if n % 2 != 0 || n < 4 {
            break;
        }
        if let Some(s) = theta_steps {
            if s % (factor * 2) != 0 {
                break;
            }
        }
        n /= 2;
        factor *= 2;
        sizes.push(n);
    }
    sizes.reverse();
    sizes
}

fn solve_with_continuation(
    spec: &ActionSpec,
    model: &Model,
    start: GridPath,
    options: &MinimizeOptions,
) -> Result<MinimizeResult> {
    let final_steps = start.steps();
    let levels = coarse_levels(spec, final_steps, options.continuation_levels);
    let mut path = match levels.first() {
        Some(&n) => coarsen(&start, n)?,
        None => start,
    };
    for &n in &levels {
        let coarse_spec = scaled_spec(spec, final_steps / n);
        let tol = options.gradient_tolerance.max(1e-7);
        let res = descend(&coarse_spec, model, path, options, tol)?;
        path = res.path.refine(2)?;
    }
    descend(spec, model, path, options, options.gradient_tolerance)
}

fn coarsen(path: &GridPath, steps: usize) -> Result<GridPath> {
    let stride = path.steps() / steps;
    let nodes = (0..=steps)
        .flat_map(|n| path.node(n * stride).to_vec())
        .collect::<Vec<_>>();
    GridPath::new(path.t_end(), steps, path.dim(), nodes)
}

fn scaled_spec(spec: &ActionSpec, factor: usize) -> ActionSpec {
    match *spec {
        ActionSpec::Discrete { theta, steps } => ActionSpec::Discrete {
            theta,
            steps: steps / factor,
        },
        c => c,
    }
}

/// Objective wrapper: interior variables ↔ full path.
struct Objective<'a> {
    spec: &'a ActionSpec,
    model: &'a Model,
    path: GridPath,
    full_grad: Vec<f64>,
}

impl Objective<'_> {
    fn eval(&mut self, z: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.path.interior_mut().copy_from_slice(z);
        let f = self
            .spec
            .value_and_full_gradient(self.model, &self.path, &mut self.full_grad)?;
        let d = self.path.dim();
        grad.copy_from_slice(&self.full_grad[d..self.path.steps() * d]);
        if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure {
                what: format!("non-finite action ({f}) or gradient"),
                iterate: z.to_vec(),
            });
        }
        Ok(f)
    }
}

/// Inverse of the Dirichlet Laplacian `(2, −1, −1)/Δ` applied per component.
struct LaplacianSolve {
    d: usize,
    /// Thomas-algorithm modified super-diagonal.
    c_prime: Vec<f64>,
    denom: Vec<f64>,
    dt: f64,
}

impl LaplacianSolve {
    fn new(interior: usize, d: usize, dt: f64) -> Self {
        let mut c_prime = vec![0.0; interior];
        let mut denom = vec![0.0; interior];
        for i in 0..interior {
            let prev = if i == 0 { 0.0 } else { c_prime[i - 1] };
            denom[i] = 2.0 + prev;
            c_prime[i] = -1.0 / denom[i];
        }
        Self {
            d,
            c_prime,
            denom,
            dt,
        }
    }

    fn apply(&self, q: &[f64], out: &mut [f64]) {
        let (d, m) = (self.d, self.c_prime.len());
        for comp in 0..d {
            // forward sweep on rhs scaled by Δ
            let mut prev = 0.0;
            for i in 0..m {
                let v = (q[i * d + comp] * self.dt + prev) / self.denom[i];
                out[i * d + comp] = v;
                prev = v;
            }
            for i in (0..m.saturating_sub(1)).rev() {
                out[i * d + comp] -= self.c_prime[i] * out[(i + 1) * d + comp];
            }
        }
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS on a single grid.
fn descend(
    spec: &ActionSpec,
    model: &Model,
    start: GridPath,
    options: &MinimizeOptions,
    tol: f64,
) -> Result<MinimizeResult> {
    let steps = start.steps();
    let d = start.dim();
    let nvar = (steps - 1) * d;
    let mut obj = Objective {
        spec,
        model,
        full_grad: vec![0.0; start.nodes().len()],
        path: start,
    };
    let mut z = obj.path.interior().to_vec();
    let mut g = vec![0.0; nvar];
    let mut f = obj.eval(&z, &mut g)?;
    let mut history = vec![f];
    if nvar == 0 {
        return Ok(finish(obj.path, f, 0.0, 0, true, history));
    }

    let precond = LaplacianSolve::new(steps - 1, d, obj.path.step());
    let sc = options.step_control;
    let mut mem_s: Vec<Vec<f64>> = Vec::new();
    let mut mem_y: Vec<Vec<f64>> = Vec::new();
    let mut mem_rho: Vec<f64> = Vec::new();
    let mut gamma = 1.0;
    let mut dir = vec![0.0; nvar];
    let mut alpha_buf = vec![0.0; options.memory];
    let mut z_new = vec![0.0; nvar];
    let mut g_new = vec![0.0; nvar];
    let mut scratch = vec![0.0; nvar];
    let mut iterations = 0;
    let mut gnorm = max_norm(&g);

    while gnorm > tol && iterations < options.max_iterations {
        // two-loop recursion
        let mut q = g.clone();
        for k in (0..mem_s.len()).rev() {
            let a = mem_rho[k] * dotp(&mem_s[k], &q);
            alpha_buf[k] = a;
            for (qi, yi) in q.iter_mut().zip(&mem_y[k]) {
                *qi -= a * yi;
            }
        }
        precond.apply(&q, &mut dir);
        for v in dir.iter_mut() {
            *v *= gamma;
        }
        for k in 0..mem_s.len() {
            let beta = mem_rho[k] * dotp(&mem_y[k], &dir);
            for (di, si) in dir.iter_mut().zip(&mem_s[k]) {
                *di += si * (alpha_buf[k] - beta);
            }
        }
        for v in dir.iter_mut() {
            *v = -*v;
        }
        let mut slope = dotp(&g, &dir);
        if !(slope < 0.0) {
            mem_s.clear();
            mem_y.clear();
            mem_rho.clear();
            precond.apply(&g, &mut dir);
            for v in dir.iter_mut() {
                *v = -*v;
            }
            slope = dotp(&g, &dir);
            if !(slope < 0.0) {
                break;
            }
        }

        // Armijo backtracking; a step that does not raise the value and
        // lowers the gradient norm is kept as a fallback near round-off.
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut fallback: Option<(f64, f64)> = None;
        for _ in 0..sc.max_backtracks {
            for i in 0..nvar {
                z_new[i] = z[i] + alpha * dir[i];
            }
            let f_trial = obj.eval(&z_new, &mut g_new)?;
            if f_trial <= f + sc.sufficient_decrease * alpha * slope {
                accepted = Some(f_trial);
                break;
            }
            // approximate Wolfe test for when value differences are lost in
            // round-off
            let trial_slope = dotp(&g_new, &dir);
            if f_trial <= f + ROUNDOFF_SLACK * f.abs()
                && trial_slope <= (2.0 * sc.sufficient_decrease - 1.0) * slope
                && trial_slope >= 0.9 * slope
            {
                accepted = Some(f_trial);
                break;
            }
            if f_trial <= f && fallback.is_none() && max_norm(&g_new) < gnorm {
                fallback = Some((alpha, f_trial));
            }
            alpha *= sc.shrink;
        }
        let f_new = match (accepted, fallback) {
            (Some(v), _) => v,
            (None, Some((a, v))) => {
                alpha = a;
                for i in 0..nvar {
                    z_new[i] = z[i] + alpha * dir[i];
                }
                obj.eval(&z_new, &mut g_new)?;
                v
            }
            (None, None) => {
                if mem_s.is_empty() {
                    break;
                }
                mem_s.clear();
                mem_y.clear();
                mem_rho.clear();
                gamma = 1.0;
                continue;
            }
        };

        let s: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dotp(&s, &y);
        if sy > 1e-300 && sy > 1e-12 * dotp(&s, &s).sqrt() * dotp(&y, &y).sqrt() {
            precond.apply(&y, &mut scratch);
            let yhy = dotp(&y, &scratch);
            if yhy > 0.0 {
                gamma = sy / yhy;
            }
            if mem_s.len() == options.memory {
                mem_s.remove(0);
                mem_y.remove(0);
                mem_rho.remove(0);
            }
            mem_s.push(s);
            mem_y.push(y);
            mem_rho.push(1.0 / sy);
        }
        std::mem::swap(&mut z, &mut z_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        gnorm = max_norm(&g);
        history.push(f);
        iterations += 1;
    }

    obj.path.interior_mut().copy_from_slice(&z);
    Ok(finish(obj.path, f, gnorm, iterations, gnorm <= tol, history))
}

fn finish(
    path: GridPath,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    value_history: Vec<f64>,
) -> MinimizeResult {
    let h1_seminorm = path.h1_seminorm();
    MinimizeResult {
        path,
        value,
        gradient_norm,
        iterations,
        converged,
        h1_seminorm,
        value_history,
    }
}

/// `B_h` on the single-step θ-grid, where the path family has one member:
/// `½ T |σ⁻¹(x₀)((x − x₀)/T − b((1−θ)x₀ + θx))|²`.
pub fn minimize_discrete_single_step(
    model: &Model,
    x0: &[f64],
    x: &[f64],
    t_end: f64,
    theta: f64,
) -> Result<f64> {
    let d = model.dim();
    if x0.len() != d || x.len() != d {
        return Err(Error::Domain(format!("endpoints must have dimension {d}")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("theta ∈ [0,1] required, got {theta}")));
    }
    let mid: Vec<f64> = x0
        .iter()
        .zip(x)
        .map(|(a, b)| (1.0 - theta) * a + theta * b)
        .collect();
    let mut drift = vec![0.0; d];
    let mut sinv = vec![0.0; d * d];
    model.drift(&mid, &mut drift);
    model.diffusion_inverse(x0, &mut sinv);
    let resid: Vec<f64> = (0..d).map(|i| (x[i] - x0[i]) / t_end - drift[i]).collect();
    let mut r = vec![0.0; d];
    matvec(d, &sinv, &resid, &mut r);
    Ok(0.5 * t_end * dotp(&r, &r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_model;

    #[test]
    fn laplacian_solve_inverts() {
        let (m, dt) = (7, 0.125);
        let solve = LaplacianSolve::new(m, 1, dt);
        let q: Vec<f64> = (0..m).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut u = vec![0.0; m];
        solve.apply(&q, &mut u);
        for i in 0..m {
            let left = if i == 0 { 0.0 } else { u[i - 1] };
            let right = if i + 1 == m { 0.0 } else { u[i + 1] };
            let lu = (2.0 * u[i] - left - right) / dt;
            assert!((lu - q[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_closed_form() {
        let bm = builtin_model("brownian").unwrap().model;
        assert_eq!(minimize_discrete_single_step(&bm, &[0.0], &[1.0], 1.0, 0.3).unwrap(), 0.5);
        let ou = builtin_model("ou-additive(-1)").unwrap().model;
        assert_eq!(minimize_discrete_single_step(&ou, &[0.0], &[1.0], 1.0, 0.0).unwrap(), 0.5);
        assert_eq!(minimize_discrete_single_step(&ou, &[0.0], &[1.0], 1.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn coarse_levels_respect_divisibility() {
        let c = ActionSpec::continuous();
        assert_eq!(coarse_levels(&c, 256, 3), vec![32, 64, 128]);
        assert_eq!(coarse_levels(&c, 12, 3), vec![3, 6]);
        assert_eq!(coarse_levels(&c, 7, 3), Vec::<usize>::new());
        assert_eq!(coarse_levels(&ActionSpec::discrete(0.0, 8), 8, 3), vec![2, 4]);
    }

    #[test]
    fn brownian_line_is_found() {
        let bm = builtin_model("brownian").unwrap().model;
        let res = minimize_action(
            &ActionSpec::continuous(),
            &bm,
            &[0.0],
            &[1.0],
            1.0,
            64,
            &MinimizeOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert!((res.value - 0.5).abs() < 1e-12);
        for n in 0..=64 {
            assert!((res.path.node(n)[0] - n as f64 / 64.0).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let bm = builtin_model("brownian").unwrap().model;
        let o = MinimizeOptions::default();
        let c = ActionSpec::continuous();
        assert!(minimize_action(&c, &bm, &[0.0], &[1.0], 1.0, 0, &o).is_err());
        assert!(minimize_action(&c, &bm, &[0.0, 1.0], &[1.0], 1.0, 4, &o).is_err());
        let disc = ActionSpec::discrete(0.5, 3);
        assert!(minimize_action(&disc, &bm, &[0.0], &[1.0], 1.0, 4, &o).is_err());
        let bad = MinimizeOptions {
            gradient_tolerance: 0.0,
            ..Default::default()
        };
        assert!(minimize_action(&c, &bm, &[0.0], &[1.0], 1.0, 4, &bad).is_err());
    }
}
