//! Rate-function drivers: `I(x)`, `I^h(x)`, the skeleton ODE and the
//! small-time construction.

use rayon::prelude::*;

use crate::action::ActionSpec;
use crate::error::{Error, Result};
use crate::minimize::{minimize_action, MinimizeOptions, MinimizeResult};
use crate::model::Model;

/// Default optimizer grid for the continuous action.
pub const DEFAULT_PATH_STEPS: usize = 2048;

/// A rate-function query; the evaluation point is supplied per call.
#[derive(Debug, Clone)]
pub struct RateQuery {
    pub model: Model,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub theta: f64,
    /// θ-method steps `N`, so `h = T / N`.
    pub steps: usize,
    /// Optimizer grid for `A`.
    pub path_steps: usize,
    pub options: MinimizeOptions,
}

impl RateQuery {
    pub fn new(model: Model, x0: Vec<f64>, t_end: f64) -> Self {
        Self {
            model,
            x0,
            t_end,
            theta: 0.0,
            steps: 1,
            path_steps: DEFAULT_PATH_STEPS,
            options: MinimizeOptions::default(),
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_path_steps(mut self, path_steps: usize) -> Self {
        self.path_steps = path_steps;
        self
    }

    pub fn with_options(mut self, options: MinimizeOptions) -> Self {
        self.options = options;
        self
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    /// Enforces `h ≤ 1/(2L)`.
    pub fn check_step_restriction(&self) -> Result<()> {
        check_step(&self.model, self.step())
    }

    fn check_common(&self) -> Result<()> {
        if self.x0.len() != self.model.dim() {
            return Err(Error::Domain(format!(
                "x0 must have dimension {}",
                self.model.dim()
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {}",
                self.t_end
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!(
                "theta ∈ [0,1] required, got {}",
                self.theta
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_step(model: &Model, h: f64) -> Result<()> {
    let bound = model.max_step();
    // h = T/N is a rounded quotient; allow it to touch the bound
    if h > bound * (1.0 + 1e-12) {
        return Err(Error::StepRestriction { h, bound });
    }
    Ok(())
}

/// `I(x) = inf A` by the minimum action method.
pub fn rate_continuous(query: &RateQuery, x: &[f64]) -> Result<(f64, MinimizeResult)> {
    query.check_common()?;
    let res = minimize_action(
        &ActionSpec::continuous(),
        &query.model,
        &query.x0,
        x,
        query.t_end,
        query.path_steps,
        &query.options,
    )?;
    Ok((res.value, res))
}

/// `I^h(x) = inf B_h` over θ-grid paths.
pub fn rate_discrete(query: &RateQuery, x: &[f64]) -> Result<(f64, MinimizeResult)> {
    query.check_common()?;
    query.check_step_restriction()?;
    discrete_unchecked(query, x)
}

fn discrete_unchecked(query: &RateQuery, x: &[f64]) -> Result<(f64, MinimizeResult)> {
    let res = minimize_action(
        &ActionSpec::discrete(query.theta, query.steps),
        &query.model,
        &query.x0,
        x,
        query.t_end,
        query.steps,
        &query.options,
    )?;
    Ok((res.value, res))
}

/// Which rate function a grid evaluation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Continuous,
    Discrete,
}

/// Evaluates a rate function on many points in parallel; results keep the
/// input order.
pub fn rate_on_grid(
    query: &RateQuery,
    kind: RateKind,
    points: &[Vec<f64>],
) -> Result<Vec<MinimizeResult>> {
    points
        .par_iter()
        .map(|x| match kind {
            RateKind::Continuous => rate_continuous(query, x).map(|r| r.1),
            RateKind::Discrete => rate_discrete(query, x).map(|r| r.1),
        })
        .collect()
}

/// Solution of the skeleton ODE `x' = b(x)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSolution {
    pub times: Vec<f64>,
    /// States node-major, `(steps + 1) * d` values.
    pub states: Vec<f64>,
    pub terminal: Vec<f64>,
}

/// Classical fourth-order Runge–Kutta for `x' = b(x)`.
pub fn solve_skeleton(model: &Model, x0: &[f64], t_end: f64, steps: usize) -> Result<SkeletonSolution> {
    if steps == 0 {
        return Err(Error::Domain("skeleton needs at least one step".into()));
    }
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::Domain(format!("x0 must have dimension {d}")));
    }
    let h = t_end / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * d);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    times.push(0.0);
    states.extend_from_slice(&x);
    for n in 0..steps {
        model.drift(&x, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        model.drift(&tmp, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        model.drift(&tmp, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + h * k3[i];
        }
        model.drift(&tmp, &mut k4);
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        times.push(if n + 1 == steps { t_end } else { (n + 1) as f64 * h });
        states.extend_from_slice(&x);
    }
    Ok(SkeletonSolution {
        times,
        states,
        terminal: x,
    })
}

/// Deterministic θ-scheme `y_{n+1} = y_n + h b((1−θ)y_n + θy_{n+1})`; its
/// terminal value is the zero of `I^h`.
pub fn deterministic_theta_terminal(
    model: &Model,
    x0: &[f64],
    t_end: f64,
    steps: usize,
    theta: f64,
) -> Result<Vec<f64>> {
    let h = t_end / steps as f64;
    let d = model.dim();
    let zero = vec![0.0; d];
    let mut state = x0.to_vec();
    let mut next = vec![0.0; d];
    for _ in 0..steps {
        crate::montecarlo::step_theta(model, &state, &zero, h, theta, 1e-15, 200, &mut next)?;
        std::mem::swap(&mut state, &mut next);
    }
    Ok(state)
}

/// Discrete approximation `Ĩ^h(y)` of the small-time rate function of
/// `dY = b̃(Y) dt + σ̃(Y) dW`.
///
/// The drift is stripped and the horizon fixed to one; `h` must be `1/N`
/// with `h ≤ 1`. The explicit scheme of the driftless model needs no step
/// restriction beyond that.
pub fn small_time_rate(
    model_y: &Model,
    y0: &[f64],
    y: &[f64],
    h: f64,
    theta: f64,
    options: &MinimizeOptions,
) -> Result<(f64, MinimizeResult)> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Domain(format!("small-time step must lie in (0, 1], got {h}")));
    }
    let steps = (1.0 / h).round();
    if ((steps * h) - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("h = {h} is not of the form 1/N")));
    }
    let query = RateQuery::new(model_y.driftless(), y0.to_vec(), 1.0)
        .with_theta(theta)
        .with_steps(steps as usize)
        .with_options(options.clone());
    query.check_common()?;
    discrete_unchecked(&query, y)
}
