//! Stochastic θ-method sampling, tail probabilities and the empirical
//! logarithmic moment generating function.
//!
//! Every sample draws its Brownian increments from its own ChaCha stream,
//! keyed by `(seed, sample index)`, so results do not depend on how the
//! work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::action::matvec;
use crate::error::{Error, Result};
use crate::model::{norm_diff, Model};
use crate::rate::solve_skeleton;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: Model,
    pub epsilon: f64,
    pub theta: f64,
    pub steps: usize,
    pub t_end: f64,
    pub x0: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub implicit_tolerance: f64,
    pub implicit_max_iters: usize,
}

impl SimConfig {
    pub fn new(model: Model, x0: Vec<f64>, t_end: f64, steps: usize) -> Self {
        Self {
            model,
            epsilon: 1.0,
            theta: 0.0,
            steps,
            t_end,
            x0,
            samples: 1000,
            seed: 0,
            implicit_tolerance: 1e-12,
            implicit_max_iters: 100,
        }
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta ∈ [0,1] required, got {}", self.theta)));
        }
        if self.steps == 0 || self.samples == 0 {
            return Err(Error::Config("steps and samples must be positive".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.t_end)));
        }
        if self.x0.len() != self.model.dim() {
            return Err(Error::Domain(format!("x0 must have dimension {}", self.model.dim())));
        }
        let contraction = self.step() * self.model.lipschitz() * self.theta;
        if contraction >= 1.0 {
            return Err(Error::Config(format!(
                "implicit step is not a contraction: h·L·θ = {contraction} ≥ 1"
            )));
        }
        if !(self.implicit_tolerance > 0.0) || self.implicit_max_iters == 0 {
            return Err(Error::Config("implicit solver settings must be positive".into()));
        }
        Ok(())
    }
}

/// One θ-step `y = x + h b((1−θ)x + θy) + noise`, with `noise` already
/// scaled (`√ε σ(x) ΔW`). Solved by fixed-point iteration from the explicit
/// Euler predictor; returns the number of iterations.
#[allow(clippy::too_many_arguments)]
pub fn step_theta(
    model: &Model,
    state: &[f64],
    noise: &[f64],
    h: f64,
    theta: f64,
    tol: f64,
    max_iters: usize,
    out: &mut [f64],
) -> Result<usize> {
    let d = state.len();
    let mut bufs = (vec![0.0; d], vec![0.0; d]);
    step_theta_in(model, state, noise, h, theta, tol, max_iters, out, &mut bufs)
}

#[allow(clippy::too_many_arguments)]
fn step_theta_in(
    model: &Model,
    state: &[f64],
    noise: &[f64],
    h: f64,
    theta: f64,
    tol: f64,
    max_iters: usize,
    out: &mut [f64],
    (drift, mix): &mut (Vec<f64>, Vec<f64>),
) -> Result<usize> {
    let d = state.len();
    model.drift(state, drift);
    for i in 0..d {
        out[i] = state[i] + h * drift[i] + noise[i];
    }
    if theta == 0.0 {
        return Ok(0);
    }
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iters {
        for i in 0..d {
            mix[i] = (1.0 - theta) * state[i] + theta * out[i];
        }
        model.drift(mix, drift);
        residual = 0.0;
        for i in 0..d {
            let y = state[i] + h * drift[i] + noise[i];
            residual = f64::max(residual, (y - out[i]).abs());
            out[i] = y;
        }
        if residual <= tol {
            return Ok(iter);
        }
    }
    Err(Error::ImplicitStep {
        iterations: max_iters,
        residual,
    })
}

struct PathScratch {
    state: Vec<f64>,
    next: Vec<f64>,
    sigma: Vec<f64>,
    dw: Vec<f64>,
    noise: Vec<f64>,
    step_bufs: (Vec<f64>, Vec<f64>),
}

impl PathScratch {
    fn new(d: usize) -> Self {
        Self {
            state: vec![0.0; d],
            next: vec![0.0; d],
            sigma: vec![0.0; d * d],
            dw: vec![0.0; d],
            noise: vec![0.0; d],
            step_bufs: (vec![0.0; d], vec![0.0; d]),
        }
    }
}

/// Runs one trajectory; `increment(n, dw)` fills the Brownian increment of
/// step `n` (variance `h` per component).
fn run_path(
    config: &SimConfig,
    scratch: &mut PathScratch,
    mut increment: impl FnMut(usize, &mut [f64]),
    out: &mut [f64],
) -> Result<()> {
    let d = config.model.dim();
    let h = config.step();
    let amp = config.epsilon.sqrt();
    scratch.state.copy_from_slice(&config.x0);
    for n in 0..config.steps {
        increment(n, &mut scratch.dw);
        config.model.diffusion(&scratch.state, &mut scratch.sigma);
        matvec(d, &scratch.sigma, &scratch.dw, &mut scratch.noise);
        for v in scratch.noise.iter_mut() {
            *v *= amp;
        }
        step_theta_in(
            &config.model,
            &scratch.state,
            &scratch.noise,
            h,
            config.theta,
            config.implicit_tolerance,
            config.implicit_max_iters,
            &mut scratch.next,
            &mut scratch.step_bufs,
        )?;
        std::mem::swap(&mut scratch.state, &mut scratch.next);
    }
    out.copy_from_slice(&scratch.state);
    Ok(())
}

/// Terminal value `X^ε_N` driven by the given Brownian increments
/// (`steps × d` values, node-major, each with variance `h`).
pub fn terminal_from_increments(config: &SimConfig, increments: &[f64]) -> Result<Vec<f64>> {
    config.validate()?;
    let d = config.model.dim();
    if increments.len() != config.steps * d {
        return Err(Error::Domain(format!(
            "expected {} increments, got {}",
            config.steps * d,
            increments.len()
        )));
    }
    let mut scratch = PathScratch::new(d);
    let mut out = vec![0.0; d];
    run_path(
        config,
        &mut scratch,
        |n, dw| dw.copy_from_slice(&increments[n * d..(n + 1) * d]),
        &mut out,
    )?;
    Ok(out)
}

/// The RNG stream of sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `samples` independent terminal values, flattened sample-major.
pub fn sample_terminal(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let d = config.model.dim();
    let sqrt_h = config.step().sqrt();
    let mut out = vec![0.0; config.samples * d];
    out.par_chunks_mut(d).enumerate().try_for_each_init(
        || PathScratch::new(d),
        |scratch, (i, chunk)| {
            let mut rng = sample_rng(config.seed, i as u64);
            run_path(
                config,
                scratch,
                |_, dw| {
                    for v in dw.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = sqrt_h * z;
                    }
                },
                chunk,
            )
        },
    )?;
    Ok(out)
}

/// Empirical tail probability `P(|X^ε_N − X⁰(T)| ≥ δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub delta: f64,
    pub epsilon: f64,
    pub samples: usize,
    pub count: usize,
    pub p_hat: f64,
    /// `−ε ln p̂`; when `p̂ = 0` this holds the bound `ε ln(samples)` and
    /// `lower_bound` is set.
    pub log_estimate: f64,
    pub lower_bound: bool,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_half_width: f64,
}

/// 95% interval on a binomial proportion: normal approximation, or Wilson
/// when fewer than ten hits were seen.
pub fn proportion_interval(count: usize, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let p = count as f64 / nf;
    if count >= 10 {
        let hw = Z95 * (p * (1.0 - p) / nf).sqrt();
        ((p - hw).max(0.0), (p + hw).min(1.0))
    } else {
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let hw = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        let lo = if count == 0 { 0.0 } else { (center - hw).max(0.0) };
        let hi = if count == n { 1.0 } else { (center + hw).min(1.0) };
        (lo, hi)
    }
}

/// Builds the estimate from terminal samples around `center`.
pub fn tail_from_samples(
    samples: &[f64],
    dim: usize,
    center: &[f64],
    delta: f64,
    epsilon: f64,
) -> TailEstimate {
    let n = samples.len() / dim;
    let count = samples
        .chunks(dim)
        .filter(|x| norm_diff(x, center) >= delta)
        .count();
    let p_hat = count as f64 / n as f64;
    let (lower_bound, log_estimate) = if count == 0 {
        (true, epsilon * (n as f64).ln())
    } else {
        (false, 0.0 - epsilon * p_hat.ln())
    };
    let (ci_low, ci_high) = proportion_interval(count, n);
    TailEstimate {
        delta,
        epsilon,
        samples: n,
        count,
        p_hat,
        log_estimate,
        lower_bound,
        ci_low,
        ci_high,
        ci_half_width: 0.5 * (ci_high - ci_low),
    }
}

/// Samples the θ-scheme and measures its deviation from the skeleton
/// endpoint `X⁰(T)`.
pub fn tail_probability(config: &SimConfig, delta: f64) -> Result<TailEstimate> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be nonnegative, got {delta}")));
    }
    config.validate()?;
    let skeleton = solve_skeleton(
        &config.model,
        &config.x0,
        config.t_end,
        (16 * config.steps).max(1024),
    )?;
    let samples = sample_terminal(config)?;
    Ok(tail_from_samples(
        &samples,
        config.model.dim(),
        &skeleton.terminal,
        delta,
        config.epsilon,
    ))
}

/// `ε ln( mean exp(⟨X, λ⟩ / ε) )` over the given samples, shifted by the
/// largest exponent so that nothing overflows.
pub fn lmgf_from_samples(samples: &[f64], dim: usize, epsilon: f64, lambda: &[f64]) -> f64 {
    let n = samples.len() / dim;
    let exponent = |x: &[f64]| -> f64 {
        x.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>() / epsilon
    };
    let shift = samples
        .chunks(dim)
        .map(exponent)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = samples.chunks(dim).map(|x| (exponent(x) - shift).exp()).sum();
    epsilon * (shift + (sum / n as f64).ln())
}

/// Finite-ε estimate of the logarithmic moment generating function at `λ`.
pub fn lmgf_estimate(config: &SimConfig, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != config.model.dim() {
        return Err(Error::Domain("lambda has the wrong dimension".into()));
    }
    let samples = sample_terminal(config)?;
    Ok(lmgf_from_samples(&samples, config.model.dim(), config.epsilon, lambda))
}

/// Uniform axis `min, min + step, …, max`.
pub fn lambda_axis(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::Config(format!(
            "invalid λ axis [{min}, {max}] with step {step}"
        )));
    }
    let n = ((max - min) / step).round() as usize;
    Ok((0..=n).map(|k| min + k as f64 * step).collect())
}

/// `Λ̂` sampled on a tensor λ-grid (one or two axes), row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LmgfTable {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl LmgfTable {
    /// Tabulates `f` on the grid.
    pub fn from_fn(axes: Vec<Vec<f64>>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        check_axes(&axes)?;
        let values = grid_points(&axes).iter().map(|l| f(l)).collect();
        Ok(Self { axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Grid points in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        grid_points(&self.axes)
    }
}

fn check_axes(axes: &[Vec<f64>]) -> Result<()> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::Config("λ-grids must have one or two axes".into()));
    }
    if axes.iter().any(|a| a.is_empty()) {
        return Err(Error::Config("λ axes must be nonempty".into()));
    }
    Ok(())
}

fn grid_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    match axes {
        [a] => a.iter().map(|&l| vec![l]).collect(),
        [a, b] => a
            .iter()
            .flat_map(|&l1| b.iter().map(move |&l2| vec![l1, l2]))
            .collect(),
        _ => Vec::new(),
    }
}

/// Samples once and evaluates `Λ̂` on every grid point.
pub fn lmgf_table(config: &SimConfig, axes: Vec<Vec<f64>>) -> Result<LmgfTable> {
    check_axes(&axes)?;
    if axes.len() != config.model.dim() {
        return Err(Error::Domain("λ-grid dimension differs from the model".into()));
    }
    let samples = sample_terminal(config)?;
    let d = config.model.dim();
    let points = grid_points(&axes);
    let values = points
        .par_iter()
        .map(|l| lmgf_from_samples(&samples, d, config.epsilon, l))
        .collect();
    Ok(LmgfTable { axes, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// The supremum sits on the edge of the grid, so the true value may be
    /// larger.
    pub on_boundary: bool,
}

/// Grid supremum of `⟨x, λ⟩ − Λ̂(λ)`.
pub fn legendre_transform(table: &LmgfTable, x: &[f64]) -> Result<LegendreResult> {
    check_axes(&table.axes)?;
    if x.len() != table.dim() {
        return Err(Error::Domain("x has the wrong dimension".into()));
    }
    let shape: Vec<usize> = table.axes.iter().map(Vec::len).collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, (lambda, lm)) in table.points().iter().zip(&table.values).enumerate() {
        let v = lambda.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - lm;
        if v > best.0 {
            best = (v, k);
        }
    }
    let (value, k) = best;
    let idx: Vec<usize> = match shape.as_slice() {
        [_] => vec![k],
        [_, n2] => vec![k / n2, k % n2],
        _ => unreachable!(),
    };
    let on_boundary = idx
        .iter()
        .zip(&shape)
        .any(|(&i, &n)| n > 1 && (i == 0 || i == n - 1));
    let argmax = idx.iter().zip(&table.axes).map(|(&i, a)| a[i]).collect();
    Ok(LegendreResult {
        value,
        argmax,
        on_boundary,
    })
}
