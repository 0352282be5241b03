//! Convergence-order and tail-decay studies.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::minimize::MinimizeOptions;
use crate::model::{Model, ModelEntry};
use crate::montecarlo::{sample_terminal, tail_from_samples, SimConfig, TailEstimate};
use crate::rate::{check_step, rate_discrete, rate_on_grid, solve_skeleton, RateKind, RateQuery};

/// Errors below this are treated as exact and left out of the order fit.
pub const NOISE_FLOOR: f64 = 1e-10;

/// What `I^h` is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    /// The model's closed-form `I`.
    ClosedForm,
    /// `I^{h_ref}` on a much finer θ-grid.
    FineGrid { h_ref: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub model: String,
    pub theta: f64,
    pub x_grid: Vec<Vec<f64>>,
    /// Strictly decreasing.
    pub h_values: Vec<f64>,
    /// `sup_x |I^h(x) − I_ref(x)|` for each `h`.
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln h`; `None` with fewer
    /// than three errors above the noise floor.
    pub fitted_order: Option<f64>,
    pub reference_kind: ReferenceKind,
    pub reference_values: Vec<f64>,
    /// `I^h(x)` for each `h` (outer) and `x` (inner).
    pub values: Vec<Vec<f64>>,
}

impl ConvergenceReport {
    /// `error / h^order` per step, the observed constant of the bound.
    pub fn empirical_constants(&self) -> Option<Vec<f64>> {
        let p = self.fitted_order?;
        Some(
            self.h_values
                .iter()
                .zip(&self.errors)
                .map(|(h, e)| e / h.powf(p))
                .collect(),
        )
    }
}

/// Least-squares slope of `ln e` against `ln h`, ignoring errors below the
/// noise floor.
pub fn fit_order(h_values: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h_values
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e >= NOISE_FLOOR && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn steps_for(t_end: f64, h: f64) -> Result<usize> {
    let n = (t_end / h).round();
    if !(h > 0.0) || n < 1.0 || (n * h - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!("h = {h} does not divide T = {t_end}")));
    }
    Ok(n as usize)
}

/// Computes `I^h` on `x_grid` for each `h` and compares with the reference.
#[allow(clippy::too_many_arguments)]
pub fn run_convergence_study(
    entry: &ModelEntry,
    theta: f64,
    x0: &[f64],
    t_end: f64,
    x_grid: &[Vec<f64>],
    h_values: &[f64],
    reference_kind: ReferenceKind,
    options: &MinimizeOptions,
) -> Result<ConvergenceReport> {
    let model = &entry.model;
    if h_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("h values must be strictly decreasing".into()));
    }
    let steps: Vec<usize> = h_values
        .iter()
        .map(|&h| {
            check_step(model, h)?;
            steps_for(t_end, h)
        })
        .collect::<Result<_>>()?;
    if x_grid.iter().any(|x| x.len() != model.dim()) {
        return Err(Error::Domain("x grid points have the wrong dimension".into()));
    }
    let base = RateQuery::new(model.clone(), x0.to_vec(), t_end)
        .with_theta(theta)
        .with_options(options.clone());

    let reference_values: Vec<f64> = match reference_kind {
        ReferenceKind::ClosedForm => {
            let exact = entry.exact_rate.ok_or_else(|| {
                Error::Config(format!("model `{}` has no closed-form rate", model.name()))
            })?;
            x_grid.iter().map(|x| exact.eval(x, x0, t_end)).collect()
        }
        ReferenceKind::FineGrid { h_ref } => {
            let h_min = h_values.iter().copied().fold(f64::INFINITY, f64::min);
            if h_ref > h_min / 8.0 * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "fine-grid reference h_ref = {h_ref} must be at most min(h)/8 = {}",
                    h_min / 8.0
                )));
            }
            check_step(model, h_ref)?;
            let q = base.clone().with_steps(steps_for(t_end, h_ref)?);
            x_grid
                .par_iter()
                .map(|x| {
                    rate_discrete(&q, x).map(|r| r.0).map_err(|e| Error::Study {
                        h: h_ref,
                        x: x.clone(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<_>>()?
        }
    };

    let nx = x_grid.len();
    let flat: Vec<f64> = (0..h_values.len() * nx)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nx, k % nx);
            let q = base.clone().with_steps(steps[i]);
            rate_discrete(&q, &x_grid[j]).map(|r| r.0).map_err(|e| Error::Study {
                h: h_values[i],
                x: x_grid[j].clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let values: Vec<Vec<f64>> = if nx == 0 {
        vec![Vec::new(); h_values.len()]
    } else {
        flat.chunks(nx).map(<[f64]>::to_vec).collect()
    };
    let errors: Vec<f64> = values
        .iter()
        .map(|row| {
            row.iter()
                .zip(&reference_values)
                .map(|(v, r)| (v - r).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(ConvergenceReport {
        model: model.name().to_string(),
        theta,
        x_grid: x_grid.to_vec(),
        h_values: h_values.to_vec(),
        fitted_order: fit_order(h_values, &errors),
        errors,
        reference_kind,
        reference_values,
        values,
    })
}

#[derive(Debug, Clone)]
pub struct TailStudySpec {
    pub model: Model,
    pub theta: f64,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub delta: f64,
    pub epsilon_values: Vec<f64>,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    /// Optimizer grid for the continuous rate used in `C(δ)`.
    pub path_steps: usize,
    pub options: MinimizeOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailStudyReport {
    pub rows: Vec<TailEstimate>,
    /// `inf { I(x) : |x − X⁰(T)| = δ }`.
    pub c_delta: f64,
    pub skeleton_terminal: Vec<f64>,
}

/// Points on the sphere of radius `delta` around `center` (two points in
/// 1-D, 64 on a circle in 2-D, a 128-point Fibonacci lattice in 3-D).
pub fn sphere_points(center: &[f64], delta: f64) -> Result<Vec<Vec<f64>>> {
    let offsets: Vec<Vec<f64>> = match center.len() {
        1 => vec![vec![-delta], vec![delta]],
        2 => (0..64)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                vec![delta * a.cos(), delta * a.sin()]
            })
            .collect(),
        3 => {
            let n = 128;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![delta * r * a.cos(), delta * r * a.sin(), delta * z]
                })
                .collect()
        }
        d => {
            return Err(Error::Config(format!(
                "C(δ) sphere search supports dimensions 1 to 3, got {d}"
            )))
        }
    };
    Ok(offsets
        .into_iter()
        .map(|o| o.iter().zip(center).map(|(a, b)| a + b).collect())
        .collect())
}

/// One tail estimate per ε together with the variational constant `C(δ)`.
pub fn run_tail_study(spec: &TailStudySpec) -> Result<TailStudyReport> {
    if !(spec.delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {}", spec.delta)));
    }
    let skeleton = solve_skeleton(
        &spec.model,
        &spec.x0,
        spec.t_end,
        (16 * spec.steps).max(1024),
    )?;
    let d = spec.model.dim();
    let rows = spec
        .epsilon_values
        .iter()
        .map(|&epsilon| {
            let mut cfg = SimConfig::new(spec.model.clone(), spec.x0.clone(), spec.t_end, spec.steps);
            cfg.theta = spec.theta;
            cfg.epsilon = epsilon;
            cfg.samples = spec.samples;
            cfg.seed = spec.seed;
            let samples = sample_terminal(&cfg)?;
            Ok(tail_from_samples(&samples, d, &skeleton.terminal, spec.delta, epsilon))
        })
        .collect::<Result<Vec<_>>>()?;

    let query = RateQuery::new(spec.model.clone(), spec.x0.clone(), spec.t_end)
        .with_path_steps(spec.path_steps)
        .with_options(spec.options.clone());
    let sphere = sphere_points(&skeleton.terminal, spec.delta)?;
    let c_delta = rate_on_grid(&query, RateKind::Continuous, &sphere)?
        .iter()
        .map(|r| r.value)
        .fold(f64::INFINITY, f64::min);
    Ok(TailStudyReport {
        rows,
        c_delta,
        skeleton_terminal: skeleton.terminal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fit() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_order(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_order(&h[..2], &e[..2]).is_none());
        assert!(fit_order(&h, &[1e-12, 1e-13, 1e-3, 1e-4]).is_none());
    }

    #[test]
    fn sphere() {
        let s = sphere_points(&[1.0], 0.5).unwrap();
        assert_eq!(s, vec![vec![0.5], vec![1.5]]);
        for p in sphere_points(&[0.0, 1.0, 2.0], 2.0).unwrap() {
            let r = (p[0].powi(2) + (p[1] - 1.0).powi(2) + (p[2] - 2.0).powi(2)).sqrt();
            assert!((r - 2.0).abs() < 1e-12);
        }
        assert!(sphere_points(&[0.0; 4], 1.0).is_err());
    }

    #[test]
    fn step_grid_validation() {
        assert_eq!(steps_for(1.0, 0.125).unwrap(), 8);
        assert!(steps_for(1.0, 0.3).is_err());
    }
}
