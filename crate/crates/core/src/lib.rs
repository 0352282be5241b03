//! Numerical one-point large-deviations rate functions for small-noise SDEs
//!
//! ```text
//! dX^ε = b(X^ε) dt + √ε σ(X^ε) dW,   X^ε(0) = x₀
//! ```
//!
//! The continuous rate function `I(x)` of `X^ε(T)` and the discrete rate
//! function `I^h(x)` of the stochastic θ-method are both infima of path
//! actions over paths from `x₀` to `x`. This crate discretizes those
//! infima on piecewise-linear grid paths and minimizes them, and provides
//! Monte Carlo tools (tail probabilities, empirical log-MGF and its
//! Legendre transform) to check the results against simulation.

pub mod action;
pub mod error;
pub mod harness;
pub mod minimize;
pub mod model;
pub mod montecarlo;
pub mod path;
pub mod rate;

pub use action::{action_gradient, continuous_action, discrete_action, ActionSpec, Quadrature};
pub use error::{Error, Result};
pub use harness::{
    fit_order, run_convergence_study, run_tail_study, ConvergenceReport, ReferenceKind,
    TailStudyReport, TailStudySpec,
};
pub use minimize::{
    minimize_action, minimize_discrete_single_step, InitialPath, MinimizeOptions, MinimizeResult,
    StepControl,
};
pub use model::{builtin_model, check_lipschitz, preset, Coefficients, ExactRate, Model, ModelEntry};
pub use montecarlo::{
    legendre_transform, lmgf_estimate, lmgf_table, sample_terminal, step_theta, tail_probability,
    LegendreResult, LmgfTable, SimConfig, TailEstimate,
};
pub use path::GridPath;
pub use rate::{
    rate_continuous, rate_discrete, small_time_rate, solve_skeleton, RateKind, RateQuery,
    SkeletonSolution,
};

/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}
