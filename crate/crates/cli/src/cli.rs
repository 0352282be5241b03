//! Command-line flags. Every flag is a raw string so that malformed values
//! are reported together with the other configuration problems.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::ini::Ini;

#[derive(Debug, Parser)]
#[command(name = "ldrate", version, about = "Large-deviations rate functions of small-noise SDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Continuous rate function I(x) by minimum action
    Rate(Flags),
    /// Discrete rate function I^h(x) of the θ-method
    RateDiscrete(Flags),
    /// Small-time rate function of the driftless, time-rescaled model
    SmallTime(Flags),
    /// Terminal values of the stochastic θ-method
    Simulate(Flags),
    /// Monte Carlo tail probabilities over an ε-sweep
    Tail(Flags),
    /// Empirical log-MGF on a λ-grid and its Legendre transform
    Lmgf(Flags),
    /// Convergence order of I^h against a reference
    Converge(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// INI config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in family, parameterized name like `ou-additive(-1)`, or a preset from the config file
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub base: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub amp: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    /// Initial state, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Single evaluation point
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Evaluation points separated by `;`, components by `,`
    #[arg(long = "x-grid", allow_hyphen_values = true)]
    pub x_grid: Option<String>,
    /// Horizon
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t_end: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// θ-method steps
    #[arg(long = "N", allow_hyphen_values = true)]
    pub steps: Option<String>,
    /// θ-method step size, alternative to --N
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<String>,
    #[arg(long = "h-values", allow_hyphen_values = true)]
    pub h_values: Option<String>,
    /// Fine-grid reference step for `converge`
    #[arg(long = "h-ref", allow_hyphen_values = true)]
    pub h_ref: Option<String>,
    /// Optimizer grid for the continuous action
    #[arg(long = "path-n", allow_hyphen_values = true)]
    pub path_n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<String>,
    #[arg(long = "epsilon-values", allow_hyphen_values = true)]
    pub epsilon_values: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub samples: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long = "lambda-min", allow_hyphen_values = true)]
    pub lambda_min: Option<String>,
    #[arg(long = "lambda-max", allow_hyphen_values = true)]
    pub lambda_max: Option<String>,
    #[arg(long = "lambda-step", allow_hyphen_values = true)]
    pub lambda_step: Option<String>,
    /// Minimum acceptable fitted order for `converge`
    #[arg(long = "order-target", allow_hyphen_values = true)]
    pub order_target: Option<String>,
    /// Maximum acceptable fitted order for `converge`
    #[arg(long = "order-max", allow_hyphen_values = true)]
    pub order_max: Option<String>,
    /// Extra randomly perturbed optimizer starts
    #[arg(long, allow_hyphen_values = true)]
    pub multistart: Option<String>,
    /// CSV destination; standard output when absent
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Flags {
    /// The flags that were given, keyed like the config file.
    pub fn to_raw(&self) -> BTreeMap<String, String> {
        let pairs: [(&str, &Option<String>); 28] = [
            ("model", &self.model),
            ("a", &self.a),
            ("c", &self.c),
            ("s", &self.s),
            ("base", &self.base),
            ("amp", &self.amp),
            ("dim", &self.dim),
            ("x0", &self.x0),
            ("x", &self.x),
            ("x_grid", &self.x_grid),
            ("T", &self.t_end),
            ("theta", &self.theta),
            ("N", &self.steps),
            ("h", &self.h),
            ("h_values", &self.h_values),
            ("h_ref", &self.h_ref),
            ("path_n", &self.path_n),
            ("epsilon", &self.epsilon),
            ("epsilon_values", &self.epsilon_values),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("delta", &self.delta),
            ("lambda_min", &self.lambda_min),
            ("lambda_max", &self.lambda_max),
            ("lambda_step", &self.lambda_step),
            ("order_target", &self.order_target),
            ("order_max", &self.order_max),
            ("multistart", &self.multistart),
        ];
        let mut raw: BTreeMap<String, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if let Some(o) = &self.output {
            raw.insert("output".into(), o.display().to_string());
        }
        raw
    }
}

impl Sub {
    pub fn split(&self) -> (Command, &Flags) {
        match self {
            Sub::Rate(f) => (Command::Rate, f),
            Sub::RateDiscrete(f) => (Command::RateDiscrete, f),
            Sub::SmallTime(f) => (Command::SmallTime, f),
            Sub::Simulate(f) => (Command::Simulate, f),
            Sub::Tail(f) => (Command::Tail, f),
            Sub::Lmgf(f) => (Command::Lmgf, f),
            Sub::Converge(f) => (Command::Converge, f),
        }
    }
}

/// Parses the command line, reads the config file it names, and validates
/// the merged configuration.
pub fn parse_and_validate<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (command, flags) = cli.command.split();
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Invalid(vec![format!("field `config`: cannot read `{}`: {e}", path.display())])
            })?;
            Some(Ini::parse(&text).map_err(|errs| {
                CliError::Invalid(
                    errs.into_iter()
                        .map(|e| format!("{}: {e}", path.display()))
                        .collect(),
                )
            })?)
        }
        None => None,
    };
    RunConfig::from_sources(command, file.as_ref(), &flags.to_raw()).map_err(CliError::Invalid)
}
