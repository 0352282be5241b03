//! Subcommand drivers.

use rayon::prelude::*;

use ldrate::harness::TailStudySpec;
use ldrate::montecarlo::lambda_axis;
use ldrate::rate::rate_on_grid;
use ldrate::{
    format_float, legendre_transform, lmgf_table, run_convergence_study, run_tail_study,
    sample_terminal, small_time_rate, MinimizeOptions, MinimizeResult, RateKind, RateQuery,
    ReferenceKind, SimConfig,
};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::output::{state_columns, Cell, Report};

pub struct Outcome {
    pub report: Report,
    /// A declared order target or maximum was not met.
    pub order_missed: bool,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = match cfg.command {
        Command::Rate => rates(cfg, RateKind::Continuous)?,
        Command::RateDiscrete => rates(cfg, RateKind::Discrete)?,
        Command::SmallTime => small_time(cfg)?,
        Command::Simulate => simulate(cfg)?,
        Command::Tail => tail(cfg)?,
        Command::Lmgf => lmgf(cfg)?,
        Command::Converge => return converge(cfg),
    };
    Ok(Outcome {
        report,
        order_missed: false,
    })
}

fn options(cfg: &RunConfig) -> MinimizeOptions {
    MinimizeOptions {
        multistart: cfg.multistart,
        ..MinimizeOptions::default()
    }
}

fn rate_report(cfg: &RunConfig, dim: usize, results: &[MinimizeResult]) -> Report {
    let mut columns = state_columns("x", dim);
    columns.extend(["value", "gradient_norm", "converged"].map(String::from));
    let rows = cfg
        .x_grid
        .iter()
        .zip(results)
        .map(|(x, r)| {
            let mut row: Vec<Cell> = x.iter().map(|&v| Cell::Real(v)).collect();
            row.extend([
                Cell::Real(r.value),
                Cell::Real(r.gradient_norm),
                Cell::Bool(r.converged),
            ]);
            row
        })
        .collect();
    Report {
        columns,
        rows,
        summary: Vec::new(),
    }
}

fn rates(cfg: &RunConfig, kind: RateKind) -> Result<Report, CliError> {
    let model = cfg.model_entry()?.model;
    let dim = model.dim();
    let query = RateQuery::new(model, cfg.x0.clone(), cfg.t_end)
        .with_theta(cfg.theta)
        .with_steps(cfg.steps)
        .with_path_steps(cfg.path_steps)
        .with_options(options(cfg));
    let results = rate_on_grid(&query, kind, &cfg.x_grid)?;
    Ok(rate_report(cfg, dim, &results))
}

fn small_time(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model_entry()?.model;
    let h = 1.0 / cfg.steps as f64;
    let opts = options(cfg);
    let results = cfg
        .x_grid
        .par_iter()
        .map(|y| small_time_rate(&model, &cfg.x0, y, h, cfg.theta, &opts).map(|r| r.1))
        .collect::<ldrate::Result<Vec<_>>>()?;
    Ok(rate_report(cfg, model.dim(), &results))
}

fn sim_config(cfg: &RunConfig, epsilon: f64) -> Result<SimConfig, CliError> {
    let model = cfg.model_entry()?.model;
    let mut sim = SimConfig::new(model, cfg.x0.clone(), cfg.t_end, cfg.steps);
    sim.theta = cfg.theta;
    sim.epsilon = epsilon;
    sim.samples = cfg.samples;
    sim.seed = cfg.seed;
    Ok(sim)
}

fn simulate(cfg: &RunConfig) -> Result<Report, CliError> {
    let sim = sim_config(cfg, cfg.epsilon_values[0])?;
    let d = sim.model.dim();
    let samples = sample_terminal(&sim)?;
    let mut columns = vec!["sample".to_string()];
    columns.extend(state_columns("x", d));
    let rows = samples
        .chunks(d)
        .enumerate()
        .map(|(i, x)| {
            let mut row = vec![Cell::Int(i as u64)];
            row.extend(x.iter().map(|&v| Cell::Real(v)));
            row
        })
        .collect();
    Ok(Report {
        columns,
        rows,
        summary: Vec::new(),
    })
}

fn tail(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model_entry()?.model;
    let spec = TailStudySpec {
        model,
        theta: cfg.theta,
        x0: cfg.x0.clone(),
        t_end: cfg.t_end,
        delta: cfg.delta,
        epsilon_values: cfg.epsilon_values.clone(),
        steps: cfg.steps,
        samples: cfg.samples,
        seed: cfg.seed,
        path_steps: cfg.path_steps,
        options: options(cfg),
    };
    let study = run_tail_study(&spec)?;
    let mut report = Report::new(&[
        "epsilon",
        "p_hat",
        "log_estimate",
        "ci_low",
        "ci_high",
        "ci_half_width",
        "count",
        "lower_bound",
    ]);
    report.rows = study
        .rows
        .iter()
        .map(|t| {
            vec![
                Cell::Real(t.epsilon),
                Cell::Real(t.p_hat),
                Cell::Real(t.log_estimate),
                Cell::Real(t.ci_low),
                Cell::Real(t.ci_high),
                Cell::Real(t.ci_half_width),
                Cell::Int(t.count as u64),
                Cell::Bool(t.lower_bound),
            ]
        })
        .collect();
    report.summary.push(format!("c_delta={}", format_float(study.c_delta)));
    Ok(report)
}

fn lmgf(cfg: &RunConfig) -> Result<Report, CliError> {
    let sim = sim_config(cfg, cfg.epsilon_values[0])?;
    let d = sim.model.dim();
    let (lo, hi, step) = cfg.lambda;
    let axis = lambda_axis(lo, hi, step)?;
    let table = lmgf_table(&sim, vec![axis; d])?;
    let mut columns = state_columns("lambda", d);
    columns.push("lmgf".into());
    let rows = table
        .points()
        .iter()
        .zip(&table.values)
        .map(|(l, v)| {
            let mut row: Vec<Cell> = l.iter().map(|&v| Cell::Real(v)).collect();
            row.push(Cell::Real(*v));
            row
        })
        .collect();
    let mut summary = Vec::new();
    for x in &cfg.x_grid {
        let r = legendre_transform(&table, x)?;
        let xs: Vec<String> = x.iter().map(|v| format_float(*v)).collect();
        summary.push(format!(
            "legendre x={} value={} on_boundary={}",
            xs.join(" "),
            format_float(r.value),
            r.on_boundary
        ));
    }
    Ok(Report {
        columns,
        rows,
        summary,
    })
}

fn converge(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let entry = cfg.model_entry()?;
    let reference = match cfg.h_ref {
        Some(h_ref) => ReferenceKind::FineGrid { h_ref },
        None => ReferenceKind::ClosedForm,
    };
    let study = run_convergence_study(
        &entry,
        cfg.theta,
        &cfg.x0,
        cfg.t_end,
        &cfg.x_grid,
        &cfg.h_values,
        reference,
        &options(cfg),
    )?;
    let mut report = Report::new(&["h", "sup_error"]);
    report.rows = study
        .h_values
        .iter()
        .zip(&study.errors)
        .map(|(&h, &e)| vec![Cell::Real(h), Cell::Real(e)])
        .collect();
    let order = study.fitted_order;
    report.summary.push(match order {
        Some(p) => format!("fitted_order={}", format_float(p)),
        None => "fitted_order=undefined".to_string(),
    });
    let below = cfg.order_target.is_some_and(|t| order.is_none_or(|p| p < t));
    let above = cfg.order_max.is_some_and(|t| order.is_none_or(|p| p > t));
    Ok(Outcome {
        report,
        order_missed: below || above,
    })
}
