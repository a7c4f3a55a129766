//! The CLI verbs as library calls. Each writes its tables, a summary and
//! the resolved configuration into the output directory.

use std::fmt::Write as _;

use dualband::balance::{optimal_tf, sensitivity_case, sum_utility_at, BalanceInputs, SensitivityCase, TimeShareDecision};
use dualband_sim::experiments::IfwTuneResult;
use dualband_sim::scenario::{run_seeds, ScenarioResult};
use serde::{Deserialize, Serialize};

use crate::config::{emit_versioned, Batch, EtaSweepConfig, TuneConfig};
use crate::error::{CliError, Result};
use crate::report::{houses_csv, results_csv, rows_csv, summarize, summary_csv, summary_text, reference_comparison, OutDir};
use crate::sweeps::{max_gap, sweep_eta, sweep_sensitivity, sweep_tf, EtaRow, SensitivityRow, TfRow, TfSweepSpec};

/// Command-line overrides applied on top of a file or preset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon_s: Option<f64>,
    pub log_events: bool,
}

impl Overrides {
    pub fn apply(&self, batch: &mut Batch) {
        for r in &mut batch.runs {
            if let Some(s) = self.seed {
                r.seeds = vec![s];
            }
            if let Some(h) = self.horizon_s {
                r.scenario.horizon_s = h;
            }
            r.scenario.log_events |= self.log_events;
        }
    }
}

pub struct SimulateReport {
    /// One entry per run, one result per seed.
    pub results: Vec<Vec<ScenarioResult>>,
    pub summary: String,
}

/// Runs every scenario in the batch. `compare_reference` appends the
/// scenario 1 comparison table to the summary.
pub fn simulate(batch: &Batch, out: &OutDir, compare_reference: bool) -> Result<SimulateReport> {
    batch.validate()?;
    out.write("config.json", &emit_versioned(batch)?)?;
    let results = batch
        .runs
        .iter()
        .map(|r| run_seeds(&r.scenario, &r.seeds).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<ScenarioResult> = results.iter().flatten().cloned().collect();
    out.write("results.csv", &results_csv(&flat))?;
    out.write("houses.csv", &houses_csv(&flat))?;
    let sums: Vec<_> = results.iter().map(|r| summarize(r)).collect();
    out.write("summary.csv", &summary_csv(&sums))?;

    let mut summary = summary_text(&sums);
    if compare_reference {
        let first: Vec<ScenarioResult> = results.iter().filter_map(|r| r.first().cloned()).collect();
        summary.push('\n');
        summary.push_str(&reference_comparison(&first));
    }
    let warnings: Vec<&String> = flat.iter().flat_map(|r| &r.warnings).collect();
    if !warnings.is_empty() {
        let _ = writeln!(summary, "\n{} warning(s)", warnings.len());
        for w in warnings.iter().take(20) {
            let _ = writeln!(summary, "  {w}");
        }
    }
    out.write("summary.txt", &summary)?;
    for r in &flat {
        for (h, log) in r.event_logs.iter().enumerate() {
            out.write(&format!("events/{}-seed{}-h{h}.log", r.scenario, r.seed), log)?;
        }
    }
    Ok(SimulateReport { results, summary })
}

pub struct TfSweepReport {
    pub rows: Vec<TfRow>,
    pub sensitivity: Vec<SensitivityRow>,
    pub summary: String,
}

/// Closed-form share sweep and the sensitivity table around each optimum.
pub fn run_tf_sweep(spec: &TfSweepSpec, out: &OutDir) -> Result<TfSweepReport> {
    spec.validate()?;
    out.write("config.json", &emit_versioned(spec)?)?;
    let rows = sweep_tf(spec)?;
    let sensitivity = sweep_sensitivity(spec)?;
    out.write("tf.csv", &rows_csv(&rows)?)?;
    out.write("sensitivity.csv", &rows_csv(&sensitivity)?)?;

    let mut summary = String::new();
    for &n_w in &spec.n_w {
        for &t_w_bar in &spec.t_w_bar {
            let sel: Vec<&TfRow> = rows.iter().filter(|r| r.n_w == n_w && r.t_w_bar == t_w_bar).collect();
            let lo = sel.iter().map(|r| r.t_f_star).fold(f64::INFINITY, f64::min);
            let hi = sel.iter().map(|r| r.t_f_star).fold(f64::NEG_INFINITY, f64::max);
            let loss = sel
                .iter()
                .map(|r| r.utility_optimal - r.utility_constant)
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max);
            let _ = writeln!(
                summary,
                "N_W={n_w} t_w_bar={t_w_bar}: t_f* in [{lo:.4}, {hi:.4}], constant t_f={} loses at most {loss:.4}",
                spec.constant_tf
            );
        }
    }
    let worst = sensitivity.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let _ = writeln!(summary, "sensitivity: {} steps, worst relative error {worst:.4}", sensitivity.len());
    out.write("summary.txt", &summary)?;
    Ok(TfSweepReport { rows, sensitivity, summary })
}

pub struct EtaSweepReport {
    pub rows: Vec<EtaRow>,
    pub summary: String,
}

pub fn run_eta_sweep(cfg: &EtaSweepConfig, out: &OutDir) -> Result<EtaSweepReport> {
    out.write("config.json", &emit_versioned(cfg)?)?;
    let rows = sweep_eta(cfg)?;
    out.write("eta.csv", &rows_csv(&rows)?)?;
    let increasing = rows.windows(2).all(|w| w[1].analytic_tf > w[0].analytic_tf);
    let summary = format!(
        "{} points over {} s each, max |analytic - simulated| = {:.4}, analytic curve {}increasing\n",
        rows.len(),
        cfg.setup.horizon_s,
        max_gap(&rows),
        if increasing { "" } else { "not " }
    );
    out.write("summary.txt", &summary)?;
    Ok(EtaSweepReport { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub target: f64,
    pub window: u32,
    pub measured: f64,
    pub verified: f64,
    pub iterations: u32,
    pub converged: bool,
}

pub struct TuneReport {
    pub results: Vec<IfwTuneResult>,
    pub summary: String,
}

pub fn run_tune(cfg: &TuneConfig, out: &OutDir) -> Result<TuneReport> {
    if cfg.targets.is_empty() {
        return Err(CliError::Config("targets: need at least one value".into()));
    }
    if let Some(t) = cfg.targets.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(CliError::Config(format!("targets: {t} is not in (0, 1)")));
    }
    out.write("config.json", &emit_versioned(cfg)?)?;
    let results = cfg.targets.iter().map(|&t| cfg.setup.run(t, cfg.seed)).collect::<dualband::Result<Vec<_>>>()?;
    let rows: Vec<TuneRow> = results
        .iter()
        .map(|r| TuneRow {
            target: r.target,
            window: r.outcome.window,
            measured: r.outcome.measured,
            verified: r.verified,
            iterations: r.outcome.iterations,
            converged: r.outcome.converged,
        })
        .collect();
    out.write("tune.csv", &rows_csv(&rows)?)?;
    let worst = rows.iter().map(|r| (r.verified - r.target).abs()).fold(0.0, f64::max);
    let summary = format!(
        "{} targets, worst |verified - target| = {worst:.4}, at most {} iterations\n",
        rows.len(),
        rows.iter().map(|r| r.iterations).max().unwrap_or(0)
    );
    out.write("summary.txt", &summary)?;
    Ok(TuneReport { results, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub inputs: BalanceInputs,
    pub decision: TimeShareDecision,
    pub sum_utility: Option<f64>,
    pub sensitivity_case: String,
}

pub fn run_balance(inputs: BalanceInputs) -> Result<BalanceReport> {
    let decision = optimal_tf(&inputs);
    let sum_utility = sum_utility_at(decision.t_f, &inputs, None)?.value();
    let case = match sensitivity_case(decision.t_f, &inputs) {
        SensitivityCase::A => "A",
        SensitivityCase::B => "B",
    };
    Ok(BalanceReport { inputs, decision, sum_utility, sensitivity_case: case.into() })
}
