//! Output files: CSV tables, the text summary and the resolved config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dualband_sim::scenario::ScenarioResult;
use dualband_sim::topology::Role;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::presets::{reference_for, SCENARIO1_REFERENCE};

/// Output directory. Each file is written once, whole.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&p, contents).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}

/// Formats floats so that the same value always prints the same way.
fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// CSV of serializable rows with flat fields. Header comes from the first
/// row's field names.
pub fn rows_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let v = serde_json::to_value(r).map_err(|e| CliError::Runtime(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| CliError::Runtime("row is not an object".into()))?;
        if i == 0 {
            out.push_str(&obj.keys().cloned().collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        let fields: Vec<String> = obj
            .values()
            .map(|x| match x {
                serde_json::Value::Number(n) => n.as_f64().map(cell).unwrap_or_else(|| n.to_string()),
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => "nan".into(),
                other => other.to_string(),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Device rows of every run, one header.
pub fn results_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from("scenario,seed,device,role,throughput_bps,utility\n");
    for r in results {
        out.extend(r.csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    out
}

pub fn houses_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from(
        "scenario,seed,house,t_f,t_w,idle,collision,p_dbf_success,t_w_bar,t_f_target,tuned_window,unlicensed_rate_bps,licensed_rate_bps\n",
    );
    let opt = |v: Option<f64>| v.map(cell).unwrap_or_default();
    for r in results {
        for h in &r.houses {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.seed,
                h.house,
                cell(h.t_f),
                cell(h.t_w),
                cell(h.idle),
                cell(h.collision),
                opt(h.p_dbf_success),
                opt(h.t_w_bar),
                opt(h.t_f_target),
                h.tuned_window.map(|w| w.to_string()).unwrap_or_default(),
                cell(h.unlicensed_rate_bps),
                cell(h.licensed_rate_bps),
            );
        }
    }
    out
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Per-scenario metrics over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub scenario: String,
    pub seeds: usize,
    pub metrics: Vec<(&'static str, f64, f64)>,
}

pub fn summarize(results: &[ScenarioResult]) -> SeedSummary {
    let pick = |f: &dyn Fn(&ScenarioResult) -> f64| -> (f64, f64) {
        mean_std(&results.iter().map(f).collect::<Vec<_>>())
    };
    let mbps = |role: Role| move |r: &ScenarioResult| r.mean_throughput(role) / 1e6;
    let util = |m: Option<bool>| move |r: &ScenarioResult| r.mean_user_utility(m).value().unwrap_or(f64::NEG_INFINITY);
    let mut metrics = vec![];
    let mut add = |name: &'static str, (m, s): (f64, f64)| metrics.push((name, m, s));
    add("sdevice_mbps", pick(&mbps(Role::SDevice)));
    add("wdevice_mbps", pick(&mbps(Role::WDevice)));
    if results.iter().any(|r| r.devices.iter().any(|d| d.role == Role::MDevice)) {
        add("mdevice_mbps", pick(&mbps(Role::MDevice)));
        add("macro_user_utility", pick(&util(Some(true))));
        add("small_cell_user_utility", pick(&util(Some(false))));
    }
    add("user_utility", pick(&util(None)));
    add("t_f", pick(&|r: &ScenarioResult| r.mean_t_f()));
    SeedSummary { scenario: results.first().map(|r| r.scenario.clone()).unwrap_or_default(), seeds: results.len(), metrics }
}

pub fn summary_csv(sums: &[SeedSummary]) -> String {
    let mut out = String::from("scenario,seeds,metric,mean,std\n");
    for s in sums {
        for (name, m, sd) in &s.metrics {
            let _ = writeln!(out, "{},{},{},{},{}", s.scenario, s.seeds, name, cell(*m), cell(*sd));
        }
    }
    out
}

/// One line per scenario with mean ± std of each metric.
pub fn summary_text(sums: &[SeedSummary]) -> String {
    let mut out = String::new();
    for s in sums {
        let _ = write!(out, "{} ({} seed{})", s.scenario, s.seeds, if s.seeds == 1 { "" } else { "s" });
        for (name, m, sd) in &s.metrics {
            let _ = write!(out, "  {name} {m:.3} ± {sd:.3}");
        }
        out.push('\n');
    }
    out
}

/// Side-by-side table of scenario 1 results and the published reference.
/// Expects one result per column; missing columns are left out.
pub fn reference_comparison(results: &[ScenarioResult]) -> String {
    let mut out = String::from("Scenario 1 against the published reference (Mbps, user utility)\n");
    let _ = writeln!(
        out,
        "{:<14} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8} {:>6}",
        "column", "sDev", "ref", "wDev", "ref", "U", "ref", "t_f"
    );
    for col in SCENARIO1_REFERENCE {
        let Some(r) = results.iter().find(|r| reference_for(r.use_case, r.variant) == Some(&col)) else { continue };
        let u = r.mean_user_utility(None).value().unwrap_or(f64::NEG_INFINITY);
        let _ = writeln!(
            out,
            "{:<14} {:>9.2} {:>9.1} {:>9.2} {:>9.1} {:>8.3} {:>8.1} {:>6.3}{}",
            col.label,
            r.mean_throughput(Role::SDevice) / 1e6,
            col.sdevice_mbps,
            r.mean_throughput(Role::WDevice) / 1e6,
            col.wdevice_mbps,
            u,
            col.utility,
            r.mean_t_f(),
            if col.value_checked { "" } else { "  (ordering only)" },
        );
    }
    out
}
