//! Closed-form sweeps of the unlicensed time share, and the DBF usage
//! sweep against simulation.

use dualband::balance::{optimal_tf, sensitivity_case, sum_utility_at, utility_sensitivity, BalanceInputs, Regime, SensitivityCase};
use dualband_sim::experiments::EtaPoint;
use serde::{Deserialize, Serialize};

use crate::config::EtaSweepConfig;
use crate::error::{CliError, Result};

/// Licensed bandwidths in MHz, both bands at a fixed spectral efficiency.
pub const LICENSED_BANDWIDTHS_MHZ: [f64; 7] = [1.4, 3.0, 5.0, 10.0, 15.0, 20.0, 30.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfSweepSpec {
    pub licensed_mhz: Vec<f64>,
    pub unlicensed_mhz: f64,
    pub bits_per_hz: f64,
    pub n_w: Vec<u32>,
    pub t_w_bar: Vec<f64>,
    pub t_max: f64,
    /// Fixed share reported next to the optimum.
    pub constant_tf: f64,
    /// Steps for the sensitivity table, both signs are evaluated.
    pub deltas: Vec<f64>,
}

impl Default for TfSweepSpec {
    fn default() -> Self {
        TfSweepSpec {
            licensed_mhz: LICENSED_BANDWIDTHS_MHZ.to_vec(),
            unlicensed_mhz: 20.0,
            bits_per_hz: 3.9,
            n_w: vec![1, 2, 3],
            t_w_bar: vec![0.3, 0.6, 1.0],
            t_max: 0.9,
            constant_tf: 0.3,
            deltas: vec![0.01, 0.02, 0.04, 0.06, 0.08, 0.1],
        }
    }
}

impl TfSweepSpec {
    /// One WLAN device with 0.6 demand, the curve the utility plot fixes.
    pub fn single_wlan() -> Self {
        TfSweepSpec { n_w: vec![1], t_w_bar: vec![0.6], ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, v: f64| CliError::Config(format!("{k}: out of range: {v}"));
        if let Some(&b) = self.licensed_mhz.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(bad("licensed_mhz", b));
        }
        if !(self.unlicensed_mhz > 0.0) {
            return Err(bad("unlicensed_mhz", self.unlicensed_mhz));
        }
        if !(self.bits_per_hz > 0.0) {
            return Err(bad("bits_per_hz", self.bits_per_hz));
        }
        if !(self.t_max > 0.0 && self.t_max <= 1.0) {
            return Err(bad("t_max", self.t_max));
        }
        if let Some(&t) = self.t_w_bar.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(bad("t_w_bar", t));
        }
        if self.licensed_mhz.is_empty() || self.n_w.is_empty() || self.t_w_bar.is_empty() {
            return Err(CliError::Config("licensed_mhz, n_w and t_w_bar need at least one value".into()));
        }
        Ok(())
    }

    pub fn inputs(&self, licensed_mhz: f64, n_w: u32, t_w_bar: f64) -> Result<BalanceInputs> {
        let r_u = self.bits_per_hz * self.unlicensed_mhz * 1e6;
        Ok(BalanceInputs::new(self.bits_per_hz * licensed_mhz * 1e6, r_u, n_w, self.t_max, t_w_bar)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfRow {
    pub licensed_mhz: f64,
    pub rate_ratio: f64,
    pub n_w: u32,
    pub t_w_bar: f64,
    pub t_f_star: f64,
    pub t_w_star: f64,
    pub regime: String,
    pub utility_optimal: f64,
    pub utility_constant: f64,
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::H1 => "H1",
        Regime::H2 => "H2",
        Regime::L1 => "L1",
        Regime::Boundary => "boundary",
    }
}

/// Optimal share and reduced sum utility over the grid. Utilities of
/// minus infinity are written as NaN.
pub fn sweep_tf(spec: &TfSweepSpec) -> Result<Vec<TfRow>> {
    spec.validate()?;
    let mut rows = vec![];
    for &n_w in &spec.n_w {
        for &t_w_bar in &spec.t_w_bar {
            for &b in &spec.licensed_mhz {
                let inp = spec.inputs(b, n_w, t_w_bar)?;
                let d = optimal_tf(&inp);
                let u = |t: f64| -> Result<f64> { Ok(sum_utility_at(t, &inp, None)?.value().unwrap_or(f64::NAN)) };
                rows.push(TfRow {
                    licensed_mhz: b,
                    rate_ratio: inp.rate_ratio(),
                    n_w,
                    t_w_bar,
                    t_f_star: d.t_f,
                    t_w_star: d.t_w,
                    regime: regime_name(d.regime).into(),
                    utility_optimal: u(d.t_f)?,
                    utility_constant: u(spec.constant_tf.min(spec.t_max))?,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub licensed_mhz: f64,
    pub n_w: u32,
    pub t_w_bar: f64,
    pub t_f_star: f64,
    pub delta: f64,
    /// First-order change over `delta`, per unit of `t_f`.
    pub analytic: f64,
    /// Direct difference of the sum utility, per unit of `t_f`.
    pub actual: f64,
    pub relative_error: f64,
    pub case: String,
}

/// Utility change per unit share around the optimum, first-order formula
/// against the direct difference. Steps that leave `[0, t_max]` are skipped.
pub fn sweep_sensitivity(spec: &TfSweepSpec) -> Result<Vec<SensitivityRow>> {
    spec.validate()?;
    let mut rows = vec![];
    for &n_w in &spec.n_w {
        for &t_w_bar in &spec.t_w_bar {
            for &b in &spec.licensed_mhz {
                let inp = spec.inputs(b, n_w, t_w_bar)?;
                let t = optimal_tf(&inp).t_f;
                let u0 = sum_utility_at(t, &inp, None)?.value();
                let mut deltas: Vec<f64> = spec.deltas.iter().flat_map(|&d| [-d, d]).collect();
                deltas.sort_by(f64::total_cmp);
                for delta in deltas {
                    let end = t + delta;
                    if !(0.0..inp.t_max).contains(&end) {
                        continue;
                    }
                    let (Some(u0), Some(u1)) = (u0, sum_utility_at(end, &inp, None)?.value()) else { continue };
                    let analytic = utility_sensitivity(t, delta, &inp)? / delta;
                    let actual = (u1 - u0) / delta;
                    let case = match sensitivity_case(t + delta / 2.0, &inp) {
                        SensitivityCase::A => "A",
                        SensitivityCase::B => "B",
                    };
                    rows.push(SensitivityRow {
                        licensed_mhz: b,
                        n_w,
                        t_w_bar,
                        t_f_star: t,
                        delta,
                        analytic,
                        actual,
                        relative_error: ((analytic - actual) / actual).abs(),
                        case: case.into(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub celltx_ms: u32,
    pub eta: f64,
    pub analytic_tf: f64,
    pub simulated_tf: f64,
    pub gap: f64,
    pub analytic_p: f64,
    pub simulated_p: f64,
}

pub fn sweep_eta(cfg: &EtaSweepConfig) -> Result<Vec<EtaRow>> {
    if cfg.celltx_ms.is_empty() {
        return Err(CliError::Config("celltx_ms: need at least one value".into()));
    }
    let pts: Vec<EtaPoint> = cfg.setup.sweep(&cfg.celltx_ms, cfg.seed)?;
    Ok(cfg
        .celltx_ms
        .iter()
        .zip(pts)
        .map(|(&c, p)| EtaRow {
            celltx_ms: c,
            eta: p.eta,
            analytic_tf: p.analytic_tf,
            simulated_tf: p.simulated_tf,
            gap: (p.simulated_tf - p.analytic_tf).abs(),
            analytic_p: p.analytic_p,
            simulated_p: p.simulated_p,
        })
        .collect())
}

pub fn max_gap(rows: &[EtaRow]) -> f64 {
    rows.iter().map(|r| r.gap).fold(0.0, f64::max)
}
