//! Backoff-window tuning for a small cell that speaks WiFi in the unlicensed
//! band.
//!
//! Such an fBS cannot schedule airtime directly; it only controls its own
//! initial contention window `W_f`. Its total channel usage falls
//! monotonically as `W_f` grows, so a bisection over integer windows finds the
//! one that hits a requested usage, using nothing but the fBS's own
//! transmit-state samples.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Total fBS channel usage to aim for: its sDevice share plus the downlink
/// it carries for wDevices, `t_f* + t_w^dl`.
///
/// `t_w^dl` scales `t_w*` by the downlink share of the WLAN demand when the
/// WLAN is held below its demand, and is the whole downlink demand otherwise.
///
/// ```
/// use dualband::ifw::target_tfbs;
/// let t = target_tfbs(0.415, 0.485, 0.3, 0.6).unwrap();
/// assert!((t - 0.6575).abs() < 1e-12);
/// ```
pub fn target_tfbs(t_f_star: f64, t_w_star: f64, t_w_bar_dl: f64, t_w_bar: f64) -> Result<f64> {
    check_unit("t_f*", t_f_star)?;
    check_unit("t_w*", t_w_star)?;
    check_unit("t_w_bar_dl", t_w_bar_dl)?;
    check_unit("t_w_bar", t_w_bar)?;
    if !(t_w_bar > 0.0) {
        return Err(Error::Domain { name: "t_w_bar", value: t_w_bar });
    }
    if t_w_bar_dl > t_w_bar {
        return Err(Error::Domain { name: "t_w_bar_dl above t_w_bar", value: t_w_bar_dl });
    }
    if t_f_star + t_w_star > 1.0 + 1e-12 {
        return Err(Error::Domain { name: "t_f* + t_w*", value: t_f_star + t_w_star });
    }
    let dl = if t_w_star < t_w_bar { t_w_bar_dl / t_w_bar * t_w_star } else { t_w_bar_dl };
    Ok(t_f_star + dl)
}

/// `N_tx / N_tot` over periodic transmit-state samples.
pub fn measure_tfbs(samples: &[bool]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no transmit-state samples"));
    }
    let tx = samples.iter().filter(|&&s| s).count();
    Ok(tx as f64 / samples.len() as f64)
}

/// Same estimate from pre-counted samples.
pub fn measure_tfbs_counts(n_tx: u64, n_tot: u64) -> Result<f64> {
    if n_tot == 0 {
        return Err(Error::Empty("no transmit-state samples"));
    }
    if n_tx > n_tot {
        return Err(Error::Inconsistent { what: "n_tx above n_tot", value: n_tx as f64 });
    }
    Ok(n_tx as f64 / n_tot as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    pub w_low: u32,
    pub w_high: u32,
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Transmit-state samples behind each measurement.
    pub samples_per_measurement: u64,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig { w_low: 1, w_high: 1024, tolerance: 0.02, max_iterations: 20, samples_per_measurement: 10_000 }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_low == 0 || self.w_low >= self.w_high {
            return Err(Error::Config(format!("window range [{}, {}] is empty", self.w_low, self.w_high)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain { name: "tolerance", value: self.tolerance });
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    /// Warns when measurement noise is large against the tolerance, since
    /// the loop may then stop on a lucky sample or never stop.
    pub fn noise_warning(&self, measurement_std: f64) -> Option<String> {
        (self.tolerance <= 2.0 * measurement_std).then(|| {
            format!(
                "tolerance {} is within twice the measurement std {:.4}; increase samples or tolerance",
                self.tolerance, measurement_std
            )
        })
    }

    /// Iterations needed to shrink the window range to adjacent integers.
    pub fn iteration_bound(&self) -> u32 {
        let span = f64::from(self.w_high - self.w_low);
        span.log2().ceil() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerOutcome {
    pub window: u32,
    pub measured: f64,
    pub converged: bool,
    /// Midpoint measurements taken; endpoint probes are not counted.
    pub iterations: u32,
    /// Every `(W, measurement)` in the order taken, endpoints first.
    pub trace: Vec<(u32, f64)>,
}

/// Bisection over integer windows for `|t_fBS(W) - target| < tolerance`.
///
/// `measure` must be nonincreasing in `W` up to noise. Returns a bracket
/// error when the target is outside the endpoint measurements. If the loop
/// runs out of iterations or the interval collapses first, the closest
/// measurement seen is returned with `converged = false`.
pub fn bisect_window<F>(target: f64, mut measure: F, cfg: &TunerConfig) -> Result<TunerOutcome>
where
    F: FnMut(u32) -> f64,
{
    cfg.validate()?;
    let (mut w1, mut w2) = (cfg.w_low, cfg.w_high);
    let mut t1 = measure(w1);
    let t2 = measure(w2);
    let mut trace = vec![(w1, t1), (w2, t2)];
    if !(t2 <= target && target <= t1) {
        return Err(Error::Bracket { target, low: t2, high: t1 });
    }
    let done = |w: u32, t: f64, it: u32, trace: Vec<(u32, f64)>| TunerOutcome {
        window: w,
        measured: t,
        converged: (t - target).abs() < cfg.tolerance,
        iterations: it,
        trace,
    };
    for (w, t) in [(w1, t1), (w2, t2)] {
        if (t - target).abs() < cfg.tolerance {
            return Ok(done(w, t, 0, trace));
        }
    }

    let mut iterations = 0;
    while iterations < cfg.max_iterations && w2 - w1 > 1 {
        let mid = w1 + (w2 - w1) / 2;
        let t = measure(mid);
        iterations += 1;
        trace.push((mid, t));
        if (t - target).abs() < cfg.tolerance {
            return Ok(done(mid, t, iterations, trace));
        }
        if (t - target) * (t1 - target) > 0.0 {
            w1 = mid;
            t1 = t;
        } else {
            w2 = mid;
        }
    }
    let &(w, t) = trace
        .iter()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .expect("trace holds the endpoints");
    Ok(done(w, t, iterations, trace))
}
