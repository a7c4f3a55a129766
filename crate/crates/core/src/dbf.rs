//! Periodic sense-then-transmit access of an LTE small cell in the
//! unlicensed band, coexisting with saturated WiFi.
//!
//! The fBS may start only on access opportunities spaced `T_attempt` apart
//! on the 1 ms subframe grid. It senses for `T_sensing` right before the
//! boundary and, if the channel was idle throughout, transmits for
//! `T_cellTx`. After a transmission the next opportunity is the first one at
//! least `T_attempt` after it ends.
//!
//! Seen from the WLAN the channel is a sequence of super slots: DIFS, `i`
//! idle backoff slots, then a collision or a success of device `u`. An
//! attempt succeeds when its sensing window fits in the idle part of a super
//! slot, which gives `P_DBFsuc` in closed form.

use serde::{Deserialize, Serialize};

use crate::dcf::DcfStateProbs;
use crate::error::{check_pos, check_unit, Error, Result};
use crate::timing::ChannelTiming;

pub const SUBFRAME: f64 = 1e-3;

/// Access schedule. Attempt period and transmission length are whole
/// subframes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessSchedule {
    pub t_attempt_ms: u32,
    pub t_celltx_ms: u32,
    /// Sensing time in nanoseconds.
    pub t_sensing_ns: u32,
}

impl AccessSchedule {
    pub fn new(t_attempt_ms: u32, t_celltx_ms: u32, t_sensing: f64) -> Result<Self> {
        if !(t_sensing > 0.0) {
            return Err(Error::Domain { name: "t_sensing", value: t_sensing });
        }
        let s = AccessSchedule {
            t_attempt_ms,
            t_celltx_ms,
            t_sensing_ns: (t_sensing * 1e9).round() as u32,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_attempt_ms == 0 || self.t_celltx_ms == 0 {
            return Err(Error::Config("t_attempt and t_celltx must be at least 1 ms".into()));
        }
        let shortest = f64::from(self.t_attempt_ms.min(self.t_celltx_ms)) * SUBFRAME;
        // Sensing has to be short against the access grid.
        if self.t_sensing_ns == 0 || self.t_sensing() > shortest / 10.0 {
            return Err(Error::Domain { name: "t_sensing", value: self.t_sensing() });
        }
        Ok(())
    }

    pub fn t_attempt(&self) -> f64 {
        f64::from(self.t_attempt_ms) * SUBFRAME
    }

    pub fn t_celltx(&self) -> f64 {
        f64::from(self.t_celltx_ms) * SUBFRAME
    }

    pub fn t_sensing(&self) -> f64 {
        f64::from(self.t_sensing_ns) * 1e-9
    }

    /// `η = T_cellTx / T_attempt`.
    pub fn eta(&self) -> f64 {
        f64::from(self.t_celltx_ms) / f64::from(self.t_attempt_ms)
    }
}

/// Super-slot families with their probabilities and durations.
///
/// `i` counts idle backoff slots. The success family is split per device
/// class `u` with equal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperSlotDist {
    probs: DcfStateProbs,
    timing: ChannelTiming,
}

impl SuperSlotDist {
    pub fn new(probs: DcfStateProbs, timing: ChannelTiming) -> Result<Self> {
        probs.validate()?;
        timing.validate()?;
        if probs.q_i >= 1.0 {
            return Err(Error::Singular("q_i = 1, idle runs never end"));
        }
        Ok(SuperSlotDist { probs, timing })
    }

    /// Probability that a super slot has `i` idle slots before its busy period.
    fn idle_run(&self, i: u32) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.probs.p_i * self.probs.q_i.powi(i as i32 - 1)
        }
    }

    pub fn prob_collision(&self, i: u32) -> f64 {
        if i == 0 {
            self.probs.p_c
        } else {
            self.idle_run(i) * self.probs.q_c
        }
    }

    pub fn prob_success(&self, i: u32, _u: usize) -> f64 {
        let n = self.timing.n_classes() as f64;
        let s = if i == 0 { self.probs.p_s } else { self.idle_run(i) * self.probs.q_s };
        s / n
    }

    pub fn duration_collision(&self, i: u32) -> f64 {
        self.timing.t_d + f64::from(i) * self.timing.t_i + self.timing.t_c
    }

    pub fn duration_success(&self, i: u32, u: usize) -> f64 {
        self.timing.t_d + f64::from(i) * self.timing.t_i + self.timing.t_s[u]
    }

    /// Probability mass of super slots with at most `max_i` idle slots.
    pub fn truncated_mass(&self, max_i: u32) -> f64 {
        (0..=max_i)
            .map(|i| {
                self.prob_collision(i)
                    + (0..self.timing.n_classes()).map(|u| self.prob_success(i, u)).sum::<f64>()
            })
            .sum()
    }

    /// Expected super-slot length.
    pub fn t_avg(&self) -> f64 {
        let p = &self.probs;
        let t = &self.timing;
        let g = p.p_i / (1.0 - p.q_i);
        t.t_d + t.t_i * g + t.t_c * (p.p_c + p.q_c * g) + t.mean_success() * (p.p_s + p.q_s * g)
    }
}

/// `T_avg`, the expected DIFS + idle run + busy period.
pub fn superslot_avg_duration(probs: &DcfStateProbs, timing: &ChannelTiming) -> Result<f64> {
    Ok(SuperSlotDist::new(*probs, timing.clone())?.t_avg())
}

/// Smallest `i` such that DIFS plus `i` idle slots covers the sensing window.
pub fn min_idle_slots(t_sensing: f64, t_d: f64, t_i: f64) -> Result<u32> {
    check_pos("t_sensing", t_sensing)?;
    check_pos("t_d", t_d)?;
    check_pos("t_i", t_i)?;
    // Guard against ceil(2.0000000001) on values that are integral in exact arithmetic.
    let x = (t_sensing - t_d) / t_i;
    Ok(if x <= 0.0 { 0 } else { (x - 1e-9).ceil() as u32 })
}

/// Probability that one attempt finds the channel idle for `T_sensing`
/// right before its boundary, with the boundary uniform over WLAN time.
///
/// In a super slot with `i` idle slots the channel is idle for
/// `T_d + i·T_I`, so an attempt lands with room to sense in
/// `(T_d + i·T_I - T_sensing)⁺` of it. Summing over `i` gives a geometric
/// series in `Q_I`.
pub fn p_dbf_success(probs: &DcfStateProbs, timing: &ChannelTiming, t_sensing: f64) -> Result<f64> {
    let dist = SuperSlotDist::new(*probs, timing.clone())?;
    let t_avg = dist.t_avg();
    let i0 = min_idle_slots(t_sensing, timing.t_d, timing.t_i)?;
    let (p_i, q_i) = (probs.p_i, probs.q_i);
    let (t_d, t_i) = (timing.t_d, timing.t_i);
    let num = if i0 == 0 {
        t_d - t_sensing + t_i * p_i / (1.0 - q_i)
    } else {
        let i0f = f64::from(i0);
        p_i * q_i.powi(i0 as i32 - 1) * (t_d + i0f * t_i - t_sensing + t_i * q_i / (1.0 - q_i))
    };
    let p = num / t_avg;
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::Inconsistent { what: "p_dbf_success", value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Long-run fraction of channel time the fBS occupies: `η / (1/p + η)`.
///
/// ```
/// use dualband::dbf::dbf_channel_usage;
/// assert!((dbf_channel_usage(1.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-12);
/// assert_eq!(dbf_channel_usage(4.0, 0.0).unwrap(), 0.0);
/// ```
pub fn dbf_channel_usage(eta: f64, p_suc: f64) -> Result<f64> {
    check_pos("eta", eta)?;
    check_unit("p_suc", p_suc)?;
    if p_suc == 0.0 {
        return Ok(0.0);
    }
    Ok(eta / (1.0 / p_suc + eta))
}

/// Inverse of [`dbf_channel_usage`] before rounding to whole subframes.
pub fn eta_for_target_tf(target: f64, p_suc: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain { name: "target t_f", value: target });
    }
    if !(p_suc > 0.0 && p_suc <= 1.0) {
        return Err(Error::Domain { name: "p_suc", value: p_suc });
    }
    Ok(target / (p_suc * (1.0 - target)))
}

/// Bounds for turning a continuous `η` into a subframe schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleLimits {
    pub max_attempt_ms: u32,
    pub max_celltx_ms: u32,
    pub t_sensing: f64,
    pub tolerance: f64,
}

impl Default for ScheduleLimits {
    fn default() -> Self {
        ScheduleLimits { max_attempt_ms: 20, max_celltx_ms: 500, t_sensing: 10e-6, tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleChoice {
    pub schedule: AccessSchedule,
    pub eta_exact: f64,
    /// Channel usage the rounded schedule gives at the same `p_suc`.
    pub realized_tf: f64,
    pub within_tolerance: bool,
}

/// Picks the whole-subframe schedule whose usage is closest to `target`.
/// Ties go to the shortest attempt period. When no schedule is within the
/// tolerance the closest one is still returned, flagged.
pub fn schedule_for_target_tf(target: f64, p_suc: f64, limits: &ScheduleLimits) -> Result<ScheduleChoice> {
    let eta = eta_for_target_tf(target, p_suc)?;
    if limits.max_attempt_ms == 0 || limits.max_celltx_ms == 0 {
        return Err(Error::Config("schedule limits must be at least 1 ms".into()));
    }
    // Shortest attempt period within tolerance, else the closest usage.
    let mut best: Option<(f64, AccessSchedule, f64)> = None;
    for a in 1..=limits.max_attempt_ms {
        let c = ((eta * f64::from(a)).round() as u32).clamp(1, limits.max_celltx_ms);
        let Ok(s) = AccessSchedule::new(a, c, limits.t_sensing) else { continue };
        let tf = dbf_channel_usage(s.eta(), p_suc)?;
        let err = (tf - target).abs();
        if best.map_or(true, |(e, _, _)| err < e - 1e-12) {
            best = Some((err, s, tf));
        }
        if err <= limits.tolerance {
            break;
        }
    }
    let (err, schedule, realized_tf) =
        best.ok_or_else(|| Error::Config("no feasible schedule under the limits".into()))?;
    Ok(ScheduleChoice { schedule, eta_exact: eta, realized_tf, within_tolerance: err <= limits.tolerance })
}

/// Fraction of recent attempts that found the channel idle.
pub fn estimate_p_dbfsuc(n_success: u64, n_attempts: u64) -> Result<f64> {
    if n_attempts == 0 {
        return Err(Error::Empty("no access attempts"));
    }
    if n_success > n_attempts {
        return Err(Error::Inconsistent { what: "successes above attempts", value: n_success as f64 });
    }
    Ok(n_success as f64 / n_attempts as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn timing(n: usize) -> ChannelTiming {
        ChannelTiming::new(34e-6, 9e-6, 255e-6, vec![255e-6; n]).unwrap()
    }

    fn probs() -> DcfStateProbs {
        DcfStateProbs::new(0.93, 0.01, 0.06, 0.69, 0.04, 0.27).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(AccessSchedule::new(0, 1, 10e-6).is_err());
        assert!(AccessSchedule::new(1, 0, 10e-6).is_err());
        assert!(AccessSchedule::new(1, 1, 200e-6).is_err());
        let s = AccessSchedule::new(2, 5, 10e-6).unwrap();
        assert_relative_eq!(s.eta(), 2.5);
        assert_relative_eq!(s.t_sensing(), 10e-6, max_relative = 1e-12);
    }

    #[test]
    fn t_avg_without_idle_or_collision() {
        let p = DcfStateProbs::new(0.0, 0.0, 1.0, 0.5, 0.1, 0.4).unwrap();
        let t = timing(2);
        assert_relative_eq!(superslot_avg_duration(&p, &t).unwrap(), 34e-6 + 255e-6, max_relative = 1e-12);
    }

    #[test]
    fn t_avg_symmetric_in_classes() {
        let a = ChannelTiming::new(34e-6, 9e-6, 300e-6, vec![200e-6, 300e-6, 400e-6]).unwrap();
        let b = ChannelTiming::new(34e-6, 9e-6, 300e-6, vec![400e-6, 200e-6, 300e-6]).unwrap();
        assert_relative_eq!(
            superslot_avg_duration(&probs(), &a).unwrap(),
            superslot_avg_duration(&probs(), &b).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn t_avg_diverges_when_never_busy() {
        let p = DcfStateProbs::new(0.5, 0.0, 0.5, 1.0, 0.0, 0.0).unwrap();
        assert!(superslot_avg_duration(&p, &timing(1)).is_err());
    }

    #[test]
    fn mass_and_mean_match_series() {
        let d = SuperSlotDist::new(probs(), timing(4)).unwrap();
        assert_relative_eq!(d.truncated_mass(400), 1.0, epsilon = 1e-9);
        let mean: f64 = (0..400)
            .map(|i| {
                d.prob_collision(i) * d.duration_collision(i)
                    + (0..4).map(|u| d.prob_success(i, u) * d.duration_success(i, u)).sum::<f64>()
            })
            .sum();
        assert_relative_eq!(mean, d.t_avg(), max_relative = 1e-9);
    }

    #[test]
    fn min_idle_examples() {
        assert_eq!(min_idle_slots(10e-6, 34e-6, 9e-6).unwrap(), 0);
        assert_eq!(min_idle_slots(50e-6, 34e-6, 9e-6).unwrap(), 2);
        assert_eq!(min_idle_slots(34e-6, 34e-6, 9e-6).unwrap(), 0);
        assert_eq!(min_idle_slots(52e-6, 34e-6, 9e-6).unwrap(), 2);
    }

    #[test]
    fn p_success_degenerate() {
        let p = DcfStateProbs::new(0.0, 0.0, 1.0, 0.3, 0.1, 0.6).unwrap();
        let t = timing(1);
        let expected = (34e-6 - 10e-6) / (34e-6 + 255e-6);
        assert_relative_eq!(p_dbf_success(&p, &t, 10e-6).unwrap(), expected, max_relative = 1e-12);
    }

    /// Direct sum over super slots of the time an attempt boundary can fall
    /// with a fully idle sensing window behind it.
    fn p_success_by_summation(p: &DcfStateProbs, t: &ChannelTiming, ts: f64) -> f64 {
        let d = SuperSlotDist::new(*p, t.clone()).unwrap();
        let mut acc = 0.0;
        for i in 0..2000 {
            let idle = t.t_d + f64::from(i) * t.t_i;
            let w = d.prob_collision(i) + (0..t.n_classes()).map(|u| d.prob_success(i, u)).sum::<f64>();
            acc += w * (idle - ts).max(0.0);
        }
        acc / d.t_avg()
    }

    #[test]
    fn p_success_matches_summation() {
        let t = timing(4);
        for ts in [5e-6, 10e-6, 34e-6, 50e-6, 80e-6] {
            let closed = p_dbf_success(&probs(), &t, ts).unwrap();
            assert_relative_eq!(closed, p_success_by_summation(&probs(), &t, ts), max_relative = 1e-9);
        }
    }

    #[test]
    fn usage_and_inverse() {
        assert_relative_eq!(dbf_channel_usage(1.0, 0.5).unwrap(), 1.0 / 3.0);
        assert_eq!(dbf_channel_usage(3.0, 0.0).unwrap(), 0.0);
        assert!(dbf_channel_usage(0.0, 0.5).is_err());
        let eta = eta_for_target_tf(0.37, 0.2).unwrap();
        assert_relative_eq!(dbf_channel_usage(eta, 0.2).unwrap(), 0.37, max_relative = 1e-12);
        assert_relative_eq!(eta_for_target_tf(0.5, 1.0).unwrap(), 1.0);
        assert!(eta_for_target_tf(1.0, 0.5).is_err());
        assert!(eta_for_target_tf(0.5, 0.0).is_err());
    }

    #[test]
    fn schedule_rounding() {
        let c = schedule_for_target_tf(0.5, 1.0, &ScheduleLimits::default()).unwrap();
        assert_eq!((c.schedule.t_attempt_ms, c.schedule.t_celltx_ms), (1, 1));
        let c = schedule_for_target_tf(0.42, 0.17, &ScheduleLimits::default()).unwrap();
        assert!(c.within_tolerance);
        assert!((c.realized_tf - 0.42).abs() <= 0.02);
        // Needs eta far above the cap.
        let lim = ScheduleLimits { max_celltx_ms: 4, ..Default::default() };
        let c = schedule_for_target_tf(0.99, 0.1, &lim).unwrap();
        assert!(!c.within_tolerance);
        assert_eq!(c.schedule.t_celltx_ms, 4);
    }

    #[test]
    fn estimator() {
        assert_relative_eq!(estimate_p_dbfsuc(3, 10).unwrap(), 0.3);
        assert_eq!(estimate_p_dbfsuc(0, 7).unwrap(), 0.0);
        assert!(estimate_p_dbfsuc(0, 0).is_err());
        assert!(estimate_p_dbfsuc(8, 7).is_err());
    }
}
