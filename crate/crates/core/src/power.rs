//! Licensed-band power allocation: water-filling under a total power budget
//! with a per-subchannel ceiling from the interference cap at the macro user.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_pos, Error, Result};
use crate::rate::{lte_rate_approx, shannon_rate, LteRateParams, Throughput};

/// State of one licensed subchannel as seen by the small cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubchannelState {
    /// SINR per watt of transmit power at the sDevice.
    pub gamma: f64,
    /// Gain from the fBS to the macro user on this subchannel.
    pub h_fm_sq: f64,
    /// Interference ceiling at the macro user, watts.
    pub i_cap: f64,
    pub bandwidth: f64,
}

impl SubchannelState {
    pub fn new(gamma: f64, h_fm_sq: f64, i_cap: f64, bandwidth: f64) -> Result<Self> {
        let s = SubchannelState { gamma, h_fm_sq, i_cap, bandwidth };
        s.validate()?;
        Ok(s)
    }

    /// No macro user to protect.
    pub fn uncapped(gamma: f64, bandwidth: f64) -> Result<Self> {
        Self::new(gamma, 0.0, 0.0, bandwidth)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("gamma", self.gamma)?;
        check_nonneg("h_fm_sq", self.h_fm_sq)?;
        check_nonneg("i_cap", self.i_cap)?;
        check_pos("bandwidth", self.bandwidth)?;
        Ok(())
    }

    /// `Ī / |h_fm|²`, infinite when there is no leakage path.
    pub fn power_cap(&self) -> f64 {
        if self.h_fm_sq == 0.0 {
            f64::INFINITY
        } else {
            self.i_cap / self.h_fm_sq
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    /// The Lagrange multiplier `μ`; the water level is `1/μ`. Zero when
    /// every cap binds before the power budget does.
    pub mu: f64,
}

impl PowerAllocation {
    pub fn zeros(k: usize) -> Self {
        PowerAllocation { powers: vec![0.0; k], mu: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Which rate curve maps per-subchannel SINR to throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunction {
    Shannon,
    LteApprox(LteRateParams),
}

impl RateFunction {
    pub fn rate(&self, power: f64, gamma: f64, bandwidth: f64) -> Result<Throughput> {
        match self {
            RateFunction::Shannon => shannon_rate(power, gamma, bandwidth),
            RateFunction::LteApprox(p) => lte_rate_approx(power * gamma, bandwidth, p),
        }
    }

    /// Power beyond which the rate stops growing, if the curve is capped.
    pub fn saturation_power(&self, gamma: f64) -> f64 {
        match self {
            RateFunction::LteApprox(p) => match p.max_spectral_efficiency {
                Some(cap) if gamma > 0.0 => {
                    let sinr = p.kappa_sinr * ((cap / (p.kappa_bw * p.kappa_c)).exp2() - 1.0);
                    sinr / gamma
                }
                _ => f64::INFINITY,
            },
            RateFunction::Shannon => f64::INFINITY,
        }
    }

    /// Gain seen by the water-filling solver. The LTE curve is a scaled
    /// Shannon curve in `sinr/κ_sinr`, so the optimal split is the Shannon
    /// one on `γ/κ_sinr`.
    pub fn effective_gamma(&self, gamma: f64) -> f64 {
        match self {
            RateFunction::Shannon => gamma,
            RateFunction::LteApprox(p) => gamma / p.kappa_sinr,
        }
    }
}

fn allocated(level: f64, gains: &[f64], caps: &[f64], out: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for ((p, &g), &cap) in out.iter_mut().zip(gains).zip(caps) {
        *p = if g > 0.0 { (level - 1.0 / g).max(0.0).min(cap) } else { 0.0 };
        total += *p;
    }
    total
}

/// Maximizes `Σ log2(1 + P_k γ_k)` subject to `Σ P_k ≤ p_tot` and
/// `P_k ≤ Ī_k/|h_fm,k|²`.
///
/// The water level is found by bisection. When the caps sum to less than the
/// budget every subchannel sits at its cap and `mu` is zero.
///
/// ```
/// use dualband::power::{capped_water_fill, SubchannelState};
/// let subs = [
///     SubchannelState::uncapped(10.0, 1.0).unwrap(),
///     SubchannelState::uncapped(0.5, 1.0).unwrap(),
/// ];
/// let a = capped_water_fill(&subs, 0.5).unwrap();
/// assert!((a.powers[0] - 0.5).abs() < 1e-9);
/// assert_eq!(a.powers[1], 0.0);
/// ```
pub fn capped_water_fill(subchannels: &[SubchannelState], p_tot: f64) -> Result<PowerAllocation> {
    capped_water_fill_with(subchannels, p_tot, &RateFunction::Shannon)
}

pub fn capped_water_fill_with(
    subchannels: &[SubchannelState],
    p_tot: f64,
    rate_fn: &RateFunction,
) -> Result<PowerAllocation> {
    if subchannels.is_empty() {
        return Err(Error::Config("no subchannels".into()));
    }
    check_pos("p_tot", p_tot)?;
    for s in subchannels {
        s.validate()?;
    }
    if !subchannels.iter().any(|s| s.gamma > 0.0) {
        return Err(Error::Config("no subchannel with positive gain".into()));
    }
    let k = subchannels.len();
    let gains: Vec<f64> = subchannels.iter().map(|s| rate_fn.effective_gamma(s.gamma)).collect();
    // Power past the rate ceiling buys nothing and only leaks interference.
    let caps: Vec<f64> = subchannels
        .iter()
        .map(|s| s.power_cap().min(rate_fn.saturation_power(s.gamma)))
        .collect();
    let mut powers = vec![0.0; k];

    let cap_sum: f64 = gains.iter().zip(&caps).filter(|(g, _)| **g > 0.0).map(|(_, c)| *c).sum();
    if cap_sum <= p_tot {
        allocated(f64::INFINITY, &gains, &caps, &mut powers);
        return Ok(PowerAllocation { powers, mu: 0.0 });
    }

    // At this level any unsaturated channel alone would absorb the budget.
    let max_inv = gains.iter().filter(|g| **g > 0.0).map(|g| 1.0 / g).fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, p_tot + max_inv);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let total = allocated(mid, &gains, &caps, &mut powers);
        if (total - p_tot).abs() <= 1e-12 * p_tot {
            lo = mid;
            hi = mid;
            break;
        }
        if total > p_tot {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let level = 0.5 * (lo + hi);
    let total = allocated(level, &gains, &caps, &mut powers);
    // Trim bisection slack so the budget is never exceeded.
    if total > p_tot {
        let scale = p_tot / total;
        powers.iter_mut().for_each(|p| *p *= scale);
    }
    Ok(PowerAllocation { powers, mu: 1.0 / level })
}

/// Same power on every subchannel. Interference caps are ignored.
pub fn equal_power(k: usize, p_tot: f64) -> Result<PowerAllocation> {
    if k == 0 {
        return Err(Error::Config("no subchannels".into()));
    }
    check_pos("p_tot", p_tot)?;
    Ok(PowerAllocation { powers: vec![p_tot / k as f64; k], mu: 0.0 })
}

/// `R_L^tot = Σ_k R_L(P_k γ_k)`.
pub fn licensed_sum_rate(
    alloc: &PowerAllocation,
    subchannels: &[SubchannelState],
    rate_fn: &RateFunction,
) -> Result<Throughput> {
    if alloc.powers.len() != subchannels.len() {
        return Err(Error::Config(format!(
            "allocation has {} entries for {} subchannels",
            alloc.powers.len(),
            subchannels.len()
        )));
    }
    alloc
        .powers
        .iter()
        .zip(subchannels)
        .map(|(&p, s)| rate_fn.rate(p, s.gamma, s.bandwidth))
        .sum::<Result<Throughput>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::db_to_linear;
    use approx::assert_relative_eq;

    fn sub(gamma: f64, cap: Option<f64>) -> SubchannelState {
        match cap {
            Some(c) => SubchannelState::new(gamma, 1.0, c, 1.0).unwrap(),
            None => SubchannelState::uncapped(gamma, 1.0).unwrap(),
        }
    }

    #[test]
    fn single_channel_slack_cap_takes_all() {
        let a = capped_water_fill(&[sub(2.0, Some(5.0))], 1.0).unwrap();
        assert_relative_eq!(a.powers[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_channels_split_evenly() {
        let a = capped_water_fill(&[sub(3.0, None), sub(3.0, None)], 2.0).unwrap();
        assert_relative_eq!(a.powers[0], 1.0, max_relative = 1e-9);
        assert_relative_eq!(a.powers[1], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn weak_channel_left_dry() {
        // level 1/mu: 1 - 1/10 + ... only the strong one is active at p=0.5
        let a = capped_water_fill(&[sub(10.0, None), sub(0.5, None)], 0.5).unwrap();
        assert_relative_eq!(a.powers[0], 0.5, max_relative = 1e-9);
        assert_eq!(a.powers[1], 0.0);
        assert_relative_eq!(1.0 / a.mu, 0.6, max_relative = 1e-9);
    }

    #[test]
    fn caps_saturate_when_budget_exceeds_them() {
        let a = capped_water_fill(&[sub(1.0, Some(0.1)), sub(2.0, Some(0.2))], 1.0).unwrap();
        assert_eq!(a.powers, vec![0.1, 0.2]);
        assert_eq!(a.mu, 0.0);
    }

    #[test]
    fn all_caps_zero_gives_zero_allocation() {
        let a = capped_water_fill(&[sub(1.0, Some(0.0)), sub(2.0, Some(0.0))], 1.0).unwrap();
        assert_eq!(a.total(), 0.0);
    }

    #[test]
    fn zero_gain_channel_gets_nothing() {
        let a = capped_water_fill(&[sub(0.0, None), sub(1.0, None)], 1.0).unwrap();
        assert_eq!(a.powers[0], 0.0);
        assert_relative_eq!(a.powers[1], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn errors() {
        assert!(capped_water_fill(&[], 1.0).is_err());
        assert!(capped_water_fill(&[sub(1.0, None)], 0.0).is_err());
        assert!(capped_water_fill(&[sub(0.0, None)], 1.0).is_err());
        assert!(SubchannelState::new(-1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn sum_rate_examples() {
        let subs = [SubchannelState::uncapped(1.0, 1.0).unwrap()];
        let zero = PowerAllocation::zeros(1);
        assert_eq!(licensed_sum_rate(&zero, &subs, &RateFunction::Shannon).unwrap().bps(), 0.0);
        let a = PowerAllocation { powers: vec![3.0], mu: 0.0 };
        assert_relative_eq!(licensed_sum_rate(&a, &subs, &RateFunction::Shannon).unwrap().bps(), 2.0);
        assert!(licensed_sum_rate(&PowerAllocation::zeros(2), &subs, &RateFunction::Shannon).is_err());
    }

    #[test]
    fn capped_lte_gives_femto_rate_on_1_4_mhz() {
        let k = 30;
        let b = 1.4e6 / k as f64;
        let subs: Vec<_> = (0..k)
            .map(|_| SubchannelState::uncapped(db_to_linear(60.0), b).unwrap())
            .collect();
        let f = RateFunction::LteApprox(LteRateParams::default());
        let a = equal_power(subs.len(), 0.0316).unwrap();
        let r = licensed_sum_rate(&a, &subs, &f).unwrap();
        assert_relative_eq!(r.mbps(), 5.46, max_relative = 1e-9);
    }

    #[test]
    fn lte_solver_stops_at_rate_ceiling() {
        let f = RateFunction::LteApprox(LteRateParams::default());
        let subs: Vec<_> = (0..3).map(|_| SubchannelState::uncapped(1e6, 1e5).unwrap()).collect();
        let a = capped_water_fill_with(&subs, 1.0, &f).unwrap();
        assert!(a.total() < 1e-3);
        let r = licensed_sum_rate(&a, &subs, &f).unwrap();
        assert_relative_eq!(r.bps(), 3.0 * 3.9e5, max_relative = 1e-9);
    }
}
