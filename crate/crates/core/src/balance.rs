//! Unlicensed-band time-share between the small cell and the WLAN.
//!
//! The small cell picks `t_f`, its fraction of unlicensed airtime; the WLAN
//! gets `t_w = t_max - t_f`, bounded by its own demand `t̄_w`. The optimum of
//! the proportional-fair objective has a closed form that needs only the
//! licensed rate, the unlicensed rate, the number of wDevices and `t̄_w`.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_pos, check_unit, Error, Result};
use crate::power::{capped_water_fill_with, licensed_sum_rate, PowerAllocation, RateFunction, SubchannelState};
use crate::rate::{utility, Throughput, Utility};

/// What the small cell knows about the unlicensed band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnlicensedLoad {
    /// sDevice rate when it holds the unlicensed channel, bits/s.
    pub r_u: f64,
    pub n_w: u32,
    pub t_max: f64,
    /// Airtime the wDevices would use if left alone.
    pub t_w_bar: f64,
    /// Downlink part of `t_w_bar`.
    pub t_w_bar_dl: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceInputs {
    /// Licensed-band sDevice rate `R_L^tot`, bits/s.
    pub r_l_tot: f64,
    pub r_u: f64,
    pub n_w: u32,
    pub t_max: f64,
    pub t_w_bar: f64,
    pub t_w_bar_dl: Option<f64>,
}

impl BalanceInputs {
    pub fn new(r_l_tot: f64, r_u: f64, n_w: u32, t_max: f64, t_w_bar: f64) -> Result<Self> {
        let b = BalanceInputs { r_l_tot, r_u, n_w, t_max, t_w_bar, t_w_bar_dl: None };
        b.validate()?;
        Ok(b)
    }

    pub fn with_load(r_l_tot: f64, load: &UnlicensedLoad) -> Result<Self> {
        let b = BalanceInputs {
            r_l_tot,
            r_u: load.r_u,
            n_w: load.n_w,
            t_max: load.t_max,
            t_w_bar: load.t_w_bar,
            t_w_bar_dl: load.t_w_bar_dl,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_dl(mut self, t_w_bar_dl: f64) -> Result<Self> {
        self.t_w_bar_dl = Some(t_w_bar_dl);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("r_l_tot", self.r_l_tot)?;
        check_pos("r_u", self.r_u)?;
        if !(self.t_max > 0.0 && self.t_max < 1.0) {
            return Err(Error::Domain { name: "t_max", value: self.t_max });
        }
        check_nonneg("t_w_bar", self.t_w_bar)?;
        if let Some(dl) = self.t_w_bar_dl {
            check_nonneg("t_w_bar_dl", dl)?;
            if dl > self.t_w_bar {
                return Err(Error::Domain { name: "t_w_bar_dl above t_w_bar", value: dl });
            }
        }
        Ok(())
    }

    /// `R_L^tot / R_U`: licensed rate in units of unlicensed airtime.
    pub fn rate_ratio(&self) -> f64 {
        self.r_l_tot / self.r_u
    }

    /// WLAN airtime left after the small cell takes `t_f`.
    pub fn t_w_for(&self, t_f: f64) -> f64 {
        (self.t_max - t_f).max(0.0).min(self.t_w_bar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// WLAN would fill the channel; the optimum splits `t_max` evenly between
    /// the sDevice's combined airtime and each wDevice.
    H1,
    /// WLAN would fill the channel and the licensed band alone already beats
    /// a fair share, so the sDevice stays off the unlicensed band.
    H2,
    /// Light WLAN load; the sDevice takes what the WLAN leaves.
    L1,
    /// Between L1 and H1: the WLAN demand does not bind but is not light.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeShareDecision {
    pub t_f: f64,
    pub t_w: f64,
    pub regime: Regime,
}

pub fn classify_regime(inp: &BalanceInputs) -> Regime {
    let n = f64::from(inp.n_w);
    let r = inp.rate_ratio();
    if inp.t_w_bar >= inp.t_max {
        if n * r <= inp.t_max {
            Regime::H1
        } else {
            Regime::H2
        }
    } else if inp.t_w_bar <= n * (inp.t_max + r) / (n + 1.0) {
        Regime::L1
    } else {
        Regime::Boundary
    }
}

/// Closed-form optimum:
/// `t_f* = max((t_max - t̄_w)⁺, (t_max - N_W R_L/R_U)⁺ / (N_W + 1))`.
///
/// ```
/// use dualband::balance::{optimal_tf, BalanceInputs};
/// let inp = BalanceInputs::new(0.07e6, 1e6, 1, 0.9, 0.6).unwrap();
/// let d = optimal_tf(&inp);
/// assert!((d.t_f - 0.415).abs() < 1e-12);
/// assert!((d.t_f + d.t_w - 0.9).abs() < 1e-12);
/// ```
pub fn optimal_tf(inp: &BalanceInputs) -> TimeShareDecision {
    let n = f64::from(inp.n_w);
    let floor = (inp.t_max - inp.t_w_bar).max(0.0);
    let fair = (inp.t_max - n * inp.rate_ratio()).max(0.0) / (n + 1.0);
    let t_f = floor.max(fair).min(inp.t_max);
    TimeShareDecision { t_f, t_w: inp.t_max - t_f, regime: classify_regime(inp) }
}

/// Per-wDevice airtime fractions `α_i` and PHY rates `R_W,i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdeviceShares {
    entries: Vec<(f64, f64)>,
}

impl WdeviceShares {
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("wdevice shares"));
        }
        let mut sum = 0.0;
        for &(alpha, rate) in &entries {
            check_unit("alpha", alpha)?;
            check_nonneg("wdevice rate", rate)?;
            sum += alpha;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain { name: "sum of alpha", value: sum });
        }
        Ok(WdeviceShares { entries })
    }

    /// `n` wDevices with equal airtime at the same rate.
    pub fn equal(n: usize, rate: f64) -> Result<Self> {
        Self::new(vec![(1.0 / n as f64, rate); n])
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }
}

/// Sum utility of the sDevice and all wDevices.
///
/// With `shares`, each wDevice term is `U(R_W,i α_i t_w)`. Without, the
/// reduced form `U(R_L + t_f R_U) + N_W·U(t_w)` is used, which differs from
/// the full one by a constant.
pub fn sum_utility(
    t_f: f64,
    t_w: f64,
    inp: &BalanceInputs,
    shares: Option<&WdeviceShares>,
) -> Result<Utility> {
    check_nonneg("t_f", t_f)?;
    check_nonneg("t_w", t_w)?;
    let s = Throughput::new(inp.r_l_tot + t_f * inp.r_u)?;
    let small = utility(s);
    let wlan = match shares {
        Some(sh) => sh
            .entries
            .iter()
            .map(|&(a, r)| Throughput::new(r * a * t_w).map(utility))
            .sum::<Result<Utility>>()?,
        None => {
            let per = if t_w > 0.0 { Utility::Finite(t_w.ln()) } else { Utility::NegInfinity };
            per.times(inp.n_w)
        }
    };
    Ok(small + wlan)
}

/// Reduced objective with `t_w` following `t_f` as the WLAN would respond.
pub fn sum_utility_at(t_f: f64, inp: &BalanceInputs, shares: Option<&WdeviceShares>) -> Result<Utility> {
    sum_utility(t_f, inp.t_w_for(t_f), inp, shares)
}

/// Which branch of the sensitivity formula applies at `t_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityCase {
    /// WLAN demand binds: `t_w = t_max - t_f`.
    A,
    /// WLAN demand slack: `t_w = t̄_w`.
    B,
}

pub fn sensitivity_case(t_f: f64, inp: &BalanceInputs) -> SensitivityCase {
    if inp.t_max - t_f <= inp.t_w_bar {
        SensitivityCase::A
    } else {
        SensitivityCase::B
    }
}

/// First-order change of the reduced sum utility when `t_f` moves by
/// `delta`, each branch evaluated at its own midpoint. A step that crosses
/// the `t_max - t̄_w` kink is split there and the two pieces summed, since
/// neither branch alone describes both sides.
pub fn utility_sensitivity(t_f: f64, delta: f64, inp: &BalanceInputs) -> Result<f64> {
    let end = t_f + delta;
    for (name, v) in [("t_f", t_f), ("t_f + delta", end)] {
        if !(0.0..=inp.t_max).contains(&v) {
            return Err(Error::Domain { name, value: v });
        }
    }
    let kink = inp.t_max - inp.t_w_bar;
    let (lo, hi) = if delta < 0.0 { (end, t_f) } else { (t_f, end) };
    if lo < kink && kink < hi {
        return Ok(segment_change(t_f, kink - t_f, inp)? + segment_change(kink, end - kink, inp)?);
    }
    segment_change(t_f, delta, inp)
}

fn segment_change(t_f: f64, delta: f64, inp: &BalanceInputs) -> Result<f64> {
    let mid = t_f + delta / 2.0;
    let r = inp.rate_ratio();
    let n = f64::from(inp.n_w);
    match sensitivity_case(mid, inp) {
        SensitivityCase::A => {
            if inp.t_max - mid <= 0.0 {
                return Err(Error::Singular("midpoint at t_max"));
            }
            Ok((1.0 / (r + mid) - n / (inp.t_max - mid)) * delta)
        }
        SensitivityCase::B => Ok(delta / (r + mid)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Balanced {
    pub allocation: PowerAllocation,
    pub r_l_tot: Throughput,
    pub inputs: BalanceInputs,
    pub decision: TimeShareDecision,
}

/// Licensed power allocation followed by the unlicensed time-share.
pub fn balance(
    subchannels: &[SubchannelState],
    p_tot: f64,
    rate_fn: &RateFunction,
    load: &UnlicensedLoad,
) -> Result<Balanced> {
    let allocation = capped_water_fill_with(subchannels, p_tot, rate_fn)?;
    let r_l_tot = licensed_sum_rate(&allocation, subchannels, rate_fn)?;
    let inputs = BalanceInputs::with_load(r_l_tot.bps(), load)?;
    let decision = optimal_tf(&inputs);
    Ok(Balanced { allocation, r_l_tot, inputs, decision })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inp(ratio: f64, n_w: u32, t_max: f64, t_w_bar: f64) -> BalanceInputs {
        BalanceInputs::new(ratio * 1e6, 1e6, n_w, t_max, t_w_bar).unwrap()
    }

    #[test]
    fn no_wdevices_takes_everything() {
        let d = optimal_tf(&inp(0.3, 0, 0.9, 0.7));
        assert_eq!(d.t_f, 0.9);
        assert_eq!(d.t_w, 0.0);
    }

    #[test]
    fn examples() {
        assert_relative_eq!(optimal_tf(&inp(0.07, 1, 0.9, 0.6)).t_f, 0.415, epsilon = 1e-12);
        assert_relative_eq!(optimal_tf(&inp(1.5, 1, 0.9, 0.6)).t_f, 0.3, epsilon = 1e-12);
        let h2 = inp(0.3, 4, 0.9, 0.95);
        assert_eq!(optimal_tf(&h2).t_f, 0.0);
        assert_eq!(optimal_tf(&h2).regime, Regime::H2);
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&inp(0.5, 1, 0.9, 1.0)), Regime::H1);
        assert_eq!(classify_regime(&inp(1.2, 1, 0.9, 1.0)), Regime::H2);
        let l1 = inp(0.2, 2, 0.9, 0.1);
        assert_eq!(classify_regime(&l1), Regime::L1);
        assert_relative_eq!(optimal_tf(&l1).t_f, 0.8, epsilon = 1e-12);
        // t̄_w just below t_max but above the L1 bound
        assert_eq!(classify_regime(&inp(0.07, 1, 0.9, 0.8)), Regime::Boundary);
    }

    #[test]
    fn validation() {
        assert!(BalanceInputs::new(1.0, 1.0, 1, 1.0, 0.5).is_err());
        assert!(BalanceInputs::new(1.0, 0.0, 1, 0.9, 0.5).is_err());
        assert!(BalanceInputs::new(1.0, 1.0, 1, 0.9, 0.5).unwrap().with_dl(0.6).is_err());
    }

    #[test]
    fn zero_wlan_airtime_is_sentinel() {
        let i = inp(0.1, 1, 0.9, 0.6);
        assert_eq!(sum_utility(0.9, 0.0, &i, None).unwrap(), Utility::NegInfinity);
    }

    #[test]
    fn full_minus_reduced_is_constant() {
        let i = inp(0.1, 2, 0.9, 0.8);
        let sh = WdeviceShares::new(vec![(0.25, 72e6), (0.75, 43e6)]).unwrap();
        let diff = |tf: f64, tw: f64| {
            sum_utility(tf, tw, &i, Some(&sh)).unwrap().value().unwrap()
                - sum_utility(tf, tw, &i, None).unwrap().value().unwrap()
        };
        let d0 = diff(0.2, 0.5);
        assert_relative_eq!(diff(0.4, 0.3), d0, epsilon = 1e-9);
        assert_relative_eq!(diff(0.05, 0.85), d0, epsilon = 1e-9);
    }

    #[test]
    fn shares_validation() {
        assert!(WdeviceShares::new(vec![(0.5, 1.0), (0.4, 1.0)]).is_err());
        assert!(WdeviceShares::new(vec![]).is_err());
        assert!(WdeviceShares::equal(3, 72e6).is_ok());
    }

    #[test]
    fn sensitivity_vanishes_at_interior_optimum() {
        let i = inp(0.07, 1, 0.9, 0.6);
        let t = optimal_tf(&i).t_f;
        let d = utility_sensitivity(t, 1e-6, &i).unwrap() / 1e-6;
        assert!(d.abs() < 1e-4, "{d}");
    }

    #[test]
    fn case_b_ignores_n_w() {
        let a = utility_sensitivity(0.1, 0.05, &inp(0.2, 1, 0.9, 0.3)).unwrap();
        let b = utility_sensitivity(0.1, 0.05, &inp(0.2, 7, 0.9, 0.3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_across_kink_tracks_direct_difference() {
        // Kink at 0.3; t* = 0.325 sits just above it.
        let i = inp(0.25, 1, 0.9, 0.6);
        let t = optimal_tf(&i).t_f;
        let u = |x: f64| sum_utility_at(x, &i, None).unwrap().value().unwrap();
        for delta in [-0.04, -0.1] {
            let direct = u(t + delta) - u(t);
            let approx = utility_sensitivity(t, delta, &i).unwrap();
            assert!(((approx - direct) / direct).abs() < 0.05, "{delta}: {approx} vs {direct}");
        }
    }

    #[test]
    fn sensitivity_errors() {
        let i = inp(0.2, 1, 0.9, 0.95);
        assert!(utility_sensitivity(0.9, 0.01, &i).is_err());
        assert!(utility_sensitivity(0.1, -0.2, &i).is_err());
    }

    #[test]
    fn balance_with_zero_caps() {
        let subs: Vec<_> = (0..4).map(|_| SubchannelState::new(1e3, 1.0, 0.0, 1e5).unwrap()).collect();
        let load = UnlicensedLoad { r_u: 78e6, n_w: 1, t_max: 0.9, t_w_bar: 0.95, t_w_bar_dl: None };
        let b = balance(&subs, 0.03, &RateFunction::Shannon, &load).unwrap();
        assert_eq!(b.r_l_tot.bps(), 0.0);
        assert_relative_eq!(b.decision.t_f, 0.45, epsilon = 1e-12);
    }
}
