//! Flow-level licensed band: per-subchannel SINR, small cell power
//! allocation and the resulting mDevice and sDevice rates.
//!
//! mDevice `k` is served on subchannel `k mod K` at an equal share of the
//! mBS power. Each fBS spreads its power over all `K` subchannels, either
//! equally or by capped water-filling against the interference cap of the
//! mDevices on each subchannel. Interference between fBSs is resolved by a
//! few rounds of best response starting from equal power.

use dualband::power::{
    capped_water_fill_with, equal_power, PowerAllocation, RateFunction, SubchannelState,
};
use dualband::rate::{dbm_to_watt, lte_rate_approx, LteRateParams};
use dualband::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::pathloss::PathLossModel;
use crate::radio::{gain, RadioParams};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LicensedBand {
    pub bandwidth_hz: f64,
    pub subchannels: usize,
    pub lte: LteRateParams,
    /// Best-response rounds for fBS-to-fBS interference.
    pub rounds: u32,
}

impl Default for LicensedBand {
    fn default() -> Self {
        LicensedBand { bandwidth_hz: 10e6, subchannels: 30, lte: LteRateParams::default(), rounds: 3 }
    }
}

impl LicensedBand {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config(format!("licensed.bandwidth_hz must be positive, got {}", self.bandwidth_hz)));
        }
        if self.subchannels == 0 {
            return Err(Error::Config("licensed.subchannels must be at least 1".into()));
        }
        self.lte.validate()
    }

    pub fn subchannel_bw(&self) -> f64 {
        self.bandwidth_hz / self.subchannels as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerPolicy {
    /// fBSs stay out of the licensed band.
    Silent,
    Equal,
    CappedWaterFill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LicensedOutcome {
    /// Per house, per subchannel transmit power in watts.
    pub fbs_powers: Vec<Vec<f64>>,
    /// Per house licensed sDevice rate.
    pub sdevice_bps: Vec<f64>,
    /// Per mDevice rate, in the order of `Topology::mdevices`.
    pub mdevice_bps: Vec<f64>,
}

struct Gains {
    /// fbs h to sdev h2
    fbs_sdev: Vec<Vec<f64>>,
    /// fbs h to mdev m
    fbs_mdev: Vec<Vec<f64>>,
    mbs_sdev: Vec<f64>,
    mbs_mdev: Vec<f64>,
}

fn gains(topo: &Topology, pl: &PathLossModel) -> Result<Gains> {
    let hs = &topo.houses;
    let fbs_sdev = hs
        .iter()
        .map(|a| hs.iter().map(|b| gain(topo, pl, a.fbs, b.sdevice)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let fbs_mdev = hs
        .iter()
        .map(|a| topo.mdevices.iter().map(|&m| gain(topo, pl, a.fbs, m)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let (mbs_sdev, mbs_mdev) = match topo.mbs {
        Some(mbs) => (
            hs.iter().map(|h| gain(topo, pl, mbs, h.sdevice)).collect::<Result<Vec<_>>>()?,
            topo.mdevices.iter().map(|&m| gain(topo, pl, mbs, m)).collect::<Result<Vec<_>>>()?,
        ),
        None => (vec![0.0; hs.len()], vec![]),
    };
    Ok(Gains { fbs_sdev, fbs_mdev, mbs_sdev, mbs_mdev })
}

pub fn solve_licensed(
    topo: &Topology,
    pl: &PathLossModel,
    radio: &RadioParams,
    band: &LicensedBand,
    policy: PowerPolicy,
) -> Result<LicensedOutcome> {
    band.validate()?;
    let k = band.subchannels;
    let b_sub = band.subchannel_bw();
    let noise = radio.noise_watt(b_sub);
    let n_h = topo.houses.len();
    let g = gains(topo, pl)?;
    let p_mbs = if topo.mbs.is_some() { dbm_to_watt(radio.mbs_power_dbm) / k as f64 } else { 0.0 };
    let p_fbs = dbm_to_watt(radio.fbs_power_dbm);
    let i_cap = dbm_to_watt(radio.interference_cap_dbm);
    let on_sub = |sub: usize| (0..topo.mdevices.len()).filter(move |m| m % k == sub);
    let rate_fn = RateFunction::LteApprox(band.lte);

    let mut powers: Vec<Vec<f64>> = match policy {
        PowerPolicy::Silent => vec![vec![0.0; k]; n_h],
        _ => vec![equal_power(k, p_fbs)?.powers; n_h],
    };
    let gammas = |powers: &Vec<Vec<f64>>, h: usize| -> Vec<f64> {
        (0..k)
            .map(|sub| {
                let mut denom = noise + p_mbs * g.mbs_sdev[h];
                for (h2, p) in powers.iter().enumerate() {
                    if h2 != h {
                        denom += p[sub] * g.fbs_sdev[h2][h];
                    }
                }
                g.fbs_sdev[h][h] / denom
            })
            .collect()
    };
    if policy == PowerPolicy::CappedWaterFill {
        for _ in 0..band.rounds.max(1) {
            let next = (0..n_h)
                .map(|h| {
                    let gam = gammas(&powers, h);
                    let subs = (0..k)
                        .map(|sub| {
                            let h_fm = on_sub(sub).map(|m| g.fbs_mdev[h][m]).fold(0.0, f64::max);
                            SubchannelState::new(gam[sub], h_fm, i_cap, b_sub)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(capped_water_fill_with(&subs, p_fbs, &rate_fn)?.powers)
                })
                .collect::<Result<Vec<_>>>()?;
            powers = next;
        }
    }
    let sdevice_bps = (0..n_h)
        .map(|h| {
            let gam = gammas(&powers, h);
            let alloc = PowerAllocation { powers: powers[h].clone(), mu: 0.0 };
            alloc.powers.iter().zip(&gam).map(|(p, y)| Ok(lte_rate_approx(p * y, b_sub, &band.lte)?.bps())).sum()
        })
        .collect::<Result<Vec<f64>>>()?;
    let mdevice_bps = (0..topo.mdevices.len())
        .map(|m| {
            let sub = m % k;
            let sharing = on_sub(sub).count() as f64;
            let interference: f64 = (0..n_h).map(|h| powers[h][sub] * g.fbs_mdev[h][m]).sum();
            let sinr = p_mbs * g.mbs_mdev[m] / (noise + interference);
            Ok(lte_rate_approx(sinr, b_sub, &band.lte)?.bps() / sharing)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LicensedOutcome { fbs_powers: powers, sdevice_bps, mdevice_bps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_topology, TopologyParams};

    #[test]
    fn single_house_hits_spectral_cap() {
        let topo = build_topology(1, &TopologyParams::single_house()).unwrap();
        let band = LicensedBand { bandwidth_hz: 1.4e6, ..Default::default() };
        let out = solve_licensed(&topo, &PathLossModel::default(), &RadioParams::default(), &band, PowerPolicy::Equal).unwrap();
        // Indoor link sits at the 3.9 b/s/Hz ceiling.
        let cap = 3.9 * 1.4e6;
        assert!((out.sdevice_bps[0] - cap).abs() / cap < 1e-9, "{}", out.sdevice_bps[0]);
        let wf = solve_licensed(&topo, &PathLossModel::default(), &RadioParams::default(), &band, PowerPolicy::CappedWaterFill).unwrap();
        assert!((wf.sdevice_bps[0] - cap).abs() / cap < 1e-9);
    }

    #[test]
    fn caps_protect_mdevices() {
        let topo = build_topology(2, &TopologyParams::default()).unwrap();
        let (pl, radio, band) = (PathLossModel::default(), RadioParams::default(), LicensedBand::default());
        let silent = solve_licensed(&topo, &pl, &radio, &band, PowerPolicy::Silent).unwrap();
        let equal = solve_licensed(&topo, &pl, &radio, &band, PowerPolicy::Equal).unwrap();
        let wf = solve_licensed(&topo, &pl, &radio, &band, PowerPolicy::CappedWaterFill).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&silent.mdevice_bps) >= mean(&wf.mdevice_bps));
        assert!(mean(&wf.mdevice_bps) > mean(&equal.mdevice_bps));
        assert!(silent.sdevice_bps.iter().all(|&r| r == 0.0));
        for p in &wf.fbs_powers {
            assert!(p.iter().sum::<f64>() <= dbm_to_watt(15.0) * (1.0 + 1e-9));
        }
    }
}
