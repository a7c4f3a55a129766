//! Received power and SINR.

use dualband::rate::{db_to_linear, dbm_to_watt};
use dualband::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::pathloss::PathLossModel;
use crate::topology::{Role, Topology};

pub const NOISE_REFERENCE_BW: f64 = 20e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    /// Thermal noise over 20 MHz; scaled linearly to other bandwidths.
    pub noise_dbm_20mhz: f64,
    pub mbs_power_dbm: f64,
    pub fbs_power_dbm: f64,
    pub ap_power_dbm: f64,
    pub wdevice_power_dbm: f64,
    /// Interference cap at each mDevice per subchannel.
    pub interference_cap_dbm: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            noise_dbm_20mhz: -95.0,
            mbs_power_dbm: 40.0,
            fbs_power_dbm: 15.0,
            ap_power_dbm: 15.0,
            wdevice_power_dbm: 15.0,
            interference_cap_dbm: -100.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise_dbm_20mhz", self.noise_dbm_20mhz),
            ("mbs_power_dbm", self.mbs_power_dbm),
            ("fbs_power_dbm", self.fbs_power_dbm),
            ("ap_power_dbm", self.ap_power_dbm),
            ("wdevice_power_dbm", self.wdevice_power_dbm),
            ("interference_cap_dbm", self.interference_cap_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("radio.{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn noise_watt(&self, bandwidth: f64) -> f64 {
        dbm_to_watt(self.noise_dbm_20mhz) * bandwidth / NOISE_REFERENCE_BW
    }

    /// Full transmit power of a role in the band it transmits in.
    pub fn tx_power_dbm(&self, role: Role) -> Option<f64> {
        match role {
            Role::MacroBs => Some(self.mbs_power_dbm),
            Role::Fbs => Some(self.fbs_power_dbm),
            Role::Ap => Some(self.ap_power_dbm),
            Role::WDevice => Some(self.wdevice_power_dbm),
            Role::MDevice | Role::SDevice => None,
        }
    }
}

/// Linear channel gain between two nodes.
pub fn gain(topo: &Topology, pl: &PathLossModel, a: usize, b: usize) -> Result<f64> {
    Ok(db_to_linear(-pl.link_loss_db(topo.node(a), topo.node(b))?))
}

/// SINR at `rx` for a transmission from `tx` at `tx_power_w`, against
/// thermal noise over `bandwidth` and every `(node, power_w)` interferer.
pub fn sinr(
    topo: &Topology,
    pl: &PathLossModel,
    radio: &RadioParams,
    (tx, rx): (usize, usize),
    tx_power_w: f64,
    interferers: &[(usize, f64)],
    bandwidth: f64,
) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::Domain { name: "bandwidth", value: bandwidth });
    }
    let signal = tx_power_w * gain(topo, pl, tx, rx)?;
    let mut denom = radio.noise_watt(bandwidth);
    for &(i, p) in interferers {
        if i != tx {
            denom += p * gain(topo, pl, i, rx)?;
        }
    }
    Ok(signal / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Node;

    fn topo() -> Topology {
        let n = |id, role, x, house| Node { id, label: format!("n{id}"), role, x, y: 0.0, house };
        Topology {
            nodes: vec![
                n(0, Role::MacroBs, 0.0, None),
                n(1, Role::MDevice, 100.0, None),
                n(2, Role::Fbs, 150.0, Some(0)),
                n(3, Role::SDevice, 0.0, None),
            ],
            houses: vec![],
            mbs: Some(0),
            mdevices: vec![1],
        }
    }

    #[test]
    fn noise_only_by_hand() {
        let t = topo();
        let pl = PathLossModel::default();
        let r = RadioParams::default();
        let s = sinr(&t, &pl, &r, (0, 1), 10.0, &[], 20e6).unwrap();
        // 40 dBm - (15.3 + 37.6*2) dB = -50.5 dBm against -95 dBm.
        assert!((10.0 * s.log10() - 44.5).abs() < 1e-9);
        // Half the bandwidth, half the noise.
        let h = sinr(&t, &pl, &r, (0, 1), 10.0, &[], 10e6).unwrap();
        assert!((h / s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn interference_adds_and_guard() {
        let t = topo();
        let pl = PathLossModel::default();
        let r = RadioParams::default();
        let clean = sinr(&t, &pl, &r, (0, 1), 10.0, &[], 20e6).unwrap();
        let dirty = sinr(&t, &pl, &r, (0, 1), 10.0, &[(2, 0.03)], 20e6).unwrap();
        assert!(dirty < clean);
        // The transmitter itself is never its own interferer.
        assert_eq!(sinr(&t, &pl, &r, (0, 1), 10.0, &[(0, 10.0)], 20e6).unwrap(), clean);
        // The sDevice here sits on the mBS, zero distance.
        let z = sinr(&t, &pl, &r, (0, 3), 10.0, &[], 20e6).unwrap();
        let expected = 10.0 * db_to_linear(-(15.3 + 10.0)) / r.noise_watt(20e6);
        assert!((z / expected - 1.0).abs() < 1e-12);
    }
}
