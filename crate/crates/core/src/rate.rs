//! Rate functions for both bands, the log utility and unit conversions.
//!
//! Everything is computed in linear watts, hertz and bits per second.
//! Conversions from dBm and dB happen at the edges through the helpers here.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_pos, Error, Result};

/// A data rate in bits per second. Never negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Throughput(f64);

impl Throughput {
    pub const ZERO: Throughput = Throughput(0.0);

    pub fn new(bps: f64) -> Result<Self> {
        check_nonneg("throughput", bps).map(Throughput)
    }

    pub fn from_mbps(mbps: f64) -> Result<Self> {
        Self::new(mbps * 1e6)
    }

    pub fn bps(self) -> f64 {
        self.0
    }

    pub fn mbps(self) -> f64 {
        self.0 / 1e6
    }

    /// Scales by a nonnegative factor such as a time share.
    pub fn scale(self, factor: f64) -> Result<Self> {
        Self::new(self.0 * factor)
    }
}

impl TryFrom<f64> for Throughput {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Throughput::new(v)
    }
}

impl From<Throughput> for f64 {
    fn from(t: Throughput) -> f64 {
        t.0
    }
}

impl Add for Throughput {
    type Output = Throughput;
    fn add(self, rhs: Throughput) -> Throughput {
        Throughput(self.0 + rhs.0)
    }
}

impl Sum for Throughput {
    fn sum<I: Iterator<Item = Throughput>>(iter: I) -> Throughput {
        iter.fold(Throughput::ZERO, Add::add)
    }
}

impl fmt::Display for Throughput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} Mbps", self.mbps())
    }
}

/// Log utility value. A zero throughput has utility minus infinity, which is
/// kept as its own variant so it never leaks into arithmetic as a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Finite(f64),
    NegInfinity,
}

impl Utility {
    pub fn value(self) -> Option<f64> {
        match self {
            Utility::Finite(v) => Some(v),
            Utility::NegInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Utility::Finite(_))
    }

    /// `n` copies of this utility added together.
    pub fn times(self, n: u32) -> Utility {
        match self {
            Utility::Finite(v) => Utility::Finite(v * f64::from(n)),
            Utility::NegInfinity if n == 0 => Utility::Finite(0.0),
            Utility::NegInfinity => Utility::NegInfinity,
        }
    }
}

impl Add for Utility {
    type Output = Utility;
    fn add(self, rhs: Utility) -> Utility {
        match (self, rhs) {
            (Utility::Finite(a), Utility::Finite(b)) => Utility::Finite(a + b),
            _ => Utility::NegInfinity,
        }
    }
}

impl Sum for Utility {
    fn sum<I: Iterator<Item = Utility>>(iter: I) -> Utility {
        iter.fold(Utility::Finite(0.0), Add::add)
    }
}

impl PartialOrd for Utility {
    fn partial_cmp(&self, other: &Utility) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Utility::NegInfinity, Utility::NegInfinity) => Some(Equal),
            (Utility::NegInfinity, _) => Some(Less),
            (_, Utility::NegInfinity) => Some(Greater),
            (Utility::Finite(a), Utility::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::Finite(v) => write!(f, "{v:.3}"),
            Utility::NegInfinity => f.write_str("-inf"),
        }
    }
}

/// Natural log of the throughput in bits/s.
pub fn utility(s: Throughput) -> Utility {
    if s.0 > 0.0 {
        Utility::Finite(s.0.ln())
    } else {
        Utility::NegInfinity
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `B·log2(1 + P·γ)`.
///
/// ```
/// use dualband::rate::shannon_rate;
/// let r = shannon_rate(3.0, 1.0, 1.0).unwrap();
/// assert!((r.bps() - 2.0).abs() < 1e-12);
/// ```
pub fn shannon_rate(power: f64, gamma: f64, bandwidth: f64) -> Result<Throughput> {
    check_nonneg("power", power)?;
    check_nonneg("gamma", gamma)?;
    check_pos("bandwidth", bandwidth)?;
    Throughput::new(bandwidth * (power * gamma).ln_1p() / std::f64::consts::LN_2)
}

/// Constants of the LTE rate approximation.
///
/// `max_spectral_efficiency` caps `rate / B`; LTE tops out at 64-QAM with a
/// finite code rate, so the log curve is clipped at that ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LteRateParams {
    pub kappa_bw: f64,
    pub kappa_c: f64,
    pub kappa_sinr: f64,
    /// Bits/s/Hz ceiling. `None` leaves the curve unbounded.
    pub max_spectral_efficiency: Option<f64>,
}

impl Default for LteRateParams {
    fn default() -> Self {
        LteRateParams {
            kappa_bw: 0.6726,
            kappa_c: 0.75,
            kappa_sinr: 1.0,
            max_spectral_efficiency: Some(3.9),
        }
    }
}

impl LteRateParams {
    pub fn new(kappa_bw: f64, kappa_c: f64, kappa_sinr: f64) -> Result<Self> {
        let p = LteRateParams {
            kappa_bw,
            kappa_c,
            kappa_sinr,
            max_spectral_efficiency: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_cap(mut self, bits_per_hz: Option<f64>) -> Result<Self> {
        self.max_spectral_efficiency = bits_per_hz;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_pos("kappa_bw", self.kappa_bw)?;
        check_pos("kappa_c", self.kappa_c)?;
        check_pos("kappa_sinr", self.kappa_sinr)?;
        if self.kappa_bw > 1.0 {
            return Err(Error::Domain { name: "kappa_bw", value: self.kappa_bw });
        }
        if self.kappa_c > 1.0 {
            return Err(Error::Domain { name: "kappa_c", value: self.kappa_c });
        }
        if let Some(c) = self.max_spectral_efficiency {
            check_pos("max_spectral_efficiency", c)?;
        }
        Ok(())
    }

    /// Bits/s/Hz at a linear SINR.
    pub fn spectral_efficiency(&self, sinr: f64) -> f64 {
        let raw = self.kappa_bw * self.kappa_c * (sinr / self.kappa_sinr).ln_1p()
            / std::f64::consts::LN_2;
        match self.max_spectral_efficiency {
            Some(cap) => raw.min(cap),
            None => raw,
        }
    }
}

/// `κ_bw·κ_c·B·log2(1 + sinr/κ_sinr)`, clipped at the spectral-efficiency cap.
pub fn lte_rate_approx(sinr: f64, bandwidth: f64, params: &LteRateParams) -> Result<Throughput> {
    check_nonneg("sinr", sinr)?;
    check_pos("bandwidth", bandwidth)?;
    Throughput::new(bandwidth * params.spectral_efficiency(sinr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub min_sinr_db: f64,
    pub rate_bps: f64,
}

/// SINR-threshold lookup table for the WiFi PHY rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WifiPhyTable {
    entries: Vec<McsEntry>,
    /// Saturated single-link MAC throughput, reported alongside the table.
    pub max_mac_throughput_bps: f64,
}

impl WifiPhyTable {
    pub fn new(entries: Vec<McsEntry>, max_mac_throughput_bps: f64) -> Result<Self> {
        let t = WifiPhyTable { entries, max_mac_throughput_bps };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Empty("wifi mcs table"));
        }
        for w in self.entries.windows(2) {
            if !(w[1].min_sinr_db > w[0].min_sinr_db) {
                return Err(Error::Config("mcs thresholds must be strictly increasing".into()));
            }
            if !(w[1].rate_bps > w[0].rate_bps) {
                return Err(Error::Config("mcs rates must be strictly increasing".into()));
            }
        }
        for e in &self.entries {
            check_pos("mcs rate", e.rate_bps)?;
        }
        check_pos("max_mac_throughput", self.max_mac_throughput_bps)?;
        Ok(())
    }

    /// 20 MHz, one spatial stream 802.11n rates, MCS 0 to 7.
    /// Thresholds are typical receiver sensitivities above the noise floor.
    pub fn ieee80211n_20mhz() -> Self {
        const ROWS: [(f64, f64); 8] = [
            (2.0, 7.2),
            (5.0, 14.4),
            (9.0, 21.7),
            (11.0, 28.9),
            (15.0, 43.3),
            (18.0, 57.8),
            (20.0, 65.0),
            (25.0, 72.0),
        ];
        let entries = ROWS
            .iter()
            .map(|&(db, mbps)| McsEntry { min_sinr_db: db, rate_bps: mbps * 1e6 })
            .collect();
        WifiPhyTable { entries, max_mac_throughput_bps: 61e6 }
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn top_rate(&self) -> Throughput {
        Throughput(self.entries.last().map_or(0.0, |e| e.rate_bps))
    }

    /// Highest rate whose threshold is at or below `sinr_db`, zero below the table.
    pub fn rate(&self, sinr_db: f64) -> Throughput {
        let r = self
            .entries
            .iter()
            .rev()
            .find(|e| e.min_sinr_db <= sinr_db)
            .map_or(0.0, |e| e.rate_bps);
        Throughput(r)
    }
}

impl Default for WifiPhyTable {
    fn default() -> Self {
        Self::ieee80211n_20mhz()
    }
}

pub fn wifi_rate(table: &WifiPhyTable, sinr_db: f64) -> Throughput {
    table.rate(sinr_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shannon_examples() {
        assert_relative_eq!(shannon_rate(3.0, 1.0, 1.0).unwrap().bps(), 2.0, epsilon = 1e-12);
        assert_eq!(shannon_rate(0.0, 5.0, 20e6).unwrap().bps(), 0.0);
        assert_relative_eq!(shannon_rate(0.5, 2.0, 20e6).unwrap().bps(), 20e6, max_relative = 1e-12);
        assert!(shannon_rate(-1.0, 1.0, 1.0).is_err());
        assert!(shannon_rate(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn lte_examples() {
        let p = LteRateParams::new(0.6726, 0.75, 1.0).unwrap();
        // 0.6726 * 0.75 * 20e6 * log2(2)
        let r = lte_rate_approx(1.0, 20e6, &p).unwrap();
        assert_relative_eq!(r.mbps(), 10.089, epsilon = 1e-9);
        assert_eq!(lte_rate_approx(0.0, 5e6, &p).unwrap().bps(), 0.0);
        assert!(lte_rate_approx(-0.1, 5e6, &p).is_err());
    }

    #[test]
    fn lte_cap_gives_licensed_and_unlicensed_peaks() {
        let p = LteRateParams::default();
        let high = db_to_linear(60.0);
        assert_relative_eq!(lte_rate_approx(high, 1.4e6, &p).unwrap().mbps(), 5.46, epsilon = 1e-9);
        assert_relative_eq!(lte_rate_approx(high, 20e6, &p).unwrap().mbps(), 78.0, epsilon = 1e-9);
    }

    #[test]
    fn lte_params_validation() {
        assert!(LteRateParams::new(1.2, 0.5, 1.0).is_err());
        assert!(LteRateParams::new(0.5, 0.0, 1.0).is_err());
        assert!(LteRateParams::new(0.5, 0.5, -1.0).is_err());
        assert!(LteRateParams::default().with_cap(Some(0.0)).is_err());
    }

    #[test]
    fn wifi_table_lookup() {
        let t = WifiPhyTable::default();
        assert_relative_eq!(wifi_rate(&t, 40.0).mbps(), 72.0);
        assert_eq!(wifi_rate(&t, -3.0).bps(), 0.0);
        assert_relative_eq!(wifi_rate(&t, 16.0).mbps(), 43.3);
        assert_relative_eq!(wifi_rate(&t, 15.0).mbps(), 43.3);
        assert_relative_eq!(wifi_rate(&t, 14.99).mbps(), 28.9);
    }

    #[test]
    fn wifi_table_rejects_unsorted() {
        let bad = vec![
            McsEntry { min_sinr_db: 5.0, rate_bps: 1e6 },
            McsEntry { min_sinr_db: 4.0, rate_bps: 2e6 },
        ];
        assert!(WifiPhyTable::new(bad, 1e6).is_err());
        let flat = vec![
            McsEntry { min_sinr_db: 4.0, rate_bps: 2e6 },
            McsEntry { min_sinr_db: 5.0, rate_bps: 2e6 },
        ];
        assert!(WifiPhyTable::new(flat, 1e6).is_err());
    }

    #[test]
    fn utility_examples() {
        let e = Throughput::new(std::f64::consts::E).unwrap();
        assert_relative_eq!(utility(e).value().unwrap(), 1.0, epsilon = 1e-15);
        let hot = utility(Throughput::from_mbps(32.8).unwrap())
            + utility(Throughput::from_mbps(28.5).unwrap());
        assert!((hot.value().unwrap() - 34.5).abs() < 0.05);
        let dbf = utility(Throughput::from_mbps(38.0).unwrap())
            + utility(Throughput::from_mbps(33.7).unwrap());
        assert!((dbf.value().unwrap() - 34.8).abs() < 0.05);
        assert_eq!(utility(Throughput::ZERO), Utility::NegInfinity);
    }

    #[test]
    fn utility_sentinel_arithmetic() {
        let a = Utility::Finite(3.0);
        assert_eq!(a + Utility::NegInfinity, Utility::NegInfinity);
        assert!(Utility::NegInfinity < a);
        assert_eq!(Utility::NegInfinity.times(0), Utility::Finite(0.0));
        assert_eq!(a.times(2), Utility::Finite(6.0));
        let s: Utility = [a, a].into_iter().sum();
        assert_eq!(s, Utility::Finite(6.0));
    }

    #[test]
    fn conversions_round_trip() {
        assert_relative_eq!(dbm_to_watt(30.0), 1.0);
        assert_relative_eq!(dbm_to_watt(15.0), 0.031_622_776_601_683_79, max_relative = 1e-12);
        assert_relative_eq!(watt_to_dbm(dbm_to_watt(-95.0)), -95.0, epsilon = 1e-9);
        assert_relative_eq!(linear_to_db(db_to_linear(7.5)), 7.5, epsilon = 1e-12);
    }

    #[test]
    fn throughput_rejects_negative() {
        assert!(Throughput::new(-1.0).is_err());
        assert!(Throughput::new(f64::NAN).is_err());
        assert!(Throughput::try_from(-5.0).is_err());
    }
}
