//! WiFi MAC timing and the per-class channel durations derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{check_pos, Error, Result};

/// 802.11 MAC/PHY constants, all durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WifiMacTiming {
    pub difs: f64,
    pub slot: f64,
    pub sifs: f64,
    /// ACK or block ACK frame including its preamble.
    pub ack: f64,
    /// PLCP preamble and header ahead of each data PPDU.
    pub phy_header: f64,
    /// MAC header, FCS and A-MPDU delimiter bytes added to every MPDU.
    pub mpdu_overhead_bytes: u32,
    pub rts_cts: bool,
    pub rts: f64,
    pub cts: f64,
}

impl Default for WifiMacTiming {
    fn default() -> Self {
        WifiMacTiming {
            difs: 34e-6,
            slot: 9e-6,
            sifs: 16e-6,
            ack: 32e-6,
            phy_header: 36e-6,
            mpdu_overhead_bytes: 36,
            rts_cts: false,
            rts: 52e-6,
            cts: 44e-6,
        }
    }
}

/// One data transmission: `mpdus` packets of `payload_bytes` each, sent at `phy_rate_bps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub payload_bytes: u32,
    pub mpdus: u32,
    pub phy_rate_bps: f64,
}

impl FrameSpec {
    pub fn single(payload_bytes: u32, phy_rate_bps: f64) -> Self {
        FrameSpec { payload_bytes, mpdus: 1, phy_rate_bps }
    }

    pub fn payload_bits(&self) -> f64 {
        f64::from(self.payload_bytes) * f64::from(self.mpdus) * 8.0
    }
}

impl WifiMacTiming {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("difs", self.difs),
            ("slot", self.slot),
            ("sifs", self.sifs),
            ("ack", self.ack),
            ("phy_header", self.phy_header),
            ("rts", self.rts),
            ("cts", self.cts),
        ] {
            check_pos(name, v)?;
        }
        Ok(())
    }

    pub fn data_duration(&self, frame: &FrameSpec) -> f64 {
        let bytes = f64::from(frame.mpdus) * f64::from(frame.payload_bytes + self.mpdu_overhead_bytes);
        self.phy_header + bytes * 8.0 / frame.phy_rate_bps
    }

    fn handshake(&self) -> f64 {
        if self.rts_cts {
            self.rts + self.sifs + self.cts + self.sifs
        } else {
            0.0
        }
    }

    /// Channel occupancy of a successful exchange, DIFS excluded.
    pub fn success_duration(&self, frame: &FrameSpec) -> f64 {
        self.handshake() + self.data_duration(frame) + self.sifs + self.ack
    }

    /// Channel occupancy when this frame collides: the data plus the ACK
    /// timeout, or only the RTS plus CTS timeout with the handshake enabled.
    pub fn collision_duration(&self, frame: &FrameSpec) -> f64 {
        if self.rts_cts {
            self.rts + self.sifs + self.cts
        } else {
            self.data_duration(frame) + self.sifs + self.ack
        }
    }

    /// Delivered bits per second for one saturated sender with no contention,
    /// counting DIFS plus the mean backoff of `(w - 1) / 2` slots per exchange.
    pub fn saturated_throughput(&self, frame: &FrameSpec, initial_window: u32) -> f64 {
        let backoff = f64::from(initial_window.saturating_sub(1)) / 2.0 * self.slot;
        frame.payload_bits() / (self.difs + backoff + self.success_duration(frame))
    }
}

/// The durations entering the super-slot model: DIFS `t_d`, idle slot `t_i`,
/// collision `t_c` and one success duration `t_s[u]` per device class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTiming {
    pub t_d: f64,
    pub t_i: f64,
    pub t_c: f64,
    pub t_s: Vec<f64>,
}

impl ChannelTiming {
    pub fn new(t_d: f64, t_i: f64, t_c: f64, t_s: Vec<f64>) -> Result<Self> {
        let t = ChannelTiming { t_d, t_i, t_c, t_s };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_pos("t_d", self.t_d)?;
        check_pos("t_i", self.t_i)?;
        check_pos("t_c", self.t_c)?;
        if self.t_s.is_empty() {
            return Err(Error::Empty("success durations"));
        }
        for &s in &self.t_s {
            check_pos("t_s", s)?;
            if s < self.t_d {
                return Err(Error::Domain { name: "t_s below t_d", value: s });
            }
        }
        if self.t_c < self.t_d {
            return Err(Error::Domain { name: "t_c below t_d", value: self.t_c });
        }
        Ok(())
    }

    /// One class per frame; `t_c` is the longest collision among them.
    pub fn from_mac(mac: &WifiMacTiming, classes: &[FrameSpec]) -> Result<Self> {
        mac.validate()?;
        let t_s = classes.iter().map(|f| mac.success_duration(f)).collect();
        let t_c = classes
            .iter()
            .map(|f| mac.collision_duration(f))
            .fold(0.0, f64::max);
        ChannelTiming::new(mac.difs, mac.slot, t_c, t_s)
    }

    pub fn n_classes(&self) -> usize {
        self.t_s.len()
    }

    pub fn mean_success(&self) -> f64 {
        self.t_s.iter().sum::<f64>() / self.t_s.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn durations_for_plain_1500_byte_frame() {
        let mac = WifiMacTiming::default();
        let f = FrameSpec::single(1500, 72e6);
        // 36 us header + 1536 * 8 / 72 Mbps
        assert_relative_eq!(mac.data_duration(&f), 36e-6 + 1536.0 * 8.0 / 72e6, max_relative = 1e-12);
        assert_relative_eq!(mac.success_duration(&f), mac.data_duration(&f) + 48e-6, max_relative = 1e-12);
        assert_relative_eq!(mac.collision_duration(&f), mac.success_duration(&f), max_relative = 1e-12);
    }

    #[test]
    fn rts_shortens_collisions() {
        let mac = WifiMacTiming { rts_cts: true, ..Default::default() };
        let f = FrameSpec { payload_bytes: 1500, mpdus: 10, phy_rate_bps: 72e6 };
        assert!(mac.collision_duration(&f) < 200e-6);
        let plain = WifiMacTiming::default();
        assert!(mac.success_duration(&f) > plain.success_duration(&f));
    }

    #[test]
    fn aggregated_mac_throughput_is_near_sixty_mbps() {
        let mac = WifiMacTiming::default();
        let f = FrameSpec { payload_bytes: 1500, mpdus: 10, phy_rate_bps: 72e6 };
        let s = mac.saturated_throughput(&f, 16) / 1e6;
        assert!((55.0..67.0).contains(&s), "{s}");
    }

    #[test]
    fn channel_timing_validation() {
        assert!(ChannelTiming::new(34e-6, 9e-6, 250e-6, vec![250e-6]).is_ok());
        assert!(ChannelTiming::new(34e-6, 9e-6, 20e-6, vec![250e-6]).is_err());
        assert!(ChannelTiming::new(34e-6, 9e-6, 250e-6, vec![]).is_err());
        assert!(ChannelTiming::new(34e-6, 0.0, 250e-6, vec![250e-6]).is_err());
    }

    #[test]
    fn collision_uses_longest_frame() {
        let mac = WifiMacTiming::default();
        let short = FrameSpec::single(500, 72e6);
        let long = FrameSpec::single(1500, 72e6);
        let t = ChannelTiming::from_mac(&mac, &[short, long]).unwrap();
        assert_relative_eq!(t.t_c, mac.collision_duration(&long));
        assert_eq!(t.n_classes(), 2);
    }
}
