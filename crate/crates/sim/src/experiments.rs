//! Fixed-setup channel experiments: DBF usage against η with saturated
//! WiFi contenders, and lone-technology saturation throughput.

use dualband::dbf::{dbf_channel_usage, p_dbf_success, AccessSchedule};
use dualband::dcf::{dcf_state_probs, DcfParams};
use dualband::timing::{ChannelTiming, FrameSpec, WifiMacTiming};
use dualband::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    AirClass, Backoff, Channel, ChannelConfig, DbfMode, DbfStation, FlowSpec, Scheduler, Traffic, WifiStation,
};
use crate::time::from_secs;

/// An AP and its wDevices, all saturated with single-MPDU frames, sharing
/// the channel with one DBF small cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtaSweepSetup {
    pub wifi_contenders: u32,
    pub phy_rate_bps: f64,
    pub payload_bytes: u32,
    pub t_attempt_ms: u32,
    pub t_sensing_s: f64,
    pub horizon_s: f64,
    pub mac: WifiMacTiming,
    pub backoff: Backoff,
    /// LTE bits per clean subframe.
    pub bits_per_subframe: f64,
}

impl Default for EtaSweepSetup {
    fn default() -> Self {
        EtaSweepSetup {
            wifi_contenders: 4,
            phy_rate_bps: 72e6,
            payload_bytes: 1500,
            t_attempt_ms: 1,
            t_sensing_s: 10e-6,
            horizon_s: 60.0,
            mac: WifiMacTiming::default(),
            backoff: Backoff::default(),
            bits_per_subframe: 75e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaPoint {
    pub eta: f64,
    pub analytic_tf: f64,
    pub simulated_tf: f64,
    pub analytic_p: f64,
    pub simulated_p: f64,
}

impl EtaSweepSetup {
    fn frame(&self) -> FrameSpec {
        FrameSpec::single(self.payload_bytes, self.phy_rate_bps)
    }

    fn wifi_stations(&self) -> Vec<WifiStation> {
        (0..self.wifi_contenders)
            .map(|i| {
                let label = if i == 0 { "ap".to_string() } else { format!("wdev{i}") };
                let peer = if i == 0 { "wdev1".to_string() } else { "ap".to_string() };
                WifiStation {
                    label,
                    backoff: self.backoff,
                    flows: vec![FlowSpec {
                        device: peer,
                        class: AirClass::Wlan,
                        phy_rate_bps: self.phy_rate_bps,
                        traffic: Traffic::Saturated,
                        max_mpdus: 1,
                    }],
                    scheduler: Scheduler::RoundRobin,
                    sampled: false,
                }
            })
            .collect()
    }

    /// Attempt success probability from the WLAN stage-chain model.
    pub fn analytic_p(&self) -> Result<f64> {
        let mut params = DcfParams::saturated(self.wifi_contenders, self.frame());
        params.timing = self.mac;
        params.initial_window = self.backoff.initial_window;
        params.max_backoff_stage = self.backoff.max_stage;
        params.retry_limit = self.backoff.retry_limit;
        let probs = dcf_state_probs(&params)?;
        let timing = ChannelTiming::from_mac(&self.mac, &vec![self.frame(); self.wifi_contenders as usize])?;
        p_dbf_success(&probs, &timing, self.t_sensing_s)
    }

    fn channel_config(&self) -> ChannelConfig {
        ChannelConfig { mac: self.mac, payload_bytes: self.payload_bytes, ..ChannelConfig::default() }
    }

    /// One point with `T_celltx = η·T_attempt`.
    pub fn point(&self, celltx_ms: u32, seed: u64) -> Result<EtaPoint> {
        let schedule = AccessSchedule::new(self.t_attempt_ms, celltx_ms, self.t_sensing_s)?;
        let dbf = DbfStation {
            label: "fbs".into(),
            device: "sdev".into(),
            schedule,
            bits_per_subframe: self.bits_per_subframe,
            mode: DbfMode::Active,
        };
        let mut ch = Channel::new(self.channel_config(), self.wifi_stations(), Some(dbf), seed)?;
        ch.run_until(from_secs(self.horizon_s));
        let c = ch.counters();
        let p = self.analytic_p()?;
        Ok(EtaPoint {
            eta: schedule.eta(),
            analytic_tf: dbf_channel_usage(schedule.eta(), p)?,
            simulated_tf: c.dbf_usage(),
            analytic_p: p,
            simulated_p: c.p_dbf_success().unwrap_or(0.0),
        })
    }

    /// Points for each `T_celltx` in milliseconds, run concurrently.
    pub fn sweep(&self, celltx_ms: &[u32], seed: u64) -> Result<Vec<EtaPoint>> {
        celltx_ms.par_iter().map(|&c| self.point(c, seed)).collect()
    }

    /// Delivered rate of the WLAN alone, one saturated station.
    pub fn wifi_alone_bps(&self, max_mpdus: u32, seed: u64) -> Result<f64> {
        let mut st = self.wifi_stations();
        st.truncate(1);
        st[0].flows[0].max_mpdus = max_mpdus;
        let mut ch = Channel::new(self.channel_config(), st, None, seed)?;
        ch.run_until(from_secs(self.horizon_s));
        Ok(ch.counters().flow_bits[0][0] as f64 / self.horizon_s)
    }

    /// Delivered rate of a lone DBF small cell with the given schedule.
    pub fn dbf_alone_bps(&self, celltx_ms: u32, seed: u64) -> Result<f64> {
        let dbf = DbfStation {
            label: "fbs".into(),
            device: "sdev".into(),
            schedule: AccessSchedule::new(self.t_attempt_ms, celltx_ms, self.t_sensing_s)?,
            bits_per_subframe: self.bits_per_subframe,
            mode: DbfMode::Active,
        };
        let mut ch = Channel::new(self.channel_config(), vec![], Some(dbf), seed)?;
        ch.run_until(from_secs(self.horizon_s));
        Ok(ch.counters().dbf_bits / self.horizon_s)
    }
}

/// The η values of the usage curve: 1 to 500.
pub fn default_celltx_grid() -> Vec<u32> {
    vec![1, 2, 3, 5, 7, 10, 15, 20, 30, 50, 70, 100, 150, 200, 300, 500]
}

/// A small cell running IFW against saturated WiFi contenders, tuning its
/// own initial window to hit a target share of airtime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IfwTuneSetup {
    pub wifi_contenders: u32,
    pub phy_rate_bps: f64,
    pub max_mpdus: u32,
    pub sample_period_us: f64,
    pub tuner: dualband::ifw::TunerConfig,
    /// Length of the check run at the tuned window.
    pub verify_s: f64,
}

impl Default for IfwTuneSetup {
    fn default() -> Self {
        IfwTuneSetup {
            wifi_contenders: 2,
            phy_rate_bps: 72e6,
            max_mpdus: 10,
            sample_period_us: 100.0,
            // One-second shares swing by about 0.04 at a fixed window.
            tuner: dualband::ifw::TunerConfig { samples_per_measurement: 30_000, ..Default::default() },
            verify_s: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfwTuneResult {
    pub target: f64,
    pub outcome: dualband::ifw::TunerOutcome,
    /// Share measured over a fresh run at the tuned window.
    pub verified: f64,
}

impl IfwTuneSetup {
    fn channel(&self, seed: u64) -> Result<Channel> {
        let flow = |device: &str, class| FlowSpec {
            device: device.into(),
            class,
            phy_rate_bps: self.phy_rate_bps,
            traffic: Traffic::Saturated,
            max_mpdus: self.max_mpdus,
        };
        let mut st = vec![WifiStation {
            label: "fbs".into(),
            backoff: Backoff::default(),
            flows: vec![flow("sdev", AirClass::Small)],
            scheduler: Scheduler::RoundRobin,
            sampled: true,
        }];
        for i in 0..self.wifi_contenders {
            st.push(WifiStation {
                label: format!("wifi{i}"),
                backoff: Backoff::default(),
                flows: vec![flow(&format!("wifi{i}-rx"), AirClass::Wlan)],
                scheduler: Scheduler::RoundRobin,
                sampled: false,
            });
        }
        let cfg = ChannelConfig { sample_period_ns: from_secs(self.sample_period_us * 1e-6).max(1), ..Default::default() };
        Channel::new(cfg, st, None, seed)
    }

    fn share(ch: &mut Channel, w: u32, span: u64) -> f64 {
        ch.set_initial_window(0, w);
        // Let backoff counters drawn under the old window run out.
        let settle = ch.now() + span / 20;
        ch.run_until(settle);
        let a = ch.now();
        let c0 = ch.counters();
        ch.run_until(a + span);
        let n = ch.counters().samples_tx[0] - c0.samples_tx[0];
        n as f64 / ch.samples_between(a, a + span).max(1) as f64
    }

    /// Share at a fixed window over `verify_s`.
    pub fn share_at(&self, w: u32, seed: u64) -> Result<f64> {
        let mut ch = self.channel(seed)?;
        Ok(Self::share(&mut ch, w, from_secs(self.verify_s)))
    }

    pub fn run(&self, target: f64, seed: u64) -> Result<IfwTuneResult> {
        let mut ch = self.channel(seed)?;
        let span = self.tuner.samples_per_measurement * from_secs(self.sample_period_us * 1e-6).max(1);
        let outcome = dualband::ifw::bisect_window(target, |w| Self::share(&mut ch, w, span), &self.tuner)?;
        let mut check = self.channel(seed ^ 0x5eed)?;
        let verified = Self::share(&mut check, outcome.window, from_secs(self.verify_s));
        Ok(IfwTuneResult { target, outcome, verified })
    }
}
