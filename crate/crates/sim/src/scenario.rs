//! Scenario configuration and the end-to-end run: topology, licensed band,
//! then one unlicensed channel per house with the use case's controller.
//!
//! Houses are treated as islands in the unlicensed band. Each house runs its
//! own channel and sees the other houses only as a constant interference
//! floor at the receivers, one transmitter per house at its fBS position
//! scaled by an activity factor.

use std::collections::VecDeque;

use dualband::balance::{optimal_tf, BalanceInputs};
use dualband::dbf::{dbf_channel_usage, estimate_p_dbfsuc, schedule_for_target_tf, AccessSchedule, ScheduleLimits};
use dualband::ifw::{bisect_window, measure_tfbs_counts, target_tfbs, TunerConfig};
use dualband::rate::{dbm_to_watt, linear_to_db, lte_rate_approx, utility, LteRateParams, WifiPhyTable};
use dualband::timing::WifiMacTiming;
use dualband::{Error, Result, Throughput, Utility};
use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    AirClass, Backoff, Channel, ChannelConfig, Counters, DbfMode, DbfStation, FlowSpec, Scheduler, Traffic,
    WifiStation, Window,
};
use crate::licensed::{solve_licensed, LicensedBand, PowerPolicy};
use crate::metrics::{collect_user_metrics, DeviceResult, UserResult};
use crate::pathloss::PathLossModel;
use crate::radio::{sinr, RadioParams};
use crate::time::{from_secs, to_secs, Nanos};
use crate::topology::{build_topology, Role, Topology, TopologyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCase {
    WifiHotspot,
    FemtoPlusWlan,
    Ifw,
    DbfPlusWlan,
}

impl UseCase {
    pub const ALL: [UseCase; 4] = [UseCase::WifiHotspot, UseCase::FemtoPlusWlan, UseCase::Ifw, UseCase::DbfPlusWlan];

    pub fn as_str(self) -> &'static str {
        match self {
            UseCase::WifiHotspot => "wifi_hotspot",
            UseCase::FemtoPlusWlan => "femto_plus_wlan",
            UseCase::Ifw => "ifw",
            UseCase::DbfPlusWlan => "dbf_plus_wlan",
        }
    }

    /// The small cell has its own WiFi AP next to it.
    pub fn separate_ap(self) -> bool {
        matches!(self, UseCase::FemtoPlusWlan | UseCase::DbfPlusWlan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Simple,
    Optimal,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Simple => "simple",
            Variant::Optimal => "optimal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSpec {
    pub load_bps: f64,
    pub packet_bytes: u32,
    pub full_buffer: bool,
    /// Downlink share of the load.
    pub dl_fraction: f64,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec { load_bps: 35e6, packet_bytes: 1500, full_buffer: false, dl_fraction: 1.0 }
    }
}

impl TrafficSpec {
    pub fn validate(&self, key: &str) -> Result<()> {
        if !(self.load_bps >= 0.0 && self.load_bps.is_finite()) {
            return Err(Error::Config(format!("{key}.load_bps must be nonnegative, got {}", self.load_bps)));
        }
        if self.packet_bytes == 0 {
            return Err(Error::Config(format!("{key}.packet_bytes must be positive")));
        }
        if !(0.0..=1.0).contains(&self.dl_fraction) {
            return Err(Error::Config(format!("{key}.dl_fraction must be in [0, 1], got {}", self.dl_fraction)));
        }
        Ok(())
    }

    fn dl(&self) -> Traffic {
        if self.full_buffer {
            Traffic::Saturated
        } else if self.load_bps * self.dl_fraction > 0.0 {
            Traffic::Load { bps: self.load_bps * self.dl_fraction }
        } else {
            Traffic::Off
        }
    }

    fn ul(&self) -> Traffic {
        let ul = self.load_bps * (1.0 - self.dl_fraction);
        if ul > 0.0 {
            Traffic::Load { bps: ul }
        } else {
            Traffic::Off
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Traffics {
    pub sdevice: TrafficSpec,
    pub wdevice: TrafficSpec,
}

impl Default for Traffics {
    fn default() -> Self {
        Traffics {
            sdevice: TrafficSpec { load_bps: 300e6, full_buffer: true, ..Default::default() },
            wdevice: TrafficSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnlicensedBand {
    pub bandwidth_hz: f64,
    pub mac: WifiMacTiming,
    pub wifi: WifiPhyTable,
    pub backoff: Backoff,
    pub max_ampdu_mpdus: u32,
    pub lte: LteRateParams,
    /// Delivered over PHY rate for LTE in the unlicensed band.
    pub lte_mac_efficiency: f64,
    pub t_sensing_s: f64,
    pub schedule_limits: ScheduleLimits,
    /// Activity factor of the other houses' transmitters in the
    /// interference floor.
    pub cross_house_activity: f64,
}

impl Default for UnlicensedBand {
    fn default() -> Self {
        UnlicensedBand {
            bandwidth_hz: 20e6,
            mac: WifiMacTiming::default(),
            wifi: WifiPhyTable::default(),
            backoff: Backoff::default(),
            max_ampdu_mpdus: 10,
            lte: LteRateParams::default(),
            lte_mac_efficiency: 75.0 / 78.0,
            t_sensing_s: 10e-6,
            schedule_limits: ScheduleLimits::default(),
            cross_house_activity: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalancingParams {
    pub t_max: f64,
    /// Fixed small cell share of the Simple variants.
    pub simple_tf: f64,
    /// Long-term sensing before balancing starts.
    pub sensing_s: f64,
    pub retune_period_s: f64,
    /// Attempts behind each DBF success-probability estimate.
    pub p_window_s: f64,
    pub sample_period_us: f64,
    pub tuner: TunerConfig,
}

impl Default for BalancingParams {
    fn default() -> Self {
        BalancingParams {
            t_max: 0.9,
            simple_tf: 0.8,
            sensing_s: 5.0,
            retune_period_s: 1.0,
            p_window_s: 4.0,
            sample_period_us: 100.0,
            tuner: TunerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub use_case: UseCase,
    pub variant: Variant,
    pub topology: TopologyParams,
    pub radio: RadioParams,
    pub pathloss: PathLossModel,
    pub licensed: LicensedBand,
    pub unlicensed: UnlicensedBand,
    pub traffic: Traffics,
    pub balancing: BalancingParams,
    pub horizon_s: f64,
    pub warmup_fraction: f64,
    pub log_events: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "custom".into(),
            use_case: UseCase::DbfPlusWlan,
            variant: Variant::Optimal,
            topology: TopologyParams::default(),
            radio: RadioParams::default(),
            pathloss: PathLossModel::default(),
            licensed: LicensedBand::default(),
            unlicensed: UnlicensedBand::default(),
            traffic: Traffics::default(),
            balancing: BalancingParams::default(),
            horizon_s: 60.0,
            warmup_fraction: 0.1,
            log_events: false,
        }
    }
}

pub const MIN_STEADY_HORIZON_S: f64 = 10.0;

impl ScenarioConfig {
    /// One house, no macrocell, 1.4 MHz licensed, 35 Mbps wDevice downlink.
    pub fn scenario1(use_case: UseCase, variant: Variant) -> Self {
        ScenarioConfig {
            name: format!("scenario1-{}-{}", use_case.as_str(), variant.as_str()),
            use_case,
            variant,
            topology: TopologyParams::single_house(),
            licensed: LicensedBand { bandwidth_hz: 1.4e6, ..Default::default() },
            ..Default::default()
        }
    }

    /// Suburban macrocell with 40 houses, 10 MHz licensed, 35 Mbps wDevice
    /// load split evenly between downlink and uplink.
    pub fn realistic(use_case: UseCase, variant: Variant) -> Self {
        let mut traffic = Traffics::default();
        traffic.wdevice.dl_fraction = 0.5;
        ScenarioConfig {
            name: format!("realistic-{}-{}", use_case.as_str(), variant.as_str()),
            use_case,
            variant,
            traffic,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.radio.validate()?;
        self.pathloss.validate()?;
        self.licensed.validate()?;
        self.traffic.sdevice.validate("traffic.sdevice")?;
        self.traffic.wdevice.validate("traffic.wdevice")?;
        let u = &self.unlicensed;
        u.mac.validate()?;
        u.wifi.validate()?;
        u.lte.validate()?;
        if !(u.bandwidth_hz > 0.0) {
            return Err(Error::Config(format!("unlicensed.bandwidth_hz must be positive, got {}", u.bandwidth_hz)));
        }
        if u.max_ampdu_mpdus == 0 || u.backoff.initial_window == 0 {
            return Err(Error::Config("unlicensed.max_ampdu_mpdus and backoff.initial_window must be at least 1".into()));
        }
        for (key, v) in [
            ("unlicensed.lte_mac_efficiency", u.lte_mac_efficiency),
            ("unlicensed.cross_house_activity", u.cross_house_activity),
            ("balancing.t_max", self.balancing.t_max),
            ("balancing.simple_tf", self.balancing.simple_tf),
            ("warmup_fraction", self.warmup_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{key} must be in [0, 1], got {v}")));
            }
        }
        if self.balancing.simple_tf > self.balancing.t_max {
            return Err(Error::Config("balancing.simple_tf above balancing.t_max".into()));
        }
        AccessSchedule::new(1, 1, u.t_sensing_s)
            .map_err(|_| Error::Config(format!("unlicensed.t_sensing_s out of range: {}", u.t_sensing_s)))?;
        let b = &self.balancing;
        for (key, v) in [
            ("balancing.sensing_s", b.sensing_s),
            ("balancing.retune_period_s", b.retune_period_s),
            ("balancing.p_window_s", b.p_window_s),
            ("balancing.sample_period_us", b.sample_period_us),
            ("horizon_s", self.horizon_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        b.tuner.validate()?;
        if self.traffic.sdevice.dl_fraction != 1.0 {
            return Err(Error::Config("traffic.sdevice.dl_fraction must be 1: sDevices only receive".into()));
        }
        Ok(())
    }

    fn sample_period_ns(&self) -> Nanos {
        from_secs(self.balancing.sample_period_us * 1e-6).max(1)
    }
}

/// Unlicensed-band measurements of one house over the statistics window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseStats {
    pub house: usize,
    pub t_f: f64,
    pub t_w: f64,
    pub idle: f64,
    pub collision: f64,
    pub p_dbf_success: Option<f64>,
    /// Each wDevice's share of the WLAN airtime.
    pub alpha: Vec<(String, f64)>,
    /// Busy fraction seen during sensing.
    pub t_w_bar: Option<f64>,
    pub t_f_target: Option<f64>,
    pub tfbs_target: Option<f64>,
    pub tuned_window: Option<u32>,
    pub tuner_converged: Option<bool>,
    pub schedule: Option<AccessSchedule>,
    pub unlicensed_rate_bps: f64,
    pub licensed_rate_bps: f64,
    pub stats_start_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub seed: u64,
    pub use_case: UseCase,
    pub variant: Variant,
    pub devices: Vec<DeviceResult>,
    pub users: Vec<UserResult>,
    pub houses: Vec<HouseStats>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub event_logs: Vec<String>,
}

impl ScenarioResult {
    pub fn device(&self, label: &str) -> Option<&DeviceResult> {
        self.devices.iter().find(|d| d.device == label)
    }

    pub fn mean_throughput(&self, role: Role) -> f64 {
        let v: Vec<f64> = self.devices.iter().filter(|d| d.role == role).map(|d| d.throughput_bps).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// Mean user utility, over one user class or all users.
    pub fn mean_user_utility(&self, macro_users: Option<bool>) -> Utility {
        let us: Vec<&UserResult> =
            self.users.iter().filter(|u| macro_users.map_or(true, |m| u.is_macro == m)).collect();
        if us.is_empty() {
            return Utility::NegInfinity;
        }
        match us.iter().map(|u| u.utility.value()).sum::<Option<f64>>() {
            Some(s) => Utility::Finite(s / us.len() as f64),
            None => Utility::NegInfinity,
        }
    }

    pub fn mean_t_f(&self) -> f64 {
        self.houses.iter().map(|h| h.t_f).sum::<f64>() / self.houses.len().max(1) as f64
    }

    /// `scenario,seed,device,role,throughput_bps,utility` lines, header first.
    pub fn csv(&self) -> String {
        let mut s = String::from("scenario,seed,device,role,throughput_bps,utility\n");
        for d in &self.devices {
            let u = match d.utility.value() {
                Some(v) => format!("{v}"),
                None => "-inf".into(),
            };
            s.push_str(&format!("{},{},{},{},{},{}\n", self.scenario, self.seed, d.device, d.role.as_str(), d.throughput_bps, u));
        }
        s
    }
}

struct HouseOutcome {
    unlicensed: Vec<(usize, f64)>,
    stats: HouseStats,
    log: Option<String>,
    warnings: Vec<String>,
}

/// Stations, flows and rates for one house.
struct Plan {
    stations: Vec<WifiStation>,
    dbf: Option<DbfStation>,
    /// Station and flow of the small cell's unlicensed sDevice flow.
    sdev_flow: Option<(usize, usize)>,
    sdev_traffic: Traffic,
    /// `(station, flow, device node)` for every flow.
    flow_devices: Vec<(usize, usize, usize)>,
    /// PHY rate of the small cell's unlicensed link.
    r_u: f64,
    /// Remaining sDevice load after the licensed band, when not full buffer.
    sdev_unlicensed_load: Option<f64>,
}

fn plan_house(cfg: &ScenarioConfig, topo: &Topology, h: usize, r_l: f64) -> Result<Plan> {
    let u = &cfg.unlicensed;
    let house = &topo.houses[h];
    let p_tx = |role: Role| dbm_to_watt(cfg.radio.tx_power_dbm(role).unwrap_or(cfg.radio.fbs_power_dbm));
    let cross: Vec<(usize, f64)> = topo
        .houses
        .iter()
        .enumerate()
        .filter(|&(h2, _)| h2 != h)
        .map(|(_, o)| (o.fbs, p_tx(Role::Fbs) * u.cross_house_activity))
        .collect();
    let link = |tx: usize, rx: usize| -> Result<f64> {
        sinr(topo, &cfg.pathloss, &cfg.radio, (tx, rx), p_tx(topo.node(tx).role), &cross, u.bandwidth_hz)
    };
    let wifi_rate = |tx: usize, rx: usize| -> Result<f64> { Ok(u.wifi.rate(linear_to_db(link(tx, rx)?)).bps()) };
    let flow = |device: usize, class: AirClass, rate: f64, traffic: Traffic| FlowSpec {
        device: topo.node(device).label.clone(),
        class,
        phy_rate_bps: if rate > 0.0 { rate } else { 1.0 },
        traffic: if rate > 0.0 { traffic } else { Traffic::Off },
        max_mpdus: u.max_ampdu_mpdus,
    };
    let station = |node: usize, flows: Vec<FlowSpec>, scheduler: Scheduler, sampled: bool| WifiStation {
        label: topo.node(node).label.clone(),
        backoff: u.backoff,
        flows,
        scheduler,
        sampled,
    };
    let sd = &cfg.traffic.sdevice;
    let sdev_unlicensed_load = (!sd.full_buffer).then(|| (sd.load_bps - r_l).max(0.0));
    let sdev_traffic = match sdev_unlicensed_load {
        None => Traffic::Saturated,
        Some(l) if l > 0.0 => Traffic::Load { bps: l },
        Some(_) => Traffic::Off,
    };
    let wd = &cfg.traffic.wdevice;
    let (fbs, sdev, wdev, ap) = (house.fbs, house.sdevice, house.wdevice, house.ap);

    let mut plan = match cfg.use_case {
        UseCase::WifiHotspot | UseCase::Ifw => {
            let r_u = wifi_rate(fbs, sdev)?;
            let flows = vec![
                flow(sdev, AirClass::Small, r_u, sdev_traffic),
                flow(wdev, AirClass::Wlan, wifi_rate(fbs, wdev)?, wd.dl()),
            ];
            let scheduler = if cfg.use_case == UseCase::Ifw {
                Scheduler::AirtimeShare(vec![0.5, 0.5])
            } else {
                Scheduler::RoundRobin
            };
            Plan {
                stations: vec![
                    station(fbs, flows, scheduler, true),
                    station(wdev, vec![flow(fbs, AirClass::Wlan, wifi_rate(wdev, fbs)?, wd.ul())], Scheduler::RoundRobin, false),
                ],
                dbf: None,
                sdev_flow: Some((0, 0)),
                sdev_traffic,
                flow_devices: vec![(0, 0, sdev), (0, 1, wdev), (1, 0, wdev)],
                r_u,
                sdev_unlicensed_load,
            }
        }
        UseCase::FemtoPlusWlan | UseCase::DbfPlusWlan => {
            let stations = vec![
                station(ap, vec![flow(wdev, AirClass::Wlan, wifi_rate(ap, wdev)?, wd.dl())], Scheduler::RoundRobin, false),
                station(wdev, vec![flow(ap, AirClass::Wlan, wifi_rate(wdev, ap)?, wd.ul())], Scheduler::RoundRobin, false),
            ];
            let r_u = lte_rate_approx(link(fbs, sdev)?, u.bandwidth_hz, &u.lte)?.bps();
            let dbf = (cfg.use_case == UseCase::DbfPlusWlan).then(|| -> Result<DbfStation> {
                Ok(DbfStation {
                    label: topo.node(fbs).label.clone(),
                    device: topo.node(sdev).label.clone(),
                    schedule: AccessSchedule::new(1, 1, u.t_sensing_s)?,
                    bits_per_subframe: r_u * u.lte_mac_efficiency * 1e-3,
                    mode: DbfMode::Off,
                })
            });
            Plan {
                stations,
                dbf: dbf.transpose()?,
                sdev_flow: None,
                sdev_traffic,
                flow_devices: vec![(0, 0, wdev), (1, 0, wdev)],
                r_u,
                sdev_unlicensed_load,
            }
        }
    };
    if cfg.use_case == UseCase::Ifw {
        // The sDevice flow waits for the end of sensing.
        plan.stations[0].flows[0].traffic = Traffic::Off;
    }
    Ok(plan)
}

fn snapshot_window(ch: &Channel, a: &Counters) -> Counters {
    ch.counters().since(a)
}

/// DBF success-probability estimate over the recent snapshots.
fn recent_p(snaps: &VecDeque<Counters>) -> Option<f64> {
    let (first, last) = (snaps.front()?, snaps.back()?);
    let w = last.since(first);
    estimate_p_dbfsuc(w.dbf_idle_sensed, w.dbf_attempts).ok()
}

fn simulate_house(cfg: &ScenarioConfig, topo: &Topology, h: usize, r_l: f64, seed: u64) -> Result<HouseOutcome> {
    let plan = plan_house(cfg, topo, h, r_l)?;
    let b = &cfg.balancing;
    let horizon = from_secs(cfg.horizon_s);
    let sensing = from_secs(b.sensing_s);
    let ch_cfg = ChannelConfig {
        mac: cfg.unlicensed.mac,
        payload_bytes: cfg.traffic.wdevice.packet_bytes,
        sample_period_ns: cfg.sample_period_ns(),
        log_events: cfg.log_events,
    };
    let n_w = 1;
    let mut ch = Channel::new(ch_cfg, plan.stations.clone(), plan.dbf.clone(), seed)?;
    let mut warnings = vec![];
    let mut stats = HouseStats {
        house: h,
        t_f: 0.0,
        t_w: 0.0,
        idle: 0.0,
        collision: 0.0,
        p_dbf_success: None,
        alpha: vec![],
        t_w_bar: None,
        t_f_target: None,
        tfbs_target: None,
        tuned_window: None,
        tuner_converged: None,
        schedule: None,
        unlicensed_rate_bps: plan.r_u,
        licensed_rate_bps: r_l,
        stats_start_s: 0.0,
    };
    let warm = from_secs(cfg.horizon_s * cfg.warmup_fraction);
    let balance_inputs = |t_w_bar: f64| BalanceInputs::new(r_l, plan.r_u.max(1.0), n_w, b.t_max, t_w_bar.min(1.0));
    let wants_small = !matches!(plan.sdev_traffic, Traffic::Off);
    let mut dbf_snaps: VecDeque<Counters> = VecDeque::new();
    let retune = from_secs(b.retune_period_s);

    match cfg.use_case {
        UseCase::WifiHotspot | UseCase::FemtoPlusWlan => {}
        UseCase::Ifw => {
            if sensing >= horizon {
                return Err(Error::Config("horizon_s must exceed balancing.sensing_s".into()));
            }
            ch.run_until(sensing);
            let c = ch.counters();
            let t_w_bar = c.busy_fraction();
            let fbs = 0;
            let t_w_bar_dl = measure_tfbs_counts(c.samples_tx[fbs], ch.samples_between(0, sensing))?.min(t_w_bar);
            let (t_f, t_w) = match cfg.variant {
                Variant::Optimal => {
                    let d = optimal_tf(&balance_inputs(t_w_bar)?);
                    (d.t_f, d.t_w)
                }
                Variant::Simple => (b.simple_tf, (b.t_max - b.simple_tf).max(0.0)),
            };
            let t_f = if wants_small { t_f } else { 0.0 };
            let target = if t_w_bar > 0.0 { target_tfbs(t_f, t_w, t_w_bar_dl, t_w_bar)? } else { t_f };
            stats.t_w_bar = Some(t_w_bar);
            stats.t_f_target = Some(t_f);
            stats.tfbs_target = Some(target);
            let weights = vec![t_f, (target - t_f).max(0.0)];
            let weights = if weights.iter().sum::<f64>() > 0.0 { weights } else { vec![0.5, 0.5] };
            ch.set_scheduler(fbs, Scheduler::AirtimeShare(weights))?;
            let (st, fl) = plan.sdev_flow.expect("ifw has an sDevice flow");
            ch.set_flow_traffic(st, fl, plan.sdev_traffic);
            let span = b.tuner.samples_per_measurement * cfg.sample_period_ns();
            let mut measure = |w: u32| {
                ch.set_initial_window(fbs, w);
                let a = ch.now();
                let c0 = ch.counters();
                ch.run_until(a + span);
                let c1 = ch.counters();
                (c1.samples_tx[fbs] - c0.samples_tx[fbs]) as f64 / ch.samples_between(a, a + span) as f64
            };
            let window = match bisect_window(target, &mut measure, &b.tuner) {
                Ok(out) => {
                    stats.tuner_converged = Some(out.converged);
                    if !out.converged {
                        warnings.push(format!("house {h}: tuner stopped at W={} with t_fBS {:.3} for target {target:.3}", out.window, out.measured));
                    }
                    out.window
                }
                Err(Error::Bracket { low, high, .. }) => {
                    stats.tuner_converged = Some(false);
                    warnings.push(format!("house {h}: t_fBS target {target:.3} outside [{low:.3}, {high:.3}]"));
                    if target > high {
                        b.tuner.w_low
                    } else {
                        b.tuner.w_high
                    }
                }
                Err(e) => return Err(e),
            };
            drop(measure);
            ch.set_initial_window(fbs, window);
            stats.tuned_window = Some(window);
        }
        UseCase::DbfPlusWlan => {
            if !wants_small {
                // Nothing to send: the DBF stays off the unlicensed band.
            } else {
                if sensing >= horizon {
                    return Err(Error::Config("horizon_s must exceed balancing.sensing_s".into()));
                }
                ch.set_dbf_mode(DbfMode::Probe);
                ch.run_until(sensing);
                let c = ch.counters();
                let t_w_bar = c.busy_fraction();
                let target = match cfg.variant {
                    Variant::Optimal => optimal_tf(&balance_inputs(t_w_bar)?).t_f,
                    Variant::Simple => b.simple_tf,
                };
                stats.t_w_bar = Some(t_w_bar);
                stats.t_f_target = Some(target);
                let p0 = estimate_p_dbfsuc(c.dbf_idle_sensed.max(1), c.dbf_attempts.max(1))?;
                if target > 0.0 {
                    let choice = schedule_for_target_tf(target, p0, &cfg.unlicensed.schedule_limits)?;
                    ch.set_dbf_schedule(choice.schedule)?;
                    ch.set_dbf_mode(DbfMode::Active);
                    dbf_snaps.push_back(ch.counters());
                } else {
                    ch.set_dbf_mode(DbfMode::Off);
                }
            }
        }
    }

    let setup_end = ch.now();
    let settle = if dbf_snaps.is_empty() { 0 } else { from_secs(b.p_window_s) };
    let stats_start = warm.max(setup_end + settle);
    if stats_start + from_secs(1.0) > horizon {
        return Err(Error::Config(format!(
            "horizon_s {} leaves under 1 s of statistics after {:.1} s of setup and warm-up",
            cfg.horizon_s,
            to_secs(stats_start)
        )));
    }
    stats.stats_start_s = to_secs(stats_start);

    // DBF keeps re-estimating its success probability and re-picking its
    // schedule; other cases just run.
    let adaptive = !dbf_snaps.is_empty();
    let target = stats.t_f_target.unwrap_or(0.0);
    let keep = (b.p_window_s / b.retune_period_s).ceil().max(1.0) as usize + 1;
    let mut t = ch.now();
    let mut window_set = false;
    let mut start_counters = None;
    loop {
        let next = if adaptive { (t + retune).min(horizon) } else { horizon };
        let next = if !window_set && stats_start < next { stats_start } else { next };
        ch.run_until(next);
        t = next;
        if !window_set && t >= stats_start {
            ch.set_measure_window(Window { start: stats_start, end: horizon });
            start_counters = Some(ch.counters());
            window_set = true;
        }
        if t >= horizon {
            break;
        }
        if adaptive && (t - setup_end) % retune == 0 {
            dbf_snaps.push_back(ch.counters());
            while dbf_snaps.len() > keep {
                dbf_snaps.pop_front();
            }
            if let Some(p) = recent_p(&dbf_snaps) {
                let lim = &cfg.unlicensed.schedule_limits;
                let off_target = |s: AccessSchedule| {
                    dbf_channel_usage(s.eta(), p).map_or(true, |u| (u - target).abs() > lim.tolerance)
                };
                // Keep the schedule while it still predicts the target, so
                // the estimate keeps accumulating attempts.
                if p > 0.0 && ch.dbf_schedule().map_or(true, off_target) {
                    if let Ok(choice) = schedule_for_target_tf(target, p, &cfg.unlicensed.schedule_limits) {
                        if Some(choice.schedule) != ch.dbf_schedule() {
                            debug!("house {h}: p={p:.3} -> {:?}", choice.schedule);
                            ch.set_dbf_schedule(choice.schedule)?;
                            // Attempts under the old schedule say little about the new one.
                            let last = dbf_snaps.pop_back().expect("just pushed");
                            dbf_snaps.clear();
                            dbf_snaps.push_back(last);
                        }
                    }
                }
            }
        }
    }
    let w = snapshot_window(&ch, start_counters.as_ref().expect("window set"));
    stats.t_f = w.t_f();
    stats.t_w = w.t_w();
    stats.idle = w.idle_fraction();
    stats.collision = w.collision_fraction();
    stats.p_dbf_success = w.p_dbf_success();
    stats.schedule = ch.dbf_schedule().filter(|_| adaptive);

    // Unlicensed throughput per device node.
    let mut unlicensed: Vec<(usize, f64)> = vec![];
    let mut add = |node: usize, bps: f64| match unlicensed.iter_mut().find(|(n, _)| *n == node) {
        Some((_, v)) => *v += bps,
        None => unlicensed.push((node, bps)),
    };
    let mut wlan_air: Vec<(usize, u64)> = vec![];
    for &(st, fl, node) in &plan.flow_devices {
        add(node, ch.window_throughput(st, fl));
        if plan.sdev_flow != Some((st, fl)) {
            let air = w.flow_airtime_ns[st][fl];
            match wlan_air.iter_mut().find(|(n, _)| *n == node) {
                Some((_, v)) => *v += air,
                None => wlan_air.push((node, air)),
            }
        }
    }
    if plan.dbf.is_some() {
        let mut bps = ch.dbf_window_throughput();
        if let Some(l) = plan.sdev_unlicensed_load {
            bps = bps.min(l);
        }
        add(topo.houses[h].sdevice, bps);
    }
    let total_air: u64 = wlan_air.iter().map(|(_, a)| a).sum();
    stats.alpha = wlan_air
        .iter()
        .map(|&(n, a)| (topo.node(n).label.clone(), if total_air > 0 { a as f64 / total_air as f64 } else { 0.0 }))
        .collect();

    let log = cfg.log_events.then(|| {
        let mut buf = vec![];
        ch.write_event_log(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii log")
    });
    Ok(HouseOutcome { unlicensed, stats, log, warnings })
}

fn power_policy(use_case: UseCase, variant: Variant) -> PowerPolicy {
    match (use_case, variant) {
        (UseCase::WifiHotspot, _) => PowerPolicy::Silent,
        (UseCase::FemtoPlusWlan, _) | (_, Variant::Simple) => PowerPolicy::Equal,
        (_, Variant::Optimal) => PowerPolicy::CappedWaterFill,
    }
}

/// Runs one seeded scenario. Houses run in parallel; results are merged in
/// house order, so the output does not depend on the thread count.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioResult> {
    cfg.validate()?;
    let mut warnings = vec![];
    if cfg.horizon_s < MIN_STEADY_HORIZON_S {
        let msg = format!("horizon {} s is below {} s; statistics may not be steady-state", cfg.horizon_s, MIN_STEADY_HORIZON_S);
        warn!("{msg}");
        warnings.push(msg);
    }
    let topo = build_topology(seed, &cfg.topology)?;
    let lic = solve_licensed(&topo, &cfg.pathloss, &cfg.radio, &cfg.licensed, power_policy(cfg.use_case, cfg.variant))?;
    let sd = &cfg.traffic.sdevice;
    let r_l: Vec<f64> =
        lic.sdevice_bps.iter().map(|&r| if sd.full_buffer { r } else { r.min(sd.load_bps) }).collect();
    let outcomes = (0..topo.houses.len())
        .into_par_iter()
        .map(|h| simulate_house(cfg, &topo, h, r_l[h], seed))
        .collect::<Vec<Result<HouseOutcome>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut devices = vec![];
    for (k, &m) in topo.mdevices.iter().enumerate() {
        devices.push(DeviceResult::new(topo.node(m), lic.mdevice_bps[k])?);
    }
    let mut houses = vec![];
    let mut event_logs = vec![];
    for (h, out) in outcomes.into_iter().enumerate() {
        let house = &topo.houses[h];
        let unl = |node: usize| out.unlicensed.iter().find(|(n, _)| *n == node).map_or(0.0, |(_, v)| *v);
        devices.push(DeviceResult::new(topo.node(house.sdevice), r_l[h] + unl(house.sdevice))?);
        devices.push(DeviceResult::new(topo.node(house.wdevice), unl(house.wdevice))?);
        warnings.extend(out.warnings);
        houses.push(out.stats);
        if let Some(l) = out.log {
            event_logs.push(l);
        }
    }
    let users = collect_user_metrics(&devices, &default_users(&topo))?;
    Ok(ScenarioResult {
        scenario: cfg.name.clone(),
        seed,
        use_case: cfg.use_case,
        variant: cfg.variant,
        devices,
        users,
        houses,
        warnings,
        event_logs,
    })
}

/// One macro user per mDevice and one small cell user per house owning the
/// house's sDevice and wDevice.
pub fn default_users(topo: &Topology) -> Vec<(String, Vec<String>)> {
    let mut users: Vec<(String, Vec<String>)> =
        topo.mdevices.iter().map(|&m| (format!("user-{}", topo.node(m).label), vec![topo.node(m).label.clone()])).collect();
    for (h, house) in topo.houses.iter().enumerate() {
        users.push((
            format!("user-h{h}"),
            vec![topo.node(house.sdevice).label.clone(), topo.node(house.wdevice).label.clone()],
        ));
    }
    users
}

/// Runs several seeds concurrently, in seed order.
pub fn run_seeds(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<ScenarioResult>> {
    seeds.par_iter().map(|&s| run_scenario(cfg, s)).collect::<Vec<_>>().into_iter().collect()
}

/// Per-device utility helper for callers outside the crate.
pub fn device_utility(bps: f64) -> Result<Utility> {
    Ok(utility(Throughput::new(bps)?))
}
