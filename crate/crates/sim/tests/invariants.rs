use dualband::dbf::AccessSchedule;
use dualband_sim::audit::{airtime_residual, check_skip_gap, check_subframe_alignment, parse_event_log};
use dualband_sim::channel::*;
use dualband_sim::experiments::EtaSweepSetup;
use dualband_sim::scenario::{run_scenario, ScenarioConfig, UseCase, Variant};
use dualband_sim::time::{NS_PER_MS, NS_PER_S};
use proptest::prelude::*;

fn station(label: &str, traffic: Traffic, mpdus: u32) -> WifiStation {
    WifiStation {
        label: label.into(),
        backoff: Backoff::default(),
        flows: vec![FlowSpec { device: format!("{label}-rx"), class: AirClass::Wlan, phy_rate_bps: 72e6, traffic, max_mpdus: mpdus }],
        scheduler: Scheduler::RoundRobin,
        sampled: true,
    }
}

fn dbf(att: u32, ctx: u32) -> DbfStation {
    DbfStation {
        label: "fbs".into(),
        device: "sdev".into(),
        schedule: AccessSchedule::new(att, ctx, 10e-6).unwrap(),
        bits_per_subframe: 75e3,
        mode: DbfMode::Active,
    }
}

fn shared_channel(seed: u64, att: u32, ctx: u32) -> Channel {
    let cfg = ChannelConfig { log_events: true, ..Default::default() };
    let st = vec![
        station("ap", Traffic::Load { bps: 20e6 }, 10),
        station("w1", Traffic::Saturated, 1),
        station("w2", Traffic::Load { bps: 5e6 }, 4),
    ];
    Channel::new(cfg, st, Some(dbf(att, ctx)), seed).unwrap()
}

#[test]
fn dbf_decisions_on_subframe_grid() {
    let mut ch = shared_channel(4, 2, 7);
    ch.run_until(3 * NS_PER_S + 123_457);
    let mut buf = vec![];
    ch.write_event_log(&mut buf).unwrap();
    let log = parse_event_log(std::str::from_utf8(&buf).unwrap()).unwrap();
    let n = check_subframe_alignment(&log, "fbs", 10_000).unwrap();
    assert!(n > 500, "{n} decisions");
    let gaps = check_skip_gap(&log, "fbs", 2 * NS_PER_MS).unwrap();
    assert!(gaps > 50, "{gaps} transmissions");
}

#[test]
fn same_seed_same_csv() {
    let mut cfg = ScenarioConfig::scenario1(UseCase::DbfPlusWlan, Variant::Optimal);
    cfg.horizon_s = 15.0;
    let a = run_scenario(&cfg, 9).unwrap().csv();
    let b = run_scenario(&cfg, 9).unwrap().csv();
    assert_eq!(a, b);
    let c = run_scenario(&cfg, 10).unwrap().csv();
    assert_ne!(a, c);
}

#[test]
fn realistic_csv_reproducible() {
    let mut cfg = ScenarioConfig::realistic(UseCase::Ifw, Variant::Optimal);
    cfg.horizon_s = 20.0;
    cfg.topology.n_houses = 6;
    cfg.topology.n_mdevices = 8;
    assert_eq!(run_scenario(&cfg, 3).unwrap().csv(), run_scenario(&cfg, 3).unwrap().csv());
}

#[test]
fn zero_load_leaves_channel_idle() {
    let mut cfg = ScenarioConfig::scenario1(UseCase::FemtoPlusWlan, Variant::Optimal);
    cfg.horizon_s = 12.0;
    cfg.traffic.sdevice.full_buffer = false;
    cfg.traffic.sdevice.load_bps = 0.0;
    cfg.traffic.wdevice.load_bps = 0.0;
    let r = run_scenario(&cfg, 1).unwrap();
    assert!(r.devices.iter().all(|d| d.throughput_bps == 0.0), "{:?}", r.devices);
    assert_eq!(r.houses[0].idle, 1.0);

    let mut dbf = cfg.clone();
    dbf.use_case = UseCase::DbfPlusWlan;
    let r = run_scenario(&dbf, 1).unwrap();
    assert_eq!(r.houses[0].idle, 1.0);
}

#[test]
fn short_horizon_warns() {
    let mut cfg = ScenarioConfig::scenario1(UseCase::WifiHotspot, Variant::Simple);
    cfg.horizon_s = 5.0;
    let r = run_scenario(&cfg, 1).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("steady-state")));
    cfg.horizon_s = 20.0;
    assert!(run_scenario(&cfg, 1).unwrap().warnings.is_empty());
}

#[test]
fn bad_config_names_the_field() {
    let mut cfg = ScenarioConfig::scenario1(UseCase::Ifw, Variant::Simple);
    cfg.balancing.t_max = 1.5;
    let e = run_scenario(&cfg, 1).unwrap_err().to_string();
    assert!(e.contains("balancing.t_max"), "{e}");
    let mut cfg = ScenarioConfig::scenario1(UseCase::Ifw, Variant::Simple);
    cfg.horizon_s = 6.0;
    assert!(run_scenario(&cfg, 1).is_err());
}

#[test]
fn lte_mac_beats_wifi_mac() {
    let s = EtaSweepSetup { horizon_s: 10.0, ..Default::default() };
    let wifi = s.wifi_alone_bps(10, 1).unwrap();
    let lte = s.dbf_alone_bps(500, 1).unwrap();
    assert!((wifi / 61e6 - 1.0).abs() <= 0.10, "wifi {wifi}");
    assert!((lte / 75e6 - 1.0).abs() <= 0.10, "lte {lte}");
    assert!(lte > wifi);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn airtime_conserved(seed in 0u64..1000, att in 1u32..4, ctx in 1u32..20, end_us in 200_000u64..1_500_000) {
        let mut ch = shared_channel(seed, att, ctx);
        let mut prev = ch.counters();
        for k in 1..=4 {
            ch.run_until(end_us * 1000 * k / 4);
            let c = ch.counters();
            prop_assert!(airtime_residual(&c) <= 1e-6);
            prop_assert!(airtime_residual(&c.since(&prev)) <= 1e-6);
            prev = c;
        }
    }

    #[test]
    fn delivered_never_exceeds_offered(seed in 0u64..1000, load in 1e5..80e6f64, mpdus in 1u32..12) {
        let st = vec![station("a", Traffic::Load { bps: load }, mpdus), station("b", Traffic::Saturated, 1)];
        let mut ch = Channel::new(ChannelConfig::default(), st, None, seed).unwrap();
        let (start, end) = (NS_PER_S / 2, 2 * NS_PER_S);
        ch.set_measure_window(Window { start, end });
        ch.run_until(start);
        let before = ch.counters();
        ch.run_until(end);
        let c = ch.counters();
        prop_assert!(c.flow_bits[0][0] <= c.flow_offered_bits[0][0]);
        // Inside the window only what arrived and was not yet delivered can go out.
        let window_bits = ch.window_throughput(0, 0) * 1.5;
        let available = (c.flow_offered_bits[0][0] - before.flow_bits[0][0]) as f64;
        prop_assert!(window_bits <= available + 1e-6, "{} > {}", window_bits, available);
    }
}
