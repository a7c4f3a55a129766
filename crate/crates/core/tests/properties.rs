use dualband::balance::{classify_regime, optimal_tf, BalanceInputs, Regime};
use dualband::dbf::{dbf_channel_usage, p_dbf_success};
use dualband::dcf::{dcf_state_probs, DcfParams, DcfStateProbs};
use dualband::ifw::{bisect_window, TunerConfig};
use dualband::power::{capped_water_fill, SubchannelState};
use dualband::rate::{lte_rate_approx, shannon_rate, utility, LteRateParams, Throughput, WifiPhyTable};
use dualband::timing::{ChannelTiming, FrameSpec};
use proptest::prelude::*;

fn inputs() -> impl Strategy<Value = BalanceInputs> {
    (0.0..3.0f64, 0u32..10, 0.3..0.99f64, 0.0..1.5f64)
        .prop_map(|(ratio, n, t_max, t_w_bar)| BalanceInputs::new(ratio * 50e6, 50e6, n, t_max, t_w_bar).unwrap())
}

fn subchannels() -> impl Strategy<Value = Vec<SubchannelState>> {
    prop::collection::vec(
        (0.0..50.0f64, 0.0..2.0f64, 0.0..1.0f64).prop_map(|(g, h, c)| SubchannelState::new(g, h, c, 1e5).unwrap()),
        1..8,
    )
    .prop_filter("some gain", |v| v.iter().any(|s| s.gamma > 0.0))
}

fn rate(subs: &[SubchannelState], p: &[f64]) -> f64 {
    subs.iter().zip(p).map(|(s, p)| shannon_rate(*p, s.gamma, s.bandwidth).unwrap().bps()).sum()
}

proptest! {
    #[test]
    fn utility_increasing_and_concave(a in 1.0..1e9f64, b in 1.0..1e9f64) {
        prop_assume!((a - b).abs() > 1e-3 * a.max(b));
        let (lo, hi) = (a.min(b), a.max(b));
        let u = |x: f64| utility(Throughput::new(x).unwrap()).value().unwrap();
        prop_assert!(u(hi) > u(lo));
        prop_assert!(u((lo + hi) / 2.0) > (u(lo) + u(hi)) / 2.0);
    }

    #[test]
    fn rates_monotone_and_linear_in_bandwidth(s1 in 0.0..1e4f64, s2 in 0.0..1e4f64, b in 1e3..1e8f64) {
        let (lo, hi) = (s1.min(s2), s1.max(s2));
        let p = LteRateParams::default();
        prop_assert!(lte_rate_approx(hi, b, &p).unwrap() >= lte_rate_approx(lo, b, &p).unwrap());
        prop_assert!(shannon_rate(hi, 1.0, b).unwrap() >= shannon_rate(lo, 1.0, b).unwrap());
        let r1 = shannon_rate(hi, 1.0, b).unwrap().bps();
        let r2 = shannon_rate(hi, 1.0, 2.0 * b).unwrap().bps();
        prop_assert!((r2 - 2.0 * r1).abs() <= 1e-9 * r2.max(1.0));
        let l1 = lte_rate_approx(hi, b, &p).unwrap().bps();
        let l2 = lte_rate_approx(hi, 3.0 * b, &p).unwrap().bps();
        prop_assert!((l2 - 3.0 * l1).abs() <= 1e-9 * l2.max(1.0));
        let t = WifiPhyTable::default();
        prop_assert!(t.rate(hi.log10() * 10.0) >= t.rate(lo.max(1e-9).log10() * 10.0));
    }

    #[test]
    fn water_level_equal_on_unsaturated_channels(subs in subchannels(), p_tot in 0.01..5.0f64) {
        let a = capped_water_fill(&subs, p_tot).unwrap();
        prop_assert!(a.total() <= p_tot * (1.0 + 1e-12));
        let mut levels = vec![];
        for (p, s) in a.powers.iter().zip(&subs) {
            prop_assert!(*p >= 0.0);
            prop_assert!(*p <= s.power_cap() * (1.0 + 1e-12));
            if *p > 1e-9 && *p < s.power_cap() * (1.0 - 1e-9) {
                levels.push(p + 1.0 / s.gamma);
            }
        }
        for w in levels.windows(2) {
            prop_assert!((w[0] - w[1]).abs() <= 1e-8 * w[0].max(1.0));
        }
        if !levels.is_empty() && a.mu > 0.0 {
            prop_assert!((a.total() - p_tot).abs() <= 1e-9 * p_tot);
        }
    }

    #[test]
    fn more_power_or_looser_caps_never_hurt(subs in subchannels(), p_tot in 0.01..5.0f64, k in 0usize..8, extra in 0.0..1.0f64) {
        let base = rate(&subs, &capped_water_fill(&subs, p_tot).unwrap().powers);
        let more = rate(&subs, &capped_water_fill(&subs, p_tot * 1.5).unwrap().powers);
        prop_assert!(more >= base * (1.0 - 1e-9));
        let mut loose = subs.clone();
        let k = k % loose.len();
        loose[k].i_cap += extra;
        let looser = rate(&loose, &capped_water_fill(&loose, p_tot).unwrap().powers);
        prop_assert!(looser >= base * (1.0 - 1e-9));
    }

    #[test]
    fn time_share_invariants(inp in inputs()) {
        let d = optimal_tf(&inp);
        prop_assert!(d.t_f >= 0.0 && d.t_w >= 0.0);
        prop_assert!((d.t_f + d.t_w - inp.t_max).abs() < 1e-12);
        prop_assert!(d.t_w <= inp.t_w_bar.min(inp.t_max) + 1e-12);
        prop_assert!(d.t_f >= (inp.t_max - inp.t_w_bar).max(0.0) - 1e-12);
    }

    #[test]
    fn time_share_monotonicity(inp in inputs(), dr in 0.0..1.0f64, dn in 0u32..3, dt in 0.0..0.2f64) {
        let t0 = optimal_tf(&inp).t_f;
        let mut more_lic = inp;
        more_lic.r_l_tot += dr * inp.r_u;
        prop_assert!(optimal_tf(&more_lic).t_f <= t0 + 1e-12);
        let mut more_w = inp;
        more_w.n_w += dn;
        prop_assert!(optimal_tf(&more_w).t_f <= t0 + 1e-12);
        let mut more_t = inp;
        more_t.t_max = (inp.t_max + dt).min(0.999);
        prop_assert!(optimal_tf(&more_t).t_f >= t0 - 1e-12);
    }

    #[test]
    fn h1_equal_share(n in 1u32..10, t_max in 0.3..0.99f64, frac in 0.0..1.0f64, extra in 0.0..0.5f64) {
        let ratio = frac * t_max / f64::from(n);
        let inp = BalanceInputs::new(ratio * 50e6, 50e6, n, t_max, t_max + extra).unwrap();
        prop_assert_eq!(classify_regime(&inp), Regime::H1);
        let d = optimal_tf(&inp);
        let t_prime = (inp.r_l_tot + d.t_f * inp.r_u) / inp.r_u;
        let share = (t_prime + d.t_w) / (f64::from(inp.n_w) + 1.0);
        prop_assert!((t_prime - share).abs() < 1e-9);
    }

    #[test]
    fn dcf_rows_normalized(n in 1u32..12, w in 2u32..64, m in 0u32..8) {
        let mut p = DcfParams::saturated(n, FrameSpec::single(1500, 72e6));
        p.initial_window = w;
        p.max_backoff_stage = m;
        let probs = dcf_state_probs(&p).unwrap();
        prop_assert!((probs.p_i + probs.p_c + probs.p_s - 1.0).abs() < 1e-9);
        prop_assert!((probs.q_i + probs.q_c + probs.q_s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn usage_monotone(eta in 0.01..500.0f64, d in 0.01..10.0f64, p in 0.01..0.99f64, dp in 0.001..0.01f64) {
        let a = dbf_channel_usage(eta, p).unwrap();
        prop_assert!(dbf_channel_usage(eta + d, p).unwrap() > a);
        prop_assert!(dbf_channel_usage(eta, p + dp).unwrap() > a);
        prop_assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn p_success_monotone(n in 1u32..9, ts in 1e-6..80e-6f64, dts in 0.0..20e-6f64, dd in 0.0..20e-6f64) {
        let frame = FrameSpec::single(1500, 72e6);
        let probs: DcfStateProbs = dcf_state_probs(&DcfParams::saturated(n, frame)).unwrap();
        let t = ChannelTiming::new(34e-6, 9e-6, 255e-6, vec![255e-6; n as usize]).unwrap();
        let base = p_dbf_success(&probs, &t, ts).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(p_dbf_success(&probs, &t, ts + dts).unwrap() <= base + 1e-12);
        let longer = ChannelTiming::new(34e-6 + dd, 9e-6, 255e-6, vec![255e-6; n as usize]).unwrap();
        prop_assert!(p_dbf_success(&probs, &longer, ts).unwrap() >= base - 1e-12);
    }

    #[test]
    fn bisection_keeps_bracket(scale in 4.0..200.0f64, target in 0.05..0.95f64) {
        let cfg = TunerConfig { tolerance: 1e-4, ..Default::default() };
        let f = |w: u32| 1.0 / (1.0 + f64::from(w) / scale);
        prop_assume!(f(cfg.w_high) <= target && target <= f(cfg.w_low));
        let out = bisect_window(target, f, &cfg).unwrap();
        prop_assert!(out.iterations <= cfg.iteration_bound());
        // Replaying the trace, the target stays between the current endpoints.
        let (mut lo_t, mut hi_t) = (out.trace[1].1, out.trace[0].1);
        for &(_, t) in &out.trace[2..] {
            prop_assert!(lo_t <= target && target <= hi_t);
            if t > target { hi_t = t } else { lo_t = t }
        }
    }
}
