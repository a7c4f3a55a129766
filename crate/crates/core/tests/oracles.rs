//! Independent brute-force checks of the closed forms.

use dualband::balance::{optimal_tf, sum_utility_at, BalanceInputs};
use dualband::dcf::{dcf_monte_carlo, dcf_state_probs, DcfParams};
use dualband::dbf::superslot_avg_duration;
use dualband::power::{capped_water_fill, SubchannelState};
use dualband::timing::{ChannelTiming, FrameSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn objective(powers: &[f64], subs: &[SubchannelState]) -> f64 {
    powers.iter().zip(subs).map(|(p, s)| s.bandwidth * (p * s.gamma).ln_1p() / std::f64::consts::LN_2).sum()
}

/// Best grid point of the sum-rate objective. The grid steps every
/// coordinate but the last by `p_tot/steps`; the last takes what is left,
/// clipped at its cap, since the objective increases in every power.
fn grid_search(subs: &[SubchannelState], p_tot: f64, steps: u32) -> f64 {
    let h = p_tot / f64::from(steps);
    let k = subs.len();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0u32; k - 1];
    let mut powers = vec![0.0; k];
    loop {
        let mut used = 0.0;
        let mut ok = true;
        for (j, &i) in idx.iter().enumerate() {
            powers[j] = f64::from(i) * h;
            used += powers[j];
            if powers[j] > subs[j].power_cap() + 1e-15 {
                ok = false;
            }
        }
        if ok && used <= p_tot + 1e-12 {
            powers[k - 1] = (p_tot - used).max(0.0).min(subs[k - 1].power_cap());
            best = best.max(objective(&powers, subs));
        }
        // odometer over the first k-1 coordinates
        let mut j = 0;
        loop {
            if j == k - 1 {
                return best;
            }
            idx[j] += 1;
            let partial: u32 = idx.iter().sum();
            if partial <= steps {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<SubchannelState>, f64) {
    let k = rng.gen_range(1..=4);
    let p_tot = rng.gen_range(0.1..2.0);
    let subs = (0..k)
        .map(|_| {
            let gamma = 10f64.powf(rng.gen_range(-1.0..1.5));
            let capped = rng.gen_bool(0.5);
            let cap = rng.gen_range(0.0..p_tot);
            if capped {
                SubchannelState::new(gamma, 1.0, cap, 1.0).unwrap()
            } else {
                SubchannelState::uncapped(gamma, 1.0).unwrap()
            }
        })
        .collect();
    (subs, p_tot)
}

#[test]
fn water_filling_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..60 {
        let (subs, p_tot) = random_instance(&mut rng);
        let a = capped_water_fill(&subs, p_tot).unwrap();
        assert!(a.total() <= p_tot * (1.0 + 1e-12));
        for (p, s) in a.powers.iter().zip(&subs) {
            assert!(*p >= 0.0 && *p <= s.power_cap() * (1.0 + 1e-12));
        }
        let wf = objective(&a.powers, &subs);
        let grid = grid_search(&subs, p_tot, 200);
        // objective change of one grid step on the steepest channel
        let h = p_tot / 200.0;
        let step = subs.iter().map(|s| (h * s.gamma).ln_1p() / std::f64::consts::LN_2).fold(0.0, f64::max);
        assert!(wf >= grid - 1e-9, "water-filling {wf} below grid {grid}");
        assert!(wf <= grid + step * subs.len() as f64, "water-filling {wf} far above grid {grid}");
    }
}

#[test]
fn k3_instance_within_relative_gap() {
    let subs = [
        SubchannelState::uncapped(3.0, 1.0).unwrap(),
        SubchannelState::new(0.8, 1.0, 0.3, 1.0).unwrap(),
        SubchannelState::uncapped(1.7, 1.0).unwrap(),
    ];
    let a = capped_water_fill(&subs, 1.0).unwrap();
    let wf = objective(&a.powers, &subs);
    let fine = grid_search(&subs, 1.0, 2000);
    assert!((wf - fine) / fine > -1e-6);
    assert!((wf - fine) / fine < 1e-5);
}

#[test]
fn closed_form_tf_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let t_max = rng.gen_range(0.5..0.99);
        let inp = BalanceInputs::new(
            rng.gen_range(0.0..2.0) * 78e6,
            78e6,
            rng.gen_range(0..8),
            t_max,
            rng.gen_range(0.01..1.2),
        )
        .unwrap();
        let d = optimal_tf(&inp);
        let u_star = sum_utility_at(d.t_f, &inp, None).unwrap();
        let n = (t_max / 1e-4).floor() as u32;
        let (mut best_t, mut best_u) = (0.0, sum_utility_at(0.0, &inp, None).unwrap());
        for i in 1..=n {
            let t = f64::from(i) * 1e-4;
            let u = sum_utility_at(t, &inp, None).unwrap();
            if u > best_u {
                best_u = u;
                best_t = t;
            }
        }
        assert!((best_t - d.t_f).abs() <= 1e-4 + 1e-12, "{inp:?}: grid {best_t} vs {}", d.t_f);
        assert!(u_star >= best_u || (best_u.value().unwrap() - u_star.value().unwrap()) < 1e-12);
    }
}

#[test]
fn dcf_model_matches_monte_carlo() {
    for n in [2, 4, 8] {
        let p = DcfParams::saturated(n, FrameSpec::single(1500, 72e6));
        let analytic = dcf_state_probs(&p).unwrap();
        let mc = dcf_monte_carlo(&p, 20.0, 100 + u64::from(n)).unwrap();
        let gap = analytic.max_abs_diff(&mc.probs);
        assert!(gap < 0.02, "n={n} gap {gap}: {analytic:?} vs {:?}", mc.probs);
        for a in &mc.airtime_shares {
            assert!((a - 1.0 / f64::from(n)).abs() < 0.01);
        }
    }
}

#[test]
fn superslot_mean_matches_monte_carlo() {
    let frame = FrameSpec::single(1500, 72e6);
    let p = DcfParams::saturated(3, frame);
    let probs = dcf_state_probs(&p).unwrap();
    let timing = ChannelTiming::from_mac(&p.timing, &[frame; 3]).unwrap();
    let t_avg = superslot_avg_duration(&probs, &timing).unwrap();
    let mc = dcf_monte_carlo(&p, 30.0, 9).unwrap();
    let rel = (t_avg - mc.mean_superslot).abs() / mc.mean_superslot;
    assert!(rel < 0.01, "analytic {t_avg} vs mc {}", mc.mean_superslot);
}
