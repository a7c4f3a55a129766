//! Saturated 802.11 DCF: an analytic model of the channel-state chain and a
//! slot-level Monte-Carlo reference.
//!
//! The channel is a sequence of slots, each idle (`I`), a success (`S`) or a
//! collision (`C`). The model tracks the outcome of a slot conditioned on
//! whether the slot before it was busy (`P_*`) or idle (`Q_*`). The two
//! conditionings differ because a station that just transmitted restarts its
//! backoff from a fresh draw, while every other station is still counting
//! down a frozen counter.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::timing::{FrameSpec, WifiMacTiming};

/// Outcome probabilities of a backoff slot. `p_*` follow a busy slot and
/// `q_*` follow an idle one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcfStateProbs {
    pub p_i: f64,
    pub p_c: f64,
    pub p_s: f64,
    pub q_i: f64,
    pub q_c: f64,
    pub q_s: f64,
}

impl DcfStateProbs {
    pub fn new(p_i: f64, p_c: f64, p_s: f64, q_i: f64, q_c: f64, q_s: f64) -> Result<Self> {
        let d = DcfStateProbs { p_i, p_c, p_s, q_i, q_c, q_s };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_i", self.p_i),
            ("p_c", self.p_c),
            ("p_s", self.p_s),
            ("q_i", self.q_i),
            ("q_c", self.q_c),
            ("q_s", self.q_s),
        ] {
            check_unit(name, v)?;
        }
        let (a, b) = (self.p_i + self.p_c + self.p_s, self.q_i + self.q_c + self.q_s);
        if (a - 1.0).abs() > 1e-9 {
            return Err(Error::Inconsistent { what: "p_i + p_c + p_s", value: a });
        }
        if (b - 1.0).abs() > 1e-9 {
            return Err(Error::Inconsistent { what: "q_i + q_c + q_s", value: b });
        }
        Ok(())
    }

    /// Largest absolute difference across the six entries.
    pub fn max_abs_diff(&self, other: &DcfStateProbs) -> f64 {
        [
            self.p_i - other.p_i,
            self.p_c - other.p_c,
            self.p_s - other.p_s,
            self.q_i - other.q_i,
            self.q_c - other.q_c,
            self.q_s - other.q_s,
        ]
        .iter()
        .fold(0.0, |m, d| f64::max(m, d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcfParams {
    pub n_contenders: u32,
    /// Minimum contention window `W`; draws are uniform on `0..W`.
    pub initial_window: u32,
    /// Window doubles up to `W·2^m`.
    pub max_backoff_stage: u32,
    /// Retransmissions before a frame is dropped. `None` retries forever.
    pub retry_limit: Option<u32>,
    pub timing: WifiMacTiming,
    /// Frame sent by each station; station `i` uses `classes[i % len]`.
    pub classes: Vec<FrameSpec>,
}

impl DcfParams {
    /// `n` identical saturated stations with default backoff and timing.
    pub fn saturated(n: u32, frame: FrameSpec) -> Self {
        DcfParams {
            n_contenders: n,
            initial_window: 16,
            max_backoff_stage: 6,
            retry_limit: None,
            timing: WifiMacTiming::default(),
            classes: vec![frame],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_contenders == 0 {
            return Err(Error::Config("n_contenders must be at least 1".into()));
        }
        if self.initial_window == 0 {
            return Err(Error::Config("initial_window must be at least 1".into()));
        }
        if self.max_backoff_stage > 20 {
            return Err(Error::Config("max_backoff_stage above 20".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Empty("frame classes"));
        }
        self.timing.validate()
    }

    pub fn class_of(&self, station: usize) -> &FrameSpec {
        &self.classes[station % self.classes.len()]
    }

    fn window(&self, stage: u32) -> f64 {
        f64::from(self.initial_window) * f64::from(1u32 << stage.min(self.max_backoff_stage))
    }

    /// Stage after a collision at `stage`.
    fn next_stage(&self, stage: u32) -> u32 {
        match self.retry_limit {
            Some(r) if stage >= r => 0,
            Some(_) => stage + 1,
            None => (stage + 1).min(self.max_backoff_stage),
        }
    }

    fn top_stage(&self) -> u32 {
        self.retry_limit.unwrap_or(self.max_backoff_stage)
    }
}

/// Fixed point of the analytic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcfSolution {
    pub probs: DcfStateProbs,
    /// Conditional collision probability of an attempt.
    pub collision_probability: f64,
    /// Per-station transmit probability in a slot after an idle slot.
    pub tau: f64,
    /// Long-run fraction of slots that are idle, success, collision.
    pub slot_mix: [f64; 3],
    pub iterations: u32,
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Stationary distribution of a 3x3 row-stochastic matrix.
fn stationary3(t: [[f64; 3]; 3]) -> [f64; 3] {
    // (T^T - I) x = 0 with the last row swapped for x0 + x1 + x2 = 1.
    let mut a = [[0.0; 4]; 3];
    for r in 0..2 {
        for c in 0..3 {
            a[r][c] = t[c][r] - if r == c { 1.0 } else { 0.0 };
        }
    }
    a[2] = [1.0, 1.0, 1.0, 1.0];
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..3 {
            if r != col && a[col][col] != 0.0 {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]]
}

struct Step {
    probs: DcfStateProbs,
    tau: f64,
    mix: [f64; 3],
    p_next: f64,
}

fn model_step(params: &DcfParams, p: f64) -> Step {
    let n = params.n_contenders;
    let w = f64::from(params.initial_window);
    let top = params.top_stage();

    // Stage occupancy seen at attempts: geometric in p, absorbing at the top
    // stage when retries are unlimited.
    let mut pi: Vec<f64> = (0..=top).map(|j| p.powi(j as i32)).collect();
    if params.retry_limit.is_none() {
        pi[top as usize] /= 1.0 - p;
    }
    let norm: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= norm);

    let stages = 0..=top;
    let f0: f64 = stages.clone().map(|j| pi[j as usize] / params.window(j)).sum();
    let mean_backoff: f64 = stages.clone().map(|j| pi[j as usize] * (params.window(j) - 1.0) / 2.0).sum();
    // A station with counter 0 transmits right after DIFS; the rest count
    // through `mean_backoff` idle slots per attempt on average.
    let tau = if mean_backoff > 0.0 { ((1.0 - f0) / mean_backoff).min(1.0) } else { 1.0 };
    let r_c: f64 = stages.map(|j| pi[j as usize] / params.window(params.next_stage(j))).sum();

    let nf = f64::from(n);
    let q_i = (1.0 - tau).powi(n as i32);
    let q_s = nf * tau * (1.0 - tau).powi(n as i32 - 1);
    let q_c = (1.0 - q_i - q_s).max(0.0);

    let s_row = [1.0 - 1.0 / w, 1.0 / w, 0.0];
    // Collision multiplicity is Binomial(n, tau) conditioned on k >= 2.
    let mut c_row = [0.0; 3];
    let mut k_mean_attempts = 0.0;
    let mut k_collided_again = 0.0;
    if n >= 2 {
        let pk: Vec<f64> = (2..=n)
            .map(|k| binom(n, k) * tau.powi(k as i32) * (1.0 - tau).powi((n - k) as i32))
            .collect();
        let mass: f64 = pk.iter().sum();
        for (i, k) in (2..=n).enumerate() {
            let wk = if mass > 0.0 { pk[i] / mass } else if k == 2 { 1.0 } else { 0.0 };
            let kf = f64::from(k);
            let idle = (1.0 - r_c).powi(k as i32);
            let succ = kf * r_c * (1.0 - r_c).powi(k as i32 - 1);
            c_row[0] += wk * idle;
            c_row[1] += wk * succ;
            k_mean_attempts += wk * kf * r_c;
            k_collided_again += wk * kf * r_c * (1.0 - (1.0 - r_c).powi(k as i32 - 1));
        }
        c_row[2] = (1.0 - c_row[0] - c_row[1]).max(0.0);
    } else {
        c_row = s_row;
    }

    let i_row = [q_i, q_s, q_c];
    let st = stationary3([i_row, s_row, c_row]);
    let busy = st[1] + st[2];
    let (p_i, p_s) = if busy > 0.0 {
        ((st[1] * s_row[0] + st[2] * c_row[0]) / busy, (st[1] * s_row[1] + st[2] * c_row[1]) / busy)
    } else {
        (s_row[0], s_row[1])
    };
    let p_c = (1.0 - p_i - p_s).max(0.0);

    let attempts = st[0] * nf * tau + st[1] / w + st[2] * k_mean_attempts;
    let collided = st[0] * nf * tau * (1.0 - (1.0 - tau).powi(n as i32 - 1)) + st[2] * k_collided_again;
    let p_next = if attempts > 0.0 { collided / attempts } else { 0.0 };

    Step {
        probs: DcfStateProbs { p_i, p_c, p_s, q_i, q_c, q_s },
        tau,
        mix: st,
        p_next,
    }
}

/// Solves the saturated model by damped fixed-point iteration on the
/// conditional collision probability.
pub fn solve_dcf(params: &DcfParams) -> Result<DcfSolution> {
    params.validate()?;
    const MAX_ITER: u32 = 10_000;
    if params.n_contenders == 1 {
        let s = model_step(params, 0.0);
        let mut probs = s.probs;
        probs.p_c = 0.0;
        probs.q_c = 0.0;
        probs.p_i = 1.0 - probs.p_s;
        probs.q_i = 1.0 - probs.q_s;
        return Ok(DcfSolution { probs, collision_probability: 0.0, tau: s.tau, slot_mix: s.mix, iterations: 1 });
    }
    let mut p = 0.1;
    for it in 1..=MAX_ITER {
        let s = model_step(params, p);
        let next = 0.5 * p + 0.5 * s.p_next;
        if (next - p).abs() < 1e-13 {
            let s = model_step(params, next);
            s.probs.validate()?;
            return Ok(DcfSolution {
                probs: s.probs,
                collision_probability: next,
                tau: s.tau,
                slot_mix: s.mix,
                iterations: it,
            });
        }
        p = next;
    }
    Err(Error::NoConvergence { what: "dcf fixed point", iterations: MAX_ITER })
}

/// Conditional channel-state probabilities of a saturated WLAN.
///
/// ```
/// use dualband::dcf::{dcf_state_probs, DcfParams};
/// use dualband::timing::FrameSpec;
/// let probs = dcf_state_probs(&DcfParams::saturated(4, FrameSpec::single(1500, 72e6))).unwrap();
/// assert!((probs.p_i + probs.p_c + probs.p_s - 1.0).abs() < 1e-9);
/// assert!(probs.q_c > 0.0);
/// ```
pub fn dcf_state_probs(params: &DcfParams) -> Result<DcfStateProbs> {
    solve_dcf(params).map(|s| s.probs)
}

/// Empirical statistics from [`dcf_monte_carlo`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcfMonteCarlo {
    pub probs: DcfStateProbs,
    /// Each station's share of successful airtime.
    pub airtime_shares: Vec<f64>,
    /// Successful transmissions per station.
    pub successes: Vec<u64>,
    /// Mean length of DIFS + idle run + busy period, seconds.
    pub mean_superslot: f64,
    pub collision_probability: f64,
    pub transitions: u64,
    pub simulated_time: f64,
}

/// Slot-level simulation of `n` saturated stations for `horizon` seconds of
/// channel time. Counters only decrement in idle slots; a collision doubles
/// the window of every station involved.
pub fn dcf_monte_carlo(params: &DcfParams, horizon: f64, seed: u64) -> Result<DcfMonteCarlo> {
    params.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Domain { name: "horizon", value: horizon });
    }
    let n = params.n_contenders as usize;
    let mac = &params.timing;
    let t_s: Vec<f64> = (0..n).map(|i| mac.success_duration(params.class_of(i))).collect();
    let t_c: Vec<f64> = (0..n).map(|i| mac.collision_duration(params.class_of(i))).collect();

    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect();
    let mut stage = vec![0u32; n];
    let mut counter: Vec<u64> = rngs
        .iter_mut()
        .map(|r| r.gen_range(0..params.initial_window) as u64)
        .collect();

    const WARMUP_SLOTS: u64 = 1000;
    let mut counts = [[0u64; 3]; 2];
    let mut airtime = vec![0.0; n];
    let mut successes = vec![0u64; n];
    let (mut attempts, mut collided) = (0u64, 0u64);
    let (mut superslots, mut superslot_time) = (0u64, 0.0);
    let mut current_ss = mac.difs;
    let mut prev_busy = true;
    let mut time = 0.0;
    let mut slot_no = 0u64;
    let mut tx = Vec::with_capacity(n);

    while time < horizon {
        tx.clear();
        tx.extend((0..n).filter(|&i| counter[i] == 0));
        let counted = slot_no >= WARMUP_SLOTS;
        let (outcome, dur) = match tx.len() {
            0 => {
                counter.iter_mut().for_each(|c| *c -= 1);
                (0, mac.slot)
            }
            1 => {
                let i = tx[0];
                stage[i] = 0;
                counter[i] = rngs[i].gen_range(0..params.initial_window) as u64;
                if counted {
                    airtime[i] += t_s[i];
                    successes[i] += 1;
                    attempts += 1;
                }
                (1, t_s[i])
            }
            _ => {
                let mut d: f64 = 0.0;
                for &i in &tx {
                    d = d.max(t_c[i]);
                    stage[i] = params.next_stage(stage[i]);
                    let w = params.window(stage[i]) as u64;
                    counter[i] = rngs[i].gen_range(0..w);
                }
                if counted {
                    attempts += tx.len() as u64;
                    collided += tx.len() as u64;
                }
                (2, d)
            }
        };
        if counted {
            counts[usize::from(!prev_busy)][outcome] += 1;
        }
        time += dur;
        current_ss += dur;
        if outcome == 0 {
            prev_busy = false;
        } else {
            if counted {
                superslots += 1;
                superslot_time += current_ss;
            }
            current_ss = mac.difs;
            time += mac.difs;
            prev_busy = true;
        }
        slot_no += 1;
    }

    let row = |r: [u64; 3]| {
        let tot = (r[0] + r[1] + r[2]).max(1) as f64;
        (r[0] as f64 / tot, r[1] as f64 / tot, r[2] as f64 / tot)
    };
    let (p_i, p_s, p_c) = row(counts[0]);
    let (q_i, q_s, q_c) = row(counts[1]);
    let total_air: f64 = airtime.iter().sum();
    let airtime_shares = airtime.iter().map(|a| if total_air > 0.0 { a / total_air } else { 0.0 }).collect();
    let transitions = counts.iter().flatten().sum();
    Ok(DcfMonteCarlo {
        probs: DcfStateProbs { p_i, p_c, p_s, q_i, q_c, q_s },
        airtime_shares,
        successes,
        mean_superslot: if superslots > 0 { superslot_time / superslots as f64 } else { 0.0 },
        collision_probability: if attempts > 0 { collided as f64 / attempts as f64 } else { 0.0 },
        transitions,
        simulated_time: time,
    })
}
