//! Checks over a written event log and over counters.

use dualband::{Error, Result};

use crate::channel::{Counters, EventKind};
use crate::time::{Nanos, NS_PER_MS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLine {
    pub t: Nanos,
    pub node: String,
    pub kind: EventKind,
}

/// Parses `t_ns node EVENT` lines. Blank lines are skipped.
pub fn parse_event_log(text: &str) -> Result<Vec<LogLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || Error::Config(format!("event log line {}: {l:?}", i + 1));
            let mut it = l.split_whitespace();
            let t = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let node = it.next().ok_or_else(bad)?.to_string();
            let kind = it.next().and_then(EventKind::parse).ok_or_else(bad)?;
            if it.next().is_some() {
                return Err(bad());
            }
            Ok(LogLine { t, node, kind })
        })
        .collect()
}

/// Every DBF decision sits on a subframe boundary with its sensing window
/// ending there, and every DBF transmission starts on a boundary.
pub fn check_subframe_alignment(log: &[LogLine], dbf: &str, t_sensing_ns: Nanos) -> std::result::Result<usize, String> {
    let mut pending_start: Option<Nanos> = None;
    let mut checked = 0;
    for l in log.iter().filter(|l| l.node == dbf) {
        match l.kind {
            EventKind::SenseStart => pending_start = Some(l.t),
            EventKind::SenseIdle | EventKind::SenseBusy => {
                if l.t % NS_PER_MS != 0 {
                    return Err(format!("decision at {} ns off the subframe grid", l.t));
                }
                match pending_start.take() {
                    Some(s) if s + t_sensing_ns == l.t => {}
                    other => return Err(format!("decision at {} ns has sensing start {other:?}", l.t)),
                }
                checked += 1;
            }
            EventKind::DbfTxStart if l.t % NS_PER_MS != 0 => {
                return Err(format!("transmission at {} ns off the subframe grid", l.t));
            }
            _ => {}
        }
    }
    Ok(checked)
}

/// After each DBF transmission the next decision waits at least `T_att`.
pub fn check_skip_gap(log: &[LogLine], dbf: &str, t_attempt_ns: Nanos) -> std::result::Result<usize, String> {
    let mut last_end: Option<Nanos> = None;
    let mut checked = 0;
    for l in log.iter().filter(|l| l.node == dbf) {
        match l.kind {
            EventKind::DbfTxEnd => last_end = Some(l.t),
            EventKind::SenseIdle | EventKind::SenseBusy => {
                if let Some(e) = last_end.take() {
                    if l.t < e + t_attempt_ns {
                        return Err(format!("decision at {} ns only {} ns after a transmission", l.t, l.t - e));
                    }
                    checked += 1;
                }
            }
            _ => {}
        }
    }
    Ok(checked)
}

/// Relative gap between the elapsed time and the sum of idle, small cell,
/// WLAN and collision time.
pub fn airtime_residual(c: &Counters) -> f64 {
    let sum = c.idle_ns + c.small_ns + c.wlan_ns + c.collision_ns;
    (sum as f64 - c.time as f64).abs() / (c.time.max(1) as f64)
}
