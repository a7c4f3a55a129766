//! Simulation clock in integer nanoseconds.

pub type Nanos = u64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_MS: Nanos = 1_000_000;
pub const NS_PER_S: Nanos = 1_000_000_000;

/// Rounds seconds to the nearest nanosecond.
pub fn from_secs(s: f64) -> Nanos {
    debug_assert!(s >= 0.0);
    (s * 1e9).round() as Nanos
}

pub fn to_secs(t: Nanos) -> f64 {
    t as f64 * 1e-9
}

/// Smallest multiple of `step` that is `>= t`.
pub fn ceil_to(t: Nanos, step: Nanos) -> Nanos {
    t.div_ceil(step) * step
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(from_secs(9e-6), 9_000);
        assert_eq!(from_secs(1e-3), NS_PER_MS);
        assert_eq!(ceil_to(1_000_001, NS_PER_MS), 2 * NS_PER_MS);
        assert_eq!(ceil_to(2 * NS_PER_MS, NS_PER_MS), 2 * NS_PER_MS);
    }
}
