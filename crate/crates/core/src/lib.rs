//! Traffic balancing for a small cell that serves its users over a licensed
//! LTE carrier and a shared unlicensed channel.
//!
//! The crate covers the analytic side:
//!
//! - [`rate`]: rate curves, the log utility, unit conversions
//! - [`power`]: capped water-filling over licensed subchannels
//! - [`balance`]: the closed-form unlicensed time-share and its sensitivity
//! - [`dcf`]: a saturated 802.11 DCF model with a Monte-Carlo reference
//! - [`dbf`]: channel usage of periodic LTE sensing access next to WiFi
//! - [`ifw`]: bisection tuning of a WiFi fBS backoff window
//!
//! ```
//! use dualband::balance::{optimal_tf, BalanceInputs};
//!
//! // 5.46 Mbps licensed, 78 Mbps unlicensed, one wDevice wanting 60% airtime
//! let inp = BalanceInputs::new(5.46e6, 78e6, 1, 0.9, 0.6).unwrap();
//! let d = optimal_tf(&inp);
//! assert!((d.t_f - 0.415).abs() < 1e-9);
//! ```

pub mod balance;
pub mod dbf;
pub mod dcf;
pub mod error;
pub mod ifw;
pub mod power;
pub mod rate;
pub mod timing;

pub use error::{Error, Result};
pub use rate::{Throughput, Utility};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/water_filling.md")]
    mod water_filling {}
    #[doc = include_str!("../../../book/src/time_share.md")]
    mod time_share {}
    #[doc = include_str!("../../../book/src/dcf.md")]
    mod dcf {}
    #[doc = include_str!("../../../book/src/dbf.md")]
    mod dbf {}
    #[doc = include_str!("../../../book/src/ifw.md")]
    mod ifw {}
}
