//! Seeded discrete-event coexistence simulator: a macrocell, dual-band
//! small cells and WLANs sharing one unlicensed channel per house.
//!
//! [`scenario::run_scenario`] is the entry point. [`channel::Channel`] is
//! the unlicensed-band event engine and can be driven on its own.

pub mod audit;
pub mod channel;
pub mod experiments;
pub mod licensed;
pub mod metrics;
pub mod pathloss;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod topology;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/simulator.md")]
mod book_simulator {}
