//! Optimal power-splitting design for multi-hop decode-and-forward relay
//! chains with simultaneous wireless information and power transfer.
//!
//! Relays harvest a fraction `rho_k` of the received RF power and decode with
//! the rest, so every ratio trades the current hop's SNR against the energy
//! left for the hops downstream. [`solver`] gives the globally optimal ratios
//! in closed form for two problems: the least source power meeting per-node
//! SNR thresholds, and the largest bottleneck rate at a given source power.
//! [`oracle`] checks those closed forms by brute force and bisection,
//! [`protocol`] simulates how the ratios reach the relays, and
//! [`experiments`] runs seeded Monte Carlo sweeps over Rayleigh fading.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod protocol;
pub mod relay_count;
pub mod solver;
pub mod units;

pub use channel::{ChannelState, FadingDraw, HopGeometry};
pub use error::{Error, Result};
pub use model::{NetworkConfig, NodeParams, PsAllocation};
pub use relay_count::RelayCount;
pub use solver::{FixedBaseline, PowerMinSolution, RateMaxSolution, SnrModel};
