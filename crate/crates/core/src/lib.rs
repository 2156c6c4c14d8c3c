//! Cross-entropy user association for load-balanced heterogeneous cellular
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`netmodel`]: deployments, path loss, SINR and full-bandwidth link rates.
//! * [`assoc`]: the association variable, load caps and the utility objective.
//! * [`ce`]: the cross-entropy search (sampling, elites, update, smoothing).
//! * [`baselines`]: max-SINR, exhaustive search and a dual/subgradient method.
//! * [`harness`]: seeded Monte-Carlo experiments and their CSV/JSON outputs.

pub mod assoc;
pub mod baselines;
pub mod ce;
pub mod error;
pub mod harness;
pub mod netmodel;
pub mod output;
pub mod overrides;
pub mod scenario;
pub mod seed;
pub mod units;

pub use error::{Error, Result};
