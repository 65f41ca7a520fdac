//! Finite-MDP planning that maximizes expected discounted return subject to
//! a per-state bound on the probability of ending in a failure state.
//!
//! Two solver families are provided: memoryless ("naive") dynamic
//! programming, which can oscillate forever, and value iteration with
//! recursive constraints over a bounded-reachability horizon stack, which
//! stabilizes. Exact evaluation, closed forms and brute-force enumeration
//! serve as oracles for both.

pub mod analysis;
pub mod cli;
pub mod env;
pub mod error;
pub mod exact;
pub mod format;
pub mod mdp;
pub mod naive;
pub mod numfmt;
pub mod recursive;

pub use error::{Error, Result};
pub use mdp::{ActionId, MdpBuilder, MdpSpec, Policy, StateId, ValueTables};
