//! Clinching auctions for agents with concave ability-to-pay constraints
//! over polymatroidal environments, with an exact-rational verification
//! suite.
//!
//! The library runs the ascending multi-unit and polyhedral clinching
//! auctions, records full execution traces, and certifies outcomes:
//! admissibility, individual rationality, grid incentive compatibility,
//! and Pareto-efficiency decided by an exact rational LP. All arithmetic
//! is `BigRational`; every assertion in the verification suite is an
//! exact equality, never a tolerance.
//!
//! Modules:
//! - [`polymatroid`]: submodular oracles, capped functions, greedy
//!   maximization, tightness.
//! - [`payment`]: piecewise-linear ability-to-pay envelopes and demands.
//! - [`auction`]: the clinching auction itself, with checkpoints, clinch
//!   events and dropping prices.
//! - [`verification`]: Pareto/VCG/IC/oracle certification and the
//!   trace-structure checks.
//! - [`lp`]: the exact two-phase simplex behind the Pareto oracle.
//! - [`scenario_io`]: scenario documents, reports and the seeded
//!   generator.

// Error variants deliberately carry exact rational witnesses; their size
// is the point, not an accident.
#![allow(clippy::result_large_err)]

pub mod auction;
pub mod lp;
pub mod payment;
pub mod polymatroid;
pub mod rational;
pub mod scenario_io;
pub mod verification;

pub use auction::{run, run_with, Outcome, RunOptions, Scenario};
pub use polymatroid::{SubmodularFunction, Subset, SubsetVector};
pub use rational::Rat;
