//! Robust optimal harvesting of a fish population whose individual growth
//! curve is only known up to a distribution of its asymptotic weight.
//!
//! The crate is organized bottom-up:
//!
//! - [`growth`]: logistic growth with a beta-distributed maximum weight, its
//!   moments and envelopes.
//! - [`calibration`]: logistic least-squares fits, empirical statistics and the
//!   exhaustive lattice search for the distribution parameters.
//! - [`robust`]: the entropic worst-case body weight `omega(t, n)` and the
//!   distorted density that attains it.
//! - [`hjb`]: explicit, semi-implicit and implicit solvers for the value
//!   function, with discrete maximum-principle checks on every row.
//! - [`policy`]: optimal harvest rates, backtracked population trajectories and
//!   sensitivity runs.
//! - [`io`]: configuration files, CSV readers and writers, run manifests.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod growth;
pub mod hjb;
pub mod io;
mod optim;
pub mod policy;
pub mod robust;

pub use error::{Error, Result};
pub use growth::{LogisticParams, MaxWeightDistribution, StatsSummary, UncertainGrowthModel};
pub use hjb::{GridSpec, HarvestProblem, Scheme, TerminalReward};
pub use robust::UncertaintyAversion;
