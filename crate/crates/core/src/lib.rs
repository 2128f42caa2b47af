//! Min-max AP-utilization client association for 60 GHz access networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: link gain, Shannon rate and the SNR-vs-distance curve.
//! - [`instance`]: candidate sets, the utilization matrix and pruning.
//! - [`dual_solver`]: dual function, simplex projection and the projected
//!   subgradient association algorithm (centralized and message-passing).
//! - [`exact`]: branch-and-bound / enumeration MILP oracle and a dense
//!   two-phase simplex for the LP relaxation.
//! - [`policies`]: random and RSSI baselines, objective and Jain index.
//! - [`sim`]: topology generation and Monte Carlo averaging.

// `!(x > 0.0)` range checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dual_solver;
pub mod exact;
pub mod instance;
pub mod policies;
pub mod rng;
pub mod sim;

pub use channel::{ChannelError, ChannelParams, LinkRealization};
pub use dual_solver::{
    run_daa, run_daa_distributed, DaaConfig, DistributedReport, DualState, SolveReport, TraceRow,
};
pub use exact::{solve_lp_relaxation, solve_milp_exact, ExactError, ExactResult};
pub use instance::{Assignment, Instance, InstanceError, Topology};
pub use policies::FairnessReport;
pub use sim::{ExperimentConfig, ExperimentOutcome, SimError, SlotResult};
