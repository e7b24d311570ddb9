//! Age-of-information optimal preemption (cutoff) and waiting (threshold)
//! policies for status updates with i.i.d. random service times.
//!
//! - [`dist`]: service-time laws with exact truncated moments.
//! - [`analysis`]: epoch statistics and the Dinkelbach threshold solver.
//! - [`cutoff`]: outer cutoff optimization and benchmark comparisons.
//! - [`sim`]: seedable Monte Carlo oracle for every analytic quantity.

pub mod analysis;
pub mod cutoff;
pub mod dist;
pub mod error;
pub mod quad;
pub mod sim;

pub use analysis::{epoch_stats, g_eval, solve_lambda, waiting_time, EpochStats, SolveResult};
pub use cutoff::{compare_policies, optimize_gamma, zero_wait_boundary, CutoffSweep};
pub use dist::{parse_token, ServiceDistribution, TruncatedAgeMoments};
pub use error::{AoiError, Result};
pub use sim::{export_trajectory, run_simulation, sample_epoch, Policy, SimReport};
