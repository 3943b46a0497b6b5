//! Coordinate-wise energy-decrease trajectory analysis and robust
//! multi-agent consensus simulation.
//!
//! The crate has three layers:
//!
//! - [`energy`]: twice-differentiable energy functions `V` with exact
//!   gradients and Hessians (quadratic, pairwise graph-coupled,
//!   box-distance-quartic families) plus finite-difference self-checks.
//! - [`analysis`]: checks the coordinate-wise decrease condition
//!   `dy_i * dV/dx_i <= 0` along sampled trajectories, monitors energy
//!   monotonicity, estimates accumulation points, and classifies asymptotics
//!   with a numerical kernel certificate for the non-convergent alternative.
//! - [`multiagent`] / [`scenarios`]: a first-order multi-agent system whose
//!   agents take noisy relative measurements, compute certified gradient
//!   bounds, and apply dead-zone control through sign-preserving actuators;
//!   scenario builders and the JSON config schema tie everything together.
//!
//! [`csvio`] and [`report`] provide the CSV and JSON artifact formats used by
//! the `coordwise` binary.

pub mod analysis;
pub mod csvio;
pub mod energy;
pub mod multiagent;
pub mod report;
pub mod scenarios;
