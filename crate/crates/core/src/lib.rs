//! Hierarchical car-following: a jerk-constrained longitudinal simulator,
//! calibrated rule-based and learned low-level models, and reinforcement
//! learning coordinators that select or blend them.

pub mod calibration;
pub mod config;
pub mod data;
pub mod ensemble;
pub mod env;
pub mod eval;
pub mod kinematics;
pub mod models;
pub mod pipeline;
pub mod neural;
pub mod rl;
pub mod sim;
