//! Leader-follower formation tracking for double-integrator agents in 3D,
//! with divergent-flow barrier feedback keeping neighbors apart.
//!
//! Agents are indexed from 0 (the leader). Follower `i` measures only its
//! predecessor `i - 1` through the edge `e_i = p_i - p_{i-1}`.

pub mod analysis;
pub mod control;
pub mod formation;
pub mod geom3;
pub mod ode;
pub mod output;
pub mod scenario;
pub mod sim;
