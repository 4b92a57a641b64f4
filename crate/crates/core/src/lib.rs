//! Collision avoidance for swarms of agents moving in 3D.
//!
//! Each agent sees partners inside a forward vision cone, predicts their
//! closest approach from the current relative motion, and turns away from
//! threatening ones with a gyroscopic force `v ∧ R` that leaves its speed
//! unchanged. A target potential with friction drives agents to their goals.
//!
//! ```
//! use gyroswarm::scenarios::circle;
//!
//! let mut spec = circle(3, 0.5, 0);
//! spec.params.t_end = 1.0;
//! let log = spec.run().unwrap();
//! assert_eq!(log.times.len(), 11);
//! ```

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avoidance;
pub mod cli;
pub mod dynamics;
pub mod external;
pub mod geometry;
pub mod json;
pub mod meanfield;
pub mod output;
pub mod perception;
pub mod scenarios;

pub use dynamics::{AgentState, ObstacleSpec, SimParams, Simulation, TrajectoryLog, World};
pub use geometry::Vec3;
