//! Simulation and policy-search toolkit for robotic pattern cutting of
//! deformable gauze mounted on a moving platform.
//!
//! The pipeline: load a cut pattern ([`planner`]), simulate the gauze as a
//! damped mass-spring sheet ([`cloth`]), drive simulated scissors along the
//! plan while a second arm tensions the sheet ([`cutting`], [`tension`]),
//! score the achieved cut against the intention ([`scoring`]), and search
//! for the best grasp point ([`grasp`]). The platform side covers rotary
//! Stewart-platform kinematics and motion modes ([`stewart`]), disturbance
//! estimation and cutting-under-motion controllers ([`sync`]), and the
//! movable-camera rigid-transform math ([`camera`]).
//!
//! Everything is deterministic: all randomness flows from explicit seeds
//! through named substreams ([`seeds`]), and worker-thread counts never
//! affect results ([`parallel`]).

/// Crate version, recorded in CLI run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod camera;
pub mod cloth;
pub mod cutting;
pub mod geom;
pub mod grasp;
pub mod parallel;
pub mod planner;
pub mod scoring;
pub mod seeds;
pub mod stewart;
pub mod sync;
pub mod tension;
