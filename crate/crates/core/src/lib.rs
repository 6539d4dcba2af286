//! Multi-agent linear bandits with coalition data sharing, and the
//! transferable-utility game induced by the agents' regrets.
//!
//! Layers, bottom up: [`env`] (instances, actions, trajectories),
//! [`algorithms`] (coalition runners), [`game`] (values, Shapley, core),
//! [`assumptions`] (empirical regret-shape checks), [`instances`]
//! (synthetic and MovieLens constructors) and [`harness`] (experiments and
//! reports).

pub mod algorithms;
pub mod assumptions;
pub mod coalition;
pub mod env;
pub mod error;
pub mod game;
pub mod harness;
pub mod instances;
pub mod linalg;
pub mod rng;

pub use coalition::Coalition;
pub use env::{ActionProfile, ActionSet, ProblemInstance, Step, Trajectory};
pub use error::{Error, Result};
pub use rng::{Purpose, RngStream};
