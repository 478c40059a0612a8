//! Grounding an ideal 2D physics simulator against a small budget of
//! interactions with a "real" (damped) environment, then measuring how well
//! action rankings learned in the grounded simulator transfer.

pub mod config;
pub mod error;
pub mod experiment;
pub mod exploration;
pub mod grounding;
pub mod parallel;
pub mod physics;
pub mod rng;
pub mod tasks;
pub mod transfer;
pub mod workflow;

pub use error::{Error, Result};
