//! Online data-enabled predictive control.
//!
//! Block Hankel data matrices with FFT-based products, a behavioral model
//! that slides with incoming measurements, a regularized primal-dual solver,
//! plant simulation, and closed-loop experiments.

pub mod behavioral;
pub mod cli;
pub mod config;
pub mod convolution;
pub mod error;
pub mod experiment;
pub mod hankel;
pub mod plant;
pub mod rng;
pub mod solver;

pub use behavioral::{BehavioralModel, ConstraintBox, Dims, ProductKernel};
pub use error::{Error, Result};
pub use experiment::{ControllerMode, ExperimentConfig, RunTrace};
pub use hankel::{BlockHankelView, Signal};
pub use plant::PlantModel;
pub use solver::{SaddleParams, SolverState, TrackingCost};
