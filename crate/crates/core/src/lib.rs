//! Five-phase induction motor drive under predictive stator current control,
//! with closed-loop adaptation of the cost-function weighting factors.

pub mod autotuner;
pub mod config;
pub mod cost;
pub mod error;
pub mod harness;
pub mod machine;
pub mod metrics;
pub mod outer_loop;
pub mod output;
pub mod predictor;
pub mod vsi;

pub use config::Config;
pub use cost::WeightVector;
pub use error::{Error, Result};
