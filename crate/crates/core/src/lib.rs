pub mod control;
pub mod error;
pub mod estimators;
pub mod io;
pub mod kernel;
pub mod plants;
pub mod scenarios;
pub mod sim;
pub mod streaming;
pub mod trace;

pub use error::{Error, Result};
pub use kernel::{DerivativeEstimate, EstimatorConfig, EstimatorKernel};
pub use streaming::{MatchedInputFilter, Mode, StreamingDifferentiator};
pub use trace::SimTrace;
