//! Controllers and reference trajectories used by the scenarios.

mod gpi;
mod manipulator;
mod reference;
mod rigid;

pub use gpi::{double_second_order, GpiFilter};
pub use manipulator::{hurwitz_gains, manipulator_control, ManipulatorControl, ManipulatorParams};
pub use reference::{ReferenceTrajectory, RefDerivatives};
pub use rigid::{rigid_pi_control, PiGains};
