//! Path tracking for a four-module reconfigurable robot whose modules are
//! independently steered differential-drive units.
//!
//! The controller is split into three layers:
//!
//! * [`icr`] turns the pose error into a desired instantaneous center of
//!   rotation (ICR) in body-frame polar coordinates.
//! * [`steering`] maps that ICR to module steering angles and moves the
//!   modules so that their wheel axes stay concurrent during transients.
//! * [`velocity`] turns module speeds and steering rates into wheel rates
//!   while respecting the motor limit.
//!
//! [`simulator`] closes the loop around an ideal no-slip plant and
//! [`controller`] wires the layers together.

pub mod angle;
pub mod audit;
pub mod compare;
pub mod config;
pub mod controller;
pub mod geometry;
pub mod icr;
pub mod kinematics;
pub mod pid;
pub mod plot;
pub mod simulator;
pub mod steering;
pub mod velocity;

pub use geometry::{GeometricParams, Morphology, Shape, WheelAxisLine};
pub use kinematics::{Frame, ModuleVelocities, Pose, Twist, WheelRates};
