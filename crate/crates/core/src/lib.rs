//! Equivariant filter for attitude and fixed-frame angular velocity estimation
//! from a gyroscope and two direction measurements, with an EKF baseline and a
//! Monte Carlo simulation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ekf;
pub mod eqf;
pub mod error;
pub mod liegroup;
pub mod model;
pub mod sim;
pub mod symmetry;

pub use error::{Error, Result};
pub use liegroup::{AlgebraElement, GroupElement, Rotation};
pub use model::{ManifoldState, Measurement, ReferenceDirections, SystemInput};
