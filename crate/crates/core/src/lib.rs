//! Exterior rotating Oseen flow laboratory: fundamental-solution reference
//! fields, truncated-domain Taylor–Hood solves with an artificial boundary
//! condition, and decay/truncation studies.

pub mod cli;
pub mod error;
pub mod fit;
pub mod kernels;
pub mod fem;
pub mod mesh;
pub mod params;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
