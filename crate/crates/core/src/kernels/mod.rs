//! Heat and Oseen kernels, the fundamental tensor, Newtonian-type potentials
//! and manufactured reference solutions.

pub mod basic;
pub mod fundamental;
pub mod time_integral;

pub use basic::{gamma_kernel, heat_kernel, oseen_tensor, rotation, KernelSide};
pub use fundamental::{fundamental_tensor, fundamental_tensor_z, fundamental_tensor_z_tilde, TensorEstimate};
pub use time_integral::KernelConfig;
pub mod potentials;
pub mod reference;

pub use potentials::{ball_rule, potential_n, potential_p, potential_s, BumpProfile, SourceDensity};
pub use reference::{read_points_csv, write_samples_csv, ReferenceSample, ReferenceSolution, VelocityEstimate};
