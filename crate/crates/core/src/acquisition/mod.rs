//! Radial k-space sampling, coil sensitivities and the multi-coil forward model.

pub mod coils;
pub mod nufft;
pub mod operator;
pub mod toeplitz;
pub mod trajectory;

pub use coils::{make_coils, CoilSensitivities};
pub use operator::{
    add_noise, adjoint_model, coil_images, forward_model, EncodingOperator, EvalPath, KSpaceData,
};
pub use trajectory::{make_radial_trajectory, Trajectory, TrajectoryMode, K_MAX};
