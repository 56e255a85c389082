//! Simulation, reconstruction and quantification toolkit for multi-coil
//! radial sodium MRI of the breast.
//!
//! The pipeline runs phantom → acquisition → reconstruction → metrics →
//! concentration quantification → paired statistics. See the crate README for
//! the command-line interface.

pub mod acquisition;
pub mod error;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod quant;
pub mod recon;

pub use error::{Error, FormatError, Result};
pub use grid::{ComplexVolume, Dims, ImageVolume, Units};
