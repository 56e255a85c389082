//! Image quality and agreement measures.

pub mod basic;
pub mod psf;
pub mod segment;
pub mod ssim;

pub use basic::{dice, focus_measure, line_profile, rmse, LineProfile};
pub use psf::{psf_fwhm, PsfResult};
pub use segment::segment_tumor;
pub use ssim::{ssim, SsimParams, SsimResult};
