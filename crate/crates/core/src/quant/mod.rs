//! Tissue sodium concentration from calibrated images, and the paired
//! statistics used to compare reconstructions.

pub mod special;
pub mod stats;
pub mod tsc;

pub use stats::{paired_ttest, pearson, region_stats, ttest_from_moments, Correlation, PairedTestResult, RegionStats};
pub use tsc::{fit_calibration, quantify_tsc, quantify_tsc_default, CalibrationCurve, TscResult};
