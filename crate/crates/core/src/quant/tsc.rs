use serde::{Deserialize, Serialize};

use super::stats::region_stats;
use crate::error::{invalid, Error, Result};
use crate::grid::ImageVolume;
use crate::phantom::{RegionMask, TISSUE_WATER_FRACTION};

/// `signal = slope · concentration + intercept` through two reference vials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub slope: f64,
    pub intercept: f64,
    pub vial_concentrations: [f64; 2],
    pub vial_means: [f64; 2],
}

pub fn fit_calibration(vial_means: [f64; 2], vial_conc: [f64; 2]) -> Result<CalibrationCurve> {
    if vial_means.iter().chain(&vial_conc).any(|v| !v.is_finite()) {
        return Err(invalid("calibration points must be finite"));
    }
    if vial_conc[0] == vial_conc[1] {
        return Err(Error::DegenerateFit("equal vial concentrations".into()));
    }
    if vial_means[0] == vial_means[1] {
        return Err(Error::DegenerateFit("equal vial signals".into()));
    }
    let slope = (vial_means[1] - vial_means[0]) / (vial_conc[1] - vial_conc[0]);
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!("non-positive slope {slope}")));
    }
    let intercept = vial_means[0] - slope * vial_conc[0];
    Ok(CalibrationCurve {
        slope,
        intercept,
        vial_concentrations: vial_conc,
        vial_means,
    })
}

impl CalibrationCurve {
    /// Apparent concentration of a signal value.
    ///
    /// Signals equal to a vial mean map back to that vial's concentration
    /// exactly, which the straight `(s - b) / m` form does not guarantee.
    pub fn concentration(&self, signal: f64) -> f64 {
        let [m0, m1] = self.vial_means;
        let [c0, c1] = self.vial_concentrations;
        if signal == m0 {
            return c0;
        }
        if signal == m1 {
            return c1;
        }
        c0 + (signal - m0) * ((c1 - c0) / (m1 - m0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TscResult {
    pub region_name: String,
    pub mean: f64,
    pub sd: f64,
    pub n_voxels: usize,
    pub water_corrected: bool,
}

/// Regional TSC. Tissue values are divided by `water_fraction` since the
/// vials are pure water.
pub fn quantify_tsc(
    img: &ImageVolume,
    mask: &RegionMask,
    curve: &CalibrationCurve,
    is_tissue: bool,
    water_fraction: f64,
) -> Result<TscResult> {
    if !(water_fraction > 0.0 && water_fraction <= 1.0) {
        return Err(invalid(format!("water fraction {water_fraction} outside (0, 1]")));
    }
    let scale = if is_tissue { 1.0 / water_fraction } else { 1.0 };
    let conc = img.with_data(img.data.iter().map(|s| curve.concentration(*s) * scale).collect());
    let s = region_stats(&conc, mask)?;
    Ok(TscResult {
        region_name: mask.region_name.clone(),
        mean: s.mean,
        sd: s.sd,
        n_voxels: s.n,
        water_corrected: is_tissue,
    })
}

/// [`quantify_tsc`] with the default tissue water fraction.
pub fn quantify_tsc_default(
    img: &ImageVolume,
    mask: &RegionMask,
    curve: &CalibrationCurve,
    is_tissue: bool,
) -> Result<TscResult> {
    quantify_tsc(img, mask, curve, is_tissue, TISSUE_WATER_FRACTION)
}
