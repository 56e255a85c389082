//! Gaussian-windowed structural similarity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Dims, ImageVolume, Units};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimParams {
    pub window: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// `None` uses max(ref) - min(ref).
    pub dynamic_range: Option<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: None,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(invalid("SSIM window must be odd and at least 3"));
        }
        if !(self.window_sigma > 0.0) || !(self.k1 > 0.0) || !(self.k2 > 0.0) {
            return Err(invalid("SSIM window sigma and constants must be positive"));
        }
        if let Some(l) = self.dynamic_range {
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid("SSIM dynamic range must be positive"));
            }
        }
        Ok(())
    }

    /// Normalised 1D Gaussian taps.
    pub fn taps(&self) -> Vec<f64> {
        let h = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|t| {
                let x = t as f64 - h;
                (-x * x / (2.0 * self.window_sigma * self.window_sigma)).exp()
            })
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SsimResult {
    pub mean: f64,
    /// Per-voxel index; zero outside the interior.
    pub map: ImageVolume,
    /// Voxels whose window lies inside the image.
    pub interior: Vec<bool>,
}

/// Filter along one axis; entries whose window leaves the grid are left at 0.
fn filter_axis(src: &[f64], dims: Dims, axis: usize, taps: &[f64]) -> Vec<f64> {
    let axes = dims.axes();
    if axes[axis] == 1 {
        return src.to_vec();
    }
    let h = taps.len() / 2;
    let n = axes[axis];
    let stride = [1, dims.nx, dims.nx * dims.ny][axis];
    let mut out = vec![0.0; src.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let c = [idx % dims.nx, (idx / dims.nx) % dims.ny, idx / (dims.nx * dims.ny)][axis];
        if c < h || c + h >= n {
            continue;
        }
        let base = idx - h * stride;
        *o = taps.iter().enumerate().map(|(t, w)| w * src[base + t * stride]).sum();
    }
    out
}

fn smooth(v: &[f64], dims: Dims, taps: &[f64]) -> Vec<f64> {
    let a = filter_axis(v, dims, 0, taps);
    let b = filter_axis(&a, dims, 1, taps);
    filter_axis(&b, dims, 2, taps)
}

pub fn ssim(reference: &ImageVolume, test: &ImageVolume, params: &SsimParams) -> Result<SsimResult> {
    params.validate()?;
    let dims = reference.dims;
    dims.check_same(&test.dims, "SSIM images")?;
    let h = params.window / 2;
    let axes = dims.axes();
    for a in 0..3 {
        if axes[a] > 1 && axes[a] < params.window {
            return Err(invalid(format!("SSIM window {} exceeds image axis of {}", params.window, axes[a])));
        }
    }
    let l = params
        .dynamic_range
        .unwrap_or_else(|| reference.max() - reference.min());
    if !(l > 0.0) {
        return Err(invalid("SSIM dynamic range is zero; pass it explicitly"));
    }
    let c1 = (params.k1 * l).powi(2);
    let c2 = (params.k2 * l).powi(2);
    let taps = params.taps();
    let x = &reference.data;
    let y = &test.data;
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| f(*a, *b)).collect() };
    let mx = smooth(x, dims, &taps);
    let my = smooth(y, dims, &taps);
    let mxx = smooth(&prod(&|a, _| a * a), dims, &taps);
    let myy = smooth(&prod(&|_, b| b * b), dims, &taps);
    let mxy = smooth(&prod(&|a, b| a * b), dims, &taps);

    let interior: Vec<bool> = (0..dims.len())
        .map(|idx| {
            let (i, j, k) = dims.coords(idx);
            [i, j, k]
                .iter()
                .zip(axes)
                .all(|(&c, n)| n == 1 || (c >= h && c + h < n))
        })
        .collect();
    let mut map = vec![0.0; dims.len()];
    let mut sum = 0.0;
    let mut count = 0usize;
    for idx in 0..dims.len() {
        if !interior[idx] {
            continue;
        }
        let (ux, uy) = (mx[idx], my[idx]);
        let sxx = mxx[idx] - ux * ux;
        let syy = myy[idx] - uy * uy;
        let sxy = mxy[idx] - ux * uy;
        let v = ((2.0 * ux * uy + c1) * (2.0 * sxy + c2)) / ((ux * ux + uy * uy + c1) * (sxx + syy + c2));
        map[idx] = v;
        sum += v;
        count += 1;
    }
    Ok(SsimResult {
        mean: sum / count as f64,
        map: ImageVolume {
            dims,
            voxel_size: reference.voxel_size,
            units: Units::Dimensionless,
            data: map,
        },
        interior,
    })
}
