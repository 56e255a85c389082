//! Deterministic tumour segmentation on sodium images.

use crate::error::{Error, Result};
use crate::grid::ImageVolume;
use crate::phantom::RegionMask;

/// Voxels inside the bounding box of `truth` (grown by `margin` voxels) whose
/// intensity is at least half the box's 99th-percentile intensity.
pub fn segment_tumor(img: &ImageVolume, truth: &RegionMask, margin: usize) -> Result<RegionMask> {
    img.dims.check_same(&truth.dims, "image vs tumour mask")?;
    let d = img.dims;
    let axes = d.axes();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for (idx, _) in truth.voxels.iter().enumerate().filter(|(_, v)| **v) {
        let (i, j, k) = d.coords(idx);
        for (a, c) in [i, j, k].into_iter().enumerate() {
            lo[a] = lo[a].min(c);
            hi[a] = hi[a].max(c);
        }
    }
    if lo[0] == usize::MAX {
        return Err(Error::EmptyMask("reference tumour mask is empty".into()));
    }
    for a in 0..3 {
        lo[a] = lo[a].saturating_sub(margin);
        hi[a] = (hi[a] + margin).min(axes[a] - 1);
    }
    let in_box = |idx: usize| {
        let (i, j, k) = d.coords(idx);
        [i, j, k].into_iter().enumerate().all(|(a, c)| c >= lo[a] && c <= hi[a])
    };
    let mut vals: Vec<f64> = (0..d.len()).filter(|i| in_box(*i)).map(|i| img.data[i]).collect();
    vals.sort_by(f64::total_cmp);
    let p99 = percentile(&vals, 0.99);
    let thr = 0.5 * p99;
    let voxels = (0..d.len()).map(|i| in_box(i) && img.data[i] >= thr).collect();
    RegionMask::new(d, voxels, "tumor_segmented")
}

/// Linear-interpolated percentile of sorted values.
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}
