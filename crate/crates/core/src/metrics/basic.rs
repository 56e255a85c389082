use crate::error::{invalid, Error, Result};
use crate::grid::{Dims, ImageVolume};
use crate::phantom::RegionMask;

fn same_dims(a: Dims, b: Dims) -> Result<()> {
    a.check_same(&b, "images")
}

/// `sqrt(mean((ref - test)²))`.
pub fn rmse(reference: &ImageVolume, test: &ImageVolume) -> Result<f64> {
    same_dims(reference.dims, test.dims)?;
    let n = reference.data.len() as f64;
    let ss: f64 = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n).sqrt())
}

/// Variance of the 5-point Laplacian over interior voxels of each 2D slice,
/// averaged over slices.
pub fn focus_measure(img: &ImageVolume) -> Result<f64> {
    let d = img.dims;
    if d.nx < 3 || d.ny < 3 {
        return Err(invalid(format!("focus measure needs at least 3x3 slices, got {d}")));
    }
    let mut total = 0.0;
    for k in 0..d.nz {
        let mut resp = Vec::with_capacity((d.nx - 2) * (d.ny - 2));
        for j in 1..d.ny - 1 {
            for i in 1..d.nx - 1 {
                let l = img.get(i - 1, j, k) + img.get(i + 1, j, k) + img.get(i, j - 1, k) + img.get(i, j + 1, k)
                    - 4.0 * img.get(i, j, k);
                resp.push(l);
            }
        }
        let n = resp.len() as f64;
        let mean = resp.iter().sum::<f64>() / n;
        total += resp.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    }
    Ok(total / d.nz as f64)
}

/// `2|a ∩ b| / (|a| + |b|)`, and 1 when both masks are empty.
pub fn dice(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    a.dims.check_same(&b.dims, "masks")?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (x, y) in a.voxels.iter().zip(&b.voxels) {
        na += *x as usize;
        nb += *y as usize;
        inter += (*x && *y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineProfile {
    /// Physical endpoints, mm from the centre of the field of view.
    pub p0: [f64; 3],
    pub p1: [f64; 3],
    pub values: Vec<f64>,
}

impl LineProfile {
    pub fn n_samples(&self) -> usize {
        self.values.len()
    }

    /// Distance (mm) of sample `i` from `p0`.
    pub fn position(&self, i: usize) -> f64 {
        let len = (0..3).map(|a| (self.p1[a] - self.p0[a]).powi(2)).sum::<f64>().sqrt();
        len * i as f64 / (self.values.len() - 1) as f64
    }
}

/// Linear interpolation at `n` equidistant points from `p0` to `p1`
/// (mm, origin at the centre of the field of view).
pub fn line_profile(img: &ImageVolume, p0: [f64; 3], p1: [f64; 3], n: usize) -> Result<LineProfile> {
    if n < 2 {
        return Err(invalid("a line profile needs at least two samples"));
    }
    let fov = img.fov_mm();
    let axes = img.dims.axes();
    for p in [p0, p1] {
        for a in 0..3 {
            let inside = if axes[a] == 1 { p[a] == 0.0 } else { p[a].abs() <= fov[a] / 2.0 };
            if !inside {
                return Err(Error::OutsideFov(format!("profile endpoint {p:?} outside the {fov:?} mm field of view")));
            }
        }
    }
    let to_index = |p: [f64; 3]| -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..3 {
            if axes[a] > 1 {
                out[a] = (p[a] + fov[a] / 2.0) / img.voxel_size[a] - 0.5;
            }
        }
        out
    };
    let values = (0..n)
        .map(|i| {
            // walk from whichever end is nearer so reversed profiles match exactly
            let t = i as f64 / (n - 1) as f64;
            let s = (n - 1 - i) as f64 / (n - 1) as f64;
            let p: [f64; 3] = match (2 * i).cmp(&(n - 1)) {
                std::cmp::Ordering::Less => std::array::from_fn(|a| p0[a] + t * (p1[a] - p0[a])),
                std::cmp::Ordering::Greater => std::array::from_fn(|a| p1[a] + s * (p0[a] - p1[a])),
                std::cmp::Ordering::Equal => std::array::from_fn(|a| 0.5 * (p0[a] + p1[a])),
            };
            img.sample_linear(to_index(p))
        })
        .collect();
    Ok(LineProfile { p0, p1, values })
}
