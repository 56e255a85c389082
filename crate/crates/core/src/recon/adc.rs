//! Adaptive coil combination: per voxel, the dominant eigenvector of the coil
//! covariance accumulated over a local window weights the coil images.
//!
//! Convention: the eigenvector has unit norm, so a single unit-sensitivity
//! coil passes through unchanged and two identical coils give √2 × the input.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexVolume, ImageVolume, Units};
use crate::par;

const POWER_ITERS: usize = 100;

/// Dominant eigenvector of a Hermitian PSD matrix (row-major, n×n).
fn dominant_eigenvector(r: &[Complex64], n: usize, start: &[Complex64]) -> Vec<Complex64> {
    let norm = |v: &[Complex64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut v: Vec<Complex64> = start.to_vec();
    let mut nv = norm(&v);
    if nv == 0.0 {
        v = vec![Complex64::new(1.0, 0.0); n];
        nv = (n as f64).sqrt();
    }
    v.iter_mut().for_each(|x| *x /= nv);
    for _ in 0..POWER_ITERS {
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        for (i, wi) in w.iter_mut().enumerate() {
            for j in 0..n {
                *wi += r[i * n + j] * v[j];
            }
        }
        let nw = norm(&w);
        if nw == 0.0 {
            return v;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        // fix the global phase so convergence can be measured
        let rot = {
            let d: Complex64 = w.iter().zip(&v).map(|(a, b)| b.conj() * a).sum();
            if d.norm() > 0.0 {
                d.conj() / d.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        };
        w.iter_mut().for_each(|x| *x *= rot);
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        v = w;
        if delta < 1e-13 {
            break;
        }
    }
    v
}

pub fn adaptive_combine(coil_images: &[ComplexVolume], window: usize) -> Result<ImageVolume> {
    let first = coil_images
        .first()
        .ok_or_else(|| invalid("adaptive combine needs at least one coil image"))?;
    let dims = first.dims;
    for c in coil_images {
        c.dims.check_same(&dims, "coil images")?;
    }
    if window % 2 == 0 || window == 0 {
        return Err(invalid("window size must be odd"));
    }
    let axes = dims.axes();
    for a in 0..3 {
        if axes[a] > 1 && window > axes[a] {
            return Err(Error::InvalidParameter(format!(
                "window {window} larger than image axis of {}",
                axes[a]
            )));
        }
    }
    let nc = coil_images.len();
    let h = (window / 2) as i64;
    let reach = |a: usize| if axes[a] > 1 { h } else { 0 };
    let data = par::map_range(dims.len(), |idx| {
        let (i, j, k) = dims.coords(idx);
        let mut r = vec![Complex64::new(0.0, 0.0); nc * nc];
        for dk in -reach(2)..=reach(2) {
            for dj in -reach(1)..=reach(1) {
                for di in -reach(0)..=reach(0) {
                    let (x, y, z) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    if x < 0 || y < 0 || z < 0 || x >= axes[0] as i64 || y >= axes[1] as i64 || z >= axes[2] as i64 {
                        continue;
                    }
                    let q = dims.index(x as usize, y as usize, z as usize);
                    for a in 0..nc {
                        let sa = coil_images[a].data[q];
                        for b in 0..nc {
                            r[a * nc + b] += sa * coil_images[b].data[q].conj();
                        }
                    }
                }
            }
        }
        let s: Vec<Complex64> = coil_images.iter().map(|c| c.data[idx]).collect();
        let v = dominant_eigenvector(&r, nc, &s);
        v.iter().zip(&s).map(|(v, s)| v.conj() * s).sum::<Complex64>().norm()
    });
    Ok(ImageVolume {
        dims,
        voxel_size: first.voxel_size,
        units: Units::Signal,
        data,
    })
}

/// Root-sum-of-squares combination.
pub fn rss_combine(coil_images: &[ComplexVolume]) -> Result<ImageVolume> {
    let first = coil_images
        .first()
        .ok_or_else(|| invalid("need at least one coil image"))?;
    let mut data = vec![0.0; first.dims.len()];
    for c in coil_images {
        c.dims.check_same(&first.dims, "coil images")?;
        for (o, v) in data.iter_mut().zip(&c.data) {
            *o += v.norm_sqr();
        }
    }
    data.iter_mut().for_each(|v| *v = v.sqrt());
    Ok(ImageVolume {
        dims: first.dims,
        voxel_size: first.voxel_size,
        units: Units::Signal,
        data,
    })
}
