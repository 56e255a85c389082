//! Structural information extracted from an anatomical prior image: edge
//! weights (location of edges), direction fields (direction of edges) and the
//! per-axis inverted-derivative threshold maps of the anatomically guided model.
//!
//! All maps are computed from the prior resampled to the reconstruction grid,
//! using the same forward differences as the regulariser.

use super::ops::gradient;
use crate::error::{invalid, Result};
use crate::grid::{Dims, ImageVolume};
use crate::phantom::PriorImage;

/// Resample a prior onto the reconstruction grid (linear interpolation of
/// intensities; differentiation happens afterwards).
/// Prior intensities on the reconstruction grid. Integer downsampling averages
/// whole blocks so edges get the same partial-volume mixing as the sodium
/// signal; other ratios fall back to trilinear interpolation.
pub fn prior_on_grid(prior: &PriorImage, dims: Dims) -> ImageVolume {
    let v = &prior.values;
    if v.dims == dims {
        v.clone()
    } else if let Some(f) = crate::phantom::integer_factor(v.dims, dims) {
        crate::phantom::block_mean(v, dims, f)
    } else {
        v.resample_linear(dims)
    }
}

fn grad_norm(g: &[f64; 3]) -> f64 {
    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
}

/// 1% of the largest prior gradient magnitude.
pub fn default_eta(prior: &ImageVolume) -> f64 {
    let m = gradient(&prior.data, prior.dims)
        .iter()
        .map(grad_norm)
        .fold(0.0, f64::max);
    if m > 0.0 {
        0.01 * m
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeightMap {
    pub dims: Dims,
    /// In (0, 1]; 1 where the prior is flat.
    pub weights: Vec<f64>,
}

impl EdgeWeightMap {
    pub fn ones(dims: Dims) -> Self {
        Self {
            dims,
            weights: vec![1.0; dims.len()],
        }
    }
}

/// `w = eta / sqrt(|∇v|² + eta²)`.
pub fn compute_wtv_weights(prior: &ImageVolume, eta: f64) -> Result<EdgeWeightMap> {
    if !(eta > 0.0) {
        return Err(invalid("eta must be positive"));
    }
    let weights = gradient(&prior.data, prior.dims)
        .iter()
        .map(|g| {
            let n2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            eta / (n2 + eta * eta).sqrt()
        })
        .collect();
    Ok(EdgeWeightMap {
        dims: prior.dims,
        weights,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionField {
    pub dims: Dims,
    /// `∇v / sqrt(|∇v|² + eta²)`, norm < 1.
    pub xi: Vec<[f64; 3]>,
    pub gamma: f64,
}

impl DirectionField {
    pub fn zeros(dims: Dims, gamma: f64) -> Self {
        Self {
            dims,
            xi: vec![[0.0; 3]; dims.len()],
            gamma,
        }
    }

    /// `(I - γ² ξ ξᵀ) g` at voxel `idx`.
    #[inline]
    pub fn project(&self, idx: usize, g: [f64; 3]) -> [f64; 3] {
        let xi = self.xi[idx];
        let s = self.gamma * self.gamma * (xi[0] * g[0] + xi[1] * g[1] + xi[2] * g[2]);
        [g[0] - s * xi[0], g[1] - s * xi[1], g[2] - s * xi[2]]
    }
}

pub fn compute_dtv_field(prior: &ImageVolume, eta: f64, gamma: f64) -> Result<DirectionField> {
    if !(eta > 0.0) {
        return Err(invalid("eta must be positive"));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid("gamma must lie in [0, 1]"));
    }
    let xi = gradient(&prior.data, prior.dims)
        .iter()
        .map(|g| {
            let d = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + eta * eta).sqrt();
            [g[0] / d, g[1] / d, g[2] / d]
        })
        .collect();
    Ok(DirectionField {
        dims: prior.dims,
        xi,
        gamma,
    })
}

/// Per-axis threshold maps `max(1 - |∂_a v| / p99_a, omega)`, where `p99_a` is the
/// 99th percentile of the nonzero derivative magnitudes along that axis.
pub fn agtv_threshold_maps(prior: &ImageVolume, omega: f64) -> Result<[Vec<f64>; 3]> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(invalid("omega must lie in [0, 1]"));
    }
    let g = gradient(&prior.data, prior.dims);
    let mut maps: [Vec<f64>; 3] = Default::default();
    for (a, map) in maps.iter_mut().enumerate() {
        let mut mags: Vec<f64> = g.iter().map(|v| v[a].abs()).filter(|v| *v > 0.0).collect();
        if mags.is_empty() {
            *map = vec![1.0; g.len()];
            continue;
        }
        mags.sort_by(|x, y| x.total_cmp(y));
        let p = mags[((mags.len() - 1) as f64 * 0.99).round() as usize];
        *map = g
            .iter()
            .map(|v| (1.0 - (v[a].abs() / p).min(1.0)).max(omega))
            .collect();
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Units;

    fn step(dims: Dims, at: usize, hi: f64) -> ImageVolume {
        let data = (0..dims.len())
            .map(|idx| if dims.coords(idx).0 >= at { hi } else { 0.0 })
            .collect();
        ImageVolume::from_data(dims, [1.0; 3], Units::Dimensionless, data).unwrap()
    }

    #[test]
    fn flat_prior_gives_unit_weights_and_zero_field() {
        let d = Dims::new2(16, 16);
        let v = ImageVolume::from_data(d, [1.0; 3], Units::Dimensionless, vec![2.5; d.len()]).unwrap();
        let w = compute_wtv_weights(&v, 0.1).unwrap();
        assert!(w.weights.iter().all(|x| *x == 1.0));
        let f = compute_dtv_field(&v, 0.1, 0.9).unwrap();
        assert!(f.xi.iter().all(|x| *x == [0.0; 3]));
        assert_eq!(f.project(3, [1.0, -2.0, 0.0]), [1.0, -2.0, 0.0]);
    }

    #[test]
    fn weight_at_gradient_equal_eta() {
        let d = Dims::new2(16, 16);
        let v = step(d, 8, 0.3);
        let w = compute_wtv_weights(&v, 0.3).unwrap();
        let at = d.index(7, 4, 0);
        assert!((w.weights[at] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weight_minimum_on_edge() {
        let d = Dims::new2(16, 16);
        let v = step(d, 9, 1.0);
        let w = compute_wtv_weights(&v, 0.01).unwrap();
        for j in 0..16 {
            let row: Vec<f64> = (0..16).map(|i| w.weights[d.index(i, j, 0)]).collect();
            let argmin = row
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            // forward difference places the jump between 8 and 9 at voxel 8
            assert!(argmin == 8 || argmin == 9, "row {j}: {argmin}");
        }
    }

    #[test]
    fn gamma_zero_is_identity() {
        let d = Dims::new2(16, 16);
        let f = compute_dtv_field(&step(d, 8, 1.0), 0.01, 0.0).unwrap();
        for idx in 0..d.len() {
            assert_eq!(f.project(idx, [0.7, -0.2, 0.0]), [0.7, -0.2, 0.0]);
        }
    }

    #[test]
    fn projection_across_vertical_edge() {
        let d = Dims::new2(16, 16);
        let gamma = 0.9;
        let f = compute_dtv_field(&step(d, 8, 1.0), 1e-3, gamma).unwrap();
        let at = d.index(7, 5, 0);
        let xi = f.xi[at];
        assert!((xi[0] - 1.0).abs() < 1e-5 && xi[1].abs() < 1e-12);
        let p = f.project(at, [2.0, 0.0, 0.0]);
        let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let want = (1.0 - gamma * gamma) * 2.0;
        assert!(((n - want) / want).abs() < 0.01);
    }

    #[test]
    fn threshold_maps_saturate_at_omega_one() {
        let d = Dims::new2(16, 16);
        let maps = agtv_threshold_maps(&step(d, 8, 1.0), 1.0).unwrap();
        assert!(maps.iter().all(|m| m.iter().all(|v| *v == 1.0)));
        let maps = agtv_threshold_maps(&step(d, 8, 1.0), 0.2).unwrap();
        assert_eq!(maps[0][d.index(7, 0, 0)], 0.2);
        assert_eq!(maps[0][d.index(3, 0, 0)], 1.0);
    }

    #[test]
    fn invalid_parameters() {
        let d = Dims::new2(16, 16);
        let v = step(d, 8, 1.0);
        assert!(compute_wtv_weights(&v, 0.0).is_err());
        assert!(compute_dtv_field(&v, 0.1, 1.5).is_err());
        assert!(agtv_threshold_maps(&v, -0.1).is_err());
    }
}
