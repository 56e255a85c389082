//! Centre-out radial trajectories, uniform and density-adapted.
//!
//! k-space is in cycles per voxel, so the Nyquist edge is at radius 0.5. Each
//! spoke is a projection through the centre: it is read out at `+r·d` and at
//! `−r·d` for every radius `r`, so directions only need to cover [0, π) in 2D
//! and the upper half-sphere in 3D. Coil-weighted images are complex, so both
//! sides are measured rather than inferred from conjugate symmetry.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Dims;

pub const K_MAX: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMode {
    #[default]
    Uniform,
    DensityAdapted,
}

impl TrajectoryMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrajectoryMode::Uniform => "uniform",
            TrajectoryMode::DensityAdapted => "density_adapted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(TrajectoryMode::Uniform),
            "density_adapted" => Some(TrajectoryMode::DensityAdapted),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// 2 or 3.
    pub ndim: usize,
    /// Unit spoke directions (z = 0 in 2D).
    pub directions: Vec<[f64; 3]>,
    /// Radii shared by every spoke, nondecreasing, in [0, 0.5].
    pub radii: Vec<f64>,
    /// Density compensation weight of one sample at each radius (identical on
    /// every spoke and both sides).
    pub weights: Vec<f64>,
    pub mode: TrajectoryMode,
    pub k0_fraction: f64,
    /// Index of the last equally spaced sample; `radii.len() - 1` in uniform mode.
    pub linear_end: usize,
}

impl Trajectory {
    pub fn n_spokes(&self) -> usize {
        self.directions.len()
    }

    /// Samples on one side of a spoke.
    pub fn n_samples(&self) -> usize {
        self.radii.len()
    }

    /// Samples per spoke, both sides.
    pub fn readout_len(&self) -> usize {
        2 * self.radii.len()
    }

    pub fn len(&self) -> usize {
        self.n_spokes() * self.readout_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// k-space location of sample `i` on spoke `s`, on the side `sign` (±1).
    #[inline]
    pub fn k(&self, s: usize, sign: f64, i: usize) -> [f64; 3] {
        let d = self.directions[s];
        let r = sign * self.radii[i];
        [d[0] * r, d[1] * r, d[2] * r]
    }

    /// All sample locations: spoke-major, then the `+d` side, then the `−d`
    /// side, each with increasing radius.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for s in 0..self.n_spokes() {
            for sign in [1.0, -1.0] {
                for i in 0..self.n_samples() {
                    out.push(self.k(s, sign, i));
                }
            }
        }
        out
    }

    /// Per-sample density weights in the order of [`points`](Self::points).
    pub fn sample_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for _ in 0..2 * self.n_spokes() {
            out.extend_from_slice(&self.weights);
        }
        out
    }

    /// Rebuild from stored radii and directions, recomputing the weights.
    pub fn from_parts(
        ndim: usize,
        directions: Vec<[f64; 3]>,
        radii: Vec<f64>,
        mode: TrajectoryMode,
        k0_fraction: f64,
    ) -> Result<Self> {
        if ndim != 2 && ndim != 3 {
            return Err(invalid("trajectory dimensionality must be 2 or 3"));
        }
        if radii.len() < 2 || directions.is_empty() {
            return Err(invalid("trajectory needs at least one spoke and two samples"));
        }
        let linear_end = match mode {
            TrajectoryMode::Uniform => radii.len() - 1,
            TrajectoryMode::DensityAdapted => linear_count(radii.len(), k0_fraction, ndim),
        };
        let weights = shell_weights(&radii, linear_end, ndim, directions.len());
        Ok(Self {
            ndim,
            directions,
            radii,
            weights,
            mode,
            k0_fraction,
            linear_end,
        })
    }
}

fn ball_volume_coeff(ndim: usize) -> f64 {
    if ndim == 2 {
        std::f64::consts::PI
    } else {
        4.0 / 3.0 * std::f64::consts::PI
    }
}

/// Number of equal-step intervals below k0 such that the sampling density is
/// continuous across k0.
fn linear_count(n: usize, k0_fraction: f64, ndim: usize) -> usize {
    let d = ndim as f64;
    let k0 = k0_fraction * K_MAX;
    let k0d = k0.powf(d);
    let m = d * k0d * (n - 1) as f64 / (K_MAX.powf(d) - k0d + d * k0d);
    (m.round() as usize).clamp(1, n - 2)
}

/// Voronoi-style shell measure per radius: boundaries are midpoints in r inside
/// the equal-step segment and midpoints in r^d beyond it, so every sample owns
/// an equal shell volume in the density-adapted segment.
fn shell_weights(radii: &[f64], linear_end: usize, ndim: usize, n_spokes: usize) -> Vec<f64> {
    let n = radii.len();
    let d = ndim as i32;
    let mid = |i: usize| -> f64 {
        // boundary between samples i-1 and i
        if i <= linear_end {
            0.5 * (radii[i - 1] + radii[i])
        } else {
            (0.5 * (radii[i - 1].powi(d) + radii[i].powi(d))).powf(1.0 / ndim as f64)
        }
    };
    let mut bounds = Vec::with_capacity(n + 1);
    bounds.push(0.0);
    for i in 1..n {
        bounds.push(mid(i));
    }
    let last = radii[n - 1];
    let prev = radii[n - 2];
    let outer = if n - 1 <= linear_end {
        last + 0.5 * (last - prev)
    } else {
        (last.powi(d) + 0.5 * (last.powi(d) - prev.powi(d))).powf(1.0 / ndim as f64)
    };
    bounds.push(outer);
    // 2·n_spokes half-lines share the ball
    let c = ball_volume_coeff(ndim) / (2 * n_spokes) as f64;
    (0..n)
        .map(|i| c * (bounds[i + 1].powi(d) - bounds[i].powi(d)))
        .collect()
}

fn spoke_directions(n_spokes: usize, ndim: usize) -> Vec<[f64; 3]> {
    if ndim == 2 {
        (0..n_spokes)
            .map(|s| {
                let a = std::f64::consts::PI * s as f64 / n_spokes as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect()
    } else {
        // spherical Fibonacci lattice on z > 0
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n_spokes)
            .map(|s| {
                let z = 1.0 - (s as f64 + 0.5) / n_spokes as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = golden * s as f64;
                [rho * phi.cos(), rho * phi.sin(), z]
            })
            .collect()
    }
}

pub fn make_radial_trajectory(
    n_spokes: usize,
    samples_per_spoke: usize,
    dims: Dims,
    mode: TrajectoryMode,
    k0_fraction: f64,
) -> Result<Trajectory> {
    if n_spokes < 1 {
        return Err(invalid("need at least one spoke"));
    }
    if samples_per_spoke < 8 {
        return Err(invalid("need at least 8 samples per spoke"));
    }
    if !(k0_fraction > 0.0 && k0_fraction <= 0.5) {
        return Err(invalid(format!("k0_fraction {k0_fraction} outside (0, 0.5]")));
    }
    let ndim = dims.ndim();
    let n = samples_per_spoke;
    let radii: Vec<f64> = match mode {
        TrajectoryMode::Uniform => (0..n).map(|i| K_MAX * i as f64 / (n - 1) as f64).collect(),
        TrajectoryMode::DensityAdapted => {
            let m = linear_count(n, k0_fraction, ndim);
            let k0 = k0_fraction * K_MAX;
            let d = ndim as f64;
            let k0d = k0.powf(d);
            let c = (K_MAX.powf(d) - k0d) / (n - 1 - m) as f64;
            (0..n)
                .map(|i| {
                    if i <= m {
                        k0 * i as f64 / m as f64
                    } else if i == n - 1 {
                        K_MAX
                    } else {
                        (k0d + (i - m) as f64 * c).powf(1.0 / d)
                    }
                })
                .collect()
        }
    };
    Trajectory::from_parts(ndim, spoke_directions(n_spokes, ndim), radii, mode, k0_fraction)
}
