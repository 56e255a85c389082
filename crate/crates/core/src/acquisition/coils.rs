//! Synthetic receive-coil sensitivities.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::Dims;

#[derive(Clone, Debug, PartialEq)]
pub struct CoilSensitivities {
    pub dims: Dims,
    /// One complex map per coil, grid order.
    pub maps: Vec<Vec<Complex64>>,
}

impl CoilSensitivities {
    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    /// Single coil with unit sensitivity everywhere.
    pub fn unit(dims: Dims) -> Self {
        Self {
            dims,
            maps: vec![vec![Complex64::new(1.0, 0.0); dims.len()]],
        }
    }

    /// Σ_c |S_c|² per voxel.
    pub fn sum_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        for m in &self.maps {
            for (o, s) in out.iter_mut().zip(m) {
                *o += s.norm_sqr();
            }
        }
        out
    }

    pub fn rss(&self) -> Vec<f64> {
        self.sum_sq().into_iter().map(f64::sqrt).collect()
    }
}

/// Gaussian-lobed coils centred on a ring just outside the field of view, with
/// slow linear phase ramps. Deterministic per seed.
pub fn make_coils(dims: Dims, n_coils: usize, seed: u64) -> Result<CoilSensitivities> {
    if n_coils < 1 {
        return Err(invalid("need at least one coil"));
    }
    if n_coils == 1 {
        return Ok(CoilSensitivities::unit(dims));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = dims.nx.min(dims.ny) as f64;
    let ring = 0.55 * l;
    let width = 0.6 * l;
    let maps = (0..n_coils)
        .map(|c| {
            let jitter: f64 = rng.random_range(-0.2..0.2);
            let a = std::f64::consts::TAU * (c as f64 + jitter) / n_coils as f64;
            let center = [ring * a.cos(), ring * a.sin(), 0.0];
            let phase0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let gx: f64 = rng.random_range(-1.0..1.0) * std::f64::consts::PI / l;
            let gy: f64 = rng.random_range(-1.0..1.0) * std::f64::consts::PI / l;
            (0..dims.len())
                .map(|idx| {
                    let x = dims.centered(idx);
                    let d2 = (x[0] - center[0]).powi(2)
                        + (x[1] - center[1]).powi(2)
                        + (x[2] - center[2]).powi(2);
                    let mag = (-d2 / (2.0 * width * width)).exp();
                    Complex64::from_polar(mag, phase0 + gx * x[0] + gy * x[1])
                })
                .collect()
        })
        .collect();
    Ok(CoilSensitivities { dims, maps })
}
