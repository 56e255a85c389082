//! Forward-difference gradient with Neumann boundary and its negative adjoint.

use crate::grid::Dims;

/// Axes with more than one voxel.
pub fn active_axes(dims: Dims) -> usize {
    dims.axes().iter().filter(|n| **n > 1).count()
}

/// Forward differences; the last sample along each axis has zero derivative.
pub fn gradient(u: &[f64], dims: Dims) -> Vec<[f64; 3]> {
    let axes = dims.axes();
    let strides = [1, dims.nx, dims.nx * dims.ny];
    (0..dims.len())
        .map(|idx| {
            let (i, j, k) = dims.coords(idx);
            let c = [i, j, k];
            let mut g = [0.0; 3];
            for a in 0..3 {
                if c[a] + 1 < axes[a] {
                    g[a] = u[idx + strides[a]] - u[idx];
                }
            }
            g
        })
        .collect()
}

/// Discrete divergence with `<gradient(u), p> = -<u, divergence(p)>`.
pub fn divergence(p: &[[f64; 3]], dims: Dims) -> Vec<f64> {
    let axes = dims.axes();
    let strides = [1, dims.nx, dims.nx * dims.ny];
    (0..dims.len())
        .map(|idx| {
            let (i, j, k) = dims.coords(idx);
            let c = [i, j, k];
            let mut d = 0.0;
            for a in 0..3 {
                if axes[a] == 1 {
                    continue;
                }
                if c[a] + 1 < axes[a] {
                    d += p[idx][a];
                }
                if c[a] > 0 {
                    d -= p[idx - strides[a]][a];
                }
            }
            d
        })
        .collect()
}
