//! Kaiser-Bessel gridding on an oversampled Cartesian grid.
//!
//! Forward (image → non-uniform k) deapodizes, zero-pads, FFTs and
//! interpolates; the adjoint spreads, inverse-FFTs, crops and deapodizes.
//! Each stage is the exact adjoint of its counterpart, so the pair is
//! adjoint to rounding error.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Dims;
use crate::par;

pub const KERNEL_WIDTH: usize = 6;
// footprint origin below assumes an even width
const _: () = assert!(KERNEL_WIDTH % 2 == 0);
pub const OVERSAMPLING: f64 = 1.5;

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Shape parameter for a given width and oversampling factor.
pub fn kb_beta(width: usize, sigma: f64) -> f64 {
    let w = width as f64;
    std::f64::consts::PI * ((w * w / (sigma * sigma)) * (sigma - 0.5).powi(2) - 0.8).sqrt()
}

/// Kernel value at offset `t` grid cells from the sample.
#[inline]
pub fn kb_kernel(t: f64, width: usize, beta: f64) -> f64 {
    let w = width as f64;
    let u = 2.0 * t / w;
    if u.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - u * u).sqrt())
}

/// Continuous Fourier transform of the kernel at frequency `nu` (cycles per grid cell).
pub fn kb_transform(nu: f64, width: usize, beta: f64) -> f64 {
    let w = width as f64;
    let a = beta * beta - (std::f64::consts::PI * w * nu).powi(2);
    if a > 0.0 {
        let s = a.sqrt();
        w * s.sinh() / s
    } else if a < 0.0 {
        let s = (-a).sqrt();
        w * s.sin() / s
    } else {
        w
    }
}

/// Separable interpolation footprint of one sample: per-axis start index on the
/// oversampled grid (may be negative, wraps) and kernel values.
#[derive(Clone, Debug)]
struct Footprint {
    start: [i64; 3],
    weights: [[f64; KERNEL_WIDTH]; 3],
}

/// Unnormalised separable FFT over an x-fastest 1D/2D/3D buffer.
pub struct FftNd {
    grid: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl FftNd {
    pub fn new(grid: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd: grid.map(|n| planner.plan_fft_forward(n)),
            inv: grid.map(|n| planner.plan_fft_inverse(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.grid[0] * self.grid[1] * self.grid[2]
    }

    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let [gx, gy, gz] = self.grid;
        // x lines are contiguous
        par::for_each_chunk_mut(buf, gx, |_, line| plans[0].process(line));
        for axis in 1..3 {
            let n = self.grid[axis];
            if n == 1 {
                continue;
            }
            let (stride, count) = if axis == 1 { (gx, gx * gz) } else { (gx * gy, gx * gy) };
            let base = |l: usize| if axis == 1 { (l % gx) + (l / gx) * gx * gy } else { l };
            let lines: Vec<Vec<Complex64>> = par::map_range(count, |l| {
                let b = base(l);
                let mut line: Vec<Complex64> = (0..n).map(|t| buf[b + t * stride]).collect();
                plans[axis].process(&mut line);
                line
            });
            for (l, line) in lines.into_iter().enumerate() {
                let b = base(l);
                for (t, v) in line.into_iter().enumerate() {
                    buf[b + t * stride] = v;
                }
            }
        }
    }
}

pub struct GridPlan {
    dims: Dims,
    grid: [usize; 3],
    ndim: usize,
    deapod: Vec<f64>,
    footprints: Vec<Footprint>,
    fft: FftNd,
}

impl std::fmt::Debug for GridPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridPlan")
            .field("dims", &self.dims)
            .field("grid", &self.grid)
            .field("samples", &self.footprints.len())
            .finish()
    }
}

fn oversampled(n: usize) -> usize {
    if n == 1 {
        return 1;
    }
    let g = (n as f64 * OVERSAMPLING).ceil() as usize;
    g + (g % 2)
}

#[inline]
fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

impl GridPlan {
    pub fn new(dims: Dims, points: &[[f64; 3]]) -> Self {
        let axes = dims.axes();
        let grid = [oversampled(axes[0]), oversampled(axes[1]), oversampled(axes[2])];
        let ndim = dims.ndim();
        let beta = kb_beta(KERNEL_WIDTH, OVERSAMPLING);
        let deapod_axis: Vec<Vec<f64>> = (0..3)
            .map(|a| {
                (0..axes[a])
                    .map(|i| {
                        if axes[a] == 1 {
                            return 1.0;
                        }
                        let x = i as f64 - (axes[a] / 2) as f64;
                        kb_transform(x / grid[a] as f64, KERNEL_WIDTH, beta)
                    })
                    .collect()
            })
            .collect();
        let deapod = (0..dims.len())
            .map(|idx| {
                let (i, j, k) = dims.coords(idx);
                deapod_axis[0][i] * deapod_axis[1][j] * deapod_axis[2][k]
            })
            .collect();
        let footprints = points
            .iter()
            .map(|p| {
                let mut start = [0i64; 3];
                let mut weights = [[0.0; KERNEL_WIDTH]; 3];
                for a in 0..3 {
                    if a >= ndim {
                        weights[a][0] = 1.0;
                        continue;
                    }
                    let u = p[a] * grid[a] as f64;
                    let s = u.floor() as i64 - (KERNEL_WIDTH as i64 / 2) + 1;
                    start[a] = s;
                    for (t, w) in weights[a].iter_mut().enumerate() {
                        *w = kb_kernel(u - (s + t as i64) as f64, KERNEL_WIDTH, beta);
                    }
                }
                Footprint { start, weights }
            })
            .collect();
        Self {
            dims,
            grid,
            ndim,
            deapod,
            footprints,
            fft: FftNd::new(grid),
        }
    }

    pub fn n_points(&self) -> usize {
        self.footprints.len()
    }

    fn grid_len(&self) -> usize {
        self.grid[0] * self.grid[1] * self.grid[2]
    }

    #[inline]
    fn gidx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.grid[0] * (j + self.grid[1] * k)
    }

    fn fft(&self, buf: &mut [Complex64], inverse: bool) {
        self.fft.process(buf, inverse);
    }

    /// Type-2 transform: y(k) ≈ Σ_x img(x) e^{-2πi k·x}.
    pub fn forward(&self, img: &[Complex64]) -> Vec<Complex64> {
        let d = self.dims;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        for (idx, v) in img.iter().enumerate() {
            let (i, j, k) = d.coords(idx);
            let gi = wrap(i as i64 - (d.nx / 2) as i64, self.grid[0]);
            let gj = wrap(j as i64 - (d.ny / 2) as i64, self.grid[1]);
            let gk = wrap(k as i64 - (d.nz / 2) as i64, self.grid[2]);
            buf[self.gidx(gi, gj, gk)] = v / self.deapod[idx];
        }
        self.fft(&mut buf, false);
        let kz_w = if self.ndim == 3 { KERNEL_WIDTH } else { 1 };
        par::map_slice(&self.footprints, |fp| {
            let mut acc = Complex64::new(0.0, 0.0);
            for tz in 0..kz_w {
                let gk = wrap(fp.start[2] + tz as i64, self.grid[2]);
                let wz = fp.weights[2][tz];
                for ty in 0..KERNEL_WIDTH {
                    let gj = wrap(fp.start[1] + ty as i64, self.grid[1]);
                    let wyz = wz * fp.weights[1][ty];
                    for tx in 0..KERNEL_WIDTH {
                        let gi = wrap(fp.start[0] + tx as i64, self.grid[0]);
                        acc += buf[self.gidx(gi, gj, gk)] * (wyz * fp.weights[0][tx]);
                    }
                }
            }
            acc
        })
    }

    /// Type-1 transform, exact adjoint of [`forward`](Self::forward):
    /// img(x) ≈ Σ_k y(k) e^{+2πi k·x}.
    pub fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(y.len(), self.footprints.len());
        let d = self.dims;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        let kz_w = if self.ndim == 3 { KERNEL_WIDTH } else { 1 };
        // sequential spreading keeps the summation order fixed
        for (fp, v) in self.footprints.iter().zip(y) {
            for tz in 0..kz_w {
                let gk = wrap(fp.start[2] + tz as i64, self.grid[2]);
                let wz = fp.weights[2][tz];
                for ty in 0..KERNEL_WIDTH {
                    let gj = wrap(fp.start[1] + ty as i64, self.grid[1]);
                    let wyz = wz * fp.weights[1][ty];
                    for tx in 0..KERNEL_WIDTH {
                        let gi = wrap(fp.start[0] + tx as i64, self.grid[0]);
                        let g = self.gidx(gi, gj, gk);
                        buf[g] += v * (wyz * fp.weights[0][tx]);
                    }
                }
            }
        }
        self.fft(&mut buf, true);
        (0..d.len())
            .map(|idx| {
                let (i, j, k) = d.coords(idx);
                let gi = wrap(i as i64 - (d.nx / 2) as i64, self.grid[0]);
                let gj = wrap(j as i64 - (d.ny / 2) as i64, self.grid[1]);
                let gk = wrap(k as i64 - (d.nz / 2) as i64, self.grid[2]);
                buf[self.gidx(gi, gj, gk)] / self.deapod[idx]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i0_known_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-11);
    }

    #[test]
    fn kernel_transform_matches_quadrature() {
        let beta = kb_beta(KERNEL_WIDTH, OVERSAMPLING);
        let n = 20_000;
        let h = KERNEL_WIDTH as f64 / n as f64;
        for nu in [0.0, 0.1, 0.25, 0.33] {
            // midpoint rule over [-W/2, W/2]
            let q: f64 = (0..n)
                .map(|i| {
                    let t = -(KERNEL_WIDTH as f64) / 2.0 + (i as f64 + 0.5) * h;
                    kb_kernel(t, KERNEL_WIDTH, beta) * (std::f64::consts::TAU * nu * t).cos() * h
                })
                .sum();
            let a = kb_transform(nu, KERNEL_WIDTH, beta);
            assert!(((q - a) / a).abs() < 1e-6, "nu {nu}: {q} vs {a}");
        }
    }
}
