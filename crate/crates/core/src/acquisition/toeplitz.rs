//! `A* A` as a convolution. Without density weighting the single-coil normal
//! operator is convolution with the point spread function
//! `T(d) = Σ_k e^{2πi k·d}`, so on a grid padded to twice the size it reduces
//! to two FFTs per coil instead of a gridding round trip.

use num_complex::Complex64;

use super::nufft::{FftNd, GridPlan};
use crate::grid::Dims;
use crate::par;

pub struct ToeplitzNormal {
    dims: Dims,
    pad: [usize; 3],
    kernel_hat: Vec<Complex64>,
    fft: FftNd,
}

impl std::fmt::Debug for ToeplitzNormal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzNormal").field("pad", &self.pad).finish()
    }
}

impl ToeplitzNormal {
    pub fn new(dims: Dims, points: &[[f64; 3]]) -> Self {
        let axes = dims.axes();
        let pad = axes.map(|n| if n == 1 { 1 } else { 2 * n });
        let pdims = Dims::new3(pad[0], pad[1], pad[2]);
        // PSF on the padded grid, centred coordinates d = i - n
        let psf = GridPlan::new(pdims, points).adjoint(&vec![Complex64::new(1.0, 0.0); points.len()]);
        let wrap = |i: usize, a: usize| (i + pad[a] - pad[a] / 2) % pad[a];
        let mut kernel = vec![Complex64::new(0.0, 0.0); pdims.len()];
        for (idx, v) in psf.iter().enumerate() {
            let (i, j, k) = pdims.coords(idx);
            kernel[pdims.index(wrap(i, 0), wrap(j, 1), wrap(k, 2))] = *v;
        }
        // enforce T(-d) = conj T(d) so the operator is exactly self-adjoint
        let neg = |i: usize, a: usize| (pad[a] - i) % pad[a];
        let sym: Vec<Complex64> = (0..pdims.len())
            .map(|idx| {
                let (i, j, k) = pdims.coords(idx);
                let m = kernel[pdims.index(neg(i, 0), neg(j, 1), neg(k, 2))];
                0.5 * (kernel[idx] + m.conj())
            })
            .collect();
        let fft = FftNd::new(pad);
        let mut kernel_hat = sym;
        fft.process(&mut kernel_hat, false);
        let scale = 1.0 / pdims.len() as f64;
        kernel_hat.iter_mut().for_each(|v| *v *= scale);
        Self {
            dims,
            pad,
            kernel_hat,
            fft,
        }
    }

    /// `Σ_c Re(conj(S_c) · T * (S_c u))`.
    pub fn apply(&self, maps: &[Vec<Complex64>], u: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let pdims = Dims::new3(self.pad[0], self.pad[1], self.pad[2]);
        let per_coil: Vec<Vec<f64>> = par::map_slice(maps, |s| {
            let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
            for (idx, (s, v)) in s.iter().zip(u).enumerate() {
                let (i, j, k) = d.coords(idx);
                buf[pdims.index(i, j, k)] = s * v;
            }
            self.fft.process(&mut buf, false);
            for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
                *b *= k;
            }
            self.fft.process(&mut buf, true);
            (0..d.len())
                .map(|idx| {
                    let (i, j, k) = d.coords(idx);
                    (s[idx].conj() * buf[pdims.index(i, j, k)]).re
                })
                .collect()
        });
        let mut out = vec![0.0; d.len()];
        for c in per_coil {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v;
            }
        }
        out
    }
}
