//! Point spread function of a sampling pattern: the density-weighted adjoint
//! of the forward model applied to a centred unit impulse, evaluated by direct
//! summation.

use num_complex::Complex64;

use crate::acquisition::{CoilSensitivities, EncodingOperator, EvalPath, Trajectory};
use crate::error::Result;
use crate::grid::{Dims, ImageVolume, Units};

#[derive(Clone, Debug)]
pub struct PsfResult {
    /// Normalised to 1 at the impulse location.
    pub psf: ImageVolume,
    /// Full width at half maximum in voxels along x, y, z (z is 0 in 2D).
    pub fwhm: [f64; 3],
    /// False if the largest magnitude is not at the impulse location.
    pub peak_at_center: bool,
}

/// Distance from the peak to the first half-maximum crossing walking in
/// direction `step`, by linear interpolation between grid samples. `None` if
/// the profile never drops below one half.
fn half_width(profile: &[f64], centre: usize, step: i64) -> Option<f64> {
    let mut prev = profile[centre];
    let mut pos = centre as i64;
    loop {
        let next = pos + step;
        if next < 0 || next >= profile.len() as i64 {
            return None;
        }
        let v = profile[next as usize];
        if v <= 0.5 {
            let d = (pos - centre as i64).abs() as f64;
            return Some(d + (prev - 0.5) / (prev - v));
        }
        prev = v;
        pos = next;
    }
}

pub fn psf_fwhm(traj: &Trajectory, dims: Dims) -> Result<PsfResult> {
    let coils = CoilSensitivities::unit(dims);
    let op = EncodingOperator::new(dims, traj, &coils, EvalPath::Direct)?;
    let mut impulse = vec![0.0; dims.len()];
    let c = dims.center_index();
    impulse[c] = 1.0;
    let y: Vec<Complex64> = op.forward(&impulse);
    let raw = op.weighted_adjoint(&y);
    let peak = raw[c];
    let data: Vec<f64> = raw.iter().map(|v| v / peak).collect();
    let peak_at_center = data.iter().enumerate().all(|(i, v)| i == c || v.abs() < 1.0);
    let (ci, cj, ck) = dims.coords(c);
    let axes = dims.axes();
    let mut fwhm = [0.0; 3];
    for a in 0..dims.ndim() {
        let profile: Vec<f64> = (0..axes[a])
            .map(|t| {
                let mut q = [ci, cj, ck];
                q[a] = t;
                data[dims.index(q[0], q[1], q[2])]
            })
            .collect();
        let centre = [ci, cj, ck][a];
        fwhm[a] = match (half_width(&profile, centre, -1), half_width(&profile, centre, 1)) {
            (Some(l), Some(r)) => l + r,
            _ => f64::INFINITY,
        };
    }
    Ok(PsfResult {
        psf: ImageVolume {
            dims,
            voxel_size: [1.0; 3],
            units: Units::Dimensionless,
            data,
        },
        fwhm,
        peak_at_center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{make_radial_trajectory, TrajectoryMode};

    #[test]
    fn half_width_interpolates() {
        let p = [0.0, 0.25, 1.0, 0.75, 0.25];
        assert_eq!(half_width(&p, 2, -1), Some(2.0 / 3.0));
        assert_eq!(half_width(&p, 2, 1), Some(1.5));
        assert_eq!(half_width(&[1.0, 0.9], 0, 1), None);
    }

    #[test]
    fn peak_is_normalised() {
        let dims = Dims::new2(24, 24);
        let t = make_radial_trajectory(20, 16, dims, TrajectoryMode::Uniform, 0.2).unwrap();
        let r = psf_fwhm(&t, dims).unwrap();
        assert_eq!(r.psf.data[dims.center_index()], 1.0);
        assert!(r.peak_at_center);
    }

    #[test]
    fn nyquist_uniform_radial_is_about_one_voxel() {
        let dims = Dims::new2(32, 32);
        let spokes = (std::f64::consts::FRAC_PI_2 * 32.0).ceil() as usize;
        let t = make_radial_trajectory(spokes, 32, dims, TrajectoryMode::Uniform, 0.2).unwrap();
        let r = psf_fwhm(&t, dims).unwrap();
        for a in 0..2 {
            assert!((r.fwhm[a] - 1.0).abs() <= 0.2, "axis {a}: {}", r.fwhm[a]);
        }
    }
}
