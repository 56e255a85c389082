//! Multi-coil non-uniform Fourier encoding `A: ℝ^N → ℂ^M` and its adjoint.
//!
//! `(A u)_{c,k} = Σ_x S_c(x) u(x) e^{-2πi k·x}` with `x` measured in voxels from
//! the grid centre. Samples are ordered coil-major, then spoke, then side of
//! the spoke, then radius. The adjoint of a map from real images takes the
//! real part:
//! `A* y = Re Σ_c conj(S_c) Σ_k y_{c,k} e^{+2πi k·x}`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::coils::CoilSensitivities;
use super::nufft::GridPlan;
use super::toeplitz::ToeplitzNormal;
use super::trajectory::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexVolume, Dims, ImageVolume};
use crate::par;

/// How the non-uniform transform is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalPath {
    /// Exact direct summation; O(N·M), for small grids and as a reference.
    Direct,
    /// Kaiser-Bessel gridding with an oversampled FFT.
    Gridded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    pub dims: Dims,
    /// Voxel size (mm) of the image grid the data encodes.
    pub voxel_size: [f64; 3],
    pub n_coils: usize,
    /// Coil-major, then spoke, then side, then radius.
    pub samples: Vec<Complex64>,
    pub trajectory: Trajectory,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl KSpaceData {
    pub fn n_spokes(&self) -> usize {
        self.trajectory.n_spokes()
    }

    pub fn n_samples(&self) -> usize {
        self.trajectory.n_samples()
    }

    pub fn per_coil(&self) -> usize {
        self.trajectory.len()
    }

    pub fn coil(&self, c: usize) -> &[Complex64] {
        let m = self.per_coil();
        &self.samples[c * m..(c + 1) * m]
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.samples.len() != self.n_coils * self.per_coil() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {} coils × {} spokes × 2 sides × {} samples",
                self.samples.len(),
                self.n_coils,
                self.n_spokes(),
                self.n_samples()
            )));
        }
        Ok(())
    }
}

enum Transform {
    Direct { points: Vec<[f64; 3]> },
    Gridded(GridPlan),
}

/// The encoding operator for one (trajectory, coils, grid) combination.
pub struct EncodingOperator {
    pub dims: Dims,
    pub trajectory: Trajectory,
    pub coils: CoilSensitivities,
    transform: Transform,
    sample_weights: Vec<f64>,
    sum_sq: Vec<f64>,
    toeplitz: Option<ToeplitzNormal>,
}

impl std::fmt::Debug for EncodingOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncodingOperator")
            .field("dims", &self.dims)
            .field("coils", &self.coils.n_coils())
            .field("samples", &self.trajectory.len())
            .finish()
    }
}

fn direct_forward(dims: Dims, points: &[[f64; 3]], img: &[Complex64]) -> Vec<Complex64> {
    let axes = dims.axes();
    par::map_slice(points, |k| {
        // separable phase factors, fixed voxel order
        let factors: Vec<Vec<Complex64>> = (0..3)
            .map(|a| {
                (0..axes[a])
                    .map(|i| {
                        let x = i as f64 - (axes[a] / 2) as f64;
                        Complex64::from_polar(1.0, -std::f64::consts::TAU * k[a] * x)
                    })
                    .collect()
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, v) in img.iter().enumerate() {
            let (i, j, l) = dims.coords(idx);
            acc += v * factors[0][i] * factors[1][j] * factors[2][l];
        }
        acc
    })
}

fn direct_adjoint(dims: Dims, points: &[[f64; 3]], y: &[Complex64]) -> Vec<Complex64> {
    par::map_range(dims.len(), |idx| {
        let x = dims.centered(idx);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, v) in points.iter().zip(y) {
            let ph = std::f64::consts::TAU * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
            acc += v * Complex64::from_polar(1.0, ph);
        }
        acc
    })
}

impl EncodingOperator {
    pub fn new(
        dims: Dims,
        trajectory: &Trajectory,
        coils: &CoilSensitivities,
        path: EvalPath,
    ) -> Result<Self> {
        coils.dims.check_same(&dims, "coil sensitivities vs image grid")?;
        if trajectory.ndim != dims.ndim() {
            return Err(Error::DimensionMismatch(format!(
                "{}D trajectory on a {}D grid",
                trajectory.ndim,
                dims.ndim()
            )));
        }
        let points = trajectory.points();
        let (transform, toeplitz) = match path {
            EvalPath::Direct => (Transform::Direct { points }, None),
            EvalPath::Gridded => {
                let t = ToeplitzNormal::new(dims, &points);
                (Transform::Gridded(GridPlan::new(dims, &points)), Some(t))
            }
        };
        Ok(Self {
            dims,
            trajectory: trajectory.clone(),
            coils: coils.clone(),
            transform,
            sample_weights: trajectory.sample_weights(),
            sum_sq: coils.sum_sq(),
            toeplitz,
        })
    }

    pub fn n_coils(&self) -> usize {
        self.coils.n_coils()
    }

    /// Number of complex measurements M.
    pub fn n_measurements(&self) -> usize {
        self.n_coils() * self.trajectory.len()
    }

    fn nuft(&self, img: &[Complex64]) -> Vec<Complex64> {
        match &self.transform {
            Transform::Direct { points } => direct_forward(self.dims, points, img),
            Transform::Gridded(plan) => plan.forward(img),
        }
    }

    fn nuft_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        match &self.transform {
            Transform::Direct { points } => direct_adjoint(self.dims, points, y),
            Transform::Gridded(plan) => plan.adjoint(y),
        }
    }

    /// `A u` for a real image.
    pub fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        let per_coil: Vec<Vec<Complex64>> = par::map_slice(&self.coils.maps, |s| {
            let img: Vec<Complex64> = s.iter().zip(u).map(|(s, v)| s * v).collect();
            self.nuft(&img)
        });
        per_coil.concat()
    }

    /// Per-coil images `F^H (W) y_c`, without sensitivity weighting.
    pub fn coil_images(&self, y: &[Complex64], weighted: bool) -> Vec<Vec<Complex64>> {
        let m = self.trajectory.len();
        par::map_range(self.n_coils(), |c| {
            let yc = &y[c * m..(c + 1) * m];
            if weighted {
                let wy: Vec<Complex64> =
                    yc.iter().zip(&self.sample_weights).map(|(v, w)| v * w).collect();
                self.nuft_adjoint(&wy)
            } else {
                self.nuft_adjoint(yc)
            }
        })
    }

    /// Exact adjoint `A* y`.
    pub fn adjoint(&self, y: &[Complex64]) -> Vec<f64> {
        self.combine(&self.coil_images(y, false))
    }

    fn combine(&self, imgs: &[Vec<Complex64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        for (img, s) in imgs.iter().zip(&self.coils.maps) {
            for ((o, v), s) in out.iter_mut().zip(img).zip(s) {
                *o += (s.conj() * v).re;
            }
        }
        out
    }

    /// Density-compensated regridding reconstruction, normalised by Σ_c |S_c|²
    /// so that full sampling of a smooth object returns the object.
    pub fn weighted_adjoint(&self, y: &[Complex64]) -> Vec<f64> {
        let mut out = self.combine(&self.coil_images(y, true));
        for (o, s) in out.iter_mut().zip(&self.sum_sq) {
            *o = if *s > 0.0 { *o / s } else { 0.0 };
        }
        out
    }

    /// `A* A u`. The gridded path convolves with the precomputed point spread
    /// function instead of gridding there and back.
    pub fn normal(&self, u: &[f64]) -> Vec<f64> {
        match &self.toeplitz {
            Some(t) => t.apply(&self.coils.maps, u),
            None => self.adjoint(&self.forward(u)),
        }
    }

    /// Mean eigenvalue of `A* A`, i.e. trace / N = (samples per coil) · mean Σ_c |S_c|².
    pub fn mean_eigenvalue(&self) -> f64 {
        let n = self.dims.len() as f64;
        self.trajectory.len() as f64 * self.sum_sq.iter().sum::<f64>() / n
    }

    /// Largest eigenvalue of `A* A` by power iteration from a constant start.
    pub fn norm_sq_estimate(&self, iters: usize) -> f64 {
        let n = self.dims.len();
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..iters {
            let w = self.normal(&v);
            let nw = crate::grid::norm2(&w);
            if nw == 0.0 {
                return 0.0;
            }
            lambda = nw;
            v = w.into_iter().map(|x| x / nw).collect();
        }
        lambda
    }
}

/// Simulate noiseless multi-coil k-space of `image`.
pub fn forward_model(
    image: &ImageVolume,
    traj: &Trajectory,
    coils: &CoilSensitivities,
    path: EvalPath,
) -> Result<KSpaceData> {
    if image.data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("image contains non-finite values"));
    }
    let op = EncodingOperator::new(image.dims, traj, coils, path)?;
    Ok(KSpaceData {
        dims: image.dims,
        voxel_size: image.voxel_size,
        n_coils: coils.n_coils(),
        samples: op.forward(&image.data),
        trajectory: traj.clone(),
        noise_sigma: 0.0,
        seed: 0,
    })
}

fn check_data(data: &KSpaceData, traj: &Trajectory, coils: &CoilSensitivities) -> Result<()> {
    data.check_shape()?;
    if data.trajectory.n_spokes() != traj.n_spokes() || data.trajectory.n_samples() != traj.n_samples() {
        return Err(Error::DimensionMismatch("k-space shape does not match trajectory".into()));
    }
    if data.n_coils != coils.n_coils() {
        return Err(Error::DimensionMismatch(format!(
            "{} coils of data, {} sensitivity maps",
            data.n_coils,
            coils.n_coils()
        )));
    }
    coils.dims.check_same(&data.dims, "coil sensitivities vs k-space grid")
}

/// Combined real image: exact adjoint `A* y` when `apply_density_weights` is
/// false, density-compensated regridding reconstruction when true.
pub fn adjoint_model(
    data: &KSpaceData,
    traj: &Trajectory,
    coils: &CoilSensitivities,
    apply_density_weights: bool,
    path: EvalPath,
) -> Result<ImageVolume> {
    check_data(data, traj, coils)?;
    let op = EncodingOperator::new(data.dims, traj, coils, path)?;
    let values = if apply_density_weights {
        op.weighted_adjoint(&data.samples)
    } else {
        op.adjoint(&data.samples)
    };
    Ok(ImageVolume {
        dims: data.dims,
        voxel_size: data.voxel_size,
        units: crate::grid::Units::Signal,
        data: values,
    })
}

/// Per-coil images `F^H (W) y_c`, as the adaptive combination expects them.
pub fn coil_images(
    data: &KSpaceData,
    traj: &Trajectory,
    coils: &CoilSensitivities,
    apply_density_weights: bool,
    path: EvalPath,
) -> Result<Vec<ComplexVolume>> {
    check_data(data, traj, coils)?;
    let op = EncodingOperator::new(data.dims, traj, coils, path)?;
    Ok(op
        .coil_images(&data.samples, apply_density_weights)
        .into_iter()
        .map(|v| ComplexVolume {
            dims: data.dims,
            voxel_size: data.voxel_size,
            data: v,
        })
        .collect())
}

/// Add circularly symmetric complex Gaussian noise; real and imaginary parts
/// each have standard deviation `sigma`.
pub fn add_noise(data: &KSpaceData, sigma: f64, seed: u64) -> Result<KSpaceData> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("noise sigma must be finite and >= 0"));
    }
    let mut out = data.clone();
    out.noise_sigma = sigma;
    out.seed = seed;
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    for s in out.samples.iter_mut() {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *s += Complex64::new(re, im);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{make_coils, make_radial_trajectory, TrajectoryMode};
    use crate::grid::Units;
    use rand::Rng;

    fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    fn cnorm(a: &[Complex64]) -> f64 {
        a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    fn smooth_blob(dims: Dims) -> ImageVolume {
        let data = (0..dims.len())
            .map(|idx| {
                let x = dims.centered(idx);
                let r2 = (x[0] / 9.0).powi(2) + (x[1] / 6.0).powi(2);
                10.0 * (-r2).exp() + 4.0 * (-((x[0] - 5.0).powi(2) + (x[1] + 4.0).powi(2)) / 12.0).exp()
            })
            .collect();
        ImageVolume::from_data(dims, [1.0; 3], Units::Signal, data).unwrap()
    }

    fn random_pair(op: &EncodingOperator, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<Complex64>) {
        let u: Vec<f64> = (0..op.dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<Complex64> = (0..op.n_measurements())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        (u, y)
    }

    fn adjoint_gap(op: &EncodingOperator, u: &[f64], y: &[Complex64]) -> f64 {
        let au = op.forward(u);
        // real inner product on ℂ^M matches the real image space
        let lhs = cdot(&au, y).re;
        let rhs = crate::grid::dot(u, &op.adjoint(y));
        (lhs - rhs).abs() / (cnorm(&au) * cnorm(y))
    }

    #[test]
    fn adjoint_identity_direct() {
        let dims = Dims::new2(16, 16);
        let traj = make_radial_trajectory(12, 16, dims, TrajectoryMode::DensityAdapted, 0.2).unwrap();
        let coils = make_coils(dims, 3, 4).unwrap();
        let op = EncodingOperator::new(dims, &traj, &coils, EvalPath::Direct).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (u, y) = random_pair(&op, &mut rng);
            assert!(adjoint_gap(&op, &u, &y) <= 1e-10);
        }
    }

    #[test]
    fn adjoint_identity_gridded() {
        for dims in [Dims::new2(20, 16), Dims::new3(10, 12, 8)] {
            let traj = make_radial_trajectory(15, 12, dims, TrajectoryMode::Uniform, 0.2).unwrap();
            let coils = make_coils(dims, 2, 9).unwrap();
            let op = EncodingOperator::new(dims, &traj, &coils, EvalPath::Gridded).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..5 {
                let (u, y) = random_pair(&op, &mut rng);
                // spreading and interpolation are exact transposes
                assert!(adjoint_gap(&op, &u, &y) <= 1e-10);
            }
        }
    }

    #[test]
    fn gridded_matches_direct() {
        for (dims, spokes) in [(Dims::new2(32, 32), 48), (Dims::new3(12, 12, 12), 60)] {
            let traj =
                make_radial_trajectory(spokes, 24, dims, TrajectoryMode::DensityAdapted, 0.2).unwrap();
            let coils = make_coils(dims, 4, 1).unwrap();
            let img = smooth_blob(dims);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let noisy: Vec<f64> = img.data.iter().map(|v| v + rng.random_range(0.0..3.0)).collect();
            let exact = EncodingOperator::new(dims, &traj, &coils, EvalPath::Direct).unwrap();
            let fast = EncodingOperator::new(dims, &traj, &coils, EvalPath::Gridded).unwrap();
            let a = exact.forward(&noisy);
            let b = fast.forward(&noisy);
            let diff: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let rel = cnorm(&diff) / cnorm(&a);
            assert!(rel <= 1e-3, "{dims}: forward {rel}");
            let ya = exact.adjoint(&a);
            let yb = fast.adjoint(&a);
            let d: Vec<f64> = ya.iter().zip(&yb).map(|(x, y)| x - y).collect();
            let rel = crate::grid::norm2(&d) / crate::grid::norm2(&ya);
            assert!(rel <= 1e-3, "{dims}: adjoint {rel}");
        }
    }

    #[test]
    fn convolution_normal_matches_direct() {
        for (dims, spokes) in [(Dims::new2(24, 20), 40), (Dims::new3(10, 10, 8), 50)] {
            let traj = make_radial_trajectory(spokes, 16, dims, TrajectoryMode::Uniform, 0.2).unwrap();
            let coils = make_coils(dims, 3, 2).unwrap();
            let exact = EncodingOperator::new(dims, &traj, &coils, EvalPath::Direct).unwrap();
            let fast = EncodingOperator::new(dims, &traj, &coils, EvalPath::Gridded).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let u: Vec<f64> = (0..dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = exact.normal(&u);
            let b = fast.normal(&u);
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let rel = crate::grid::norm2(&d) / crate::grid::norm2(&a);
            assert!(rel <= 1e-3, "{dims}: {rel}");
            let lhs: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
            let rhs: f64 = u.iter().zip(fast.normal(&v)).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "{dims}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn centered_impulse_has_constant_modulus() {
        let dims = Dims::new2(16, 16);
        let traj = make_radial_trajectory(7, 12, dims, TrajectoryMode::Uniform, 0.2).unwrap();
        let mut img = ImageVolume::zeros(dims, [1.0; 3], Units::Signal);
        img.data[dims.center_index()] = 1.0;
        let d = forward_model(&img, &traj, &CoilSensitivities::unit(dims), EvalPath::Direct).unwrap();
        assert!(d.samples.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        let z = forward_model(
            &ImageVolume::zeros(dims, [1.0; 3], Units::Signal),
            &traj,
            &CoilSensitivities::unit(dims),
            EvalPath::Gridded,
        )
        .unwrap();
        assert!(z.samples.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        let back = adjoint_model(&z, &traj, &CoilSensitivities::unit(dims), true, EvalPath::Gridded).unwrap();
        assert!(back.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linearity_direct() {
        let dims = Dims::new2(12, 12);
        let traj = make_radial_trajectory(9, 10, dims, TrajectoryMode::Uniform, 0.2).unwrap();
        let coils = make_coils(dims, 2, 2).unwrap();
        let op = EncodingOperator::new(dims, &traj, &coils, EvalPath::Direct).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u: Vec<f64> = (0..dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = 2.7;
        let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + y).collect();
        let lhs = op.forward(&comb);
        let fu = op.forward(&u);
        let fv = op.forward(&v);
        let rhs: Vec<Complex64> = fu.iter().zip(&fv).map(|(x, y)| x * a + y).collect();
        let diff: Vec<Complex64> = lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect();
        assert!(cnorm(&diff) <= 1e-12 * cnorm(&lhs));
    }

    fn nyquist_spokes(n: usize) -> usize {
        (std::f64::consts::FRAC_PI_2 * n as f64).ceil() as usize
    }

    #[test]
    fn weighted_adjoint_recovers_smooth_object() {
        let dims = Dims::new2(32, 32);
        let traj = make_radial_trajectory(nyquist_spokes(32), 33, dims, TrajectoryMode::Uniform, 0.2)
            .unwrap();
        let img = smooth_blob(dims);
        for coils in [CoilSensitivities::unit(dims), make_coils(dims, 4, 6).unwrap()] {
            let d = forward_model(&img, &traj, &coils, EvalPath::Direct).unwrap();
            let rec = adjoint_model(&d, &traj, &coils, true, EvalPath::Direct).unwrap();
            let rmse = (img
                .data
                .iter()
                .zip(&rec.data)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / dims.len() as f64)
                .sqrt();
            assert!(rmse <= 0.05 * (img.max() - img.min()), "rmse {rmse}");
        }
    }

    #[test]
    fn parseval_with_density_weights() {
        let dims = Dims::new2(32, 32);
        let traj = make_radial_trajectory(nyquist_spokes(32), 33, dims, TrajectoryMode::Uniform, 0.2)
            .unwrap();
        let img = smooth_blob(dims);
        let d = forward_model(&img, &traj, &CoilSensitivities::unit(dims), EvalPath::Direct).unwrap();
        let k_energy: f64 = d
            .samples
            .iter()
            .zip(traj.sample_weights())
            .map(|(v, w)| v.norm_sqr() * w)
            .sum();
        let i_energy: f64 = img.data.iter().map(|v| v * v).sum();
        assert!(((k_energy - i_energy) / i_energy).abs() <= 0.10, "{k_energy} vs {i_energy}");
    }

    #[test]
    fn density_weights_match_local_sample_density() {
        for mode in [TrajectoryMode::Uniform, TrajectoryMode::DensityAdapted] {
            for dims in [Dims::new2(64, 64), Dims::new3(32, 32, 32)] {
                let n = 96;
                let traj = make_radial_trajectory(40, n, dims, mode, 0.3).unwrap();
                let r = &traj.radii;
                let d = traj.ndim as i32;
                let step0 = r[1] - r[0];
                // samples per unit k-volume from nearest-neighbour spacing along the spoke
                let products: Vec<f64> = (1..n - 1)
                    .filter(|&i| r[i] >= 4.0 * step0)
                    .filter(|&i| i + 1 != traj.linear_end && i != traj.linear_end && i != traj.linear_end + 1)
                    .map(|i| {
                        let dr = 0.5 * (r[i + 1] - r[i - 1]);
                        let shell = if d == 2 {
                            std::f64::consts::PI * r[i] * dr
                        } else {
                            2.0 * std::f64::consts::PI * r[i] * r[i] * dr
                        };
                        let density = 2.0 * traj.n_spokes() as f64 / shell;
                        traj.weights[i] * density
                    })
                    .collect();
                let mean = products.iter().sum::<f64>() / products.len() as f64;
                for p in &products {
                    assert!(((p - mean) / mean).abs() <= 0.01, "{mode:?} {dims}: {p} vs {mean}");
                }
            }
        }
    }

    #[test]
    fn noise_statistics_and_seeds() {
        let dims = Dims::new2(16, 16);
        let traj = make_radial_trajectory(100, 1000, dims, TrajectoryMode::Uniform, 0.2).unwrap();
        let data = KSpaceData {
            dims,
            voxel_size: [1.0; 3],
            n_coils: 1,
            samples: vec![Complex64::new(0.0, 0.0); traj.len()],
            trajectory: traj,
            noise_sigma: 0.0,
            seed: 0,
        };
        let same = add_noise(&data, 0.0, 99).unwrap();
        assert_eq!(same.samples, data.samples);
        let a = add_noise(&data, 1.0, 1).unwrap();
        let n = a.samples.len() as f64;
        let mean = a.samples.iter().map(|v| v.re).sum::<f64>() / n;
        let var = a.samples.iter().map(|v| (v.re - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.97..=1.03).contains(&var), "{var}");
        let b = add_noise(&data, 1.0, 2).unwrap();
        assert_ne!(a.samples, b.samples);
        assert_eq!(a.noise_sigma, b.noise_sigma);
        assert_eq!(add_noise(&data, 1.0, 1).unwrap(), a);
        assert!(add_noise(&data, -1.0, 1).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let dims = Dims::new2(16, 16);
        let traj = make_radial_trajectory(8, 12, dims, TrajectoryMode::Uniform, 0.2).unwrap();
        let coils = CoilSensitivities::unit(Dims::new2(16, 20));
        let img = ImageVolume::zeros(dims, [1.0; 3], Units::Signal);
        assert!(matches!(
            forward_model(&img, &traj, &coils, EvalPath::Direct),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
