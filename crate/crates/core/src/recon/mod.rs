//! Image reconstruction: adjoint + adaptive combine, prior-guided TV family by
//! ADMM, and anatomically guided TV by Split-Bregman. Iterative methods solve
//! on all coils jointly with the known sensitivities inside the operator.

pub mod adc;
pub mod admm;
pub mod agtv;
pub mod cg;
pub mod config;
pub mod log;
pub mod ops;
pub mod prior;
pub mod prox;

pub use adc::{adaptive_combine, rss_combine};
pub use agtv::BackgroundMask;
pub use config::{ReconConfig, ReconMethod};
pub use log::{ConvergenceLog, IterationRecord};
pub use prior::{
    agtv_threshold_maps, compute_dtv_field, compute_wtv_weights, default_eta, prior_on_grid,
    DirectionField, EdgeWeightMap,
};
pub use prox::{tv_prox, Regularizer};

use crate::acquisition::{CoilSensitivities, EncodingOperator, EvalPath, KSpaceData, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexVolume, ImageVolume, Units};
use crate::phantom::PriorImage;

#[derive(Clone, Debug)]
pub struct ReconResult {
    pub method: ReconMethod,
    pub image: ImageVolume,
    pub log: ConvergenceLog,
    /// Regularisation weight in data units (ADMM methods).
    pub alpha_data: Option<f64>,
    /// Residual budget (AG-TV).
    pub sigma_sq: Option<f64>,
}

impl ReconResult {
    pub fn converged(&self) -> bool {
        self.log.converged
    }
}

/// Expected ‖noise‖² of complex data with per-component standard deviation σ.
pub fn expected_noise_energy(data: &KSpaceData) -> f64 {
    2.0 * data.noise_sigma * data.noise_sigma * data.samples.len() as f64
}

fn check_inputs(data: &KSpaceData, traj: &Trajectory, coils: &CoilSensitivities) -> Result<()> {
    data.check_shape()?;
    if data.n_coils != coils.n_coils() {
        return Err(Error::DimensionMismatch(format!(
            "{} coils of data, {} sensitivity maps",
            data.n_coils,
            coils.n_coils()
        )));
    }
    if traj.n_spokes() != data.n_spokes() || traj.n_samples() != data.n_samples() {
        return Err(Error::DimensionMismatch("trajectory does not match k-space shape".into()));
    }
    Ok(())
}

fn prior_values(prior: Option<&PriorImage>, data: &KSpaceData, method: ReconMethod) -> Result<Option<ImageVolume>> {
    match prior {
        Some(p) => Ok(Some(prior_on_grid(p, data.dims))),
        None if method.needs_prior() && method != ReconMethod::AgTv => {
            Err(invalid(format!("{method} needs a prior image")))
        }
        None => Ok(None),
    }
}

/// Regulariser of an ADMM method; TV ignores the prior.
pub fn regularizer_for(cfg: &ReconConfig, prior: Option<&ImageVolume>) -> Result<Regularizer> {
    let eta = |p: &ImageVolume| cfg.eta.unwrap_or_else(|| default_eta(p));
    match (cfg.method, prior) {
        (ReconMethod::Tv, _) => Ok(Regularizer::Tv),
        (ReconMethod::Wtv, Some(p)) => Ok(Regularizer::Weighted(compute_wtv_weights(p, eta(p))?)),
        (ReconMethod::Dtv, Some(p)) => Ok(Regularizer::Directional(compute_dtv_field(p, eta(p), cfg.gamma)?)),
        (m @ (ReconMethod::Wtv | ReconMethod::Dtv), None) => Err(invalid(format!("{m} needs a prior image"))),
        (m, _) => Err(invalid(format!("{m} is not an ADMM method"))),
    }
}

/// Least squares with a TV-family penalty and nonnegativity (TV, wTV, dTV).
pub fn recon_admm(
    data: &KSpaceData,
    traj: &Trajectory,
    coils: &CoilSensitivities,
    cfg: &ReconConfig,
    prior: Option<&PriorImage>,
    path: EvalPath,
) -> Result<ReconResult> {
    cfg.validate()?;
    check_inputs(data, traj, coils)?;
    let pv = prior_values(prior, data, cfg.method)?;
    let reg = regularizer_for(cfg, pv.as_ref())?;
    let op = EncodingOperator::new(data.dims, traj, coils, path)?;
    recon_admm_with(&op, data, cfg, &reg)
}

/// As [`recon_admm`] on a prepared operator and regulariser.
pub fn recon_admm_with(
    op: &EncodingOperator,
    data: &KSpaceData,
    cfg: &ReconConfig,
    reg: &Regularizer,
) -> Result<ReconResult> {
    let s2 = op.mean_eigenvalue();
    if s2 <= 0.0 {
        return Err(invalid("encoding operator is zero"));
    }
    let init = op.weighted_adjoint(&data.samples);
    let out = admm::admm_solve(op, &data.samples, reg, cfg, s2, &init);
    if !out.log.converged {
        ::log::warn!("{}: {}", cfg.method, out.log.note);
    }
    Ok(ReconResult {
        method: cfg.method,
        image: ImageVolume {
            dims: data.dims,
            voxel_size: data.voxel_size,
            units: Units::Signal,
            data: out.image,
        },
        log: out.log,
        alpha_data: Some(out.alpha_data),
        sigma_sq: None,
    })
}

/// Constrained anatomically guided TV. Without a prior the threshold maps are
/// identically one.
pub fn recon_agtv(
    data: &KSpaceData,
    traj: &Trajectory,
    coils: &CoilSensitivities,
    prior: Option<&PriorImage>,
    bm: &BackgroundMask,
    cfg: &ReconConfig,
    path: EvalPath,
) -> Result<ReconResult> {
    cfg.validate()?;
    check_inputs(data, traj, coils)?;
    let op = EncodingOperator::new(data.dims, traj, coils, path)?;
    let pv = prior_values(prior, data, ReconMethod::AgTv)?;
    recon_agtv_with(&op, data, pv.as_ref(), bm, cfg)
}

pub fn recon_agtv_with(
    op: &EncodingOperator,
    data: &KSpaceData,
    prior: Option<&ImageVolume>,
    bm: &BackgroundMask,
    cfg: &ReconConfig,
) -> Result<ReconResult> {
    let n = data.dims.len();
    let thresholds = match prior {
        Some(p) => agtv_threshold_maps(p, cfg.omega)?,
        None => [vec![1.0; n], vec![1.0; n], vec![1.0; n]],
    };
    let s2 = op.mean_eigenvalue();
    if s2 <= 0.0 {
        return Err(invalid("encoding operator is zero"));
    }
    let sigma_sq = cfg.sigma_sq.unwrap_or_else(|| {
        let floor = 1e-6 * data.samples.iter().map(|v| v.norm_sqr()).sum::<f64>();
        expected_noise_energy(data).max(floor)
    });
    let out = agtv::split_bregman(op, &data.samples, &thresholds, bm, cfg, sigma_sq, s2)?;
    if !out.log.converged {
        ::log::warn!("AG-TV: {}", out.log.note);
    }
    Ok(ReconResult {
        method: ReconMethod::AgTv,
        image: ImageVolume {
            dims: data.dims,
            voxel_size: data.voxel_size,
            units: Units::Signal,
            data: out.image,
        },
        log: out.log,
        alpha_data: None,
        sigma_sq: Some(out.sigma_sq),
    })
}

/// Density-compensated per-coil images, adaptively combined, then divided by
/// the root-sum-of-squares of the known sensitivities so intensities are
/// comparable with the iterative methods.
pub fn recon_adc(
    data: &KSpaceData,
    traj: &Trajectory,
    coils: &CoilSensitivities,
    cfg: &ReconConfig,
    path: EvalPath,
) -> Result<ReconResult> {
    cfg.validate()?;
    check_inputs(data, traj, coils)?;
    let op = EncodingOperator::new(data.dims, traj, coils, path)?;
    recon_adc_with(&op, data, cfg)
}

pub fn recon_adc_with(op: &EncodingOperator, data: &KSpaceData, cfg: &ReconConfig) -> Result<ReconResult> {
    let imgs: Vec<ComplexVolume> = op
        .coil_images(&data.samples, true)
        .into_iter()
        .map(|v| ComplexVolume {
            dims: data.dims,
            voxel_size: data.voxel_size,
            data: v,
        })
        .collect();
    let mut combined = adaptive_combine(&imgs, cfg.adc_window)?;
    for (v, s) in combined.data.iter_mut().zip(op.coils.rss()) {
        *v = if s > 0.0 { *v / s } else { 0.0 };
    }
    Ok(ReconResult {
        method: ReconMethod::Adc,
        image: combined,
        log: ConvergenceLog {
            records: Vec::new(),
            converged: true,
            note: "direct".into(),
        },
        alpha_data: None,
        sigma_sq: None,
    })
}

/// Dispatch on `cfg.method` with a shared operator.
pub fn reconstruct(
    op: &EncodingOperator,
    data: &KSpaceData,
    cfg: &ReconConfig,
    prior: Option<&PriorImage>,
    bm: Option<&BackgroundMask>,
) -> Result<ReconResult> {
    cfg.validate()?;
    check_inputs(data, &op.trajectory, &op.coils)?;
    match cfg.method {
        ReconMethod::Adc => recon_adc_with(op, data, cfg),
        ReconMethod::AgTv => {
            let pv = prior_values(prior, data, cfg.method)?;
            let empty = BackgroundMask::empty(data.dims);
            recon_agtv_with(op, data, pv.as_ref(), bm.unwrap_or(&empty), cfg)
        }
        _ => {
            let pv = prior_values(prior, data, cfg.method)?;
            let reg = regularizer_for(cfg, pv.as_ref())?;
            recon_admm_with(op, data, cfg, &reg)
        }
    }
}
