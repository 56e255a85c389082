//! Anatomically guided TV:
//! `min λ_xyz Σ_x |T(x) ∇u(x)| + λ_BM ‖BM ∘ u‖₂  s.t.  ‖A u − f‖² ≤ σ²`
//! with per-axis threshold maps `T = diag(t_x, t_y, t_z)` from the prior.
//! Solved by constrained Split-Bregman: inner alternating updates of the image
//! (conjugate gradient) and the shrinkage variables, outer Bregman updates of
//! the data until the residual meets the budget.

use num_complex::Complex64;

use super::cg::conjugate_gradient;
use super::config::ReconConfig;
use super::log::{ConvergenceLog, IterationRecord};
use super::ops::{divergence, gradient};
use crate::acquisition::EncodingOperator;
use crate::error::{Error, Result};
use crate::grid::{norm2, Dims};
use crate::phantom::{DigitalPhantom, RegionMask};

/// Air around the object; penalised towards zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundMask {
    pub dims: Dims,
    pub voxels: Vec<bool>,
}

impl BackgroundMask {
    pub fn from_mask(mask: &RegionMask) -> Self {
        Self {
            dims: mask.dims,
            voxels: mask.voxels.clone(),
        }
    }

    /// Complement of the object support dilated by `margin` voxels.
    pub fn from_phantom(phantom: &DigitalPhantom, dims: Dims, margin: usize) -> Self {
        let support = crate::phantom::support_mask(phantom, dims).dilated(margin);
        Self {
            dims,
            voxels: support.voxels.iter().map(|v| !v).collect(),
        }
    }

    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            voxels: vec![false; dims.len()],
        }
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|v| **v).count()
    }
}

fn scale_axes(g: &[[f64; 3]], t: &[Vec<f64>; 3]) -> Vec<[f64; 3]> {
    g.iter()
        .enumerate()
        .map(|(i, g)| [t[0][i] * g[0], t[1][i] * g[1], t[2][i] * g[2]])
        .collect()
}

fn shrink_iso(v: &[[f64; 3]], kappa: f64) -> Vec<[f64; 3]> {
    v.iter()
        .map(|v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n <= kappa {
                [0.0; 3]
            } else {
                let s = (n - kappa) / n;
                [s * v[0], s * v[1], s * v[2]]
            }
        })
        .collect()
}

/// Shrinkage of a whole vector in the ℓ₂ norm.
fn shrink_block(v: &[f64], kappa: f64) -> Vec<f64> {
    let n = norm2(v);
    if n <= kappa {
        vec![0.0; v.len()]
    } else {
        let s = (n - kappa) / n;
        v.iter().map(|x| s * x).collect()
    }
}

#[derive(Clone, Debug)]
pub struct AgtvOutput {
    pub image: Vec<f64>,
    pub log: ConvergenceLog,
    /// Residual budget in data units.
    pub sigma_sq: f64,
}

/// `thresholds` are the per-axis maps (all ones without a prior) and `s2` the
/// mean eigenvalue of A*A.
pub fn split_bregman(
    op: &EncodingOperator,
    f: &[Complex64],
    thresholds: &[Vec<f64>; 3],
    bm: &BackgroundMask,
    cfg: &ReconConfig,
    sigma_sq: f64,
    s2: f64,
) -> Result<AgtvOutput> {
    let dims = op.dims;
    bm.dims.check_same(&dims, "background mask vs image grid")?;
    for t in thresholds {
        if t.len() != dims.len() {
            return Err(Error::DimensionMismatch("threshold map size".into()));
        }
    }
    let n = dims.len();
    let s = s2.sqrt();
    let data_scale = s;
    let f_n: Vec<Complex64> = f.iter().map(|v| v / data_scale).collect();
    let budget_n = sigma_sq / (data_scale * data_scale);
    let mu = cfg.sb_mu;
    let bmf: Vec<f64> = bm.voxels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let t2: [Vec<f64>; 3] = [
        thresholds[0].iter().map(|t| t * t).collect(),
        thresholds[1].iter().map(|t| t * t).collect(),
        thresholds[2].iter().map(|t| t * t).collect(),
    ];

    let system = |v: &[f64]| -> Vec<f64> {
        let ata = op.normal(v);
        let lap = divergence(&scale_axes(&gradient(v, dims), &t2), dims);
        ata.iter()
            .zip(&lap)
            .zip(v.iter().zip(&bmf))
            .map(|((a, l), (v, m))| a / s2 - mu * l + mu * m * v)
            .collect()
    };
    let residual_n = |u: &[f64]| -> f64 {
        op.forward(u)
            .iter()
            .zip(&f_n)
            .map(|(a, b)| (a / s - b).norm_sqr())
            .sum()
    };

    let mut u = vec![0.0; n];
    let mut fk = f_n.clone();
    let mut d = vec![[0.0; 3]; n];
    let mut bd = vec![[0.0; 3]; n];
    let mut e = vec![0.0; n];
    let mut be = vec![0.0; n];
    let mut log = ConvergenceLog::default();
    let kappa_d = cfg.lambda_xyz / mu;
    let kappa_e = cfg.lambda_bm / mu;

    for k in 1..=cfg.max_outer_iters {
        let u_outer = u.clone();
        let atf: Vec<f64> = op.adjoint(&fk).into_iter().map(|v| v / s).collect();
        let mut split = 0.0;
        for _ in 0..cfg.sb_inner_iters {
            let u_prev = u.clone();
            let db: Vec<[f64; 3]> = d
                .iter()
                .zip(&bd)
                .map(|(d, b)| [d[0] - b[0], d[1] - b[1], d[2] - b[2]])
                .collect();
            let tv_rhs = divergence(&scale_axes(&db, thresholds), dims);
            let rhs: Vec<f64> = (0..n)
                .map(|i| atf[i] - mu * tv_rhs[i] + mu * bmf[i] * (e[i] - be[i]))
                .collect();
            conjugate_gradient(&system, &rhs, &mut u, cfg.cg_tol, cfg.cg_max_iters);

            let tg = scale_axes(&gradient(&u, dims), thresholds);
            let arg: Vec<[f64; 3]> = tg
                .iter()
                .zip(&bd)
                .map(|(g, b)| [g[0] + b[0], g[1] + b[1], g[2] + b[2]])
                .collect();
            d = shrink_iso(&arg, kappa_d);
            let bu: Vec<f64> = (0..n).map(|i| bmf[i] * u[i] + be[i]).collect();
            e = shrink_block(&bu, kappa_e);
            let mut split_sq = 0.0;
            for i in 0..n {
                for a in 0..3 {
                    let r = tg[i][a] - d[i][a];
                    bd[i][a] += r;
                    split_sq += r * r;
                }
                be[i] += bmf[i] * u[i] - e[i];
            }
            split = split_sq.sqrt();
            let change = u.iter().zip(&u_prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                / norm2(&u).max(f64::MIN_POSITIVE);
            if change < cfg.tol {
                break;
            }
        }
        let fwd = op.forward(&u);
        let mut res_n = 0.0;
        for ((fk, f0), a) in fk.iter_mut().zip(&f_n).zip(&fwd) {
            let r = f0 - a / s;
            *fk += r;
            res_n += r.norm_sqr();
        }
        let outer_change = u.iter().zip(&u_outer).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            / norm2(&u).max(f64::MIN_POSITIVE);
        let data_res = res_n * data_scale * data_scale;
        log.records.push(IterationRecord {
            iteration: k,
            objective: penalty(&u, dims, thresholds, &bmf, cfg),
            data_residual: data_res,
            primal_residual: split / norm2(&u).max(f64::MIN_POSITIVE),
            dual_residual: outer_change,
        });
        if res_n <= budget_n {
            log.converged = true;
            log.note = format!("residual {data_res:e} within budget {sigma_sq:e} after {k} outer iterations");
            break;
        }
    }
    if !log.converged {
        let last = residual_n(&u) * data_scale * data_scale;
        log.note = format!(
            "residual {last:e} above budget {sigma_sq:e} after {} outer iterations",
            cfg.max_outer_iters
        );
    }
    Ok(AgtvOutput {
        image: u,
        log,
        sigma_sq,
    })
}

fn penalty(u: &[f64], dims: Dims, t: &[Vec<f64>; 3], bmf: &[f64], cfg: &ReconConfig) -> f64 {
    let tv: f64 = scale_axes(&gradient(u, dims), t)
        .iter()
        .map(|g| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt())
        .sum();
    let bm: f64 = u.iter().zip(bmf).map(|(u, m)| (u * m).powi(2)).sum::<f64>().sqrt();
    cfg.lambda_xyz * tv + cfg.lambda_bm * bm
}
