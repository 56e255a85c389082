//! `argmin_{u ≥ 0} ½‖A u − b‖² + α J(u)` by ADMM with the splitting u = z:
//! a conjugate-gradient least-squares step for u, the constrained TV prox for
//! z, and a scaled dual update. The operator is rescaled so the mean
//! eigenvalue of A*A is one; `alpha` and `admm_rho` act in that scaling.

use num_complex::Complex64;

use super::cg::conjugate_gradient;
use super::config::ReconConfig;
use super::log::{ConvergenceLog, IterationRecord};
use super::prox::{tv_prox, DualState, Regularizer};
use crate::acquisition::EncodingOperator;
use crate::grid::norm2;

/// `‖A u − b‖²`.
pub fn data_residual(op: &EncodingOperator, b: &[Complex64], u: &[f64]) -> f64 {
    op.forward(u).iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum()
}

/// `½‖A u − b‖² + α J(u)` in the units of the data.
pub fn objective(op: &EncodingOperator, b: &[Complex64], reg: &Regularizer, alpha: f64, u: &[f64]) -> f64 {
    0.5 * data_residual(op, b, u) + alpha * reg.value(u, op.dims)
}

#[derive(Clone, Debug)]
pub struct AdmmOutput {
    pub image: Vec<f64>,
    pub log: ConvergenceLog,
    /// α in data units, i.e. the weight in [`objective`].
    pub alpha_data: f64,
}

/// `s2` is the mean eigenvalue of A*A; `init` the starting image (projected onto u ≥ 0).
pub fn admm_solve(
    op: &EncodingOperator,
    b: &[Complex64],
    reg: &Regularizer,
    cfg: &ReconConfig,
    s2: f64,
    init: &[f64],
) -> AdmmOutput {
    let dims = op.dims;
    let n = dims.len();
    let rho = cfg.admm_rho;
    let alpha_n = cfg.alpha;
    let alpha_data = alpha_n * s2;
    let rhs0: Vec<f64> = op.adjoint(b).into_iter().map(|v| v / s2).collect();
    let system = |v: &[f64]| -> Vec<f64> {
        op.normal(v)
            .into_iter()
            .zip(v)
            .map(|(a, v)| a / s2 + rho * v)
            .collect()
    };

    let mut z: Vec<f64> = init.iter().map(|v| v.max(0.0)).collect();
    let mut u = z.clone();
    let mut y = vec![0.0; n];
    let mut dual = DualState::zeros(dims);
    let mut log = ConvergenceLog::default();

    for k in 1..=cfg.max_outer_iters {
        let rhs: Vec<f64> = rhs0
            .iter()
            .zip(z.iter().zip(&y))
            .map(|(r, (z, y))| r + rho * (z - y))
            .collect();
        conjugate_gradient(&system, &rhs, &mut u, cfg.cg_tol, cfg.cg_max_iters);

        let v: Vec<f64> = u.iter().zip(&y).map(|(u, y)| u + y).collect();
        let z_next = tv_prox(&v, dims, alpha_n / rho, reg, cfg.fgp_inner_iters, true, Some(&mut dual));
        let dz: Vec<f64> = z_next.iter().zip(&z).map(|(a, b)| a - b).collect();
        z = z_next;
        let r: Vec<f64> = u.iter().zip(&z).map(|(u, z)| u - z).collect();
        for (y, r) in y.iter_mut().zip(&r) {
            *y += r;
        }

        let tiny = f64::MIN_POSITIVE.sqrt();
        let primal = norm2(&r) / norm2(&u).max(norm2(&z)).max(tiny);
        let dual_res = norm2(&dz) / norm2(&y).max(tiny);
        let data_res = data_residual(op, b, &z);
        log.records.push(IterationRecord {
            iteration: k,
            objective: 0.5 * data_res + alpha_data * reg.value(&z, dims),
            data_residual: data_res,
            primal_residual: primal,
            dual_residual: dual_res,
        });
        if primal < cfg.tol && dual_res < cfg.tol {
            log.converged = true;
            log.note = format!("residuals below {} after {k} iterations", cfg.tol);
            break;
        }
    }
    if !log.converged {
        log.note = format!("not converged after {} iterations", cfg.max_outer_iters);
    }
    AdmmOutput {
        image: z,
        log,
        alpha_data,
    }
}
