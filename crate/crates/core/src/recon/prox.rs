//! Proximal map of the structure-guided total variation,
//! `argmin_u ½‖u − z‖² + α·J(u)` with `J(u) = Σ_x |K ∇u(x)|`, solved by fast
//! gradient projection on the dual. `K(x)` is the identity (TV), a scalar edge
//! weight (wTV) or the projection `I − γ²ξξᵀ` (dTV). The optional
//! nonnegativity constraint is folded into the dual iteration.

use super::ops::{active_axes, divergence, gradient};
use super::prior::{DirectionField, EdgeWeightMap};
use crate::grid::Dims;

#[derive(Clone, Debug, PartialEq)]
pub enum Regularizer {
    Tv,
    Weighted(EdgeWeightMap),
    Directional(DirectionField),
}

impl Regularizer {
    /// `K(x) g`; K is symmetric so it is also its own transpose.
    #[inline]
    pub fn apply(&self, idx: usize, g: [f64; 3]) -> [f64; 3] {
        match self {
            Regularizer::Tv => g,
            Regularizer::Weighted(w) => {
                let s = w.weights[idx];
                [s * g[0], s * g[1], s * g[2]]
            }
            Regularizer::Directional(f) => f.project(idx, g),
        }
    }

    fn apply_field(&self, p: &[[f64; 3]]) -> Vec<[f64; 3]> {
        if let Regularizer::Tv = self {
            return p.to_vec();
        }
        p.iter().enumerate().map(|(i, g)| self.apply(i, *g)).collect()
    }

    /// `J(u)`.
    pub fn value(&self, u: &[f64], dims: Dims) -> f64 {
        gradient(u, dims)
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let k = self.apply(i, *g);
                (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
            })
            .sum()
    }
}

fn project_ball(p: &mut [[f64; 3]]) {
    for v in p.iter_mut() {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1.0 {
            v[0] /= n;
            v[1] /= n;
            v[2] /= n;
        }
    }
}

/// `P_C(z + α·div(K p))`.
fn primal(z: &[f64], p: &[[f64; 3]], reg: &Regularizer, alpha: f64, dims: Dims, nonneg: bool) -> Vec<f64> {
    let d = divergence(&reg.apply_field(p), dims);
    z.iter()
        .zip(d)
        .map(|(z, d)| {
            let v = z + alpha * d;
            if nonneg {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect()
}

/// Dual state carried between calls to warm-start the iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub p: Vec<[f64; 3]>,
}

impl DualState {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            p: vec![[0.0; 3]; dims.len()],
        }
    }
}

/// Approximate prox with `inner_iters` dual FGP steps.
pub fn tv_prox(
    z: &[f64],
    dims: Dims,
    alpha: f64,
    reg: &Regularizer,
    inner_iters: usize,
    nonneg: bool,
    warm: Option<&mut DualState>,
) -> Vec<f64> {
    if alpha == 0.0 {
        return if nonneg {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.to_vec()
        };
    }
    let mut local;
    let state = match warm {
        Some(s) => s,
        None => {
            local = DualState::zeros(dims);
            &mut local
        }
    };
    // ‖K∇‖² ≤ 4·(active axes) since ‖K‖ ≤ 1
    let step = 1.0 / (4.0 * active_axes(dims).max(1) as f64 * alpha);
    let mut p = std::mem::take(&mut state.p);
    let mut r = p.clone();
    let mut t = 1.0f64;
    for _ in 0..inner_iters {
        let u = primal(z, &r, reg, alpha, dims, nonneg);
        let g = reg.apply_field(&gradient(&u, dims));
        let mut next: Vec<[f64; 3]> = r
            .iter()
            .zip(&g)
            .map(|(r, g)| [r[0] + step * g[0], r[1] + step * g[1], r[2] + step * g[2]])
            .collect();
        project_ball(&mut next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let m = (t - 1.0) / t_next;
        r = next
            .iter()
            .zip(&p)
            .map(|(n, o)| {
                [
                    n[0] + m * (n[0] - o[0]),
                    n[1] + m * (n[1] - o[1]),
                    n[2] + m * (n[2] - o[2]),
                ]
            })
            .collect();
        p = next;
        t = t_next;
    }
    let out = primal(z, &p, reg, alpha, dims, nonneg);
    state.p = p;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::prior::EdgeWeightMap;
    use proptest::prelude::*;

    #[test]
    fn zero_alpha_is_identity() {
        let d = Dims::new2(5, 4);
        let z: Vec<f64> = (0..d.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        assert_eq!(tv_prox(&z, d, 0.0, &Regularizer::Tv, 10, false, None), z);
    }

    #[test]
    fn constant_input_is_fixed_point() {
        let d = Dims::new2(8, 8);
        let z = vec![3.25; d.len()];
        assert_eq!(tv_prox(&z, d, 5.0, &Regularizer::Tv, 30, false, None), z);
    }

    /// Closed form for two samples: each moves toward the other by min(α, |a−b|/2).
    fn two_point(a: f64, b: f64, alpha: f64) -> (f64, f64) {
        let m = alpha.min((a - b).abs() / 2.0);
        let s = (b - a).signum();
        (a + s * m, b - s * m)
    }

    #[test]
    fn two_sample_closed_form() {
        let d = Dims::new2(2, 1);
        for (a, b, alpha) in [(1.0, 5.0, 0.5), (1.0, 5.0, 3.0), (-2.0, -2.5, 0.1), (4.0, 0.0, 1.99)] {
            let u = tv_prox(&[a, b], d, alpha, &Regularizer::Tv, 500, false, None);
            let (ea, eb) = two_point(a, b, alpha);
            assert!((u[0] - ea).abs() < 1e-9 && (u[1] - eb).abs() < 1e-9, "{u:?} vs {ea},{eb}");
        }
    }

    #[test]
    fn unit_weights_match_plain_tv_bitwise() {
        let d = Dims::new2(9, 7);
        let z: Vec<f64> = (0..d.len()).map(|i| ((i * 37) % 11) as f64).collect();
        let a = tv_prox(&z, d, 0.8, &Regularizer::Tv, 25, true, None);
        let b = tv_prox(&z, d, 0.8, &Regularizer::Weighted(EdgeWeightMap::ones(d)), 25, true, None);
        assert_eq!(a, b);
    }

    #[test]
    fn nonnegative_projection() {
        let d = Dims::new2(6, 6);
        let z: Vec<f64> = (0..d.len()).map(|i| (i as f64).cos() * 2.0).collect();
        let u = tv_prox(&z, d, 0.3, &Regularizer::Tv, 40, true, None);
        assert!(u.iter().all(|v| *v >= 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn prox_does_not_increase_objective(
            z in proptest::collection::vec(-5.0f64..5.0, 36),
            alpha in 0.01f64..2.0,
        ) {
            let d = Dims::new2(6, 6);
            let u = tv_prox(&z, d, alpha, &Regularizer::Tv, 100, false, None);
            let obj = |v: &[f64]| {
                0.5 * v.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                    + alpha * Regularizer::Tv.value(v, d)
            };
            prop_assert!(obj(&u) <= obj(&z) + 1e-9);
            prop_assert!(Regularizer::Tv.value(&u, d) <= Regularizer::Tv.value(&z, d) + 1e-9);
        }
    }
}
