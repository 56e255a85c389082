//! Conjugate gradient for symmetric positive definite systems.

use crate::grid::dot;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// ‖b − A x‖ / ‖b‖ at exit.
    pub relative_residual: f64,
}

/// Solve `A x = b` in place, starting from the given `x`.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> CgOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let bn = dot(b, b).sqrt();
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        };
    }
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut it = 0;
    while it < max_iter && rr.sqrt() > tol * bn {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let a = rr / pap;
        for ((x, p), (r, ap)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
            *x += a * p;
            *r -= a * ap;
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (p, r) in p.iter_mut().zip(&r) {
            *p = r + beta * *p;
        }
        rr = rr_next;
        it += 1;
    }
    CgOutcome {
        iterations: it,
        relative_residual: rr.sqrt() / bn,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // tridiagonal [-1, 4, -1]
        let n = 20;
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut s = 4.0 * v[i];
                    if i > 0 {
                        s -= v[i - 1];
                    }
                    if i + 1 < n {
                        s -= v[i + 1];
                    }
                    s
                })
                .collect()
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        let b = apply(&truth);
        let mut x = vec![0.0; n];
        let out = conjugate_gradient(apply, &b, &mut x, 1e-12, 100);
        assert!(out.relative_residual <= 1e-12);
        assert!(x.iter().zip(&truth).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 3];
        conjugate_gradient(|v| v.to_vec(), &[0.0; 3], &mut x, 1e-8, 10);
        assert_eq!(x, vec![0.0; 3]);
    }
}
