//! BFGS minimizer with Armijo backtracking.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the per-row scaled gradient.
    pub grad_tol: f64,
    /// Largest allowed coordinate change in one step.
    pub max_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { max_iter: 500, grad_tol: 1e-6, max_step: 5.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T, const D: usize> {
    pub x: [T; D],
    pub value: T,
    pub grad: [T; D],
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<T>,
}

fn sup_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Minimizes `f`, which returns the objective and its gradient. Non-finite
/// objective values are treated as infeasible and rejected by the line search.
pub fn bfgs_minimize<T: Scalar, const D: usize>(
    mut f: impl FnMut(&[T; D]) -> (T, [T; D]),
    x0: [T; D],
    cfg: &OptimizerConfig,
) -> Minimum<T, D> {
    let tol = T::lit(cfg.grad_tol);
    let max_step = T::lit(cfg.max_step);
    let c1 = T::lit(1e-4);
    let identity = || {
        let mut h = [[T::zero(); D]; D];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = T::one();
        }
        h
    };

    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut h = identity();
    let mut fresh = true;
    let mut history = vec![fx];
    let mut iterations = 0;
    let mut converged = fx.is_finite() && sup_norm(&g) < tol;

    while !converged && iterations < cfg.max_iter && fx.is_finite() {
        let mut dir = [T::zero(); D];
        for i in 0..D {
            dir[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&dir, &g);
        if !(slope < T::zero()) {
            h = identity();
            fresh = true;
            dir = g.map(|v| -v);
            slope = dot(&dir, &g);
        }
        let longest = sup_norm(&dir);
        if longest > max_step {
            let s = max_step / longest;
            dir.iter_mut().for_each(|d| *d = *d * s);
            slope = slope * s;
        }

        let mut alpha = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = x;
            for i in 0..D {
                trial[i] = x[i] + alpha * dir[i];
            }
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + c1 * alpha * slope && gt.iter().all(|v| v.is_finite()) {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha = alpha * T::lit(0.5);
        }

        let Some((xn, fxn, gn)) = accepted else {
            if fresh {
                break;
            }
            h = identity();
            fresh = true;
            continue;
        };

        iterations += 1;
        let mut s = [T::zero(); D];
        let mut y = [T::zero(); D];
        for i in 0..D {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                // Scale the initial inverse Hessian before the first update.
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = T::zero());
                    row[i] = scale;
                }
            }
            let rho = T::one() / sy;
            let mut hy = [T::zero(); D];
            for i in 0..D {
                hy[i] = dot(&h[i], &y);
            }
            let yhy = dot(&y, &hy);
            for i in 0..D {
                for j in 0..D {
                    h[i][j] = h[i][j] - rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }
        x = xn;
        fx = fxn;
        g = gn;
        history.push(fx);
        converged = sup_norm(&g) < tol;
    }

    Minimum { x, value: fx, grad: g, iterations, converged, history }
}
