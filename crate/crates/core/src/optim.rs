//! Quasi-Newton minimization for the small smooth objectives of marginal fits.

use crate::numeric::{dot, inf_norm};

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS with Armijo backtracking. `eval` returns the objective and gradient,
/// or `None` where the parameters are invalid (treated as +inf).
///
/// Near the optimum the achievable decrease falls below f64 resolution of the
/// objective, so a step that fails Armijo is still taken when it shrinks the
/// gradient norm without raising the objective beyond rounding.
pub(crate) fn bfgs<F>(eval: F, x0: Vec<f64>, max_iters: usize, tol: f64) -> Minimum
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = eval(&x).expect("initial point must be valid");
    let mut h = identity(n);
    let mut first = true;
    let mut iterations = 0;
    let mut gnorm = inf_norm(&g);

    while iterations < max_iters && gnorm > tol {
        iterations += 1;
        let mut d = mat_vec(&h, &g);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let mut accepted = None;
        let mut fallback = None;
        let mut alpha = 1.0;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if let Some((ft, gt)) = eval(&trial) {
                if ft.is_finite() {
                    if ft <= f + 1e-4 * alpha * slope {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                    if fallback.is_none()
                        && ft <= f + 8.0 * f64::EPSILON * f.abs().max(1.0)
                        && inf_norm(&gt) < gnorm
                    {
                        fallback = Some((trial, ft, gt));
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted.or(fallback) else {
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if first {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                first = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        gnorm = inf_norm(&g);
    }

    Minimum {
        x,
        value: f,
        grad_norm: gnorm,
        iterations,
        converged: gnorm <= tol,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn mat_vec(h: &[f64], v: &[f64]) -> Vec<f64> {
    h.chunks(v.len()).map(|row| dot(row, v)).collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] +=
                -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
