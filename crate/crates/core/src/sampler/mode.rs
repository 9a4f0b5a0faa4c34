//! Posterior mode and Laplace covariance, used to start chains.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{cholesky, spd_inverse};
use super::LogDensity;

const MAX_ITER: usize = 300;
const MAX_STEP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub point: Vec<f64>,
    pub log_density: f64,
    /// Inverse of the negative Hessian at `point`, `None` when it is not
    /// positive definite.
    pub covariance: Option<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximises `target` over the coordinates flagged in `free` (BFGS with
/// backtracking), then estimates the covariance from a finite-difference
/// Hessian of the gradient. Held coordinates get variance `held_variance`.
pub fn find_mode<T: LogDensity + ?Sized>(target: &T, init: &[f64], free: &[bool], held_variance: f64) -> Mode {
    let d = init.len();
    let idx: Vec<usize> = (0..d).filter(|&i| free[i]).collect();
    let m = idx.len();
    let mut x = init.to_vec();
    let mut full_grad = vec![0.0; d];
    let mut fx = target.log_density_gradient(&x, &mut full_grad);
    if !fx.is_finite() {
        return Mode {
            point: x,
            log_density: fx,
            covariance: None,
        };
    }
    // Minimise -f over the free block.
    let mut g: Vec<f64> = idx.iter().map(|&i| -full_grad[i]).collect();
    let mut h = diag_identity(m);
    let mut first = true;
    let mut trial = x.clone();
    for _ in 0..MAX_ITER {
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax < 1e-7 * (1.0 + fx.abs()) {
            break;
        }
        let mut p: Vec<f64> = (0..m).map(|i| -(0..m).map(|j| h[i * m + j] * g[j]).sum::<f64>()).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            // Not a descent direction: restart from steepest descent.
            h = diag_identity(m);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        let pmax = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut alpha = if pmax > MAX_STEP { MAX_STEP / pmax } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            trial.copy_from_slice(&x);
            for (k, &i) in idx.iter().enumerate() {
                trial[i] += alpha * p[k];
            }
            let ft = target.log_density_gradient(&trial, &mut full_grad);
            if ft.is_finite() && -ft <= -fx + 1e-4 * alpha * slope {
                accepted = Some(ft);
                break;
            }
            alpha *= 0.5;
        }
        let Some(ft) = accepted else { break };
        let g_new: Vec<f64> = idx.iter().map(|&i| -full_grad[i]).collect();
        let s: Vec<f64> = p.iter().map(|v| alpha * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let improvement = ft - fx;
        x.copy_from_slice(&trial);
        fx = ft;
        g = g_new;
        if sy > 1e-12 {
            if first {
                let scale = sy / dot(&y, &y);
                h = diag_identity(m).into_iter().map(|v| v * scale).collect();
                first = false;
            }
            bfgs_update(&mut h, &s, &y, sy, m);
        }
        if improvement.abs() < 1e-13 * (1.0 + fx.abs()) {
            break;
        }
    }
    let covariance = laplace_covariance(target, &x, &idx, held_variance);
    Mode {
        point: x,
        log_density: fx,
        covariance,
    }
}

fn diag_identity(m: usize) -> Vec<f64> {
    let mut h = vec![0.0; m * m];
    for i in 0..m {
        h[i * m + i] = 1.0;
    }
    h
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, m: usize) {
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..m).map(|i| (0..m).map(|j| h[i * m + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..m {
        for j in 0..m {
            h[i * m + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn laplace_covariance<T: LogDensity + ?Sized>(target: &T, x: &[f64], idx: &[usize], held_variance: f64) -> Option<Vec<f64>> {
    let d = x.len();
    let m = idx.len();
    let mut hess = vec![0.0; m * m];
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    let mut probe = x.to_vec();
    for (c, &i) in idx.iter().enumerate() {
        let step = 1e-4 * (1.0 + x[i].abs());
        probe[i] = x[i] + step;
        let fp = target.log_density_gradient(&probe, &mut gp);
        probe[i] = x[i] - step;
        let fm = target.log_density_gradient(&probe, &mut gm);
        probe[i] = x[i];
        if !(fp.is_finite() && fm.is_finite()) {
            return None;
        }
        for (r, &j) in idx.iter().enumerate() {
            // Negative Hessian.
            hess[r * m + c] = -(gp[j] - gm[j]) / (2.0 * step);
        }
    }
    for r in 0..m {
        for c in 0..r {
            let v = 0.5 * (hess[r * m + c] + hess[c * m + r]);
            hess[r * m + c] = v;
            hess[c * m + r] = v;
        }
    }
    let l = cholesky(&hess, m)?;
    let block = spd_inverse(&l, m);
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        cov[i * d + i] = held_variance;
    }
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            cov[i * d + j] = block[r * m + c];
        }
    }
    Some(cov)
}
