//! Small dense symmetric matrices, row-major `d × d`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`.
pub fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// `out = L z` for lower-triangular `L`.
pub fn lower_mul(l: &[f64], z: &[f64], out: &mut [f64]) {
    let d = z.len();
    for i in 0..d {
        out[i] = (0..=i).map(|k| l[i * d + k] * z[k]).sum();
    }
}

/// `out = Lᵀ v` for lower-triangular `L`.
pub fn lower_t_mul(l: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for k in 0..d {
        out[k] = (k..d).map(|i| l[i * d + k] * v[i]).sum();
    }
}

/// Solves `L w = b` for lower-triangular `L`.
pub fn forward_solve(l: &[f64], b: &[f64], out: &mut [f64]) {
    let d = b.len();
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * out[k]).sum();
        out[i] = (b[i] - s) / l[i * d + i];
    }
}

/// Inverse of a symmetric positive-definite matrix given its Cholesky factor.
pub fn spd_inverse(l: &[f64], d: usize) -> Vec<f64> {
    // Invert L column by column, then A⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = vec![0.0; d * d];
    for c in 0..d {
        for i in c..d {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[i * d + k] * linv[k * d + c];
            }
            linv[i * d + c] = s / l[i * d + i];
        }
    }
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (i..d).map(|k| linv[k * d + i] * linv[k * d + j]).sum();
            inv[i * d + j] = s;
            inv[j * d + i] = s;
        }
    }
    inv
}

pub fn diagonal(values: &[f64]) -> Vec<f64> {
    let d = values.len();
    let mut m = vec![0.0; d * d];
    for (i, v) in values.iter().enumerate() {
        m[i * d + i] = *v;
    }
    m
}
