//! Small dense vector helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_lattice(a: &[f64], x: &[i64]) -> f64 {
    a.iter().zip(x).map(|(u, &v)| u * v as f64).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn lattice_norm(x: &[i64]) -> f64 {
    x.iter()
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        .sqrt()
}

pub fn to_f64(x: &[i64]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    Some(a.iter().map(|v| v / n).collect())
}

pub fn sub_lattice(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Solves `m x = b`, trying Cholesky first and falling back to LU.
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(b));
    }
    m.clone().lu().solve(b)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Angle between `x` and `v` in `[0, pi]`, accurate near both ends.
pub fn angle(x: &[f64], v: &[f64]) -> f64 {
    let c = dot(x, v);
    let nx = norm(x);
    let nv = norm(v);
    // |x|^2 |v|^2 - (x.v)^2 computed as the norm of the rejection
    let scale = c / (nv * nv);
    let rej: f64 = x
        .iter()
        .zip(v)
        .map(|(a, b)| {
            let r = a - scale * b;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    (rej * nv).atan2(c).abs().min(std::f64::consts::PI) * if nx == 0.0 { 0.0 } else { 1.0 }
}
