//! Reference implementations shared by the integration tests. Nothing here
//! calls into the library's numerical routines.

#![allow(dead_code)]

use std::io::Write;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Squared-sigmoid loss of a binary example given as dense features.
pub fn binary_loss(a: &[f64], label: f64, w: &[f64]) -> f64 {
    let z: f64 = label * a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
    sigmoid(-z).powi(2)
}

/// Softmax cross-entropy with class-major weights `w[k * d + j]` and a
/// 1-based label.
pub fn softmax_loss(a: &[f64], label: usize, w: &[f64], classes: usize) -> f64 {
    let d = a.len();
    let scores: Vec<f64> = (0..classes)
        .map(|k| (0..d).map(|j| w[k * d + j] * a[j]).sum())
        .collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    lse - scores[label - 1]
}

/// `λ(α t - 1 + e^{-α t})` for `t >= 0`.
pub fn concave_gap(lambda: f64, alpha: f64, t: f64) -> f64 {
    lambda * (alpha * t - 1.0 + (-alpha * t).exp())
}

pub fn r2_coordinatewise(lambda: f64, alpha: f64, w: &[f64]) -> f64 {
    w.iter().map(|v| concave_gap(lambda, alpha, v.abs())).sum()
}

pub fn r2_rowwise(lambda: f64, alpha: f64, w: &[f64], rows: usize, cols: usize) -> f64 {
    (0..rows)
        .map(|j| {
            let t = (0..cols).map(|k| w[k * rows + j].powi(2)).sum::<f64>().sqrt();
            concave_gap(lambda, alpha, t)
        })
        .sum()
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|j| {
            y[j] = x[j] + h;
            let up = f(&y);
            y[j] = x[j] - h;
            let down = f(&y);
            y[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn relative_error(got: &[f64], reference: &[f64]) -> f64 {
    dist(got, reference) / norm(got).max(norm(reference)).max(1e-8)
}

/// Minimizes a convex function on a box around the origin by repeated grid
/// refinement. The origin stays on the grid until it stops being the best
/// point, so minimizers on coordinate kinks are found exactly.
pub fn grid_minimize(f: impl Fn(&[f64]) -> f64, dim: usize, radius: f64, tol: f64) -> Vec<f64> {
    const M: usize = 15;
    let mut center = vec![0.0; dim];
    let mut half = radius;
    let mut point = vec![0.0; dim];
    while half > tol {
        let h = 2.0 * half / (M - 1) as f64;
        let mut best = center.clone();
        let mut best_v = f(&center);
        let total = M.pow(dim as u32);
        for idx in 0..total {
            let mut r = idx;
            for (j, p) in point.iter_mut().enumerate() {
                let step = (r % M) as f64 - ((M - 1) / 2) as f64;
                *p = center[j] + step * h;
                r /= M;
            }
            let v = f(&point);
            if v < best_v {
                best_v = v;
                best.copy_from_slice(&point);
            }
        }
        center = best;
        half = 3.0 * h;
    }
    center
}

/// Distance from `v` to `q x + w ∂‖x‖₁`.
pub fn quadratic_l1_distance(v: &[f64], x: &[f64], q: f64, w: f64) -> f64 {
    v.iter()
        .zip(x)
        .map(|(&vj, &xj)| {
            if xj != 0.0 {
                (vj - q * xj - w * xj.signum()).powi(2)
            } else {
                (vj.abs() - w).max(0.0).powi(2)
            }
        })
        .sum::<f64>()
        .sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_error(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Prints an uncaptured status line so it shows up in `cargo test` output.
pub fn report(criterion: usize, title: &str, passed: bool, detail: &str) -> String {
    let line = format!(
        "{} criterion {criterion:>2} ({title}): {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    line
}
