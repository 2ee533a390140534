//! Direct, unfactorized reimplementations of the estimators and statistics,
//! written from the defining formulas without sharing code with the library.
//! Used as test oracles.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

pub fn kernel(x: f64) -> f64 {
    if (-1.0..=1.0).contains(&x) {
        0.75 * (1.0 - x * x)
    } else {
        0.0
    }
}

pub fn lambda(h: f64) -> f64 {
    (2.0 * (1.0 / (2.0 * h)).ln()).sqrt()
}

/// Dense weights `w_t(u, h)` for `t = 1..=T`, summing over every `t`.
pub fn weights(len: usize, u: f64, h: f64) -> Vec<f64> {
    let big_t = len as f64;
    let x = |t: usize| (t as f64 / big_t - u) / h;
    let s = |l: i32| (1..=len).map(|t| kernel(x(t)) * x(t).powi(l)).sum::<f64>() / (big_t * h);
    let (s1, s2) = (s(1), s(2));
    let lam: Vec<f64> = (1..=len).map(|t| kernel(x(t)) * (s2 - x(t) * s1)).collect();
    let norm = lam.iter().map(|v| v * v).sum::<f64>().sqrt();
    lam.iter().map(|v| v / norm).collect()
}

/// First-difference least squares for a single covariate.
pub fn beta_1d(y: &[f64], x: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 1..y.len() {
        num += (x[t] - x[t - 1]) * (y[t] - y[t - 1]);
        den += (x[t] - x[t - 1]) * (x[t] - x[t - 1]);
    }
    num / den
}

/// Subseries estimator, summing `m = 1..=M` and skipping terms whose indices
/// leave `1..=T`; normalised by `2 (M - 1) s`.
pub fn lrv(y: &[f64], x: Option<&[f64]>, beta: f64, s: usize) -> f64 {
    let len = y.len();
    let m_blocks = len / s;
    let r = |t: usize| y[t - 1] - x.map_or(0.0, |x| beta * x[t - 1]);
    let mut total = 0.0;
    for m in 1..=m_blocks {
        if s + m * s > len {
            continue;
        }
        let mut block = 0.0;
        for t in 1..=s {
            block += r(t + m * s) - r(t + (m - 1) * s);
        }
        total += block * block;
    }
    total / (2.0 * (m_blocks - 1) as f64 * s as f64)
}

/// `psi0_ij(u, h)` for every pair `i < j` (lexicographic) and point, with
/// the pair difference formed before weighting.
pub fn psi0(y_aug: &[Vec<f64>], sigma2: &[f64], points: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let n = y_aug.len();
    let len = y_aug[0].len();
    let ws: Vec<Vec<f64>> = points.iter().map(|&(u, h)| weights(len, u, h)).collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let row = points
                .iter()
                .zip(&ws)
                .map(|(&(_, h), w)| {
                    let psi: f64 = (0..len).map(|t| w[t] * (y_aug[i][t] - y_aug[j][t])).sum();
                    psi.abs() / (sigma2[i] + sigma2[j]).sqrt() - lambda(h)
                })
                .collect();
            out.push(row);
        }
    }
    out
}

/// One Gaussian draw: `n` series of `T` standard normals, drawn series by
/// series, centred, then the maximum over all pairs and points.
pub fn gaussian_draw<R: Rng + ?Sized>(n: usize, len: usize, points: &[(f64, f64)], rng: &mut R) -> f64 {
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let mean = row.iter().sum::<f64>() / len as f64;
        z.push(row.iter().map(|v| v - mean).collect());
    }
    let ws: Vec<Vec<f64>> = points.iter().map(|&(u, h)| weights(len, u, h)).collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            for (&(_, h), w) in points.iter().zip(&ws) {
                let v: f64 = (0..len).map(|t| w[t] * (z[i][t] - z[j][t])).sum();
                best = best.max(v.abs() / 2f64.sqrt() - lambda(h));
            }
        }
    }
    best
}

/// Members of `set` (as `[lower, upper]`) that strictly contain no other
/// member.
pub fn minimal(set: &[(f64, f64)], eps: f64) -> Vec<(f64, f64)> {
    set.iter()
        .filter(|a| {
            !set.iter().any(|b| {
                let subset = b.0 >= a.0 - eps && b.1 <= a.1 + eps;
                let same = (b.0 - a.0).abs() <= eps && (b.1 - a.1).abs() <= eps;
                subset && !same
            })
        })
        .copied()
        .collect()
}
