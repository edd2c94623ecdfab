//! Independent reference computations for the test suites. Nothing here
//! calls into the library's numeric kernels.
#![allow(dead_code)]

use flrce::data::Dataset;
use flrce::model::{forward_loss, ModelSpec};
use flrce::ParamVector;
use rand::Rng;

pub fn pv(v: &[f64]) -> ParamVector {
    ParamVector::from_vec(v.to_vec())
}

pub fn oracle_cossim(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na.sqrt() * nb.sqrt()))
}

/// Distance from `p` to the line through `anchor` along `u`, via explicit
/// dot products: residual = r - (r.u / u.u) u.
pub fn oracle_orthdist(p: &[f64], anchor: &[f64], u: &[f64]) -> f64 {
    let r: Vec<f64> = p.iter().zip(anchor).map(|(a, b)| a - b).collect();
    let mut ru = 0.0;
    let mut uu = 0.0;
    for i in 0..u.len() {
        ru += r[i] * u[i];
        uu += u[i] * u[i];
    }
    let c = ru / uu;
    let mut ss = 0.0;
    for i in 0..u.len() {
        let res = r[i] - c * u[i];
        ss += res * res;
    }
    ss.sqrt()
}

pub fn oracle_relate_async(w: &[f64], up: &[f64], anchor: &[f64], uq: &[f64]) -> f64 {
    let d_o = oracle_orthdist(w, anchor, uq);
    let moved: Vec<f64> = w.iter().zip(up).map(|(a, b)| a + b).collect();
    let d_p = oracle_orthdist(&moved, anchor, uq);
    let v = 1.0 - d_p / d_o;
    if v < -1.0 {
        -1.0
    } else {
        v
    }
}

/// Ordered conflicting pairs over P by a plain double loop.
pub fn oracle_conflicts(updates: &[Vec<f64>], participants: usize) -> f64 {
    let mut n = 0;
    for k in 0..updates.len() {
        for j in 0..updates.len() {
            if k == j {
                continue;
            }
            if let Some(c) = oracle_cossim(&updates[k], &updates[j]) {
                if c < 0.0 {
                    n += 1;
                }
            }
        }
    }
    n as f64 / participants as f64
}

/// w + Σ (n_k / Σn) u_k, summed coordinate by coordinate.
pub fn oracle_weighted_mean(w: &[f64], updates: &[(Vec<f64>, usize)]) -> Vec<f64> {
    let total: usize = updates.iter().map(|(_, n)| n).sum();
    (0..w.len())
        .map(|i| {
            let mut acc = 0.0;
            for (u, n) in updates {
                acc += u[i] * (*n as f64) / total as f64;
            }
            w[i] + acc
        })
        .collect()
}

/// Central finite differences of the loss.
pub fn fd_gradient(params: &ParamVector, spec: &ModelSpec, batch: &Dataset, step: f64) -> Vec<f64> {
    let base = params.as_slice().to_vec();
    (0..base.len())
        .map(|i| {
            let mut plus = base.clone();
            plus[i] += step;
            let mut minus = base.clone();
            minus[i] -= step;
            let lp = forward_loss(&ParamVector::from_vec(plus), spec, batch).unwrap();
            let lm = forward_loss(&ParamVector::from_vec(minus), spec, batch).unwrap();
            (lp - lm) / (2.0 * step)
        })
        .collect()
}

/// Largest coordinate-wise relative error, with a floor on the
/// denominator so that near-zero coordinates compare absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub fn random_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}
