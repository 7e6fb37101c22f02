//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spraylab_core::{AlgVec, LieAlgebra, SprayField};
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> AlgVec {
    AlgVec::from_fn(n, |_, _| {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Pair of vectors whose flag is comfortably non-degenerate.
pub fn flag(rng: &mut ChaCha8Rng, n: usize) -> (AlgVec, AlgVec) {
    loop {
        let y = gaussian(rng, n);
        let w = gaussian(rng, n);
        let c = y.dot(&w) / (y.norm() * w.norm());
        if c.abs() < 0.9 && y.norm() > 0.3 && w.norm() > 0.3 {
            return (y, w);
        }
    }
}

pub fn alg(name: &str) -> Arc<LieAlgebra> {
    Arc::new(LieAlgebra::catalog(name).unwrap())
}

pub fn diag(d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&AlgVec::from_row_slice(d))
}

/// `diag(1, …, 1, 2)` in dimension `n`.
pub fn stretched(n: usize) -> DMatrix<f64> {
    let mut d = vec![1.0; n];
    d[n - 1] = 2.0;
    diag(&d)
}

pub fn e(n: usize, i: usize) -> AlgVec {
    let mut v = AlgVec::zeros(n);
    v[i] = 1.0;
    v
}

/// Sectional curvature of a left invariant Riemannian metric `⟨a,b⟩ = aᵀQb`
/// from the bracket alone:
/// `K·(|x|²|y|² − ⟨x,y⟩²) = −¾|[x,y]|² − ½⟨[x,[x,y]],y⟩ − ½⟨[y,[y,x]],x⟩
///                           + |U(x,y)|² − ⟨U(x,x),U(y,y)⟩`,
/// with `⟨U(x,y),z⟩ = ½(⟨[z,x],y⟩ + ⟨x,[z,y]⟩)`.
pub fn milnor_sectional(a: &LieAlgebra, q: &DMatrix<f64>, x: &AlgVec, y: &AlgVec) -> f64 {
    let n = a.dim();
    let ip = |u: &AlgVec, v: &AlgVec| (u.transpose() * q * v)[(0, 0)];
    let br = |u: &AlgVec, v: &AlgVec| a.bracket(u, v).unwrap();
    let qinv = q.clone().try_inverse().unwrap();
    let big_u = |u: &AlgVec, v: &AlgVec| {
        let cov = AlgVec::from_fn(n, |k, _| {
            let ek = e(n, k);
            0.5 * (ip(&br(&ek, u), v) + ip(u, &br(&ek, v)))
        });
        &qinv * cov
    };
    let xy = br(x, y);
    let num = -0.75 * ip(&xy, &xy) - 0.5 * ip(&br(x, &xy), y) - 0.5 * ip(&br(y, &br(y, x)), x)
        + ip(&big_u(x, y), &big_u(x, y))
        - ip(&big_u(x, x), &big_u(y, y));
    num / (ip(x, x) * ip(y, y) - ip(x, y).powi(2))
}

/// Matrix exponential by Taylor series with scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().map(|v| v.abs()).sum::<f64>();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(squarings);
    let mut term = DMatrix::identity(a.nrows(), a.ncols());
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn metric_sprays(name: &str) -> Vec<(String, SprayField)> {
    let a = alg(name);
    let n = a.dim();
    vec![
        ("riemannian I".into(), SprayField::riemannian(a.clone(), DMatrix::identity(n, n)).unwrap()),
        ("riemannian stretched".into(), SprayField::riemannian(a.clone(), stretched(n)).unwrap()),
        (
            "randers(I, 0.3 e1)".into(),
            SprayField::randers(a.clone(), DMatrix::identity(n, n), e(n, 0) * 0.3).unwrap(),
        ),
    ]
}
