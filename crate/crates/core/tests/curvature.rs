mod common;

use common::*;
use nalgebra::DMatrix;
use spraylab_core::curvature::{self, flag_curvature, landsberg, landsberg_via_transport, riemann};
use spraylab_core::spray::{Monomial, RationalField};
use spraylab_core::{AlgVec, IntegratorConfig, SprayField};

const CATALOG: [&str; 6] = ["su2", "heisenberg3", "sl2r", "e2", "solvable2", "abelian_3"];

fn all_sprays(name: &str) -> Vec<(String, SprayField)> {
    let mut v = vec![("zero".to_string(), SprayField::zero(alg(name)))];
    v.extend(metric_sprays(name));
    v
}

#[test]
fn curvature_annihilates_the_flagpole() {
    let mut r = rng(1);
    for name in CATALOG {
        for (label, s) in all_sprays(name) {
            for _ in 0..5 {
                let y = gaussian(&mut r, s.dim());
                let ry = riemann(&s, &y, &y).unwrap();
                assert!(ry.amax() < 1e-8, "{name} / {label}: |R_y(y)| = {}", ry.amax());
            }
        }
    }
}

#[test]
fn riemann_is_linear_in_w_and_quadratic_in_y() {
    let mut r = rng(2);
    for name in CATALOG {
        for (label, s) in all_sprays(name) {
            let n = s.dim();
            let (y, u) = flag(&mut r, n);
            let v = gaussian(&mut r, n);
            let lin = riemann(&s, &y, &(&u * 2.0 - &v)).unwrap();
            let sep = riemann(&s, &y, &u).unwrap() * 2.0 - riemann(&s, &y, &v).unwrap();
            assert!((lin - &sep).amax() < 1e-8 * (1.0 + sep.amax()), "{name} / {label}");
            let base = riemann(&s, &y, &u).unwrap();
            for lambda in [0.5, 2.0] {
                let scaled = riemann(&s, &(&y * lambda), &u).unwrap();
                let expect = &base * (lambda * lambda);
                assert!((scaled - &expect).amax() <= 1e-7 * (1.0 + expect.amax()), "{name} / {label}, λ = {lambda}");
            }
        }
    }
}

#[test]
fn riemannian_curvature_is_self_adjoint() {
    let mut r = rng(3);
    for name in ["su2", "heisenberg3", "sl2r", "e2"] {
        for (label, s) in metric_sprays(name).into_iter().filter(|(_, s)| s.is_riemannian()) {
            let y = gaussian(&mut r, 3);
            let g = s.fundamental_tensor(&y).unwrap();
            let perp = |x: AlgVec| {
                let c = g.inner(&x, &y) / g.inner(&y, &y);
                x - &y * c
            };
            let (u, v) = (perp(gaussian(&mut r, 3)), perp(gaussian(&mut r, 3)));
            let a = g.inner(&riemann(&s, &y, &u).unwrap(), &v);
            let b = g.inner(&riemann(&s, &y, &v).unwrap(), &u);
            assert!((a - b).abs() < 1e-7 * (1.0 + a.abs()), "{name} / {label}: {a} vs {b}");
        }
    }
}

#[test]
fn flag_curvature_matches_milnor_formula() {
    let mut r = rng(4);
    let general = DMatrix::from_row_slice(3, 3, &[1.5, -0.2, 0.1, -0.2, 1.0, 0.3, 0.1, 0.3, 2.5]);
    for name in ["su2", "heisenberg3", "sl2r", "e2"] {
        for q in [DMatrix::identity(3, 3), stretched(3), general.clone()] {
            let s = SprayField::riemannian(alg(name), q.clone()).unwrap();
            for _ in 0..10 {
                let (x, y) = flag(&mut r, 3);
                let k = flag_curvature(&s, &x, &y).unwrap();
                let o = milnor_sectional(s.algebra(), &q, &x, &y);
                assert!((k - o).abs() <= 1e-6 * o.abs().max(1.0), "{name}: {k} vs {o}");
            }
        }
    }
}

#[test]
fn algebraic_and_transport_routes_agree_on_the_catalog() {
    let mut r = rng(5);
    let cfg = IntegratorConfig::dopri(1e-10, 1e-10);
    for name in CATALOG {
        for (label, s) in all_sprays(name) {
            for _ in 0..20 {
                let (y, w) = flag(&mut r, s.dim());
                let rep = curvature::riemann_via_transport(&s, &y, &w, 0.0, &cfg).unwrap();
                let alg = riemann(&s, &rep.y, &rep.w).unwrap();
                let gap = (&rep.r - &alg).norm();
                assert!(gap <= 1e-5 * (1.0 + alg.norm()), "{name} / {label}: gap {gap:.3e}");
            }
        }
    }
}

#[test]
fn transport_route_at_a_later_probe_time() {
    let s = SprayField::riemannian(alg("su2"), stretched(3)).unwrap();
    let cfg = IntegratorConfig::dopri(1e-11, 1e-11);
    let rep = curvature::riemann_via_transport(&s, &AlgVec::from_row_slice(&[0.8, -0.3, 0.6]), &AlgVec::from_row_slice(&[0.1, 1.0, 0.2]), 1.5, &cfg)
        .unwrap();
    let alg = riemann(&s, &rep.y, &rep.w).unwrap();
    assert!((&rep.r - &alg).norm() <= 1e-5 * (1.0 + alg.norm()));
    assert!(rep.flag.is_some());
}

#[test]
fn non_metric_sprays_agree_on_both_routes() {
    // η(y) = (y1⁴ / (y1² + y2²)) e2 on the abelian plane
    let m = |e: [u32; 2], c: f64| Monomial { exponents: e.to_vec(), coefficient: c };
    let field = RationalField {
        numerators: vec![vec![], vec![m([4, 0], 1.0)]],
        denominator: Some(vec![m([2, 0], 1.0), m([0, 2], 1.0)]),
    };
    let s = SprayField::custom(alg("abelian_2"), field).unwrap();
    let cfg = IntegratorConfig::dopri(1e-11, 1e-11);
    let (y, w) = (AlgVec::from_row_slice(&[0.9, 0.4]), AlgVec::from_row_slice(&[-0.3, 1.0]));
    let rep = curvature::riemann_via_transport(&s, &y, &w, 0.0, &cfg).unwrap();
    let alg = riemann(&s, &y, &w).unwrap();
    assert!((&rep.r - &alg).norm() <= 1e-5 * (1.0 + alg.norm()));
    assert!(alg.norm() > 1e-3);
}

#[test]
fn landsberg_routes_agree() {
    let cfg = IntegratorConfig::dopri(1e-12, 1e-12);
    let s = SprayField::randers(alg("heisenberg3"), DMatrix::identity(3, 3), e(3, 0) * 0.3).unwrap();
    let a = landsberg(&s, &e(3, 1), &e(3, 0)).unwrap();
    let b = landsberg_via_transport(&s, &e(3, 1), &e(3, 0), &cfg).unwrap();
    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    let flat = SprayField::randers(alg("heisenberg3"), DMatrix::identity(3, 3), AlgVec::zeros(3)).unwrap();
    assert!(landsberg(&flat, &e(3, 1), &e(3, 0)).unwrap().abs() < 1e-12);
}
