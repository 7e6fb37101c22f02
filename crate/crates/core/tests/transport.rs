mod common;

use common::*;
use nalgebra::DMatrix;
use spraylab_core::transport::{self, CurveSpec};
use spraylab_core::{AlgVec, IntegratorConfig, SprayField};

fn rigid_body() -> SprayField {
    SprayField::riemannian(alg("su2"), stretched(3)).unwrap()
}

#[test]
fn rigid_body_geodesic_matches_fine_rk4_and_conserves() {
    let s = rigid_body();
    let q = stretched(3);
    let y0 = AlgVec::from_row_slice(&[1.0, 0.5, 0.25]);
    let traj = transport::geodesic_flow(&s, &y0, (0.0, 5.0), &IntegratorConfig::default()).unwrap();
    let fine = transport::geodesic_flow(&s, &y0, (0.0, 5.0), &IntegratorConfig::rk4(1e-3)).unwrap();
    assert!((traj.final_state() - fine.final_state()).amax() < 1e-8);

    let energy = |y: &AlgVec| y.dot(&(&q * y));
    let casimir = |y: &AlgVec| (&q * y).norm_squared();
    let (e0, c0) = (energy(&y0), casimir(&y0));
    for y in traj.states() {
        assert!((energy(y) - e0).abs() < 1e-8 * e0);
        assert!((casimir(y) - c0).abs() < 1e-8 * c0);
    }
    // the velocity itself is not conserved: the third component is fixed only
    // up to the rigid-body precession
    assert!((traj.final_state() - &y0).amax() > 1e-3);
}

#[test]
fn geodesic_velocity_is_linearly_parallel() {
    for (_, s) in metric_sprays("heisenberg3") {
        let y0 = AlgVec::from_row_slice(&[0.4, -1.0, 0.7]);
        let cfg = IntegratorConfig::default();
        let traj = transport::geodesic_flow(&s, &y0, (0.0, 3.0), &cfg).unwrap();
        let w = transport::linear_transport(&s, &traj, &y0, (0.0, 3.0), &cfg).unwrap();
        assert!((w.final_state() - traj.final_state()).amax() < 1e-7);
    }
}

#[test]
fn backward_runs_undo_forward_runs() {
    let s = rigid_body();
    let cfg = IntegratorConfig::default();
    let y0 = AlgVec::from_row_slice(&[0.3, -0.8, 1.1]);
    let fwd = transport::geodesic_flow(&s, &y0, (0.0, 2.0), &cfg).unwrap();
    let back = transport::geodesic_flow(&s, fwd.final_state(), (2.0, 0.0), &cfg).unwrap();
    assert!((back.final_state() - &y0).amax() < 1e-8);
    assert!(back.times().windows(2).all(|p| p[1] < p[0]));

    let w0 = AlgVec::from_row_slice(&[1.0, 0.0, 0.5]);
    let wf = transport::linear_transport(&s, &fwd, &w0, (0.0, 2.0), &cfg).unwrap();
    let wb = transport::linear_transport(&s, &fwd, wf.final_state(), (2.0, 0.0), &cfg).unwrap();
    assert!((wb.final_state() - &w0).amax() < 1e-8);
}

#[test]
fn linear_transport_is_linear() {
    let s = SprayField::randers(alg("sl2r"), DMatrix::identity(3, 3), AlgVec::from_row_slice(&[0.2, 0.0, 0.1])).unwrap();
    let cfg = IntegratorConfig::dopri(1e-12, 1e-12);
    let path = transport::geodesic_flow(&s, &AlgVec::from_row_slice(&[1.0, 0.2, -0.3]), (0.0, 1.5), &cfg).unwrap();
    let mut r = rng(3);
    let (a, b) = (gaussian(&mut r, 3), gaussian(&mut r, 3));
    let run = |w: &AlgVec| transport::linear_transport(&s, &path, w, (0.0, 1.5), &cfg).unwrap().final_state().clone();
    let lhs = run(&(&a * 2.0 - &b));
    let rhs = run(&a) * 2.0 - run(&b);
    assert!((lhs - rhs).amax() < 1e-8);
}

#[test]
fn nonlinear_transport_along_sampled_and_analytic_curves() {
    let s = rigid_body();
    let cfg = IntegratorConfig::default();
    let y0 = AlgVec::from_row_slice(&[1.0, 0.0, 0.0]);
    let w = AlgVec::from_row_slice(&[0.2, -0.4, 0.9]);
    let constant = transport::nonlinear_transport(&s, &CurveSpec::Constant(w.clone()), &y0, (0.0, 2.0), &cfg).unwrap();
    let sampled = CurveSpec::sampled(vec![0.0, 1.0, 2.0], vec![w.clone(), w.clone(), w.clone()]).unwrap();
    let a = transport::nonlinear_transport(&s, &sampled, &y0, (0.0, 2.0), &cfg).unwrap();
    let wc = w.clone();
    let b = transport::nonlinear_transport(&s, &CurveSpec::analytic(move |_| wc.clone()), &y0, (0.0, 2.0), &cfg).unwrap();
    assert!((a.final_state() - constant.final_state()).amax() < 1e-8);
    assert!((b.final_state() - constant.final_state()).amax() < 1e-12);
}

#[test]
fn one_param_flow_is_positively_homogeneous() {
    // N(λy, w) = λ N(y, w), so ρ_t(λ y) = λ ρ_t(y)
    let s = SprayField::randers(alg("su2"), stretched(3), AlgVec::from_row_slice(&[0.1, 0.3, 0.0])).unwrap();
    let cfg = IntegratorConfig::dopri(1e-12, 1e-12);
    let y0 = AlgVec::from_row_slice(&[0.5, 1.0, -0.2]);
    let w = AlgVec::from_row_slice(&[1.0, 0.0, 0.4]);
    let a = transport::one_param_flow(&s, &w, 1.2, &(&y0 * 3.0), &cfg).unwrap();
    let b = transport::one_param_flow(&s, &w, 1.2, &y0, &cfg).unwrap() * 3.0;
    assert!((a - b).amax() < 1e-9);
}

#[test]
fn nonlinear_transport_holds_still_on_a_zero_leg() {
    let s = rigid_body();
    let cfg = IntegratorConfig::dopri(1e-12, 1e-12);
    let y0 = AlgVec::from_row_slice(&[1.0, 0.3, 0.0]);
    let w = AlgVec::from_row_slice(&[0.0, 0.0, 1.0]);
    let legs = CurveSpec::piecewise(vec![(w.clone(), 0.5), (AlgVec::zeros(3), 1.0), (w.clone(), 0.5)]).unwrap();
    let traj = transport::nonlinear_transport(&s, &legs, &y0, (0.0, 2.0), &cfg).unwrap();
    let mid = transport::one_param_flow(&s, &w, 0.5, &y0, &cfg).unwrap();
    assert!((traj.eval(1.0).unwrap() - &mid).amax() < 1e-10);
    let end = transport::one_param_flow(&s, &w, 0.5, &mid, &cfg).unwrap();
    assert!((traj.final_state() - end).amax() < 1e-10);
}
