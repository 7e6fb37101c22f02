//! Algebra-level flows of a left invariant spray.
//!
//! * geodesics: `y' = -η(y)`, with `y(t)` the left logarithmic derivative of
//!   the geodesic through the identity;
//! * linear parallel transport along a curve with velocity data `y(t)`:
//!   `w' + N(y, w) + [y, w] = 0`;
//! * nonlinear parallel transport along a curve with velocity data `w(t)`:
//!   `y' + N(y, w) = 0`, whose constant-`w` case is the flow of `-N(·, w)`.
//!
//! Nonlinear transport also accepts curves with `w(t) = 0` on some interval;
//! the equation stays well defined there (the transported vector is frozen).

use crate::error::{Error, Result};
use crate::integrator::{self, DenseSegment, IntegratorConfig, OdeSolution, OdeStatus};
use crate::lie_algebra::AlgVec;
use crate::spray::SprayField;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    GeodesicVelocity,
    LinearParallel,
    NonlinearParallel,
}

pub type TrajectoryStatus = OdeStatus;

/// Time-sampled solution with dense output between nodes. Times are strictly
/// monotone in the direction of integration (increasing for forward runs).
#[derive(Debug, Clone)]
pub struct Trajectory {
    kind: TrajectoryKind,
    times: Vec<f64>,
    states: Vec<AlgVec>,
    segments: Vec<DenseSegment>,
    status: TrajectoryStatus,
}

impl Trajectory {
    fn from_solution(kind: TrajectoryKind, sol: OdeSolution) -> Self {
        Self { kind, times: sol.times, states: sol.states, segments: sol.segments, status: sol.status }
    }

    fn append(&mut self, sol: OdeSolution) {
        self.times.extend_from_slice(&sol.times[1..]);
        self.states.extend(sol.states.into_iter().skip(1));
        self.segments.extend(sol.segments);
        self.status = sol.status;
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn status(&self) -> &TrajectoryStatus {
        &self.status
    }

    pub fn is_complete(&self) -> bool {
        self.status == OdeStatus::Completed
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[AlgVec] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory has a start node")
    }

    pub fn final_state(&self) -> &AlgVec {
        self.states.last().expect("trajectory has a start node")
    }

    /// Dense-output value at `t`, or `None` outside the covered span.
    pub fn eval(&self, t: f64) -> Option<AlgVec> {
        if self.segments.is_empty() {
            return (t == self.times[0]).then(|| self.states[0].clone());
        }
        integrator::locate(&self.segments, t).map(|s| s.eval(t))
    }
}

/// Algebra-valued velocity data along a curve, for linear transport and
/// group-curve reconstruction.
pub trait VelocityPath: Sync {
    fn velocity(&self, t: f64) -> Option<AlgVec>;

    /// Closed time interval on which `velocity` is defined.
    fn domain(&self) -> (f64, f64);

    /// Times where the data is not smooth; integration is split there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Value on the smooth piece `[a, b]`, using the one-sided limit at its ends.
    fn velocity_on(&self, t: f64, _piece: (f64, f64)) -> Option<AlgVec> {
        self.velocity(t)
    }
}

impl VelocityPath for Trajectory {
    fn velocity(&self, t: f64) -> Option<AlgVec> {
        self.eval(t)
    }

    fn domain(&self) -> (f64, f64) {
        let (a, b) = (self.start_time(), self.end_time());
        (a.min(b), a.max(b))
    }
}

/// A curve on the group encoded by its left logarithmic derivative.
#[derive(Clone)]
pub enum CurveSpec {
    Constant(AlgVec),
    /// Legs `(w_i, Δt_i)` run back to back from `t = 0`.
    Piecewise(Vec<(AlgVec, f64)>),
    /// Linear interpolation through `(times[i], values[i])`.
    Sampled { times: Vec<f64>, values: Vec<AlgVec> },
    Analytic(Arc<dyn Fn(f64) -> AlgVec + Send + Sync>),
}

impl fmt::Debug for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSpec::Constant(w) => f.debug_tuple("Constant").field(w).finish(),
            CurveSpec::Piecewise(l) => f.debug_tuple("Piecewise").field(l).finish(),
            CurveSpec::Sampled { times, values } => {
                f.debug_struct("Sampled").field("times", times).field("values", values).finish()
            }
            CurveSpec::Analytic(_) => f.write_str("Analytic(..)"),
        }
    }
}

impl CurveSpec {
    pub fn piecewise(legs: Vec<(AlgVec, f64)>) -> Result<Self> {
        if legs.is_empty() || legs.iter().any(|(_, dt)| !(*dt > 0.0)) {
            return Err(Error::InvalidArgument("piecewise legs need positive durations".into()));
        }
        Ok(CurveSpec::Piecewise(legs))
    }

    pub fn sampled(times: Vec<f64>, values: Vec<AlgVec>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidArgument("sampled curve needs ≥ 2 matching samples".into()));
        }
        if times.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidArgument("sample times must increase strictly".into()));
        }
        Ok(CurveSpec::Sampled { times, values })
    }

    pub fn analytic(f: impl Fn(f64) -> AlgVec + Send + Sync + 'static) -> Self {
        CurveSpec::Analytic(Arc::new(f))
    }

    /// Time-reversed curve over `[0, T]` for piecewise legs: the legs are
    /// replayed backwards with negated velocities.
    pub fn reversed_legs(legs: &[(AlgVec, f64)]) -> Vec<(AlgVec, f64)> {
        legs.iter().rev().map(|(w, dt)| (-w, *dt)).collect()
    }

    fn leg_at(legs: &[(AlgVec, f64)], t: f64) -> Option<&AlgVec> {
        let mut start = 0.0;
        for (w, dt) in legs {
            if t <= start + dt {
                return (t >= start).then_some(w);
            }
            start += dt;
        }
        None
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            CurveSpec::Constant(w) => Some(w.len()),
            CurveSpec::Piecewise(l) => l.first().map(|(w, _)| w.len()),
            CurveSpec::Sampled { values, .. } => values.first().map(AlgVec::len),
            CurveSpec::Analytic(_) => None,
        }
    }
}

impl VelocityPath for CurveSpec {
    fn velocity(&self, t: f64) -> Option<AlgVec> {
        match self {
            CurveSpec::Constant(w) => Some(w.clone()),
            CurveSpec::Piecewise(legs) => Self::leg_at(legs, t).cloned(),
            CurveSpec::Sampled { times, values } => {
                if t < times[0] || t > *times.last().unwrap() {
                    return None;
                }
                let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[i - 1], times[i]);
                let s = (t - t0) / (t1 - t0);
                Some(&values[i - 1] * (1.0 - s) + &values[i] * s)
            }
            CurveSpec::Analytic(f) => Some(f(t)),
        }
    }

    fn domain(&self) -> (f64, f64) {
        match self {
            CurveSpec::Constant(_) | CurveSpec::Analytic(_) => (f64::NEG_INFINITY, f64::INFINITY),
            CurveSpec::Piecewise(legs) => (0.0, legs.iter().map(|(_, dt)| dt).sum()),
            CurveSpec::Sampled { times, .. } => (times[0], *times.last().unwrap()),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            CurveSpec::Piecewise(legs) => legs
                .iter()
                .scan(0.0, |acc, (_, dt)| {
                    *acc += dt;
                    Some(*acc)
                })
                .collect(),
            CurveSpec::Sampled { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }

    fn velocity_on(&self, t: f64, piece: (f64, f64)) -> Option<AlgVec> {
        match self {
            CurveSpec::Piecewise(legs) => Self::leg_at(legs, 0.5 * (piece.0 + piece.1)).cloned(),
            _ => self.velocity(t),
        }
    }
}

/// Splits `[t0, t1]` (either direction) at the interior breakpoints.
fn pieces(t0: f64, t1: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    let scale = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo + scale && b < hi - scale).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    if t1 < t0 {
        cuts.reverse();
    }
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut a = t0;
    for c in cuts {
        out.push((a, c));
        a = c;
    }
    out.push((a, t1));
    out
}

fn covers(path: &dyn VelocityPath, t0: f64, t1: f64) -> Result<()> {
    let (a, b) = path.domain();
    let slack = 1e-12 * t0.abs().max(t1.abs()).max(1.0);
    if t0.min(t1) < a - slack || t0.max(t1) > b + slack {
        return Err(Error::SpanMismatch { t0, t1 });
    }
    Ok(())
}

/// Runs an ODE piece by piece and turns terminal statuses into the crate's
/// error contract: domain exit stays a status, hard failures become errors.
fn run_pieces<F>(
    kind: TrajectoryKind,
    x0: &AlgVec,
    span: (f64, f64),
    breaks: &[f64],
    cfg: &IntegratorConfig,
    floor: Option<f64>,
    mut rhs: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &AlgVec, (f64, f64)) -> Result<AlgVec>,
{
    cfg.validate()?;
    let admissible = |x: &AlgVec| floor.is_none_or(|f| x.norm() >= f);
    let mut traj: Option<Trajectory> = None;
    let mut x = x0.clone();
    for piece in pieces(span.0, span.1, breaks) {
        let sol = integrator::integrate(|t, s| rhs(t, s, piece), piece.0, piece.1, &x, cfg, admissible);
        x = sol.states.last().expect("solution has a start node").clone();
        match traj.as_mut() {
            None => traj = Some(Trajectory::from_solution(kind, sol)),
            Some(t) => t.append(sol),
        }
        if !traj.as_ref().unwrap().is_complete() {
            break;
        }
    }
    let traj = traj.expect("at least one piece");
    match traj.status.clone() {
        OdeStatus::Completed | OdeStatus::DomainExit => Ok(traj),
        OdeStatus::MaxSteps => Err(Error::Integration {
            reason: format!("max_steps = {} exceeded", cfg.max_steps),
            partial: Box::new(traj),
        }),
        OdeStatus::StepFailure(reason) => Err(Error::Integration { reason, partial: Box::new(traj) }),
    }
}

/// Integral curve of `-η` from `y0` over `t_span`.
pub fn geodesic_flow(s: &SprayField, y0: &AlgVec, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory> {
    s.check_point(y0)?;
    run_pieces(
        TrajectoryKind::GeodesicVelocity,
        y0,
        t_span,
        &[],
        cfg,
        Some(s.y_floor()),
        |_, y, _| Ok(-s.eta(y)?),
    )
}

/// Solves `w' + N(y(t), w) + [y(t), w] = 0` along the velocity data `path`.
pub fn linear_transport(
    s: &SprayField,
    path: &dyn VelocityPath,
    w0: &AlgVec,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    s.algebra().check_dim(w0)?;
    covers(path, t_span.0, t_span.1)?;
    let alg = s.algebra();
    run_pieces(
        TrajectoryKind::LinearParallel,
        w0,
        t_span,
        &path.breakpoints(),
        cfg,
        None,
        |t, w, piece| {
            let y = path
                .velocity_on(t, piece)
                .ok_or(Error::SpanMismatch { t0: t_span.0, t1: t_span.1 })?;
            alg.check_dim(&y)?;
            Ok(-(s.connection(&y, w)? + alg.bracket_unchecked(&y, w)))
        },
    )
}

/// Solves `y' + N(y, w(t)) = 0` along `curve`.
pub fn nonlinear_transport(
    s: &SprayField,
    curve: &CurveSpec,
    y0: &AlgVec,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    s.check_point(y0)?;
    covers(curve, t_span.0, t_span.1)?;
    if let Some(d) = curve.dim() {
        if d != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), got: d });
        }
    }
    run_pieces(
        TrajectoryKind::NonlinearParallel,
        y0,
        t_span,
        &curve.breakpoints(),
        cfg,
        Some(s.y_floor()),
        |t, y, piece| {
            let w = curve
                .velocity_on(t, piece)
                .ok_or(Error::SpanMismatch { t0: t_span.0, t1: t_span.1 })?;
            Ok(-s.connection(y, &w)?)
        },
    )
}

fn endpoint(traj: Trajectory) -> Result<AlgVec> {
    if traj.is_complete() {
        Ok(traj.final_state().clone())
    } else {
        Err(Error::DomainExit { t: traj.end_time(), partial: Box::new(traj) })
    }
}

/// `ρ_t(y0)` for the flow of `-N(·, w)`.
pub fn one_param_flow(s: &SprayField, w: &AlgVec, t: f64, y0: &AlgVec, cfg: &IntegratorConfig) -> Result<AlgVec> {
    s.algebra().check_dim(w)?;
    endpoint(nonlinear_transport(s, &CurveSpec::Constant(w.clone()), y0, (0.0, t), cfg)?)
}

/// Composition of the flows `ρ^{w_i}_{Δt_i}`, first leg applied first.
pub fn loop_transport(s: &SprayField, legs: &[(AlgVec, f64)], y0: &AlgVec, cfg: &IntegratorConfig) -> Result<AlgVec> {
    if legs.iter().any(|(_, dt)| !(*dt > 0.0)) {
        return Err(Error::InvalidArgument("loop legs need positive durations".into()));
    }
    let mut y = y0.clone();
    for (w, dt) in legs {
        y = one_param_flow(s, w, *dt, &y, cfg)?;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_algebra::LieAlgebra;
    use nalgebra::{dvector, DMatrix};

    fn su2() -> Arc<LieAlgebra> {
        Arc::new(LieAlgebra::catalog("su2").unwrap())
    }

    fn rotation(t: f64, scale: f64) -> AlgVec {
        dvector![(t / 2.0).cos(), -(t / 2.0).sin(), 0.0] * scale
    }

    #[test]
    fn zero_spray_geodesic_is_constant() {
        let s = SprayField::zero(su2());
        let y0 = dvector![0.3, -0.2, 1.0];
        let traj = geodesic_flow(&s, &y0, (0.0, 5.0), &IntegratorConfig::default()).unwrap();
        assert!(traj.is_complete());
        assert_eq!(traj.kind(), TrajectoryKind::GeodesicVelocity);
        assert!(traj.states().iter().all(|y| (y - &y0).amax() == 0.0));
    }

    #[test]
    fn abelian_riemannian_geodesic_is_constant() {
        let a = Arc::new(LieAlgebra::catalog("abelian_3").unwrap());
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]);
        let s = SprayField::riemannian(a, q).unwrap();
        let y0 = dvector![1.0, 2.0, -1.0];
        let traj = geodesic_flow(&s, &y0, (0.0, 3.0), &IntegratorConfig::default()).unwrap();
        assert!((traj.final_state() - &y0).amax() == 0.0);
    }

    #[test]
    fn linear_transport_closed_form_on_su2() {
        let s = SprayField::zero(su2());
        let path = CurveSpec::Constant(dvector![0.0, 0.0, 1.0]);
        let traj = linear_transport(&s, &path, &dvector![1.0, 0.0, 0.0], (0.0, 4.0), &IntegratorConfig::default())
            .unwrap();
        for (t, w) in traj.times().iter().zip(traj.states()) {
            assert!((w - rotation(*t, 1.0)).amax() < 1e-9);
        }
    }

    #[test]
    fn nonlinear_transport_closed_form_and_scaling() {
        let s = SprayField::zero(su2());
        let curve = CurveSpec::Constant(dvector![0.0, 0.0, 1.0]);
        let cfg = IntegratorConfig::default();
        let a = nonlinear_transport(&s, &curve, &dvector![1.0, 0.0, 0.0], (0.0, 3.0), &cfg).unwrap();
        assert!((a.final_state() - rotation(3.0, 1.0)).amax() < 1e-9);
        let b = nonlinear_transport(&s, &curve, &dvector![2.0, 0.0, 0.0], (0.0, 3.0), &cfg).unwrap();
        assert!((b.final_state() - rotation(3.0, 2.0)).amax() < 2e-9);
        let held = nonlinear_transport(&s, &CurveSpec::Constant(AlgVec::zeros(3)), &dvector![1.0, 2.0, 3.0], (0.0, 3.0), &cfg)
            .unwrap();
        assert_eq!(held.final_state(), &dvector![1.0, 2.0, 3.0]);
    }

    #[test]
    fn one_param_flow_identity_and_closed_form() {
        let s = SprayField::zero(su2());
        let cfg = IntegratorConfig::default();
        let y0 = dvector![0.2, 0.4, -0.9];
        assert_eq!(one_param_flow(&s, &AlgVec::zeros(3), 2.0, &y0, &cfg).unwrap(), y0);
        let y = one_param_flow(&s, &dvector![0.0, 0.0, 1.0], 1.7, &dvector![1.0, 0.0, 0.0], &cfg).unwrap();
        assert!((y - rotation(1.7, 1.0)).amax() < 1e-9);
    }

    #[test]
    fn loop_single_leg_and_abelian() {
        let s = SprayField::riemannian(su2(), DMatrix::from_diagonal(&dvector![1.0, 1.0, 2.0])).unwrap();
        let cfg = IntegratorConfig::default();
        let y0 = dvector![0.5, -0.3, 0.8];
        let w = dvector![0.1, 0.7, 0.2];
        let single = loop_transport(&s, &[(w.clone(), 1.3)], &y0, &cfg).unwrap();
        assert_eq!(single, one_param_flow(&s, &w, 1.3, &y0, &cfg).unwrap());

        let a = SprayField::zero(Arc::new(LieAlgebra::catalog("abelian_2").unwrap()));
        let legs = vec![(dvector![1.0, 0.0], 0.5), (dvector![0.0, 1.0], 0.5), (dvector![-1.0, 0.0], 0.5)];
        assert_eq!(loop_transport(&a, &legs, &dvector![0.3, 0.4], &cfg).unwrap(), dvector![0.3, 0.4]);
        assert!(loop_transport(&a, &[(dvector![1.0, 0.0], 0.0)], &dvector![0.3, 0.4], &cfg).is_err());
    }

    #[test]
    fn piecewise_curve_splits_at_corners() {
        let s = SprayField::zero(su2());
        let legs = vec![(dvector![0.0, 0.0, 1.0], 1.0), (dvector![0.0, 0.0, -1.0], 1.0)];
        let curve = CurveSpec::piecewise(legs).unwrap();
        let traj = nonlinear_transport(&s, &curve, &dvector![1.0, 0.0, 0.0], (0.0, 2.0), &IntegratorConfig::default())
            .unwrap();
        assert!(traj.times().iter().any(|&t| t == 1.0));
        assert!((traj.final_state() - dvector![1.0, 0.0, 0.0]).amax() < 1e-9);
    }

    #[test]
    fn span_and_dimension_checks() {
        let s = SprayField::zero(su2());
        let curve = CurveSpec::piecewise(vec![(dvector![0.0, 0.0, 1.0], 1.0)]).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            nonlinear_transport(&s, &curve, &dvector![1.0, 0.0, 0.0], (0.0, 2.0), &cfg),
            Err(Error::SpanMismatch { .. })
        ));
        assert!(matches!(
            nonlinear_transport(&s, &CurveSpec::Constant(dvector![1.0, 0.0]), &dvector![1.0, 0.0, 0.0], (0.0, 1.0), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            geodesic_flow(&s, &dvector![0.0, 0.0, 0.0], (0.0, 1.0), &cfg),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn domain_exit_is_a_status_with_partial_data() {
        // η(y) = y1² e1 on ℝ²: y1' = -y1² from y1 = -1 blows up at t = 1;
        // from y1 = 1 it decays like 1/(1+t) and never exits. Use a custom
        // floor to force an exit instead.
        let a = Arc::new(LieAlgebra::catalog("abelian_2").unwrap());
        let mut t = vec![0.0; 8];
        t[0] = 1.0;
        let s = SprayField::quadratic(a, t).unwrap().with_y_floor(0.25);
        let traj = geodesic_flow(&s, &dvector![1.0, 0.0], (0.0, 10.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.status(), &OdeStatus::DomainExit);
        // y1(t) = 1/(1+t) reaches 0.25 at t = 3
        assert!((traj.end_time() - 3.0).abs() < 1e-6);
        assert!(traj.final_state().norm() >= 0.25);

        let err = one_param_flow(&s, &dvector![1.0, 0.0], 1.0, &dvector![0.1, 0.0], &IntegratorConfig::default());
        assert!(matches!(err, Err(Error::Domain { .. })));
    }

    #[test]
    fn max_steps_error_carries_partial_trajectory() {
        let s = SprayField::riemannian(su2(), DMatrix::from_diagonal(&dvector![1.0, 1.0, 2.0])).unwrap();
        let cfg = IntegratorConfig { max_steps: 2, ..IntegratorConfig::default() };
        match geodesic_flow(&s, &dvector![1.0, 0.5, 0.25], (0.0, 50.0), &cfg) {
            Err(Error::Integration { partial, .. }) => assert!(partial.len() >= 2),
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn sampled_curve_interpolates_linearly() {
        let c = CurveSpec::sampled(vec![0.0, 1.0, 3.0], vec![dvector![0.0], dvector![2.0], dvector![0.0]]).unwrap();
        assert_eq!(c.velocity(0.5).unwrap(), dvector![1.0]);
        assert_eq!(c.velocity(2.0).unwrap(), dvector![1.0]);
        assert!(c.velocity(3.5).is_none());
        assert!(CurveSpec::sampled(vec![0.0, 0.0], vec![dvector![0.0], dvector![1.0]]).is_err());
    }
}
