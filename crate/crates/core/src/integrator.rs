//! Fixed-step RK4 and adaptive Dormand–Prince 5(4) with dense output.
//!
//! Both integrators run in either time direction. Accepted steps are kept as
//! [`DenseSegment`]s so callers can evaluate the solution between nodes: RK4
//! steps carry a cubic Hermite interpolant, Dormand–Prince steps carry the
//! method's own fourth-order continuous extension.

use crate::error::{Error, Result};
use nalgebra::DVector;

type State = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4Fixed,
    DopriAdaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step for `Rk4Fixed`; ignored by the adaptive method.
    pub step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::DopriAdaptive,
            step: 1e-2,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self { method: Method::Rk4Fixed, step, ..Self::default() }
    }

    pub fn dopri(abs_tol: f64, rel_tol: f64) -> Self {
        Self { method: Method::DopriAdaptive, abs_tol, rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match self.method {
            Method::Rk4Fixed => positive(self.step),
            Method::DopriAdaptive => positive(self.abs_tol) && positive(self.rel_tol),
        };
        if !ok || self.max_steps == 0 {
            return Err(Error::InvalidArgument(
                "integrator step, tolerances and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Interpolant over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub enum DenseSegment {
    Hermite { t0: f64, h: f64, y0: State, y1: State, f0: State, f1: State },
    Dopri { t0: f64, h: f64, r: [State; 5] },
}

impl DenseSegment {
    pub fn start(&self) -> f64 {
        match self {
            DenseSegment::Hermite { t0, .. } | DenseSegment::Dopri { t0, .. } => *t0,
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            DenseSegment::Hermite { t0, h, .. } | DenseSegment::Dopri { t0, h, .. } => t0 + h,
        }
    }

    pub fn eval(&self, t: f64) -> State {
        match self {
            DenseSegment::Hermite { t0, h, y0, y1, f0, f1 } => {
                let s = (t - t0) / h;
                let s2 = s * s;
                let s3 = s2 * s;
                y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                    + f0 * ((s3 - 2.0 * s2 + s) * h)
                    + y1 * (-2.0 * s3 + 3.0 * s2)
                    + f1 * ((s3 - s2) * h)
            }
            DenseSegment::Dopri { t0, h, r } => {
                let s = (t - t0) / h;
                let s1 = 1.0 - s;
                &r[0] + (&r[1] + (&r[2] + (&r[3] + &r[4] * s1) * s) * s1) * s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeStatus {
    Completed,
    /// The state left the admissible domain; the solution stops at the last
    /// admissible node.
    DomainExit,
    MaxSteps,
    StepFailure(String),
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub segments: Vec<DenseSegment>,
    pub status: OdeStatus,
}

impl OdeSolution {
    fn start(t0: f64, x0: &State) -> Self {
        Self { times: vec![t0], states: vec![x0.clone()], segments: Vec::new(), status: OdeStatus::Completed }
    }

    fn push(&mut self, t: f64, x: State, seg: DenseSegment) {
        self.times.push(t);
        self.states.push(x);
        self.segments.push(seg);
    }
}

/// Outcome of one right-hand-side evaluation that the integrator can act on.
enum RhsFailure {
    Domain,
    Other(String),
}

fn classify(e: Error) -> RhsFailure {
    match e {
        Error::Domain { .. } => RhsFailure::Domain,
        other => RhsFailure::Other(other.to_string()),
    }
}

/// Integrates `x' = rhs(t, x)` from `t0` to `t1`. `admissible` is checked on
/// every accepted state; a `false` ends the run with [`OdeStatus::DomainExit`].
pub fn integrate<F, A>(mut rhs: F, t0: f64, t1: f64, x0: &State, cfg: &IntegratorConfig, admissible: A) -> OdeSolution
where
    F: FnMut(f64, &State) -> Result<State>,
    A: Fn(&State) -> bool,
{
    let mut sol = OdeSolution::start(t0, x0);
    if t1 == t0 {
        return sol;
    }
    let f0 = match rhs(t0, x0) {
        Ok(f) => f,
        Err(e) => {
            sol.status = match classify(e) {
                RhsFailure::Domain => OdeStatus::DomainExit,
                RhsFailure::Other(m) => OdeStatus::StepFailure(m),
            };
            return sol;
        }
    };
    match cfg.method {
        Method::Rk4Fixed => rk4(&mut rhs, t0, t1, f0, cfg, &admissible, sol),
        Method::DopriAdaptive => dopri(&mut rhs, t0, t1, f0, cfg, &admissible, sol),
    }
}

fn rk4<F, A>(rhs: &mut F, t0: f64, t1: f64, mut f: State, cfg: &IntegratorConfig, admissible: &A, mut sol: OdeSolution) -> OdeSolution
where
    F: FnMut(f64, &State) -> Result<State>,
    A: Fn(&State) -> bool,
{
    let span = t1 - t0;
    let n = ((span.abs() / cfg.step) - 1e-9).ceil().max(1.0) as usize;
    if n > cfg.max_steps {
        sol.status = OdeStatus::MaxSteps;
        return sol;
    }
    let h = span / n as f64;
    let mut x = sol.states[0].clone();
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let t_next = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
        let step = (|| -> Result<(State, State)> {
            let k1 = &f;
            let k2 = rhs(t + 0.5 * h, &(&x + k1 * (0.5 * h)))?;
            let k3 = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)))?;
            let k4 = rhs(t + h, &(&x + &k3 * h))?;
            let x_new = &x + (k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
            let f_new = rhs(t_next, &x_new)?;
            Ok((x_new, f_new))
        })();
        let (x_new, f_new) = match step {
            Ok(v) => v,
            Err(e) => {
                sol.status = match classify(e) {
                    RhsFailure::Domain => OdeStatus::DomainExit,
                    RhsFailure::Other(m) => OdeStatus::StepFailure(m),
                };
                return sol;
            }
        };
        if x_new.iter().any(|v| !v.is_finite()) {
            sol.status = OdeStatus::StepFailure(format!("non-finite state at t = {t_next}"));
            return sol;
        }
        if !admissible(&x_new) {
            sol.status = OdeStatus::DomainExit;
            return sol;
        }
        let seg = DenseSegment::Hermite {
            t0: t,
            h: t_next - t,
            y0: x.clone(),
            y1: x_new.clone(),
            f0: f.clone(),
            f1: f_new.clone(),
        };
        sol.push(t_next, x_new.clone(), seg);
        x = x_new;
        f = f_new;
    }
    sol
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn err_norm(x: &State, x_new: &State, e: &State, cfg: &IntegratorConfig) -> f64 {
    let n = x.len().max(1) as f64;
    let s: f64 = (0..x.len())
        .map(|i| {
            let sc = cfg.abs_tol + cfg.rel_tol * x[i].abs().max(x_new[i].abs());
            (e[i] / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F>(rhs: &mut F, t0: f64, x0: &State, f0: &State, dir: f64, cfg: &IntegratorConfig) -> f64
where
    F: FnMut(f64, &State) -> Result<State>,
{
    let sc = |x: &State, v: &State| {
        let n = x.len().max(1) as f64;
        ((0..x.len())
            .map(|i| (v[i] / (cfg.abs_tol + cfg.rel_tol * x[i].abs())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = sc(x0, x0);
    let d1 = sc(x0, f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let x1 = x0 + f0 * (dir * h0);
    let d2 = match rhs(t0 + dir * h0, &x1) {
        Ok(f1) => sc(x0, &(f1 - f0)) / h0,
        Err(_) => return h0,
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

fn dopri<F, A>(rhs: &mut F, t0: f64, t1: f64, mut k1: State, cfg: &IntegratorConfig, admissible: &A, mut sol: OdeSolution) -> OdeSolution
where
    F: FnMut(f64, &State) -> Result<State>,
    A: Fn(&State) -> bool,
{
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut x = sol.states[0].clone();
    let mut h = initial_step(rhs, t0, &x, &k1, dir, cfg).min((t1 - t0).abs()) * dir;
    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if (t1 - t) * dir <= 0.0 {
            return sol;
        }
        if steps >= cfg.max_steps {
            sol.status = OdeStatus::MaxSteps;
            return sol;
        }
        steps += 1;
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            sol.status = OdeStatus::StepFailure(format!("step size underflow at t = {t}"));
            return sol;
        }
        let stages = (|| -> Result<[State; 7]> {
            let k2 = rhs(t + C2 * h, &(&x + &k1 * (A21 * h)))?;
            let k3 = rhs(t + C3 * h, &(&x + (&k1 * A31 + &k2 * A32) * h))?;
            let k4 = rhs(t + C4 * h, &(&x + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
            let k5 = rhs(t + C5 * h, &(&x + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h))?;
            let k6 = rhs(
                t + h,
                &(&x + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
            )?;
            let x_new = &x + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
            let k7 = rhs(t + h, &x_new)?;
            Ok([x_new, k2, k3, k4, k5, k6, k7])
        })();
        let [x_new, _k2, k3, k4, k5, k6, k7] = match stages {
            Ok(s) => s,
            Err(e) => match classify(e) {
                // a stage stepped outside the slit domain: retry smaller
                RhsFailure::Domain => {
                    h *= 0.25;
                    last_rejected = true;
                    if h.abs() < 1e-12 * t.abs().max(1.0) {
                        sol.status = OdeStatus::DomainExit;
                        return sol;
                    }
                    continue;
                }
                RhsFailure::Other(m) => {
                    sol.status = OdeStatus::StepFailure(m);
                    return sol;
                }
            },
        };
        if x_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            last_rejected = true;
            continue;
        }
        let e = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let err = err_norm(&x, &x_new, &e, cfg);
        let fac = 0.9 * err.max(1e-10).powf(-0.2);
        if err <= 1.0 {
            if !admissible(&x_new) {
                h *= 0.25;
                last_rejected = true;
                if h.abs() < 1e-12 * t.abs().max(1.0) {
                    sol.status = OdeStatus::DomainExit;
                    return sol;
                }
                continue;
            }
            let r1 = &x_new - &x;
            let r2 = &k1 * h - &r1;
            let r3 = &r1 - &k7 * h - &r2;
            let r4 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
            let t_new = if (t + h - t1).abs() <= 1e-15 * t1.abs().max(1.0) { t1 } else { t + h };
            let seg = DenseSegment::Dopri { t0: t, h: t_new - t, r: [x.clone(), r1, r2, r3, r4] };
            sol.push(t_new, x_new.clone(), seg);
            t = t_new;
            x = x_new;
            k1 = k7;
            let grow = if last_rejected { fac.min(1.0) } else { fac.min(10.0) };
            h *= grow.max(0.2);
            last_rejected = false;
        } else {
            h *= fac.clamp(0.2, 1.0);
            last_rejected = true;
        }
    }
}

/// Locates the segment containing `t` in a monotone segment list.
pub fn locate(segments: &[DenseSegment], t: f64) -> Option<&DenseSegment> {
    let first = segments.first()?;
    let last = segments.last()?;
    let (lo, hi) = {
        let (a, b) = (first.start(), last.end());
        (a.min(b), a.max(b))
    };
    let slack = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
    if t < lo - slack || t > hi + slack {
        return None;
    }
    let forward = last.end() >= first.start();
    let idx = segments.partition_point(|s| if forward { s.end() < t } else { s.end() > t });
    Some(&segments[idx.min(segments.len() - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn rotation(_: f64, x: &State) -> Result<State> {
        Ok(dvector![-x[1], x[0]])
    }

    #[test]
    fn dopri_solves_rotation_to_tolerance() {
        let sol = integrate(rotation, 0.0, 10.0, &dvector![1.0, 0.0], &IntegratorConfig::default(), |_| true);
        assert_eq!(sol.status, OdeStatus::Completed);
        let x = sol.states.last().unwrap();
        assert!((x - dvector![10f64.cos(), 10f64.sin()]).amax() < 1e-8);
        assert_eq!(*sol.times.last().unwrap(), 10.0);
    }

    #[test]
    fn dense_output_is_accurate_between_nodes() {
        let sol = integrate(rotation, 0.0, 3.0, &dvector![1.0, 0.0], &IntegratorConfig::default(), |_| true);
        for k in 0..100 {
            let t = 0.0303 * k as f64;
            let x = locate(&sol.segments, t).unwrap().eval(t);
            assert!((x - dvector![t.cos(), t.sin()]).amax() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn backward_integration() {
        let sol = integrate(rotation, 0.0, -2.0, &dvector![1.0, 0.0], &IntegratorConfig::default(), |_| true);
        let x = sol.states.last().unwrap();
        assert!((x - dvector![2f64.cos(), -(2f64.sin())]).amax() < 1e-9);
        let mid = locate(&sol.segments, -1.3).unwrap().eval(-1.3);
        assert!((mid - dvector![1.3f64.cos(), -(1.3f64.sin())]).amax() < 1e-9);

        let sol = integrate(rotation, 0.0, -2.0, &dvector![1.0, 0.0], &IntegratorConfig::rk4(1e-3), |_| true);
        let mid = locate(&sol.segments, -1.3).unwrap().eval(-1.3);
        assert!((mid - dvector![1.3f64.cos(), -(1.3f64.sin())]).amax() < 1e-9);
    }

    #[test]
    fn rk4_lands_on_endpoint_and_is_fourth_order() {
        let err = |h: f64| {
            let sol = integrate(rotation, 0.0, 1.0, &dvector![1.0, 0.0], &IntegratorConfig::rk4(h), |_| true);
            assert_eq!(*sol.times.last().unwrap(), 1.0);
            (sol.states.last().unwrap() - dvector![1f64.cos(), 1f64.sin()]).norm()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio.log2() - 4.0).abs() < 0.2, "order {}", ratio.log2());
    }

    #[test]
    fn max_steps_and_domain_exit() {
        let cfg = IntegratorConfig { max_steps: 3, ..IntegratorConfig::default() };
        let sol = integrate(rotation, 0.0, 100.0, &dvector![1.0, 0.0], &cfg, |_| true);
        assert_eq!(sol.status, OdeStatus::MaxSteps);
        assert!(sol.times.len() <= 4);

        // x' = -x decays below the floor 0.1 near t = ln 10
        let sol = integrate(
            |_, x: &State| Ok(-x),
            0.0,
            5.0,
            &dvector![1.0],
            &IntegratorConfig::default(),
            |x| x.norm() >= 0.1,
        );
        assert_eq!(sol.status, OdeStatus::DomainExit);
        let t_last = *sol.times.last().unwrap();
        assert!((t_last - 10f64.ln()).abs() < 1e-6, "{t_last}");
    }

    #[test]
    fn invalid_configs() {
        assert!(IntegratorConfig::rk4(0.0).validate().is_err());
        assert!(IntegratorConfig::dopri(-1.0, 1e-8).validate().is_err());
        assert!(IntegratorConfig::default().validate().is_ok());
    }
}
