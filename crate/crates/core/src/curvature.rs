//! Riemann, flag, S- and Landsberg curvature of a left invariant spray.

use crate::error::{Error, Result};
use crate::integrator::{self, IntegratorConfig, OdeStatus};
use crate::jet::{self, Jet};
use crate::lie_algebra::AlgVec;
use crate::numdiff;
use crate::spray::{self, DiffMode, SprayField};

/// Flag denominators below this are rejected.
pub const FLAG_DENOM_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMethod {
    /// Pointwise four-term formula in `N`, `DN` and the bracket.
    Algebraic,
    /// Double bracket with `η` along a geodesic and a parallel field.
    TransportDoubleBracket,
}

impl CurvatureMethod {
    pub fn tag(self) -> &'static str {
        match self {
            CurvatureMethod::Algebraic => "algebraic",
            CurvatureMethod::TransportDoubleBracket => "transport_double_bracket",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub y: AlgVec,
    pub w: AlgVec,
    pub r: AlgVec,
    pub flag: Option<f64>,
    pub method: CurvatureMethod,
}

/// `d/dt N(y + t η(y), w)` at `t = 0`.
pub fn dn_direction(s: &SprayField, y: &AlgVec, w: &AlgVec) -> Result<AlgVec> {
    s.check_point(y)?;
    s.algebra().check_dim(w)?;
    if s.is_zero() {
        return Ok(s.algebra().zero());
    }
    let eta = s.eta(y)?;
    match s.diff_mode() {
        DiffMode::Dual => {
            let base = jet::constants(y.as_slice(), 1);
            let p: Vec<Jet> = base
                .iter()
                .zip(eta.iter())
                .map(|(b, &e)| b.perturb(0, &Jet::constant(e, 0)))
                .collect();
            let n = s.connection_jet(&p, &jet::constants(w.as_slice(), 1))?;
            Ok(spray::to_alg(&n.iter().map(|v| v.extract_top(1)).collect::<Vec<_>>()))
        }
        DiffMode::FiniteDifference => {
            numdiff::directional_richardson(|p| s.connection(p, w), y, &eta, s.fd_step(y))
        }
    }
}

/// `R_y(w) = DN(η, y, w) − N(y, N(y, w)) + N(y, [y, w]) − [y, N(y, w)]`.
pub fn riemann(s: &SprayField, y: &AlgVec, w: &AlgVec) -> Result<AlgVec> {
    let alg = s.algebra();
    let n1 = s.connection(y, w)?;
    let yw = alg.bracket_unchecked(y, w);
    Ok(dn_direction(s, y, w)? - s.connection(y, &n1)? + s.connection(y, &yw)? - alg.bracket_unchecked(y, &n1))
}

pub fn riemann_report(s: &SprayField, y: &AlgVec, w: &AlgVec) -> Result<CurvatureReport> {
    let r = riemann(s, y, w)?;
    let flag = if s.is_metric() { flag_from(s, y, w, &r).ok() } else { None };
    Ok(CurvatureReport { y: y.clone(), w: w.clone(), r, flag, method: CurvatureMethod::Algebraic })
}

/// Joint right-hand side for `(y, w)`: geodesic plus linear transport.
fn coupled_rhs(s: &SprayField, x: &AlgVec) -> Result<AlgVec> {
    let n = s.dim();
    let y = x.rows(0, n).into_owned();
    let w = x.rows(n, n).into_owned();
    let dy = -s.eta(&y)?;
    let dw = -(s.connection(&y, &w)? + s.algebra().bracket_unchecked(&y, &w));
    let mut out = AlgVec::zeros(2 * n);
    out.rows_mut(0, n).copy_from(&dy);
    out.rows_mut(n, n).copy_from(&dw);
    Ok(out)
}

fn stack(y: &AlgVec, w: &AlgVec) -> AlgVec {
    let n = y.len();
    let mut x = AlgVec::zeros(2 * n);
    x.rows_mut(0, n).copy_from(y);
    x.rows_mut(n, n).copy_from(w);
    x
}

/// Flows `(y, w)` from time 0 to `t`; returns the endpoint.
fn coupled_flow(s: &SprayField, y0: &AlgVec, w0: &AlgVec, t: f64, cfg: &IntegratorConfig) -> Result<AlgVec> {
    cfg.validate()?;
    let x0 = stack(y0, w0);
    let floor = s.y_floor();
    let n = s.dim();
    let sol = integrator::integrate(|_, x| coupled_rhs(s, x), 0.0, t, &x0, cfg, |x| x.rows(0, n).norm() >= floor);
    match sol.status {
        OdeStatus::Completed => Ok(sol.states.last().unwrap().clone()),
        other => Err(Error::Refused(format!("geodesic did not reach t = {t}: {other:?}"))),
    }
}

/// Transport route to `R`: with `y(t)` a geodesic and `w(t)` parallel along
/// it, `N(t) = w' + Dη(y)w` and `R(t) = −(N' + Dη(y)N)`, derivatives by
/// five-point central differences with step `1e-4` in natural time units.
pub fn riemann_via_transport(
    s: &SprayField,
    y0: &AlgVec,
    w0: &AlgVec,
    t_probe: f64,
    cfg: &IntegratorConfig,
) -> Result<CurvatureReport> {
    s.check_point(y0)?;
    s.algebra().check_dim(w0)?;
    let n = s.dim();
    let h = 1e-4 * (1.0 / y0.norm()).min(1.0);
    let ts = t_probe - 4.0 * h;
    let start = coupled_flow(s, y0, w0, ts, cfg)?;
    let fine = IntegratorConfig::rk4(h);
    let sol = integrator::integrate(|_, x| coupled_rhs(s, x), ts, ts + 8.0 * h, &start, &fine, |_| true);
    if sol.status != OdeStatus::Completed || sol.states.len() != 9 {
        return Err(Error::Refused(format!("stencil integration failed: {:?}", sol.status)));
    }
    let ys: Vec<AlgVec> = sol.states.iter().map(|x| x.rows(0, n).into_owned()).collect();
    let ws: Vec<AlgVec> = sol.states.iter().map(|x| x.rows(n, n).into_owned()).collect();
    let mut ns = Vec::with_capacity(5);
    for k in 2..=6 {
        let dw = numdiff::five_point([&ws[k - 2], &ws[k - 1], &ws[k], &ws[k + 1], &ws[k + 2]], h);
        ns.push(dw + s.d_eta(&ys[k], &ws[k])?);
    }
    let dn = numdiff::five_point([&ns[0], &ns[1], &ns[2], &ns[3], &ns[4]], h);
    let r = -(dn + s.d_eta(&ys[4], &ns[2])?);
    let (y, w) = (ys[4].clone(), ws[4].clone());
    let flag = if s.is_metric() { flag_from(s, &y, &w, &r).ok() } else { None };
    Ok(CurvatureReport { y, w, r, flag, method: CurvatureMethod::TransportDoubleBracket })
}

fn flag_from(s: &SprayField, y: &AlgVec, w: &AlgVec, r: &AlgVec) -> Result<f64> {
    let g = s.fundamental_tensor(y)?;
    let denom = g.inner(y, y) * g.inner(w, w) - g.inner(y, w).powi(2);
    if !(denom >= FLAG_DENOM_MIN) {
        return Err(Error::DegenerateFlag(denom));
    }
    Ok(g.inner(r, w) / denom)
}

/// `K(y, w) = g_y(R_y(w), w) / (g_y(y,y) g_y(w,w) − g_y(y,w)²)`.
pub fn flag_curvature(s: &SprayField, y: &AlgVec, w: &AlgVec) -> Result<f64> {
    if !s.is_metric() {
        return Err(Error::Unsupported("flag curvature needs a metric spray"));
    }
    let r = riemann(s, y, w)?;
    flag_from(s, y, w, &r)
}

/// `S(y) = Tr N(y, ·) + Tr ad(y)`.
pub fn s_curvature(s: &SprayField, y: &AlgVec) -> Result<f64> {
    s.check_point(y)?;
    let alg = s.algebra();
    let mut tr = alg.ad_matrix(y)?.trace();
    for i in 0..s.dim() {
        tr += s.connection(y, &alg.basis(i))?[i];
    }
    Ok(tr)
}

/// `L_y(w,w,w) = 3 C_y(w, w, [w, y] − N(y, w)) − C′_y(w, w, w, η(y))`.
pub fn landsberg(s: &SprayField, y: &AlgVec, w: &AlgVec) -> Result<f64> {
    if !s.is_metric() {
        return Err(Error::Unsupported("Landsberg curvature needs a metric spray"));
    }
    s.check_point(y)?;
    s.algebra().check_dim(w)?;
    if s.is_riemannian() {
        return Ok(0.0);
    }
    let v = s.algebra().bracket_unchecked(w, y) - s.connection(y, w)?;
    let eta = s.eta(y)?;
    Ok(3.0 * s.cartan(y, w, w, &v)? - s.cartan_derivative(y, w, w, w, &eta)?)
}

/// `d/dt C_{y(t)}(w(t), w(t), w(t))` at `t = 0` along the geodesic from `y0`
/// and the parallel field from `w0`, by five-point central differences with
/// step `1e-3`.
pub fn landsberg_via_transport(s: &SprayField, y0: &AlgVec, w0: &AlgVec, cfg: &IntegratorConfig) -> Result<f64> {
    if !s.is_metric() {
        return Err(Error::Unsupported("Landsberg curvature needs a metric spray"));
    }
    s.check_point(y0)?;
    s.algebra().check_dim(w0)?;
    let n = s.dim();
    let h = 1e-3;
    let mut c = Vec::with_capacity(5);
    for k in -2..=2 {
        let x = if k == 0 { stack(y0, w0) } else { coupled_flow(s, y0, w0, k as f64 * h, cfg)? };
        let y = x.rows(0, n).into_owned();
        let w = x.rows(n, n).into_owned();
        c.push(AlgVec::from_element(1, s.cartan(&y, &w, &w, &w)?));
    }
    Ok(numdiff::five_point([&c[0], &c[1], &c[2], &c[3], &c[4]], h)[0])
}
