//! Curves on matrix groups from their left logarithmic derivative:
//! `C' = C ρ(y(t))`.
//!
//! The matrix ODE is integrated with the general-purpose integrator, so the
//! solution drifts off the group at the level of the tolerance; drift is
//! measured, not corrected.

use crate::error::{Error, Result};
use crate::integrator::{self, IntegratorConfig, OdeStatus};
use crate::lie_algebra::{AlgVec, LieAlgebra};
use crate::spray::SprayField;
use crate::transport::{self, Trajectory, VelocityPath};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct MatrixRep {
    pub m: usize,
    pub rho: Vec<DMatrix<f64>>,
}

impl MatrixRep {
    pub fn new(rho: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = rho.first().map_or(0, DMatrix::nrows);
        if m == 0 || rho.iter().any(|r| r.nrows() != m || r.ncols() != m) {
            return Err(Error::InvalidArgument("representation needs equal square matrices".into()));
        }
        Ok(Self { m, rho })
    }

    /// `ρ(y) = Σ yⁱ ρ_i`.
    pub fn apply(&self, y: &AlgVec) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for (c, r) in y.iter().zip(&self.rho) {
            if *c != 0.0 {
                out += r * *c;
            }
        }
        out
    }

    /// Faithful representation for the catalog algebra `name`.
    pub fn catalog(name: &str) -> Result<Self> {
        let e = |m: usize, i: usize, j: usize| {
            let mut a = DMatrix::zeros(m, m);
            a[(i, j)] = 1.0;
            a
        };
        let rho = match name {
            // ½ × left multiplication by the quaternion units i, j, k on ℝ⁴
            "su2" => {
                let li = DMatrix::from_row_slice(4, 4, &[
                    0., -1., 0., 0., 1., 0., 0., 0., 0., 0., 0., -1., 0., 0., 1., 0.,
                ]);
                let lj = DMatrix::from_row_slice(4, 4, &[
                    0., 0., -1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., -1., 0., 0.,
                ]);
                let lk = DMatrix::from_row_slice(4, 4, &[
                    0., 0., 0., -1., 0., 0., -1., 0., 0., 1., 0., 0., 1., 0., 0., 0.,
                ]);
                vec![li * 0.5, lj * 0.5, lk * 0.5]
            }
            "heisenberg3" => vec![e(3, 0, 1), e(3, 1, 2), e(3, 0, 2)],
            "sl2r" => vec![DMatrix::from_diagonal(&AlgVec::from_row_slice(&[1.0, -1.0])), e(2, 0, 1), e(2, 1, 0)],
            "e2" => vec![e(3, 1, 0) - e(3, 0, 1), e(3, 0, 2), e(3, 1, 2)],
            "solvable2" => vec![e(2, 0, 0), e(2, 0, 1)],
            other => {
                let n = other
                    .strip_prefix("abelian_")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| Error::UnknownCatalog(other.to_string()))?;
                (0..n).map(|i| e(n + 1, i, n)).collect()
            }
        };
        Self::new(rho)
    }
}

/// Largest entry of `ρ([e_i, e_j]) − [ρ_i, ρ_j]` over all basis pairs.
pub fn verify_rep(a: &LieAlgebra, rep: &MatrixRep) -> Result<f64> {
    if rep.rho.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: rep.rho.len() });
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.dim() {
        for j in i + 1..a.dim() {
            let lhs = rep.apply(&a.bracket_unchecked(&a.basis(i), &a.basis(j)));
            let rhs = &rep.rho[i] * &rep.rho[j] - &rep.rho[j] * &rep.rho[i];
            worst = worst.max((lhs - rhs).amax());
        }
    }
    Ok(worst)
}

/// `exp(Δt₁ ρ(w₁)) · exp(Δt₂ ρ(w₂)) ⋯`.
pub fn exp_word(rep: &MatrixRep, word: &[(AlgVec, f64)]) -> DMatrix<f64> {
    word.iter()
        .fold(DMatrix::identity(rep.m, rep.m), |acc, (w, dt)| acc * (rep.apply(w) * *dt).exp())
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl Reconstruction {
    pub fn last(&self) -> &DMatrix<f64> {
        self.matrices.last().expect("reconstruction has a start node")
    }
}

/// Solves `C' = C ρ(y(t))`, `C(t₀) = c0`, over `span`, reporting `C` at `times`.
pub fn reconstruct_along(
    rep: &MatrixRep,
    path: &dyn VelocityPath,
    c0: &DMatrix<f64>,
    span: (f64, f64),
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Reconstruction> {
    cfg.validate()?;
    let m = rep.m;
    if c0.shape() != (m, m) {
        return Err(Error::DimensionMismatch { expected: m, got: c0.nrows() });
    }
    let x0 = AlgVec::from_column_slice(c0.as_slice());
    let sol = integrator::integrate(
        |t, x| {
            let y = path.velocity(t).ok_or(Error::SpanMismatch { t0: span.0, t1: span.1 })?;
            if y.len() != rep.rho.len() {
                return Err(Error::DimensionMismatch { expected: rep.rho.len(), got: y.len() });
            }
            let c = DMatrix::from_column_slice(m, m, x.as_slice());
            Ok(AlgVec::from_column_slice((c * rep.apply(&y)).as_slice()))
        },
        span.0,
        span.1,
        &x0,
        cfg,
        |_| true,
    );
    if sol.status != OdeStatus::Completed {
        return Err(Error::Refused(format!("matrix reconstruction stopped: {:?}", sol.status)));
    }
    let matrices = times
        .iter()
        .map(|&t| {
            let x = if t == span.0 {
                x0.clone()
            } else {
                integrator::locate(&sol.segments, t)
                    .ok_or(Error::SpanMismatch { t0: span.0, t1: span.1 })?
                    .eval(t)
            };
            Ok(DMatrix::from_column_slice(m, m, x.as_slice()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Reconstruction { times: times.to_vec(), matrices })
}

/// `C(t)` at the nodes of `y_traj`, starting from the identity.
pub fn reconstruct_curve(rep: &MatrixRep, y_traj: &Trajectory, cfg: &IntegratorConfig) -> Result<Reconstruction> {
    reconstruct_from(rep, y_traj, &DMatrix::identity(rep.m, rep.m), cfg)
}

pub fn reconstruct_from(rep: &MatrixRep, y_traj: &Trajectory, c0: &DMatrix<f64>, cfg: &IntegratorConfig) -> Result<Reconstruction> {
    reconstruct_along(rep, y_traj, c0, (y_traj.start_time(), y_traj.end_time()), y_traj.times(), cfg)
}

/// Largest entry of `g0 · C(t) − C_{g0}(t)` along the geodesic with initial
/// velocity `y0`, where `C` starts at the identity and `C_{g0}` at
/// `g0 = exp_word(g0_word)`.
pub fn left_invariance_check(
    rep: &MatrixRep,
    s: &SprayField,
    y0: &AlgVec,
    g0_word: &[(AlgVec, f64)],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let traj = transport::geodesic_flow(s, y0, (0.0, t_end), cfg)?;
    if !traj.is_complete() {
        return Err(Error::Refused(format!("geodesic left the domain at t = {}", traj.end_time())));
    }
    let g0 = exp_word(rep, g0_word);
    let c = reconstruct_curve(rep, &traj, cfg)?;
    let d = reconstruct_from(rep, &traj, &g0, cfg)?;
    Ok(c.matrices
        .iter()
        .zip(&d.matrices)
        .map(|(a, b)| (&g0 * a - b).amax())
        .fold(0.0, f64::max))
}
