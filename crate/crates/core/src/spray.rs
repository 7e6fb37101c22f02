//! The spray vector field η of a left invariant spray, its derivatives, the
//! connection operator, and the metric tensors of Finsler sprays.
//!
//! Every evaluation runs on [`Jet`] vectors, so derivatives of any order come
//! out exactly (up to rounding) instead of from difference quotients. The
//! `f64` entry points wrap a zero-unit jet.
//!
//! Metric sprays (riemannian, randers) define η through the relation
//! `g_y(η(y), u) = g_y(y, [u, y])` for all `u`, solved against the
//! fundamental tensor `g_y`. With this sign, integral curves of `-η` are the
//! Euler–Arnold equations `g(ẏ, u) = g(y, [y, u])`; bi-invariant metrics give
//! η ≡ 0 and the curvature matches Milnor's formula for left-invariant
//! Riemannian metrics (both checked in the tests).

use crate::error::{Error, Result};
use crate::jet::{self, Jet};
use crate::lie_algebra::{AlgVec, LieAlgebra};
use crate::numdiff;
use nalgebra::DMatrix;
use std::sync::Arc;

pub const DEFAULT_Y_FLOOR: f64 = 1e-8;

/// Tolerance for the symmetry check on user metrics.
const SYMMETRY_TOL: f64 = 1e-12;

/// One term `coefficient · Π y_i^{exponents[i]}` of a polynomial on 𝔤.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn eval(&self, y: &[Jet]) -> Jet {
        let units = jet::max_units(y);
        let mut acc = Jet::constant(self.coefficient, units);
        for (yi, &e) in y.iter().zip(&self.exponents) {
            if e > 0 {
                acc = &acc * &yi.powi(e);
            }
        }
        acc
    }
}

/// User-supplied η as a rational map: component `k` is
/// `Σ numerators[k] / Σ denominator`. Homogeneity degree must be 2.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalField {
    pub numerators: Vec<Vec<Monomial>>,
    pub denominator: Option<Vec<Monomial>>,
}

impl RationalField {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.numerators.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.numerators.len() });
        }
        let all = self
            .numerators
            .iter()
            .flatten()
            .chain(self.denominator.iter().flatten());
        for m in all {
            if m.exponents.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m.exponents.len() });
            }
        }
        let num_deg = uniform_degree(self.numerators.iter().flatten())?;
        let den_deg = match &self.denominator {
            Some(d) if d.is_empty() => {
                return Err(Error::InvalidArgument("empty denominator".into()))
            }
            Some(d) => uniform_degree(d.iter())?.unwrap_or(0),
            None => 0,
        };
        if let Some(nd) = num_deg {
            if nd as i64 - den_deg as i64 != 2 {
                return Err(Error::InvalidArgument(format!(
                    "custom spray must be 2-homogeneous: numerator degree {nd}, denominator degree {den_deg}"
                )));
            }
        }
        Ok(())
    }

    fn eval(&self, y: &[Jet]) -> Result<Vec<Jet>> {
        let units = jet::max_units(y);
        let den = match &self.denominator {
            Some(terms) => {
                let mut d = Jet::zero(units);
                for m in terms {
                    d += &m.eval(y);
                }
                if d.real().abs() < f64::MIN_POSITIVE.sqrt() {
                    return Err(Error::Regularity("custom spray denominator vanishes".into()));
                }
                Some(d)
            }
            None => None,
        };
        Ok(self
            .numerators
            .iter()
            .map(|terms| {
                let mut acc = Jet::zero(units);
                for m in terms {
                    acc += &m.eval(y);
                }
                match &den {
                    Some(d) => &acc / d,
                    None => acc,
                }
            })
            .collect())
    }
}

fn uniform_degree<'a>(mut terms: impl Iterator<Item = &'a Monomial>) -> Result<Option<u32>> {
    let Some(first) = terms.next() else { return Ok(None) };
    let d = first.degree();
    for m in terms {
        if m.degree() != d {
            return Err(Error::InvalidArgument(
                "custom spray monomials must share one total degree".into(),
            ));
        }
    }
    Ok(Some(d))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SprayVariant {
    /// The canonical bi-invariant spray, η = 0.
    Zero,
    Riemannian { metric: DMatrix<f64> },
    /// `F(y) = sqrt(yᵀ Q y) + b·y`.
    Randers { metric: DMatrix<f64>, beta: AlgVec },
    /// `η(y)^k = Σ_ij T[i][j][k] y^i y^j`, flattened row-major.
    Quadratic { coeffs: Vec<f64> },
    Custom(RationalField),
}

/// How `d_eta` and the first-order `f64` derivatives are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffMode {
    #[default]
    Dual,
    /// Central differences with one Richardson level.
    FiniteDifference,
}

/// Second derivatives of ½F² at `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalTensor {
    pub y: AlgVec,
    pub g: DMatrix<f64>,
}

impl FundamentalTensor {
    pub fn inner(&self, u: &AlgVec, v: &AlgVec) -> f64 {
        u.dot(&(&self.g * v))
    }
}

/// `C_y(u,v,w) = ¼ ∂³F²` and its derivative `C'_y(u,v,w,z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanTensor {
    pub y: AlgVec,
    dim: usize,
    c: Vec<f64>,
    dc: Vec<f64>,
}

impl CartanTensor {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    pub fn derivative(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.dc[((i * self.dim + j) * self.dim + k) * self.dim + l]
    }

    pub fn apply(&self, u: &AlgVec, v: &AlgVec, w: &AlgVec) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s += self.get(i, j, k) * u[i] * v[j] * w[k];
                }
            }
        }
        s
    }

    pub fn apply_derivative(&self, u: &AlgVec, v: &AlgVec, w: &AlgVec, z: &AlgVec) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += self.derivative(i, j, k, l) * u[i] * v[j] * w[k] * z[l];
                    }
                }
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().chain(&self.dc).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A left invariant spray, represented by its spray vector field on 𝔤∖{0}.
#[derive(Debug, Clone)]
pub struct SprayField {
    algebra: Arc<LieAlgebra>,
    variant: SprayVariant,
    metric_inv: Option<DMatrix<f64>>,
    y_floor: f64,
    diff_mode: DiffMode,
}

impl SprayField {
    fn build(algebra: Arc<LieAlgebra>, variant: SprayVariant) -> Self {
        Self { algebra, variant, metric_inv: None, y_floor: DEFAULT_Y_FLOOR, diff_mode: DiffMode::Dual }
    }

    pub fn zero(algebra: Arc<LieAlgebra>) -> Self {
        Self::build(algebra, SprayVariant::Zero)
    }

    pub fn riemannian(algebra: Arc<LieAlgebra>, metric: DMatrix<f64>) -> Result<Self> {
        check_spd(&algebra, &metric)?;
        let inv = metric.clone().cholesky().expect("checked SPD").inverse();
        let mut s = Self::build(algebra, SprayVariant::Riemannian { metric });
        s.metric_inv = Some(inv);
        Ok(s)
    }

    /// Requires the dual norm `sqrt(bᵀ Q⁻¹ b)` of the one-form to be below 1.
    pub fn randers(algebra: Arc<LieAlgebra>, metric: DMatrix<f64>, beta: AlgVec) -> Result<Self> {
        check_spd(&algebra, &metric)?;
        algebra.check_dim(&beta)?;
        let inv = metric.clone().cholesky().expect("checked SPD").inverse();
        let b_norm = beta.dot(&(&inv * &beta)).sqrt();
        if !(b_norm < 1.0) {
            return Err(Error::Regularity(format!(
                "randers one-form norm {b_norm} must be strictly below 1"
            )));
        }
        Ok(Self::build(algebra, SprayVariant::Randers { metric, beta }))
    }

    pub fn quadratic(algebra: Arc<LieAlgebra>, coeffs: Vec<f64>) -> Result<Self> {
        let n = algebra.dim();
        if coeffs.len() != n * n * n {
            return Err(Error::DimensionMismatch { expected: n * n * n, got: coeffs.len() });
        }
        Ok(Self::build(algebra, SprayVariant::Quadratic { coeffs }))
    }

    pub fn custom(algebra: Arc<LieAlgebra>, field: RationalField) -> Result<Self> {
        field.validate(algebra.dim())?;
        Ok(Self::build(algebra, SprayVariant::Custom(field)))
    }

    pub fn with_y_floor(mut self, floor: f64) -> Self {
        self.y_floor = floor;
        self
    }

    pub fn with_diff_mode(mut self, mode: DiffMode) -> Self {
        self.diff_mode = mode;
        self
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn algebra_arc(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn variant(&self) -> &SprayVariant {
        &self.variant
    }

    pub fn y_floor(&self) -> f64 {
        self.y_floor
    }

    pub fn diff_mode(&self) -> DiffMode {
        self.diff_mode
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.variant, SprayVariant::Zero)
    }

    pub fn is_metric(&self) -> bool {
        matches!(self.variant, SprayVariant::Riemannian { .. } | SprayVariant::Randers { .. })
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(self.variant, SprayVariant::Riemannian { .. })
    }

    pub(crate) fn check_point(&self, y: &AlgVec) -> Result<()> {
        self.algebra.check_dim(y)?;
        let norm = y.norm();
        if !(norm >= self.y_floor) {
            return Err(Error::Domain { norm, floor: self.y_floor });
        }
        Ok(())
    }

    fn check_point_jet(&self, y: &[Jet]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        let norm = y.iter().map(|v| v.real() * v.real()).sum::<f64>().sqrt();
        if !(norm >= self.y_floor) {
            return Err(Error::Domain { norm, floor: self.y_floor });
        }
        Ok(())
    }

    // ---- jet-level core --------------------------------------------------

    /// ½F² at a jet point; `None` for non-metric variants.
    fn half_f2_jet(&self, y: &[Jet]) -> Option<Jet> {
        match &self.variant {
            SprayVariant::Riemannian { metric } => Some(quad_form(metric, y).scale(0.5)),
            SprayVariant::Randers { metric, beta } => {
                let alpha = quad_form(metric, y).sqrt();
                let units = jet::max_units(y);
                let mut b = Jet::zero(units);
                for (yi, &bi) in y.iter().zip(beta.iter()) {
                    b += &yi.scale(bi);
                }
                let f = &alpha + &b;
                Some((&f * &f).scale(0.5))
            }
            _ => None,
        }
    }

    /// `∂^m(½F²)` along the given directions, as a jet over the units of `y`.
    fn half_f2_derivative(&self, y: &[Jet], dirs: &[&[Jet]]) -> Jet {
        let base = jet::max_units(y)
            .max(dirs.iter().map(|d| jet::max_units(d)).max().unwrap_or(0));
        let mut p: Vec<Jet> = y.iter().map(|v| v.lift(base)).collect();
        for (m, d) in dirs.iter().enumerate() {
            p = jet::perturb_vec(&p, base + m as u32, d);
        }
        self.half_f2_jet(&p)
            .expect("metric variant")
            .extract_top(dirs.len() as u32)
    }

    fn hessian_jet(&self, y: &[Jet]) -> Vec<Vec<Jet>> {
        let n = self.dim();
        let units = jet::max_units(y);
        let e: Vec<Vec<Jet>> = (0..n)
            .map(|i| (0..n).map(|k| Jet::constant(if i == k { 1.0 } else { 0.0 }, 0)).collect())
            .collect();
        let mut g = vec![vec![Jet::zero(units); n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.half_f2_derivative(y, &[&e[i], &e[j]]);
                g[i][j] = v.clone();
                g[j][i] = v;
            }
        }
        g
    }

    pub(crate) fn eta_jet(&self, y: &[Jet]) -> Result<Vec<Jet>> {
        self.check_point_jet(y)?;
        let n = self.dim();
        let units = jet::max_units(y);
        match &self.variant {
            SprayVariant::Zero => Ok(vec![Jet::zero(units); n]),
            SprayVariant::Riemannian { metric } => {
                let qy = mat_vec(metric, y);
                let rhs = self.metric_rhs(&qy, y);
                let inv = self.metric_inv.as_ref().expect("riemannian inverse");
                Ok(mat_vec(inv, &rhs))
            }
            SprayVariant::Randers { .. } => {
                let g = self.hessian_jet(y);
                let real_g = DMatrix::from_fn(n, n, |i, j| g[i][j].real());
                if real_g.cholesky().is_none() {
                    return Err(Error::Regularity(
                        "fundamental tensor lost positive definiteness".into(),
                    ));
                }
                let gy: Vec<Jet> = (0..n).map(|i| jet::dot(&g[i], y)).collect();
                let rhs = self.metric_rhs(&gy, y);
                solve_jet(g, rhs)
            }
            SprayVariant::Quadratic { coeffs } => {
                let mut out = vec![Jet::zero(units); n];
                for i in 0..n {
                    for j in 0..n {
                        let yy = &y[i] * &y[j];
                        for (k, slot) in out.iter_mut().enumerate() {
                            let t = coeffs[(i * n + j) * n + k];
                            if t != 0.0 {
                                *slot += &yy.scale(t);
                            }
                        }
                    }
                }
                Ok(out)
            }
            SprayVariant::Custom(field) => field.eval(y),
        }
    }

    /// `rhs_u = gy · [e_u, y]` where `gy = g_y(y, ·)` as a covector.
    fn metric_rhs(&self, gy: &[Jet], y: &[Jet]) -> Vec<Jet> {
        let n = self.dim();
        (0..n)
            .map(|u| {
                let e_u = jet::constants(self.algebra.basis(u).as_slice(), 0);
                jet::dot(gy, &self.algebra.bracket_jet(&e_u, y))
            })
            .collect()
    }

    /// Value of η and its derivative along `dir`, both over the units of the inputs.
    pub(crate) fn eta_and_derivative_jet(&self, y: &[Jet], dir: &[Jet]) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let k = jet::max_units(y).max(jet::max_units(dir));
        let lifted: Vec<Jet> = y.iter().map(|v| v.lift(k)).collect();
        let p = jet::perturb_vec(&lifted, k, dir);
        let e = self.eta_jet(&p)?;
        Ok((
            e.iter().map(|v| v.truncate_top(1)).collect(),
            e.iter().map(|v| v.extract_top(1)).collect(),
        ))
    }

    pub(crate) fn d_eta_jet(&self, y: &[Jet], w: &[Jet]) -> Result<Vec<Jet>> {
        if self.is_zero() {
            self.check_point_jet(y)?;
            let units = jet::max_units(y).max(jet::max_units(w));
            return Ok(vec![Jet::zero(units); self.dim()]);
        }
        Ok(self.eta_and_derivative_jet(y, w)?.1)
    }

    /// `N(y, w) = ½ Dη(y, w) − ½ [y, w]`.
    pub(crate) fn connection_jet(&self, y: &[Jet], w: &[Jet]) -> Result<Vec<Jet>> {
        let br = self.algebra.bracket_jet(y, w);
        if self.is_zero() {
            self.check_point_jet(y)?;
            return Ok(br.iter().map(|v| v.scale(-0.5)).collect());
        }
        let de = self.d_eta_jet(y, w)?;
        Ok(de.iter().zip(&br).map(|(a, b)| (a - b).scale(0.5)).collect())
    }

    // ---- f64 API ---------------------------------------------------------

    pub fn eta(&self, y: &AlgVec) -> Result<AlgVec> {
        self.check_point(y)?;
        if self.is_zero() {
            return Ok(self.algebra.zero());
        }
        Ok(to_alg(&self.eta_jet(&jet::constants(y.as_slice(), 0))?))
    }

    /// Directional derivative of η at `y` along `w`.
    pub fn d_eta(&self, y: &AlgVec, w: &AlgVec) -> Result<AlgVec> {
        self.check_point(y)?;
        self.algebra.check_dim(w)?;
        if self.is_zero() {
            return Ok(self.algebra.zero());
        }
        match self.diff_mode {
            DiffMode::Dual => Ok(to_alg(&self.d_eta_jet(
                &jet::constants(y.as_slice(), 0),
                &jet::constants(w.as_slice(), 0),
            )?)),
            DiffMode::FiniteDifference => {
                numdiff::directional_richardson(|p| self.eta(p), y, w, self.fd_step(y))
            }
        }
    }

    pub fn connection(&self, y: &AlgVec, w: &AlgVec) -> Result<AlgVec> {
        self.check_point(y)?;
        self.algebra.check_dim(w)?;
        let br = self.algebra.bracket_unchecked(y, w);
        if self.is_zero() {
            return Ok(br * -0.5);
        }
        Ok((self.d_eta(y, w)? - br) * 0.5)
    }

    pub(crate) fn fd_step(&self, y: &AlgVec) -> f64 {
        f64::EPSILON.cbrt() * y.norm().max(1.0)
    }

    /// Finsler norm `F(y)`; `None` for non-metric variants.
    pub fn finsler_norm(&self, y: &AlgVec) -> Option<f64> {
        let h = self.half_f2_jet(&jet::constants(y.as_slice(), 0))?;
        Some((2.0 * h.real()).max(0.0).sqrt())
    }

    pub fn fundamental_tensor(&self, y: &AlgVec) -> Result<FundamentalTensor> {
        if !self.is_metric() {
            return Err(Error::Unsupported("fundamental tensor needs a metric spray"));
        }
        self.check_point(y)?;
        let g = match &self.variant {
            SprayVariant::Riemannian { metric } => metric.clone(),
            _ => {
                let h = self.hessian_jet(&jet::constants(y.as_slice(), 0));
                let n = self.dim();
                let g = DMatrix::from_fn(n, n, |i, j| h[i][j].real());
                if g.clone().cholesky().is_none() {
                    return Err(Error::Regularity(
                        "fundamental tensor lost positive definiteness".into(),
                    ));
                }
                g
            }
        };
        Ok(FundamentalTensor { y: y.clone(), g })
    }

    /// `C_y(u, v, w)` by nested differentiation.
    pub fn cartan(&self, y: &AlgVec, u: &AlgVec, v: &AlgVec, w: &AlgVec) -> Result<f64> {
        self.metric_point(y)?;
        let c = |x: &AlgVec| jet::constants(x.as_slice(), 0);
        Ok(0.5 * self.half_f2_derivative(&c(y), &[&c(u), &c(v), &c(w)]).real())
    }

    /// `C'_y(u, v, w, z) = d/dε C_{y+εz}(u, v, w)`.
    pub fn cartan_derivative(&self, y: &AlgVec, u: &AlgVec, v: &AlgVec, w: &AlgVec, z: &AlgVec) -> Result<f64> {
        self.metric_point(y)?;
        let c = |x: &AlgVec| jet::constants(x.as_slice(), 0);
        Ok(0.5 * self.half_f2_derivative(&c(y), &[&c(u), &c(v), &c(w), &c(z)]).real())
    }

    pub fn cartan_tensor(&self, y: &AlgVec) -> Result<CartanTensor> {
        self.metric_point(y)?;
        let n = self.dim();
        let e: Vec<AlgVec> = (0..n).map(|i| self.algebra.basis(i)).collect();
        let mut c = vec![0.0; n * n * n];
        let mut dc = vec![0.0; n * n * n * n];
        if !self.is_riemannian() {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = [i, j, k];
                        s.sort_unstable();
                        if s != [i, j, k] {
                            c[(i * n + j) * n + k] = c[(s[0] * n + s[1]) * n + s[2]];
                            for l in 0..n {
                                dc[((i * n + j) * n + k) * n + l] =
                                    dc[((s[0] * n + s[1]) * n + s[2]) * n + l];
                            }
                            continue;
                        }
                        c[(i * n + j) * n + k] = self.cartan(y, &e[i], &e[j], &e[k])?;
                        for l in 0..n {
                            dc[((i * n + j) * n + k) * n + l] =
                                self.cartan_derivative(y, &e[i], &e[j], &e[k], &e[l])?;
                        }
                    }
                }
            }
        }
        Ok(CartanTensor { y: y.clone(), dim: n, c, dc })
    }

    fn metric_point(&self, y: &AlgVec) -> Result<()> {
        if !self.is_metric() {
            return Err(Error::Unsupported("Cartan tensor needs a metric spray"));
        }
        self.check_point(y)
    }
}

fn check_spd(algebra: &LieAlgebra, metric: &DMatrix<f64>) -> Result<()> {
    let n = algebra.dim();
    if metric.nrows() != n || metric.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: metric.nrows() });
    }
    if (metric - metric.transpose()).amax() > SYMMETRY_TOL * metric.amax().max(1.0) {
        return Err(Error::Regularity("metric matrix is not symmetric".into()));
    }
    if metric.clone().cholesky().is_none() {
        return Err(Error::Regularity("metric matrix is not positive definite".into()));
    }
    Ok(())
}

fn quad_form(m: &DMatrix<f64>, y: &[Jet]) -> Jet {
    jet::dot(&mat_vec(m, y), y)
}

fn mat_vec(m: &DMatrix<f64>, y: &[Jet]) -> Vec<Jet> {
    let units = jet::max_units(y);
    (0..m.nrows())
        .map(|i| {
            let mut acc = Jet::zero(units);
            for (j, yj) in y.iter().enumerate() {
                let a = m[(i, j)];
                if a != 0.0 {
                    acc += &yj.scale(a);
                }
            }
            acc
        })
        .collect()
}

/// Gaussian elimination with partial pivoting on the real parts.
fn solve_jet(mut a: Vec<Vec<Jet>>, mut b: Vec<Jet>) -> Result<Vec<Jet>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].real().abs().total_cmp(&a[s][col].real().abs()))
            .expect("non-empty");
        if a[piv][col].real().abs() < 1e-300 {
            return Err(Error::Regularity("singular fundamental tensor".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for r in (col + 1)..n {
            let f = &a[r][col] * &inv;
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let t = &f * &a[col][c];
                a[r][c] -= &t;
            }
            let t = &f * &b[col];
            b[r] -= &t;
        }
    }
    let mut x = vec![Jet::zero(0); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in (r + 1)..n {
            acc -= &(&a[r][c] * &x[c]);
        }
        x[r] = &acc / &a[r][r];
    }
    Ok(x)
}

pub(crate) fn to_alg(v: &[Jet]) -> AlgVec {
    AlgVec::from_iterator(v.len(), v.iter().map(Jet::real))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn alg(name: &str) -> Arc<LieAlgebra> {
        Arc::new(LieAlgebra::catalog(name).unwrap())
    }

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&AlgVec::from_row_slice(d))
    }

    fn quad_example() -> SprayField {
        // η(y) = (y¹)² e₁ on abelian ℝ²
        let mut t = vec![0.0; 8];
        t[0] = 1.0;
        SprayField::quadratic(alg("abelian_2"), t).unwrap()
    }

    /// Oracle: η from the defining relation by explicit matrix inversion.
    fn riemannian_eta_oracle(g: &LieAlgebra, q: &DMatrix<f64>, y: &AlgVec) -> AlgVec {
        let n = g.dim();
        let rhs = AlgVec::from_fn(n, |u, _| (q * y).dot(&g.bracket(&g.basis(u), y).unwrap()));
        q.clone().try_inverse().unwrap() * rhs
    }

    #[test]
    fn zero_variant_vanishes() {
        let s = SprayField::zero(alg("su2"));
        let y = dvector![0.3, -1.0, 2.0];
        assert_eq!(s.eta(&y).unwrap(), AlgVec::zeros(3));
        assert_eq!(s.d_eta(&y, &dvector![1.0, 2.0, 3.0]).unwrap(), AlgVec::zeros(3));
    }

    #[test]
    fn bi_invariant_metric_on_su2_has_zero_eta() {
        let s = SprayField::riemannian(alg("su2"), DMatrix::identity(3, 3)).unwrap();
        for y in [dvector![1.0, 0.0, 0.0], dvector![0.3, -0.7, 1.9]] {
            assert!(s.eta(&y).unwrap().amax() < 1e-15);
        }
    }

    #[test]
    fn riemannian_eta_matches_matrix_inversion() {
        let g = alg("su2");
        let q = diag(&[1.0, 1.0, 2.0]);
        let s = SprayField::riemannian(g.clone(), q.clone()).unwrap();
        let y = dvector![1.0, 1.0, 0.0];
        let expected = riemannian_eta_oracle(&g, &q, &y);
        assert!((s.eta(&y).unwrap() - &expected).amax() < 1e-14);
        // by hand: Qy = (1,1,0); rhs_u = (1,1,0)·[e_u, y]
        // [e1,y] = y2 e3 = e3 -> 0; [e2,y] = -y1 e3 -> 0; [e3,y] = y1 e2 - y2 e1 -> -1 + 1 = 0
        assert!(expected.amax() < 1e-15);
        let y = dvector![1.0, 0.5, 0.25];
        assert!((s.eta(&y).unwrap() - riemannian_eta_oracle(&g, &q, &y)).amax() < 1e-14);
    }

    #[test]
    fn quadratic_derivative_example() {
        let s = quad_example();
        let d = s.d_eta(&dvector![1.0, 0.0], &dvector![1.0, 0.0]).unwrap();
        assert_eq!(d, dvector![2.0, 0.0]);
    }

    #[test]
    fn euler_identity_for_all_variants() {
        for s in sample_sprays() {
            let y = AlgVec::from_fn(s.dim(), |i, _| 0.4 + 0.3 * i as f64);
            let lhs = s.d_eta(&y, &y).unwrap();
            let rhs = s.eta(&y).unwrap() * 2.0;
            assert!((lhs - &rhs).amax() < 1e-12 * (1.0 + rhs.amax()));
            let n = s.connection(&y, &y).unwrap();
            assert!((n - s.eta(&y).unwrap()).amax() < 1e-12);
        }
    }

    fn sample_sprays() -> Vec<SprayField> {
        let su2 = alg("su2");
        let h = alg("heisenberg3");
        vec![
            SprayField::zero(su2.clone()),
            SprayField::riemannian(su2.clone(), diag(&[1.0, 1.0, 2.0])).unwrap(),
            SprayField::randers(h.clone(), DMatrix::identity(3, 3), dvector![0.3, 0.0, 0.0]).unwrap(),
            SprayField::randers(su2, diag(&[1.0, 2.0, 3.0]), dvector![0.1, -0.2, 0.3]).unwrap(),
            quad_example(),
        ]
    }

    #[test]
    fn zero_connection_is_minus_half_bracket() {
        let s = SprayField::zero(alg("su2"));
        let n = s.connection(&s.algebra().basis(0), &s.algebra().basis(1)).unwrap();
        assert_eq!(n, dvector![0.0, 0.0, -0.5]);
    }

    #[test]
    fn domain_floor_is_enforced() {
        let s = SprayField::zero(alg("su2"));
        let err = s.eta(&dvector![1e-9, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        assert!(err.to_string().contains("spray undefined near 0"));
    }

    #[test]
    fn randers_regularity_and_tensors() {
        let r3 = alg("abelian_3");
        assert!(matches!(
            SprayField::randers(r3.clone(), DMatrix::identity(3, 3), dvector![1.0, 0.0, 0.0]),
            Err(Error::Regularity(_))
        ));
        let s = SprayField::randers(r3.clone(), DMatrix::identity(3, 3), dvector![0.5, 0.0, 0.0]).unwrap();
        let y = dvector![1.0, 0.0, 0.0];
        let g = s.fundamental_tensor(&y).unwrap();
        assert!((g.inner(&y, &y) - 2.25).abs() < 1e-13);
        assert!((s.finsler_norm(&y).unwrap() - 1.5).abs() < 1e-15);

        let flat = SprayField::randers(r3, diag(&[1.0, 2.0, 3.0]), AlgVec::zeros(3)).unwrap();
        let g = flat.fundamental_tensor(&dvector![0.2, -1.0, 0.4]).unwrap();
        assert!((g.g - diag(&[1.0, 2.0, 3.0])).amax() < 1e-13);
    }

    #[test]
    fn randers_fundamental_tensor_matches_closed_form() {
        // g_ij = (F/α)(a_ij − α_i α_j) + (α_i + b_i)(α_j + b_j), α_i = (Qy)_i/α
        let q = diag(&[1.0, 2.0, 0.5]);
        let b = dvector![0.2, -0.1, 0.3];
        let s = SprayField::randers(alg("su2"), q.clone(), b.clone()).unwrap();
        let y = dvector![0.7, -0.3, 1.1];
        let alpha = y.dot(&(&q * &y)).sqrt();
        let f = alpha + b.dot(&y);
        let ai = &q * &y / alpha;
        let closed = DMatrix::from_fn(3, 3, |i, j| {
            f / alpha * (q[(i, j)] - ai[i] * ai[j]) + (ai[i] + b[i]) * (ai[j] + b[j])
        });
        let g = s.fundamental_tensor(&y).unwrap();
        assert!((g.g - closed).amax() < 1e-13);
    }

    #[test]
    fn cartan_tensor_properties() {
        let r = SprayField::riemannian(alg("su2"), diag(&[1.0, 1.0, 2.0])).unwrap();
        let y = dvector![0.4, 0.1, -0.8];
        assert_eq!(r.cartan_tensor(&y).unwrap().max_abs(), 0.0);

        let s = SprayField::randers(alg("su2"), diag(&[1.0, 2.0, 3.0]), dvector![0.1, -0.2, 0.3]).unwrap();
        let c = s.cartan_tensor(&y).unwrap();
        let u = dvector![0.3, 1.0, -0.2];
        let v = dvector![-1.0, 0.5, 0.25];
        let w = dvector![0.1, 0.2, 0.9];
        assert!(c.apply(&y, &u, &v).abs() < 1e-12);
        let perms = [
            c.apply(&u, &v, &w),
            c.apply(&v, &u, &w),
            c.apply(&w, &v, &u),
            c.apply(&u, &w, &v),
        ];
        for p in perms {
            assert!((p - perms[0]).abs() < 1e-13);
        }
        assert!((s.cartan(&y, &u, &v, &w).unwrap() - perms[0]).abs() < 1e-13);
        let z = dvector![0.5, -0.5, 1.0];
        assert!(
            (c.apply_derivative(&u, &v, &w, &z) - s.cartan_derivative(&y, &u, &v, &w, &z).unwrap()).abs()
                < 1e-12
        );
        assert!(matches!(
            SprayField::zero(alg("su2")).cartan_tensor(&y),
            Err(Error::Unsupported(_))
        ));
    }

    /// Sixth-order central stencil for the third derivative at 0.
    fn third_derivative_9pt(f: impl Fn(f64) -> f64, h: f64) -> f64 {
        const W: [f64; 9] = [
            -7.0 / 240.0, 3.0 / 10.0, -169.0 / 120.0, 61.0 / 30.0, 0.0,
            -61.0 / 30.0, 169.0 / 120.0, -3.0 / 10.0, 7.0 / 240.0,
        ];
        W.iter().enumerate().map(|(i, w)| w * f((i as f64 - 4.0) * h)).sum::<f64>() / h.powi(3)
    }

    #[test]
    fn randers_cartan_matches_sixth_order_differences() {
        // randers Q=I, b=(0.5,0,0), y=(0,1,0), u=v=w=e1
        let s = SprayField::randers(alg("abelian_3"), DMatrix::identity(3, 3), dvector![0.5, 0.0, 0.0])
            .unwrap();
        let y = dvector![0.0, 1.0, 0.0];
        let e1 = dvector![1.0, 0.0, 0.0];
        let value = s.cartan(&y, &e1, &e1, &e1).unwrap();
        assert!(value.abs() > 1e-3);
        let f2 = |t: f64| {
            let p = &y + &e1 * t;
            s.finsler_norm(&p).unwrap().powi(2)
        };
        let oracle = 0.25 * third_derivative_9pt(f2, 1e-2);
        assert!((value - oracle).abs() < 1e-8, "{value} vs {oracle}");
        // along e1 at (0,1,0): F² = (sqrt(1+t²) + t/2)² = 1 + t + 5t²/4 + t³/2 + O(t⁴)
        assert!((value - 0.75).abs() < 1e-13);
    }

    #[test]
    fn randers_with_zero_beta_agrees_with_riemannian() {
        let q = diag(&[1.0, 1.0, 2.0]);
        let r = SprayField::riemannian(alg("su2"), q.clone()).unwrap();
        let z = SprayField::randers(alg("su2"), q, AlgVec::zeros(3)).unwrap();
        let y = dvector![0.3, -0.9, 0.6];
        assert!((r.eta(&y).unwrap() - z.eta(&y).unwrap()).amax() < 1e-9);
        assert!((r.fundamental_tensor(&y).unwrap().g - z.fundamental_tensor(&y).unwrap().g).amax() < 1e-9);
        assert!(z.cartan_tensor(&y).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn finite_difference_mode_agrees_with_dual() {
        let s = SprayField::randers(alg("su2"), diag(&[1.0, 2.0, 3.0]), dvector![0.1, -0.2, 0.3]).unwrap();
        let fd = s.clone().with_diff_mode(DiffMode::FiniteDifference);
        let y = dvector![0.4, 0.1, -0.8];
        let w = dvector![0.3, 1.0, -0.2];
        assert!((s.d_eta(&y, &w).unwrap() - fd.d_eta(&y, &w).unwrap()).amax() < 1e-8);
    }

    #[test]
    fn custom_rational_field() {
        // η(y) = y1⁴/(y1² + y2²) e2
        let m = |e: [u32; 2], c: f64| Monomial { exponents: e.to_vec(), coefficient: c };
        let field = RationalField {
            numerators: vec![vec![], vec![m([4, 0], 1.0)]],
            denominator: Some(vec![m([2, 0], 1.0), m([0, 2], 1.0)]),
        };
        let s = SprayField::custom(alg("abelian_2"), field.clone()).unwrap();
        let y = dvector![1.0, 1.0];
        assert!((s.eta(&y).unwrap() - dvector![0.0, 0.5]).amax() < 1e-15);
        // d/dt at y along e1: d/dx x⁴/(x²+1) at 1 = (4·2 − 2)/4 = 1.5
        assert!((s.d_eta(&y, &dvector![1.0, 0.0]).unwrap()[1] - 1.5).abs() < 1e-14);

        let bad = RationalField { numerators: vec![vec![], vec![m([3, 0], 1.0)]], denominator: None };
        assert!(SprayField::custom(alg("abelian_2"), bad).is_err());
    }

    #[test]
    fn homogeneity_of_eta_and_connection() {
        for s in sample_sprays() {
            let y = AlgVec::from_fn(s.dim(), |i, _| 0.9 - 0.45 * i as f64);
            let w = AlgVec::from_fn(s.dim(), |i, _| 0.2 + 0.7 * i as f64);
            let e = s.eta(&y).unwrap();
            let n = s.connection(&y, &w).unwrap();
            for lam in [0.5, 2.0, 3.0] {
                let ey = s.eta(&(&y * lam)).unwrap();
                assert!((&ey - &e * (lam * lam)).norm() <= 1e-8 * lam * lam * e.norm() + 1e-12);
                let ny = s.connection(&(&y * lam), &w).unwrap();
                assert!((&ny - &n * lam).norm() <= 1e-8 * lam * n.norm() + 1e-12);
            }
        }
    }
}
