//! Finite-dimensional real Lie algebras given by structure constants.

use crate::error::{Error, Result};
use crate::jet::{self, Jet};
use nalgebra::{DMatrix, DVector};

/// Coordinates of an element of 𝔤 in the algebra's fixed basis.
pub type AlgVec = DVector<f64>;

/// Jacobi residual above which user-supplied constants are rejected.
pub const JACOBI_REJECT: f64 = 1e-8;

/// Relative singular-value cutoff for the center computation.
pub const CENTER_TOL: f64 = 1e-10;

pub const CATALOG_NAMES: [&str; 6] = ["abelian_n", "heisenberg3", "su2", "sl2r", "e2", "solvable2"];

/// A real Lie algebra, `[e_i, e_j] = Σ_k c[i][j][k] e_k`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    name: String,
    dim: usize,
    c: Vec<f64>,
    labels: Vec<String>,
    // nonzero (i, j, k, c) with i < j, for fast brackets
    nonzero: Vec<(usize, usize, usize, f64)>,
}

impl LieAlgebra {
    /// Builds an algebra from a dense `dim³` array indexed `[i][j][k]`.
    ///
    /// The array is antisymmetrized in `(i, j)` first; the result must satisfy
    /// the Jacobi identity to [`JACOBI_REJECT`].
    pub fn from_structure_constants(
        name: impl Into<String>,
        dim: usize,
        constants: &[f64],
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidAlgebra("dimension must be positive".into()));
        }
        if constants.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                got: constants.len(),
            });
        }
        if constants.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAlgebra("non-finite structure constant".into()));
        }
        let labels = match labels {
            Some(l) if l.len() != dim => {
                return Err(Error::DimensionMismatch { expected: dim, got: l.len() })
            }
            Some(l) => l,
            None => (1..=dim).map(|i| format!("e{i}")).collect(),
        };
        let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
        let mut c = vec![0.0; dim * dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    c[idx(i, j, k)] = 0.5 * (constants[idx(i, j, k)] - constants[idx(j, i, k)]);
                }
            }
        }
        let alg = Self::assemble(name.into(), dim, c, labels);
        let defect = alg.jacobi_defect();
        if defect > JACOBI_REJECT {
            return Err(Error::InvalidAlgebra(format!(
                "Jacobi identity violated (max residual {defect:.3e})"
            )));
        }
        Ok(alg)
    }

    /// Builds from a list of nonzero brackets `[e_i, e_j] = Σ coeffs`, 0-based.
    /// Both orders of a pair may be given; antisymmetrization averages them.
    pub fn from_brackets(
        name: impl Into<String>,
        dim: usize,
        brackets: &[(usize, usize, Vec<(usize, f64)>)],
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut c = vec![0.0; dim * dim * dim];
        for (i, j, coeffs) in brackets {
            for &(k, v) in coeffs {
                if *i >= dim || *j >= dim || k >= dim {
                    return Err(Error::InvalidAlgebra(format!(
                        "bracket index out of range for dimension {dim}"
                    )));
                }
                c[(i * dim + j) * dim + k] += v;
                c[(j * dim + i) * dim + k] -= v;
            }
        }
        Self::from_structure_constants(name, dim, &c, labels)
    }

    /// Skips validation; used for catalog entries whose constants are exact.
    fn assemble(name: String, dim: usize, c: Vec<f64>, labels: Vec<String>) -> Self {
        let mut nonzero = Vec::new();
        for i in 0..dim {
            for j in (i + 1)..dim {
                for k in 0..dim {
                    let v = c[(i * dim + j) * dim + k];
                    if v != 0.0 {
                        nonzero.push((i, j, k, v));
                    }
                }
            }
        }
        Self { name, dim, c, labels, nonzero }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `c[i][j][k]`.
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    pub fn basis(&self, i: usize) -> AlgVec {
        let mut v = AlgVec::zeros(self.dim);
        v[i] = 1.0;
        v
    }

    pub fn zero(&self) -> AlgVec {
        AlgVec::zeros(self.dim)
    }

    pub fn check_dim(&self, v: &AlgVec) -> Result<()> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got: v.len() })
        }
    }

    pub fn bracket(&self, x: &AlgVec, y: &AlgVec) -> Result<AlgVec> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &AlgVec, y: &AlgVec) -> AlgVec {
        let mut out = AlgVec::zeros(self.dim);
        for &(i, j, k, v) in &self.nonzero {
            out[k] += v * (x[i] * y[j] - x[j] * y[i]);
        }
        out
    }

    /// Bracket of jet-valued vectors.
    pub fn bracket_jet(&self, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
        let units = jet::max_units(x).max(jet::max_units(y));
        let mut out = vec![Jet::zero(units); self.dim];
        for &(i, j, k, v) in &self.nonzero {
            let term = &(&x[i] * &y[j]) - &(&x[j] * &y[i]);
            out[k] += &term.scale(v);
        }
        out
    }

    /// Matrix of `ad(x) = [x, ·]`.
    pub fn ad_matrix(&self, x: &AlgVec) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, k, v) in &self.nonzero {
            // [x, e_j] picks x^i c_ij^k; [x, e_i] picks x^j c_ji^k
            m[(k, j)] += v * x[i];
            m[(k, i)] -= v * x[j];
        }
        Ok(m)
    }

    /// Max absolute residual of the Jacobi identity over all index quadruples.
    pub fn jacobi_defect(&self) -> f64 {
        let n = self.dim;
        let c = |i: usize, j: usize, k: usize| self.c[(i * n + j) * n + k];
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += c(i, j, m) * c(m, k, l)
                                + c(j, k, m) * c(m, i, l)
                                + c(k, i, m) * c(m, j, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Basis of the center, as the null space of the stacked `ad(e_i)`.
    pub fn center(&self) -> Vec<AlgVec> {
        let n = self.dim;
        let mut stacked = DMatrix::zeros(n * n, n);
        for i in 0..n {
            let ad = self.ad_matrix(&self.basis(i)).expect("basis has algebra dimension");
            stacked.view_mut((i * n, 0), (n, n)).copy_from(&ad);
        }
        let svd = stacked.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cutoff = CENTER_TOL * sigma_max.max(1.0);
        svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= cutoff)
            .map(|(r, _)| v_t.row(r).transpose())
            .collect()
    }

    /// Looks up a standard algebra: `abelian_<n>`, `heisenberg3`, `su2`,
    /// `sl2r`, `e2`, `solvable2`.
    pub fn catalog(name: &str) -> Result<Self> {
        let brackets: Vec<(usize, usize, usize, f64)>;
        let dim: usize;
        let labels: Vec<&str>;
        match name {
            "heisenberg3" => {
                dim = 3;
                brackets = vec![(0, 1, 2, 1.0)];
                labels = vec!["x", "y", "z"];
            }
            "su2" => {
                dim = 3;
                brackets = vec![(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)];
                labels = vec!["e1", "e2", "e3"];
            }
            // basis (h, e, f)
            "sl2r" => {
                dim = 3;
                brackets = vec![(0, 1, 1, 2.0), (0, 2, 2, -2.0), (1, 2, 0, 1.0)];
                labels = vec!["h", "e", "f"];
            }
            // rotation, then the two translations
            "e2" => {
                dim = 3;
                brackets = vec![(0, 1, 2, 1.0), (0, 2, 1, -1.0)];
                labels = vec!["r", "tx", "ty"];
            }
            "solvable2" => {
                dim = 2;
                brackets = vec![(0, 1, 1, 1.0)];
                labels = vec!["a", "b"];
            }
            other => {
                let n = other
                    .strip_prefix("abelian_")
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::UnknownCatalog(other.to_string()))?;
                let labels = (1..=n).map(|i| format!("e{i}")).collect();
                return Ok(Self::assemble(other.to_string(), n, vec![0.0; n * n * n], labels));
            }
        }
        let mut c = vec![0.0; dim * dim * dim];
        for (i, j, k, v) in brackets {
            c[(i * dim + j) * dim + k] = v;
            c[(j * dim + i) * dim + k] = -v;
        }
        Ok(Self::assemble(
            name.to_string(),
            dim,
            c,
            labels.into_iter().map(String::from).collect(),
        ))
    }
}
