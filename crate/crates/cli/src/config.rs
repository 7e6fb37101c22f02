//! Run configuration: JSON schema, `--set` overrides and conversion into
//! library objects. Basis indices are 1-based here and 0-based in the library.

use crate::CliError;
use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::Value;
use spraylab_core::spray::{Monomial, RationalField};
use spraylab_core::{AlgVec, CurveSpec, DiffMode, IntegratorConfig, LieAlgebra, SprayField};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algebra: AlgebraBlock,
    pub spray: SprayBlock,
    pub task: TaskBlock,
    #[serde(default)]
    pub integrator: IntegratorBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AlgebraBlock {
    Name(String),
    Catalog { catalog: String },
    Brackets {
        dim: usize,
        #[serde(default)]
        name: Option<String>,
        brackets: Vec<BracketEntry>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub coeffs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SprayKind {
    Zero,
    Riemannian { metric: Vec<Vec<f64>> },
    Randers { metric: Vec<Vec<f64>>, beta: Vec<f64> },
    Quadratic { coeffs: Vec<QuadraticEntry> },
    Custom {
        polynomial: Vec<CustomTerm>,
        #[serde(default)]
        denominator: Option<Vec<DenominatorTerm>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct SprayBlock {
    #[serde(flatten)]
    pub kind: SprayKind,
    #[serde(default)]
    pub y_floor: Option<f64>,
    #[serde(default)]
    pub diff_mode: Option<DiffModeName>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffModeName {
    Dual,
    Fd,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTerm {
    pub exponents: Vec<u32>,
    pub target: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenominatorTerm {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Leg {
    pub w: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveBlock {
    Constant { w: Vec<f64> },
    Piecewise { legs: Vec<Leg> },
    Sampled { times: Vec<f64>, values: Vec<Vec<f64>> },
}

fn default_true() -> bool {
    true
}

fn default_depth() -> usize {
    4
}

fn default_samples() -> usize {
    spraylab_core::holonomy::DEFAULT_SAMPLES
}

fn default_svd_tol() -> f64 {
    spraylab_core::holonomy::DEFAULT_SVD_TOL
}

fn default_ladder() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskBlock {
    Geodesic {
        y0: Vec<f64>,
        t_span: [f64; 2],
    },
    /// Transport of `w0` along the geodesic with initial velocity `y0`.
    TransportLinear {
        y0: Vec<f64>,
        w0: Vec<f64>,
        t_span: [f64; 2],
    },
    TransportNonlinear {
        y0: Vec<f64>,
        curve: CurveBlock,
        t_span: [f64; 2],
    },
    OneParamFlow {
        w: Vec<f64>,
        t: f64,
        y0: Vec<f64>,
    },
    Curvature {
        y: Vec<f64>,
        w: Vec<f64>,
        #[serde(default = "default_true")]
        transport_check: bool,
    },
    Flag {
        y: Vec<f64>,
        w: Vec<f64>,
    },
    SCurvature {
        y: Vec<f64>,
    },
    Landsberg {
        y: Vec<f64>,
        w: Vec<f64>,
        #[serde(default = "default_true")]
        transport_check: bool,
    },
    HolonomyDim {
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default = "default_samples")]
        n_samples: usize,
        #[serde(default = "default_svd_tol")]
        svd_tol: f64,
    },
    LoopDefect {
        w1: Vec<f64>,
        w2: Vec<f64>,
        y0: Vec<f64>,
        #[serde(default = "default_ladder")]
        scales: Vec<f64>,
    },
    Reconstruct {
        y0: Vec<f64>,
        t_span: [f64; 2],
        #[serde(default)]
        rep: Option<String>,
        #[serde(default)]
        g0: Vec<Leg>,
    },
    Verify {},
}

impl TaskBlock {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskBlock::Geodesic { .. } => "geodesic",
            TaskBlock::TransportLinear { .. } => "transport-linear",
            TaskBlock::TransportNonlinear { .. } => "transport-nonlinear",
            TaskBlock::OneParamFlow { .. } => "one-param-flow",
            TaskBlock::Curvature { .. } => "curvature",
            TaskBlock::Flag { .. } => "flag",
            TaskBlock::SCurvature { .. } => "s-curvature",
            TaskBlock::Landsberg { .. } => "landsberg",
            TaskBlock::HolonomyDim { .. } => "holonomy-dim",
            TaskBlock::LoopDefect { .. } => "loop-defect",
            TaskBlock::Reconstruct { .. } => "reconstruct",
            TaskBlock::Verify {} => "verify",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

fn default_method() -> String {
    "dopri".into()
}

impl Default for IntegratorBlock {
    fn default() -> Self {
        Self { method: default_method(), step: None, abs_tol: None, rel_tol: None, max_steps: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_precision() -> usize {
    17
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default = "default_precision")]
    pub precision: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { format: None, path: None, precision: default_precision() }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

/// Applies `a.b.1=value` to a JSON document. The value is parsed as JSON
/// when possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set {assignment}: expected key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| invalid(path, format!("`{part}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| invalid(path, format!("index {idx} out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(invalid(path, format!("`{part}` descends into a scalar"))),
        };
    }
    Err(invalid(path, "empty path"))
}

// Flattened enums do not reject unknown keys, so spray fields are checked here.
fn check_spray_keys(doc: &Value) -> Result<(), CliError> {
    let Some(spray) = doc.get("spray").and_then(Value::as_object) else {
        return Ok(());
    };
    let specific: &[&str] = match spray.get("type").and_then(Value::as_str) {
        Some("zero") => &[],
        Some("riemannian") => &["metric"],
        Some("randers") => &["metric", "beta"],
        Some("quadratic") => &["coeffs"],
        Some("custom") => &["polynomial", "denominator"],
        _ => return Ok(()),
    };
    for key in spray.keys() {
        if !["type", "y_floor", "diff_mode"].contains(&key.as_str()) && !specific.contains(&key.as_str()) {
            return Err(invalid(&format!("spray.{key}"), "unknown field"));
        }
    }
    Ok(())
}

pub fn parse(doc: &Value) -> Result<RunConfig, CliError> {
    check_spray_keys(doc)?;
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        CliError::Validation(format!("{path}: {}", e.into_inner()))
    })
}

pub fn vector(field: &str, v: &[f64], dim: usize) -> Result<AlgVec, CliError> {
    if v.len() != dim {
        return Err(invalid(field, format!("expected {dim} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(AlgVec::from_row_slice(v))
}

fn index(field: &str, i: usize, dim: usize) -> Result<usize, CliError> {
    if i == 0 || i > dim {
        return Err(invalid(field, format!("basis index {i} outside 1..={dim}")));
    }
    Ok(i - 1)
}

fn matrix(field: &str, rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(invalid(field, format!("expected a {dim}×{dim} matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

pub fn build_algebra(block: &AlgebraBlock) -> Result<Arc<LieAlgebra>, CliError> {
    let alg = match block {
        AlgebraBlock::Name(name) | AlgebraBlock::Catalog { catalog: name } => {
            LieAlgebra::catalog(name).map_err(|e| invalid("algebra", e))?
        }
        AlgebraBlock::Brackets { dim, name, brackets } => {
            if *dim == 0 {
                return Err(invalid("algebra.dim", "must be positive"));
            }
            let mut list = Vec::with_capacity(brackets.len());
            for (n, b) in brackets.iter().enumerate() {
                let field = format!("algebra.brackets[{n}]");
                let i = index(&format!("{field}.i"), b.i, *dim)?;
                let j = index(&format!("{field}.j"), b.j, *dim)?;
                let mut coeffs = Vec::with_capacity(b.coeffs.len());
                for (k, v) in &b.coeffs {
                    let kf = format!("{field}.coeffs.{k}");
                    let k: usize = k.parse().map_err(|_| invalid(&kf, "key must be a basis index"))?;
                    coeffs.push((index(&kf, k, *dim)?, *v));
                }
                list.push((i, j, coeffs));
            }
            let name = name.clone().unwrap_or_else(|| format!("custom{dim}"));
            LieAlgebra::from_brackets(name, *dim, &list, None).map_err(|e| invalid("algebra.brackets", e))?
        }
    };
    Ok(Arc::new(alg))
}

pub fn build_spray(block: &SprayBlock, alg: Arc<LieAlgebra>) -> Result<SprayField, CliError> {
    let n = alg.dim();
    let s = match &block.kind {
        SprayKind::Zero => SprayField::zero(alg),
        SprayKind::Riemannian { metric } => {
            SprayField::riemannian(alg, matrix("spray.metric", metric, n)?).map_err(|e| invalid("spray.metric", e))?
        }
        SprayKind::Randers { metric, beta } => {
            let q = matrix("spray.metric", metric, n)?;
            let b = vector("spray.beta", beta, n)?;
            SprayField::randers(alg, q, b).map_err(|e| invalid("spray", e))?
        }
        SprayKind::Quadratic { coeffs } => {
            let mut t = vec![0.0; n * n * n];
            for (m, c) in coeffs.iter().enumerate() {
                let f = format!("spray.coeffs[{m}]");
                let (i, j, k) = (index(&f, c.i, n)?, index(&f, c.j, n)?, index(&f, c.k, n)?);
                t[(i * n + j) * n + k] += c.value;
            }
            SprayField::quadratic(alg, t).map_err(|e| invalid("spray.coeffs", e))?
        }
        SprayKind::Custom { polynomial, denominator } => {
            let mut numerators = vec![Vec::new(); n];
            for (m, term) in polynomial.iter().enumerate() {
                let f = format!("spray.polynomial[{m}]");
                if term.exponents.len() != n {
                    return Err(invalid(&f, format!("expected {n} exponents")));
                }
                let k = index(&format!("{f}.target"), term.target, n)?;
                numerators[k].push(Monomial { exponents: term.exponents.clone(), coefficient: term.coefficient });
            }
            let denominator = denominator.as_ref().map(|d| {
                d.iter()
                    .map(|t| Monomial { exponents: t.exponents.clone(), coefficient: t.coefficient })
                    .collect()
            });
            SprayField::custom(alg, RationalField { numerators, denominator }).map_err(|e| invalid("spray.polynomial", e))?
        }
    };
    let s = match block.y_floor {
        Some(f) if !(f > 0.0) => return Err(invalid("spray.y_floor", "must be positive")),
        Some(f) => s.with_y_floor(f),
        None => s,
    };
    Ok(match block.diff_mode {
        Some(DiffModeName::Fd) => s.with_diff_mode(DiffMode::FiniteDifference),
        _ => s,
    })
}

pub fn build_integrator(block: &IntegratorBlock) -> Result<IntegratorConfig, CliError> {
    let mut cfg = match block.method.as_str() {
        "dopri" | "dopri5" => IntegratorConfig::default(),
        "rk4" => IntegratorConfig::rk4(IntegratorConfig::default().step),
        other => return Err(invalid("integrator.method", format!("unknown method `{other}` (dopri | rk4)"))),
    };
    if let Some(h) = block.step {
        cfg.step = h;
    }
    if let Some(a) = block.abs_tol {
        cfg.abs_tol = a;
    }
    if let Some(r) = block.rel_tol {
        cfg.rel_tol = r;
    }
    if let Some(m) = block.max_steps {
        cfg.max_steps = m;
    }
    cfg.validate().map_err(|e| invalid("integrator", e))?;
    Ok(cfg)
}

pub fn build_curve(block: &CurveBlock, dim: usize) -> Result<CurveSpec, CliError> {
    Ok(match block {
        CurveBlock::Constant { w } => CurveSpec::Constant(vector("task.curve.w", w, dim)?),
        CurveBlock::Piecewise { legs } => CurveSpec::piecewise(build_legs("task.curve.legs", legs, dim)?)
            .map_err(|e| invalid("task.curve.legs", e))?,
        CurveBlock::Sampled { times, values } => {
            let vals = values
                .iter()
                .enumerate()
                .map(|(i, v)| vector(&format!("task.curve.values[{i}]"), v, dim))
                .collect::<Result<Vec<_>, _>>()?;
            CurveSpec::sampled(times.clone(), vals).map_err(|e| invalid("task.curve", e))?
        }
    })
}

pub fn build_legs(field: &str, legs: &[Leg], dim: usize) -> Result<Vec<(AlgVec, f64)>, CliError> {
    legs.iter()
        .enumerate()
        .map(|(i, l)| {
            if !l.dt.is_finite() {
                return Err(invalid(&format!("{field}[{i}].dt"), "must be finite"));
            }
            Ok((vector(&format!("{field}[{i}].w"), &l.w, dim)?, l.dt))
        })
        .collect()
}
