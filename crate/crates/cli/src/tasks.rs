//! Task dispatch: each task turns validated inputs into a table or a JSON
//! object.

use crate::config::{self, RunConfig, TaskBlock};
use crate::CliError;
use serde_json::{json, Value};
use spraylab_core::curvature;
use spraylab_core::group_curves::{self, MatrixRep};
use spraylab_core::holonomy::{self, BracketWord};
use spraylab_core::transport::{self, Trajectory};
use spraylab_core::{AlgVec, Error, IntegratorConfig, LieAlgebra, SprayField};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum Output {
    Table {
        header: Vec<String>,
        rows: Vec<Vec<f64>>,
        notes: Vec<(String, String)>,
    },
    Object(Value),
}

impl Output {
    pub fn is_table(&self) -> bool {
        matches!(self, Output::Table { .. })
    }
}

/// Tasks whose natural output is a table (CSV by default).
pub fn emits_table(task: &TaskBlock) -> bool {
    matches!(
        task,
        TaskBlock::Geodesic { .. }
            | TaskBlock::TransportLinear { .. }
            | TaskBlock::TransportNonlinear { .. }
            | TaskBlock::OneParamFlow { .. }
            | TaskBlock::LoopDefect { .. }
            | TaskBlock::Reconstruct { .. }
    )
}

fn header(prefix: &str, n: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("{prefix}{i}"))).collect()
}

fn trajectory_table(traj: &Trajectory, prefix: &str) -> Output {
    let n = traj.states().first().map_or(0, AlgVec::len);
    let rows = traj
        .times()
        .iter()
        .zip(traj.states())
        .map(|(t, y)| std::iter::once(*t).chain(y.iter().copied()).collect())
        .collect();
    Output::Table {
        header: header(prefix, n),
        rows,
        notes: vec![("status".into(), format!("{:?}", traj.status()))],
    }
}

/// Library error raised while running a task.
fn failure(e: Error, prefix: &str) -> CliError {
    match e {
        Error::Integration { reason, partial } => CliError::Numerical {
            message: format!("integration failed: {reason}"),
            partial: Some(trajectory_table(&partial, prefix)),
        },
        Error::DomainExit { t, partial } => CliError::Numerical {
            message: format!("trajectory left the slit domain at t = {t}"),
            partial: Some(trajectory_table(&partial, prefix)),
        },
        Error::DimensionMismatch { .. }
        | Error::InvalidAlgebra(_)
        | Error::UnknownCatalog(_)
        | Error::SpanMismatch { .. }
        | Error::Unsupported(_)
        | Error::InvalidArgument(_)
        | Error::Refused(_) => CliError::Validation(format!("task: {e}")),
        other => CliError::Numerical { message: other.to_string(), partial: None },
    }
}

fn complete(traj: Trajectory, prefix: &str) -> Result<Output, CliError> {
    let out = trajectory_table(&traj, prefix);
    if traj.is_complete() {
        Ok(out)
    } else {
        Err(CliError::Numerical {
            message: format!("trajectory stopped at t = {} ({:?})", traj.end_time(), traj.status()),
            partial: Some(out),
        })
    }
}

fn vec_json(v: &AlgVec) -> Value {
    Value::from(v.iter().copied().collect::<Vec<f64>>())
}

pub struct Context {
    pub algebra: Arc<LieAlgebra>,
    pub spray: SprayField,
    pub integrator: IntegratorConfig,
    pub seed: u64,
}

impl Context {
    pub fn build(cfg: &RunConfig) -> Result<Self, CliError> {
        let algebra = config::build_algebra(&cfg.algebra)?;
        let spray = config::build_spray(&cfg.spray, algebra.clone())?;
        let integrator = config::build_integrator(&cfg.integrator)?;
        Ok(Self { algebra, spray, integrator, seed: cfg.seed })
    }
}

/// Validated task inputs, checked before any numerical work starts.
pub enum Prepared {
    Geodesic { y0: AlgVec, span: (f64, f64) },
    TransportLinear { y0: AlgVec, w0: AlgVec, span: (f64, f64) },
    TransportNonlinear { y0: AlgVec, curve: spraylab_core::CurveSpec, span: (f64, f64) },
    OneParamFlow { w: AlgVec, t: f64, y0: AlgVec },
    Curvature { y: AlgVec, w: AlgVec, check: bool },
    Flag { y: AlgVec, w: AlgVec },
    SCurvature { y: AlgVec },
    Landsberg { y: AlgVec, w: AlgVec, check: bool },
    HolonomyDim { max_depth: usize, n_samples: usize, svd_tol: f64 },
    LoopDefect { w1: AlgVec, w2: AlgVec, y0: AlgVec, scales: Vec<f64> },
    Reconstruct { y0: AlgVec, span: (f64, f64), rep: MatrixRep, g0: Vec<(AlgVec, f64)> },
    Verify,
}

fn span(field: &str, s: [f64; 2]) -> Result<(f64, f64), CliError> {
    if !s.iter().all(|t| t.is_finite()) {
        return Err(CliError::Validation(format!("{field}: endpoints must be finite")));
    }
    Ok((s[0], s[1]))
}

pub fn prepare(task: &TaskBlock, ctx: &Context) -> Result<Prepared, CliError> {
    let n = ctx.algebra.dim();
    let v = |field: &str, x: &[f64]| config::vector(field, x, n);
    let metric_only = |what: &str| {
        if ctx.spray.is_metric() {
            Ok(())
        } else {
            Err(CliError::Validation(format!("task.kind: {what} needs a riemannian or randers spray")))
        }
    };
    Ok(match task {
        TaskBlock::Geodesic { y0, t_span } => Prepared::Geodesic { y0: v("task.y0", y0)?, span: span("task.t_span", *t_span)? },
        TaskBlock::TransportLinear { y0, w0, t_span } => Prepared::TransportLinear {
            y0: v("task.y0", y0)?,
            w0: v("task.w0", w0)?,
            span: span("task.t_span", *t_span)?,
        },
        TaskBlock::TransportNonlinear { y0, curve, t_span } => Prepared::TransportNonlinear {
            y0: v("task.y0", y0)?,
            curve: config::build_curve(curve, n)?,
            span: span("task.t_span", *t_span)?,
        },
        TaskBlock::OneParamFlow { w, t, y0 } => {
            Prepared::OneParamFlow { w: v("task.w", w)?, t: *t, y0: v("task.y0", y0)? }
        }
        TaskBlock::Curvature { y, w, transport_check } => {
            Prepared::Curvature { y: v("task.y", y)?, w: v("task.w", w)?, check: *transport_check }
        }
        TaskBlock::Flag { y, w } => {
            metric_only("flag curvature")?;
            Prepared::Flag { y: v("task.y", y)?, w: v("task.w", w)? }
        }
        TaskBlock::SCurvature { y } => Prepared::SCurvature { y: v("task.y", y)? },
        TaskBlock::Landsberg { y, w, transport_check } => {
            metric_only("Landsberg curvature")?;
            Prepared::Landsberg { y: v("task.y", y)?, w: v("task.w", w)?, check: *transport_check }
        }
        TaskBlock::HolonomyDim { max_depth, n_samples, svd_tol } => {
            if *max_depth == 0 || *max_depth > holonomy::DEFAULT_DEPTH_CAP {
                return Err(CliError::Validation(format!(
                    "task.max_depth: must lie in 1..={}",
                    holonomy::DEFAULT_DEPTH_CAP
                )));
            }
            if *n_samples == 0 {
                return Err(CliError::Validation("task.n_samples: must be ≥ 1".into()));
            }
            if !(*svd_tol > 0.0 && *svd_tol < 1.0) {
                return Err(CliError::Validation("task.svd_tol: must lie in (0, 1)".into()));
            }
            Prepared::HolonomyDim { max_depth: *max_depth, n_samples: *n_samples, svd_tol: *svd_tol }
        }
        TaskBlock::LoopDefect { w1, w2, y0, scales } => {
            if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) {
                return Err(CliError::Validation("task.scales: need positive scales".into()));
            }
            Prepared::LoopDefect { w1: v("task.w1", w1)?, w2: v("task.w2", w2)?, y0: v("task.y0", y0)?, scales: scales.clone() }
        }
        TaskBlock::Reconstruct { y0, t_span, rep, g0 } => {
            let name = rep.clone().unwrap_or_else(|| ctx.algebra.name().to_string());
            let rep = MatrixRep::catalog(&name)
                .map_err(|_| CliError::Validation(format!("task.rep: no matrix representation for `{name}`")))?;
            let residual = group_curves::verify_rep(&ctx.algebra, &rep).map_err(|e| CliError::Validation(format!("task.rep: {e}")))?;
            if residual > 1e-10 {
                return Err(CliError::Validation(format!(
                    "task.rep: `{name}` does not represent this algebra (residual {residual:.3e})"
                )));
            }
            Prepared::Reconstruct {
                y0: v("task.y0", y0)?,
                span: span("task.t_span", *t_span)?,
                rep,
                g0: config::build_legs("task.g0", g0, n)?,
            }
        }
        TaskBlock::Verify {} => Prepared::Verify,
    })
}

pub fn execute(p: Prepared, ctx: &Context) -> Result<Output, CliError> {
    let s = &ctx.spray;
    let cfg = &ctx.integrator;
    match p {
        Prepared::Geodesic { y0, span } => {
            complete(transport::geodesic_flow(s, &y0, span, cfg).map_err(|e| failure(e, "y"))?, "y")
        }
        Prepared::TransportLinear { y0, w0, span } => {
            let geo = transport::geodesic_flow(s, &y0, span, cfg).map_err(|e| failure(e, "y"))?;
            if !geo.is_complete() {
                return Err(CliError::Numerical {
                    message: format!("underlying geodesic stopped at t = {}", geo.end_time()),
                    partial: Some(trajectory_table(&geo, "y")),
                });
            }
            complete(transport::linear_transport(s, &geo, &w0, span, cfg).map_err(|e| failure(e, "w"))?, "w")
        }
        Prepared::TransportNonlinear { y0, curve, span } => {
            complete(transport::nonlinear_transport(s, &curve, &y0, span, cfg).map_err(|e| failure(e, "y"))?, "y")
        }
        Prepared::OneParamFlow { w, t, y0 } => {
            let y = transport::one_param_flow(s, &w, t, &y0, cfg).map_err(|e| failure(e, "y"))?;
            let rows = vec![
                std::iter::once(0.0).chain(y0.iter().copied()).collect(),
                std::iter::once(t).chain(y.iter().copied()).collect(),
            ];
            Ok(Output::Table { header: header("y", y.len()), rows, notes: vec![] })
        }
        Prepared::Curvature { y, w, check } => {
            let rep = curvature::riemann_report(s, &y, &w).map_err(|e| failure(e, "y"))?;
            let mut obj = json!({
                "y": vec_json(&rep.y),
                "w": vec_json(&rep.w),
                "R": vec_json(&rep.r),
                "method": rep.method.tag(),
            });
            if let Some(k) = rep.flag {
                obj["flag"] = json!(k);
            }
            if check {
                let tr = curvature::riemann_via_transport(s, &y, &w, 0.0, cfg).map_err(|e| failure(e, "y"))?;
                obj["R_transport"] = vec_json(&tr.r);
                obj["residual_vs_transport"] = json!((&tr.r - &rep.r).norm());
            }
            Ok(Output::Object(obj))
        }
        Prepared::Flag { y, w } => {
            let k = curvature::flag_curvature(s, &y, &w).map_err(|e| failure(e, "y"))?;
            Ok(Output::Object(json!({"y": vec_json(&y), "w": vec_json(&w), "flag": k})))
        }
        Prepared::SCurvature { y } => {
            let v = curvature::s_curvature(s, &y).map_err(|e| failure(e, "y"))?;
            Ok(Output::Object(json!({"y": vec_json(&y), "S": v})))
        }
        Prepared::Landsberg { y, w, check } => {
            let l = curvature::landsberg(s, &y, &w).map_err(|e| failure(e, "y"))?;
            let mut obj = json!({"y": vec_json(&y), "w": vec_json(&w), "L": l});
            if check {
                let lt = curvature::landsberg_via_transport(s, &y, &w, cfg).map_err(|e| failure(e, "y"))?;
                obj["L_transport"] = json!(lt);
                obj["residual_vs_transport"] = json!((l - lt).abs());
            }
            Ok(Output::Object(obj))
        }
        Prepared::HolonomyDim { max_depth, n_samples, svd_tol } => {
            let est = holonomy::dim_estimate(s, max_depth, n_samples, svd_tol, ctx.seed).map_err(|e| failure(e, "y"))?;
            Ok(Output::Object(json!({
                "label": "generator-algebra rank lower bound",
                "depths": est.profile.iter().map(|d| d.depth).collect::<Vec<_>>(),
                "ranks": est.profile.iter().map(|d| d.rank).collect::<Vec<_>>(),
                "words": est.profile.iter().map(|d| d.words).collect::<Vec<_>>(),
                "singular_values": est.profile.iter().map(|d| d.singular_values.clone()).collect::<Vec<_>>(),
                "sample_points": est.sample_points.iter().map(vec_json).collect::<Vec<_>>(),
                "seed": est.seed,
                "svd_tol": est.tolerance,
                "n_samples": n_samples,
            })))
        }
        Prepared::LoopDefect { w1, w2, y0, scales } => {
            let ladder = holonomy::loop_defect_ladder(s, &w1, &w2, &scales, &y0, cfg).map_err(|e| failure(e, "y"))?;
            let n = y0.len();
            let mut head = vec!["s".to_string()];
            head.extend((1..=n).map(|i| format!("d{i}")));
            head.push("norm".into());
            let rows = ladder
                .scales
                .iter()
                .zip(&ladder.defects)
                .map(|(h, d)| std::iter::once(*h).chain(d.iter().copied()).chain(std::iter::once(d.norm())).collect())
                .collect();
            let bracket = holonomy::vf_eval(s, &BracketWord::bracket(BracketWord::Leaf(0), BracketWord::Leaf(1)), &y0).ok();
            let mut notes = vec![(
                "slope".to_string(),
                ladder.slope.map_or("undefined".into(), |v| format!("{v}")),
            )];
            if let (Some(b), Some(d)) = (bracket, ladder.defects.last()) {
                let denom = b.norm() * d.norm();
                if denom > 0.0 {
                    notes.push(("cosine_vs_bracket".into(), format!("{}", d.dot(&b) / denom)));
                }
            }
            notes.push(("legs".into(), "(w1,s),(w2,s),(-w1,s),(-w2,s)".into()));
            Ok(Output::Table { header: head, rows, notes })
        }
        Prepared::Reconstruct { y0, span, rep, g0 } => {
            let geo = transport::geodesic_flow(s, &y0, span, cfg).map_err(|e| failure(e, "y"))?;
            if !geo.is_complete() {
                return Err(CliError::Numerical {
                    message: format!("geodesic stopped at t = {}", geo.end_time()),
                    partial: Some(trajectory_table(&geo, "y")),
                });
            }
            let c0 = group_curves::exp_word(&rep, &g0);
            let rec = group_curves::reconstruct_from(&rep, &geo, &c0, cfg).map_err(|e| failure(e, "y"))?;
            let m = rep.m;
            let mut head = vec!["t".to_string()];
            for i in 1..=m {
                for j in 1..=m {
                    head.push(format!("c{i}_{j}"));
                }
            }
            let rows = rec
                .times
                .iter()
                .zip(&rec.matrices)
                .map(|(t, c)| {
                    let mut row = vec![*t];
                    for i in 0..m {
                        for j in 0..m {
                            row.push(c[(i, j)]);
                        }
                    }
                    row
                })
                .collect();
            Ok(Output::Table { header: head, rows, notes: vec![] })
        }
        Prepared::Verify => crate::verify::run(ctx),
    }
}
