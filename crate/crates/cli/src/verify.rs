//! Invariant suites for the configured algebra and spray.

use crate::tasks::{Context, Output};
use crate::CliError;
use serde_json::{json, Value};
use spraylab_core::curvature::{self, riemann};
use spraylab_core::group_curves::{self, MatrixRep};
use spraylab_core::holonomy::{self, BracketWord};
use spraylab_core::{transport, AlgVec, Result};

struct Suite {
    name: &'static str,
    tolerance: f64,
    outcome: Result<Option<f64>>,
}

impl Suite {
    fn json(&self) -> Value {
        match &self.outcome {
            Ok(Some(v)) => json!({
                "name": self.name,
                "status": if *v <= self.tolerance { "pass" } else { "fail" },
                "value": v,
                "tolerance": self.tolerance,
            }),
            Ok(None) => json!({"name": self.name, "status": "skipped"}),
            Err(e) => json!({"name": self.name, "status": "fail", "error": e.to_string()}),
        }
    }

    fn passed(&self) -> bool {
        match &self.outcome {
            Ok(Some(v)) => *v <= self.tolerance,
            Ok(None) => true,
            Err(_) => false,
        }
    }
}

fn max_over<F>(points: &[AlgVec], mut f: F) -> Result<Option<f64>>
where
    F: FnMut(&AlgVec, &AlgVec) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    for (k, y) in points.iter().enumerate() {
        let w = &points[(k + 1) % points.len()];
        worst = worst.max(f(y, w)?);
    }
    Ok(Some(worst))
}

fn rel(a: &AlgVec, b: &AlgVec) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

pub fn run(ctx: &Context) -> std::result::Result<Output, CliError> {
    let s = &ctx.spray;
    let alg = &ctx.algebra;
    let n = alg.dim();
    let cfg = &ctx.integrator;
    let pts = holonomy::sphere_samples(n, 6, ctx.seed);
    let lift = s.y_floor().max(1.0);
    let pts: Vec<AlgVec> = pts.into_iter().map(|p| p * lift).collect();

    let mut suites = vec![
        Suite { name: "jacobi_identity", tolerance: 1e-10, outcome: Ok(Some(alg.jacobi_defect())) },
        Suite {
            name: "spray_homogeneity",
            tolerance: 1e-9,
            outcome: max_over(&pts, |y, _| Ok(rel(&s.eta(&(y * 2.0))?, &(s.eta(y)? * 4.0)))),
        },
        Suite {
            name: "connection_euler_identity",
            tolerance: 1e-9,
            outcome: max_over(&pts, |y, _| Ok(rel(&s.connection(y, y)?, &s.eta(y)?))),
        },
        Suite {
            name: "riemann_flagpole",
            tolerance: 1e-8,
            outcome: max_over(&pts, |y, _| Ok(riemann(s, y, y)?.amax())),
        },
        Suite {
            name: "riemann_linearity",
            tolerance: 1e-8,
            outcome: max_over(&pts, |y, w| {
                let u = alg.basis(0);
                let lhs = riemann(s, y, &(w * 2.0 - &u))?;
                Ok(rel(&lhs, &(riemann(s, y, w)? * 2.0 - riemann(s, y, &u)?)))
            }),
        },
        Suite {
            name: "riemann_homogeneity",
            tolerance: 1e-7,
            outcome: max_over(&pts, |y, w| Ok(rel(&riemann(s, &(y * 2.0), w)?, &(riemann(s, y, w)? * 4.0)))),
        },
        Suite {
            name: "curvature_dual_route",
            tolerance: 1e-5,
            outcome: max_over(&pts[..3], |y, w| {
                let tr = curvature::riemann_via_transport(s, y, w, 0.0, cfg)?;
                let a = riemann(s, &tr.y, &tr.w)?;
                Ok((&tr.r - &a).norm() / (1.0 + a.norm()))
            }),
        },
        Suite {
            name: "bracket_antisymmetry",
            tolerance: 1e-9,
            outcome: if n < 2 {
                Ok(None)
            } else {
                max_over(&pts, |y, _| {
                    let (a, b) = (BracketWord::Leaf(0), BracketWord::Leaf(n - 1));
                    let x = holonomy::vf_eval(s, &BracketWord::bracket(a.clone(), b.clone()), y)?;
                    let z = holonomy::vf_eval(s, &BracketWord::bracket(b, a), y)?;
                    Ok((&x + &z).amax() / (1.0 + x.amax()))
                })
            },
        },
        Suite {
            name: "transport_semigroup",
            tolerance: 1e-7,
            outcome: max_over(&pts[..3], |y, w| {
                let once = transport::one_param_flow(s, w, 1.0, y, cfg)?;
                let half = transport::one_param_flow(s, w, 0.5, y, cfg)?;
                Ok(rel(&transport::one_param_flow(s, w, 0.5, &half, cfg)?, &once))
            }),
        },
    ];

    suites.push(Suite {
        name: "zero_spray_closed_form",
        tolerance: 0.0,
        outcome: if s.is_zero() {
            max_over(&pts, |y, w| Ok((s.connection(y, w)? + alg.bracket(y, w)? * 0.5).amax()))
        } else {
            Ok(None)
        },
    });

    let metric = s.is_metric();
    suites.push(Suite {
        name: "geodesic_norm_conservation",
        tolerance: 1e-6,
        outcome: if metric {
            max_over(&pts[..2], |y, _| {
                let f0 = s.finsler_norm(y).unwrap_or(f64::NAN);
                let traj = transport::geodesic_flow(s, y, (0.0, 5.0), cfg)?;
                Ok(traj
                    .states()
                    .iter()
                    .map(|x| (s.finsler_norm(x).unwrap_or(f64::NAN) - f0).abs() / f0)
                    .fold(0.0, f64::max))
            })
        } else {
            Ok(None)
        },
    });
    suites.push(Suite {
        name: "riemannian_self_adjointness",
        tolerance: 1e-7,
        outcome: if s.is_riemannian() && n >= 2 {
            max_over(&pts, |y, w| {
                let g = s.fundamental_tensor(y)?;
                let perp = |x: &AlgVec| x - y * (g.inner(x, y) / g.inner(y, y));
                let (u, v) = (perp(w), perp(&alg.basis(0)));
                let a = g.inner(&riemann(s, y, &u)?, &v);
                let b = g.inner(&riemann(s, y, &v)?, &u);
                Ok((a - b).abs() / (1.0 + a.abs()))
            })
        } else {
            Ok(None)
        },
    });
    suites.push(Suite {
        name: "landsberg_dual_route",
        tolerance: 1e-4,
        outcome: if metric {
            max_over(&pts[..2], |y, w| {
                Ok((curvature::landsberg(s, y, w)? - curvature::landsberg_via_transport(s, y, w, cfg)?).abs())
            })
        } else {
            Ok(None)
        },
    });
    suites.push(Suite {
        name: "matrix_representation",
        tolerance: 1e-10,
        outcome: match MatrixRep::catalog(alg.name()) {
            Ok(rep) if rep.rho.len() == n => group_curves::verify_rep(alg, &rep).map(Some),
            _ => Ok(None),
        },
    });

    let all = suites.iter().all(Suite::passed);
    Ok(Output::Object(json!({
        "status": if all { "pass" } else { "fail" },
        "algebra": alg.name(),
        "suites": suites.iter().map(Suite::json).collect::<Vec<_>>(),
        "seed": ctx.seed,
    })))
}

/// True when every suite in a verify report passed.
pub fn report_passed(report: &Value) -> bool {
    report.get("status").and_then(Value::as_str) == Some("pass")
}
