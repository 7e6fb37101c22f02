//! Command-line front end for spraylab-core.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure.

pub mod config;
pub mod tasks;
pub mod verify;

use clap::{Parser, Subcommand};
use config::Format;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use spraylab_core::group_curves::MatrixRep;
use spraylab_core::LieAlgebra;
use std::io::Write;
use std::path::{Path, PathBuf};
use tasks::Output;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{message}")]
    Numerical { message: String, partial: Option<Output> },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => EXIT_VALIDATION,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spraylab", version, about = "Left invariant spray geometry on Lie algebras")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the task described by a JSON config.
    Run {
        config: PathBuf,
        /// Override a config leaf, e.g. `--set task.t_span.1=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the invariant suites for the config's algebra and spray.
    Verify {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List catalog algebras and their matrix representations.
    Catalog,
}

struct Provenance {
    config_sha256: String,
    seed: u64,
    task: String,
}

impl Provenance {
    fn json(&self) -> Value {
        json!({
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "task": self.task,
            "tool": "spraylab",
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    fn csv_lines(&self) -> String {
        format!(
            "# tool: spraylab {}\n# config_sha256: {}\n# seed: {}\n# task: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_sha256,
            self.seed,
            self.task
        )
    }
}

fn format_float(v: f64, precision: usize) -> String {
    if v.is_finite() {
        format!("{:.*e}", precision - 1, v)
    } else {
        v.to_string()
    }
}

fn round_json(v: &mut Value, precision: usize) {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = num.as_f64().unwrap();
            let r: f64 = format_float(x, precision).parse().unwrap_or(x);
            *v = json!(r);
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_json(x, precision)),
        Value::Object(map) => map.values_mut().for_each(|x| round_json(x, precision)),
        _ => {}
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(out: &Output, format: Format, precision: usize, prov: &Provenance) -> String {
    match (out, format) {
        (Output::Table { header, rows, notes }, Format::Csv) => {
            let mut s = prov.csv_lines();
            for (k, v) in notes {
                s.push_str(&format!("# {k}: {v}\n"));
            }
            s.push_str(&header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
            s.push_str("\r\n");
            for row in rows {
                s.push_str(&row.iter().map(|v| format_float(*v, precision)).collect::<Vec<_>>().join(","));
                s.push_str("\r\n");
            }
            s
        }
        (Output::Table { header, rows, notes }, Format::Json) => {
            let notes: Map<String, Value> = notes.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect();
            let mut result = json!({"columns": header, "rows": rows, "notes": notes});
            round_json(&mut result, precision);
            pretty(&json!({"provenance": prov.json(), "result": result}))
        }
        (Output::Object(obj), _) => {
            let mut result = obj.clone();
            round_json(&mut result, precision);
            pretty(&json!({"provenance": prov.json(), "result": result}))
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn write_artifact(path: Option<&str>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = Path::new(p).parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
            }
            std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_string(), source })
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn load(path: &Path, overrides: &[String], force_verify: bool) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())))?;
    if !doc.is_object() {
        return Err(CliError::Validation(format!("{}: config must be a JSON object", path.display())));
    }
    for o in overrides {
        config::apply_override(&mut doc, o)?;
    }
    if force_verify {
        doc["task"] = json!({"kind": "verify"});
    }
    Ok(doc)
}

fn hash(doc: &Value) -> String {
    hex::encode(Sha256::digest(serde_json::to_string(doc).expect("JSON values serialize").as_bytes()))
}

/// Executes a config; returns the exit code.
pub fn run_config(path: &Path, overrides: &[String], force_verify: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let doc = match load(path, overrides, force_verify) {
        Ok(d) => d,
        Err(e) => return report(&e, None, None, stderr),
    };
    let cfg = match config::parse(&doc) {
        Ok(c) => c,
        Err(e) => return report(&e, None, None, stderr),
    };
    let prov = Provenance { config_sha256: hash(&doc), seed: cfg.seed, task: cfg.task.kind().to_string() };
    let precision = cfg.output.precision;
    let path = cfg.output.path.clone();
    let setup = || -> Result<(tasks::Context, tasks::Prepared, Format), CliError> {
        if !(1..=17).contains(&precision) {
            return Err(CliError::Validation("output.precision: must lie in 1..=17".into()));
        }
        let table = tasks::emits_table(&cfg.task);
        let format = cfg.output.format.unwrap_or(if table { Format::Csv } else { Format::Json });
        if format == Format::Csv && !table {
            return Err(CliError::Validation(format!("output.format: task `{}` emits JSON only", cfg.task.kind())));
        }
        let ctx = tasks::Context::build(&cfg)?;
        let prepared = tasks::prepare(&cfg.task, &ctx)?;
        Ok((ctx, prepared, format))
    };
    let (ctx, prepared, format) = match setup() {
        Ok(v) => v,
        Err(e) => return report(&e, Some(&prov), path.as_deref(), stderr),
    };
    match tasks::execute(prepared, &ctx) {
        Ok(out) => {
            let text = render(&out, format, precision, &prov);
            if let Err(e) = write_artifact(path.as_deref(), &text, stdout) {
                return report(&e, Some(&prov), None, stderr);
            }
            match &out {
                Output::Object(v) if matches!(cfg.task, config::TaskBlock::Verify {}) && !verify::report_passed(v) => {
                    let e = CliError::Numerical { message: "invariant suite failed".into(), partial: None };
                    report(&e, Some(&prov), path.as_deref(), stderr)
                }
                _ => EXIT_OK,
            }
        }
        Err(CliError::Numerical { message, partial }) => {
            if let Some(p) = &partial {
                let fmt = if p.is_table() { format } else { Format::Json };
                let _ = write_artifact(path.as_deref(), &render(p, fmt, precision, &prov), stdout);
            }
            let e = CliError::Numerical { message, partial: None };
            report(&e, Some(&prov), path.as_deref(), stderr)
        }
        Err(e) => report(&e, Some(&prov), path.as_deref(), stderr),
    }
}

/// Prints the error; numerical failures also get a status JSON next to the
/// artifact (or on stderr without an output path).
fn report(e: &CliError, prov: Option<&Provenance>, path: Option<&str>, stderr: &mut dyn Write) -> i32 {
    let code = e.exit_code();
    let kind = match e {
        CliError::Validation(_) => "validation_error",
        CliError::Io { .. } => "io_error",
        CliError::Numerical { .. } => "numerical_failure",
    };
    let _ = writeln!(stderr, "spraylab: {kind}: {e}");
    if code == EXIT_NUMERICAL {
        let status = pretty(&json!({
            "status": kind,
            "exit_code": code,
            "message": e.to_string(),
            "artifact": path,
            "provenance": prov.map(Provenance::json),
        }));
        match path {
            Some(p) => {
                let sp = format!("{p}.status.json");
                if std::fs::write(&sp, &status).is_err() {
                    let _ = stderr.write_all(status.as_bytes());
                }
            }
            None => {
                let _ = stderr.write_all(status.as_bytes());
            }
        }
    }
    code
}

pub fn catalog_listing() -> String {
    let mut s = String::new();
    for name in ["su2", "heisenberg3", "sl2r", "e2", "solvable2", "abelian_2", "abelian_3"] {
        let a = LieAlgebra::catalog(name).expect("catalog entry");
        let mut brackets = Vec::new();
        for i in 0..a.dim() {
            for j in i + 1..a.dim() {
                let b = a.bracket(&a.basis(i), &a.basis(j)).expect("basis bracket");
                let terms: Vec<String> = b
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| format!("{v}·e{}", k + 1))
                    .collect();
                if !terms.is_empty() {
                    brackets.push(format!("[e{},e{}]={}", i + 1, j + 1, terms.join("+")));
                }
            }
        }
        let rep = MatrixRep::catalog(name).map(|r| format!("{0}×{0}", r.m)).unwrap_or_else(|_| "none".into());
        let shown = if brackets.is_empty() { "abelian".to_string() } else { brackets.join(", ") };
        s.push_str(&format!("{name:<12} dim {}  rep {rep:<5} {shown}\n", a.dim()));
    }
    s.push_str("abelian_n    any n ≥ 1, rep (n+1)×(n+1)\n");
    s
}

pub fn main_with(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Run { config, set } => run_config(&config, &set, false, stdout, stderr),
        Command::Verify { config, set } => run_config(&config, &set, true, stdout, stderr),
        Command::Catalog => {
            let _ = stdout.write_all(catalog_listing().as_bytes());
            EXIT_OK
        }
    }
}
