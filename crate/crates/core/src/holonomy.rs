//! Iterated brackets of the generator fields `y ↦ N(y, e_i)` and numerical
//! evidence for the dimension of the algebra they generate.
//!
//! Ranks reported here are lower bounds for the generated algebra restricted
//! to the sampled points, never its dimension.

use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::jet::{self, Jet};
use crate::lie_algebra::AlgVec;
use crate::numdiff;
use crate::spray::{self, DiffMode, SprayField};
use crate::transport;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;

pub const DEFAULT_DEPTH_CAP: usize = 5;
pub const DEFAULT_WORD_CAP: usize = 2000;
pub const DEFAULT_SVD_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BracketWord {
    Leaf(usize),
    Node(Box<BracketWord>, Box<BracketWord>),
}

impl BracketWord {
    pub fn bracket(a: BracketWord, b: BracketWord) -> Self {
        BracketWord::Node(Box::new(a), Box::new(b))
    }

    pub fn height(&self) -> usize {
        match self {
            BracketWord::Leaf(_) => 1,
            BracketWord::Node(a, b) => 1 + a.height().max(b.height()),
        }
    }

    pub fn max_leaf(&self) -> usize {
        match self {
            BracketWord::Leaf(i) => *i,
            BracketWord::Node(a, b) => a.max_leaf().max(b.max_leaf()),
        }
    }
}

impl fmt::Display for BracketWord {
    /// 1-based leaves, e.g. `[1,[2,3]]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketWord::Leaf(i) => write!(f, "{}", i + 1),
            BracketWord::Node(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// All canonical words of height ≤ `max_depth`. A bracket pairs two distinct
/// earlier words, the earlier one on the left, at least one of them of
/// maximal height; `[X, X]` never appears.
pub fn generate_words(n_basis: usize, max_depth: usize, word_cap: usize) -> Result<Vec<BracketWord>> {
    if max_depth == 0 || n_basis == 0 {
        return Err(Error::InvalidArgument("need max_depth ≥ 1 and a nonempty basis".into()));
    }
    let mut words: Vec<BracketWord> = (0..n_basis).map(BracketWord::Leaf).collect();
    if words.len() > word_cap {
        return Err(refusal(word_cap, 1));
    }
    let mut prev_start = 0;
    for depth in 2..=max_depth {
        let prev_end = words.len();
        let mut next = Vec::new();
        for b in prev_start..prev_end {
            for a in 0..b {
                next.push(BracketWord::bracket(words[a].clone(), words[b].clone()));
                if prev_end + next.len() > word_cap {
                    return Err(refusal(word_cap, depth));
                }
            }
        }
        prev_start = prev_end;
        words.extend(next);
    }
    Ok(words)
}

fn refusal(cap: usize, depth: usize) -> Error {
    Error::Refused(format!(
        "more than {cap} bracket words at depth {depth}; lower max_depth or raise the word cap"
    ))
}

/// Field value of `word` at a jet point.
fn eval_jet(s: &SprayField, word: &BracketWord, y: &[Jet]) -> Result<Vec<Jet>> {
    match word {
        BracketWord::Leaf(i) => {
            let e = jet::constants(s.algebra().basis(*i).as_slice(), 0);
            s.connection_jet(y, &e)
        }
        BracketWord::Node(a, b) => {
            let x = eval_jet(s, a, y)?;
            let z = eval_jet(s, b, y)?;
            let dz_x = directional_jet(s, b, y, &x)?;
            let dx_z = directional_jet(s, a, y, &z)?;
            Ok(dz_x.iter().zip(&dx_z).map(|(p, q)| p - q).collect())
        }
    }
}

fn directional_jet(s: &SprayField, word: &BracketWord, y: &[Jet], dir: &[Jet]) -> Result<Vec<Jet>> {
    let k = jet::max_units(y).max(jet::max_units(dir));
    let lifted: Vec<Jet> = y.iter().map(|v| v.lift(k)).collect();
    let p = jet::perturb_vec(&lifted, k, dir);
    Ok(eval_jet(s, word, &p)?.iter().map(|v| v.extract_top(1)).collect())
}

fn eval_fd(s: &SprayField, word: &BracketWord, y: &AlgVec) -> Result<AlgVec> {
    match word {
        BracketWord::Leaf(i) => s.connection(y, &s.algebra().basis(*i)),
        BracketWord::Node(a, b) => {
            let x = eval_fd(s, a, y)?;
            let z = eval_fd(s, b, y)?;
            let h = s.fd_step(y);
            let dz_x = numdiff::directional_richardson(|p| eval_fd(s, b, p), y, &x, h)?;
            let dx_z = numdiff::directional_richardson(|p| eval_fd(s, a, p), y, &z, h)?;
            Ok(dz_x - dx_z)
        }
    }
}

/// Value at `y` of the vector field named by `word`; brackets follow
/// `[X, Y](y) = DY(y; X(y)) − DX(y; Y(y))`.
pub fn vf_eval(s: &SprayField, word: &BracketWord, y: &AlgVec) -> Result<AlgVec> {
    vf_eval_capped(s, word, y, DEFAULT_DEPTH_CAP)
}

pub fn vf_eval_capped(s: &SprayField, word: &BracketWord, y: &AlgVec, depth_cap: usize) -> Result<AlgVec> {
    s.check_point(y)?;
    if word.max_leaf() >= s.dim() {
        return Err(Error::InvalidArgument(format!("word {word} names a missing basis vector")));
    }
    if word.height() > depth_cap {
        return Err(Error::Refused(format!("word height {} exceeds depth cap {depth_cap}", word.height())));
    }
    match s.diff_mode() {
        DiffMode::Dual => Ok(spray::to_alg(&eval_jet(s, word, &jet::constants(y.as_slice(), 0))?)),
        DiffMode::FiniteDifference => eval_fd(s, word, y),
    }
}

#[derive(Debug, Clone)]
pub struct DepthRank {
    pub depth: usize,
    pub words: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    pub depth_used: usize,
    pub sample_points: Vec<AlgVec>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub tolerance: f64,
    pub words_evaluated: usize,
    /// Rank at each depth `1..=depth_used`, all against the same threshold.
    pub profile: Vec<DepthRank>,
    pub seed: u64,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let (mut inv, mut f) = (0.0, 1.0 / base as f64);
    while i > 0 {
        inv += (i % b) as f64 * f;
        i /= b;
        f /= base as f64;
    }
    inv
}

/// Shifted Halton points pushed to the unit sphere through Box–Muller.
pub fn sphere_samples(n: usize, count: usize, seed: u64) -> Vec<AlgVec> {
    let dims = n.div_ceil(2) * 2;
    assert!(dims <= PRIMES.len(), "sphere sampling supports up to {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let u: Vec<f64> = (0..dims)
            .map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract().max(1e-300))
            .collect();
        i += 1;
        let mut v = AlgVec::zeros(n);
        for k in 0..n {
            let (u1, u2) = (u[k - k % 2], u[k - k % 2 + 1]);
            let r = (-2.0 * u1.ln()).sqrt();
            let a = std::f64::consts::TAU * u2;
            v[k] = if k % 2 == 0 { r * a.cos() } else { r * a.sin() };
        }
        let norm = v.norm();
        if norm > 1e-6 {
            out.push(v / norm);
        }
    }
    out
}

fn rank_above(sv: &[f64], threshold: f64) -> usize {
    sv.iter().filter(|&&v| v > threshold).count()
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Rank profile of the generator-bracket evaluation matrix. Each word's
/// values at all sample points form one row, normalized to unit length; the
/// threshold is `svd_tol · σ_max` of the deepest matrix, so ranks never
/// decrease with depth.
pub fn dim_estimate(s: &SprayField, max_depth: usize, n_samples: usize, svd_tol: f64, seed: u64) -> Result<DimensionEstimate> {
    dim_estimate_capped(s, max_depth, n_samples, svd_tol, seed, DEFAULT_WORD_CAP)
}

pub fn dim_estimate_capped(
    s: &SprayField,
    max_depth: usize,
    n_samples: usize,
    svd_tol: f64,
    seed: u64,
    word_cap: usize,
) -> Result<DimensionEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be ≥ 1".into()));
    }
    if !(svd_tol > 0.0 && svd_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("svd_tol must lie in (0, 1), got {svd_tol}")));
    }
    if max_depth > DEFAULT_DEPTH_CAP {
        return Err(Error::Refused(format!("max_depth {max_depth} exceeds depth cap {DEFAULT_DEPTH_CAP}")));
    }
    let n = s.dim();
    let words = generate_words(n, max_depth, word_cap)?;
    let points = sphere_samples(n, n_samples, seed);
    let floor = s.y_floor();
    let points: Vec<AlgVec> = points.into_iter().map(|p| if floor > 1.0 { p * (2.0 * floor) } else { p }).collect();

    let columns: Vec<Vec<AlgVec>> = points
        .par_iter()
        .map(|y| words.iter().map(|w| vf_eval(s, w, y)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut m = DMatrix::zeros(words.len(), n * points.len());
    for (p, vals) in columns.iter().enumerate() {
        for (r, v) in vals.iter().enumerate() {
            m.view_mut((r, p * n), (1, n)).copy_from(&v.transpose());
        }
    }
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }

    let full = singular_values(&m);
    let sigma_max = full.first().copied().unwrap_or(0.0);
    let threshold = svd_tol * sigma_max;
    let mut profile = Vec::with_capacity(max_depth);
    for depth in 1..=max_depth {
        let rows = words.iter().take_while(|w| w.height() <= depth).count();
        let sv = if rows == words.len() { full.clone() } else { singular_values(&m.rows(0, rows).into_owned()) };
        let rank = if sigma_max > 0.0 { rank_above(&sv, threshold) } else { 0 };
        profile.push(DepthRank { depth, words: rows, rank, singular_values: sv });
    }
    Ok(DimensionEstimate {
        depth_used: max_depth,
        sample_points: points,
        rank: profile.last().map_or(0, |d| d.rank),
        singular_values: full,
        tolerance: svd_tol,
        words_evaluated: words.len(),
        profile,
        seed,
    })
}

/// Endpoint of the commutator loop `(w1,s), (w2,s), (−w1,s), (−w2,s)` minus
/// `y0`. To leading order this is `s² [N(·,w1), N(·,w2)](y0)`.
pub fn loop_defect(s: &SprayField, w1: &AlgVec, w2: &AlgVec, scale: f64, y0: &AlgVec, cfg: &IntegratorConfig) -> Result<AlgVec> {
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!("loop scale must be positive, got {scale}")));
    }
    let legs = [(w1.clone(), scale), (w2.clone(), scale), (-w1, scale), (-w2, scale)];
    Ok(transport::loop_transport(s, &legs, y0, cfg)? - y0)
}

#[derive(Debug, Clone)]
pub struct LoopLadder {
    pub scales: Vec<f64>,
    pub defects: Vec<AlgVec>,
    /// Least-squares slope of `log ‖defect‖` against `log s`; `None` when a
    /// defect vanishes.
    pub slope: Option<f64>,
}

pub fn loop_defect_ladder(
    s: &SprayField,
    w1: &AlgVec,
    w2: &AlgVec,
    scales: &[f64],
    y0: &AlgVec,
    cfg: &IntegratorConfig,
) -> Result<LoopLadder> {
    let defects = scales
        .iter()
        .map(|&h| loop_defect(s, w1, w2, h, y0, cfg))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = scales.iter().zip(&defects).map(|(h, d)| (h.ln(), d.norm().ln())).collect();
    let slope = if pts.len() >= 2 && pts.iter().all(|p| p.1.is_finite()) {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Ok(LoopLadder { scales: scales.to_vec(), defects, slope })
}
