//! Log-determinants as sums of row distances, and the replacement statistic
//! comparing constrained rows with i.i.d. rows.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{shifted_rows, CVector, C64};
use crate::rng::trial_stream;
use crate::sampler::{sample_row_sum_matrix, RowModel};

/// A distance at or below this multiple of `max(1, ‖v‖)` counts as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Orthonormal basis grown one vector at a time (classical Gram–Schmidt with
/// one reorthogonalization pass).
#[derive(Debug, Clone, Default)]
pub struct Orthonormalizer {
    dim: usize,
    basis: Vec<CVector>,
}

impl Orthonormalizer {
    pub fn new(dim: usize) -> Self {
        Orthonormalizer { dim, basis: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Component of `v` orthogonal to the current span.
    pub fn residual(&self, v: &CVector) -> CVector {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &self.basis {
                let c = q.dotc(&w);
                w.axpy(-c, q, C64::new(1.0, 0.0));
            }
        }
        w
    }

    /// Distance from `v` to the current span; `v` joins the span afterwards
    /// unless it already lies in it.
    pub fn push(&mut self, v: &CVector) -> Result<f64> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!("vector of length {} in dimension {}", v.len(), self.dim)));
        }
        let w = self.residual(v);
        let d = w.norm();
        if d > DEGENERATE_TOL * v.norm().max(1.0) {
            self.basis.push(w.unscale(d));
        }
        Ok(d)
    }
}

/// Euclidean distance from `v` to `span(basis)`; an empty basis gives `‖v‖`.
pub fn distance_to_span(v: &CVector, basis: &[CVector]) -> Result<f64> {
    let mut ortho = Orthonormalizer::new(v.len());
    for b in basis {
        ortho.push(b)?;
    }
    ortho.push(v)
}

/// `log|det R| = Σ_i log dist(r_i, span(r_1, …, r_{i−1}))` split at index `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDetDecomposition {
    pub distances: Vec<f64>,
    pub m: usize,
    pub log_s1: f64,
    pub log_s2: f64,
    pub z: C64,
    /// `log_s1 + log_s2`.
    pub total: f64,
}

impl LogDetDecomposition {
    pub fn n(&self) -> usize {
        self.distances.len()
    }

    /// Same distances, split at `m`.
    pub fn with_split(&self, m: usize) -> Result<Self> {
        let (log_s1, log_s2) = split_logdet(self, m)?;
        Ok(LogDetDecomposition { m, log_s1, log_s2, total: log_s1 + log_s2, ..self.clone() })
    }

    /// Smallest and largest distance among rows `m+1..=n`.
    pub fn tail_range(&self) -> Option<(f64, f64)> {
        let tail = &self.distances[self.m.min(self.n())..];
        let lo = tail.iter().copied().reduce(f64::min)?;
        let hi = tail.iter().copied().reduce(f64::max)?;
        Some((lo, hi))
    }
}

/// Base-times-height decomposition of the matrix with the given rows;
/// `z` is recorded as metadata. Fails with [`Error::Degenerate`] at the first
/// row lying in the span of its predecessors.
pub fn logdet_via_distances(rows: &[CVector], z: C64) -> Result<LogDetDecomposition> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("rows", "need at least one row"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension(format!("{n} rows of length {}", r.len())));
    }
    let mut ortho = Orthonormalizer::new(n);
    let mut distances = Vec::with_capacity(n);
    for (i, r) in rows.iter().enumerate() {
        let d = ortho.push(r)?;
        if d <= DEGENERATE_TOL * r.norm().max(1.0) {
            return Err(Error::Degenerate { index: i, value: d });
        }
        distances.push(d);
    }
    let log_s1: f64 = distances.iter().map(|d| d.ln()).sum();
    Ok(LogDetDecomposition { distances, m: n, log_s1, log_s2: 0.0, z, total: log_s1 })
}

/// `(Σ_{i≤m} log d_i, Σ_{i>m} log d_i)` for `0 ≤ m ≤ n`.
pub fn split_logdet(decomp: &LogDetDecomposition, m: usize) -> Result<(f64, f64)> {
    let n = decomp.n();
    if m > n {
        return Err(Error::invalid("m", format!("split index {m} exceeds n = {n}")));
    }
    let head = decomp.distances[..m].iter().map(|d| d.ln()).sum();
    let tail = decomp.distances[m..].iter().map(|d| d.ln()).sum();
    Ok((head, tail))
}

/// Split index used by default, with the asymptotic choice kept for reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitIndex {
    /// `n − ⌈(ln n)²⌉` clamped to `[1, n−1]`.
    pub m: usize,
    /// `n − (ln n)⁸`, typically negative at these sizes.
    pub asymptotic: f64,
}

pub fn default_split(n: usize) -> SplitIndex {
    let l = (n as f64).ln();
    let raw = n as i64 - (l * l).ceil() as i64;
    let m = raw.clamp(1, (n as i64 - 1).max(1)) as usize;
    SplitIndex { m, asymptotic: n as f64 - l.powi(8) }
}

/// One paired draw of the replacement statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReplacementOutcome {
    Value {
        /// `(1/n)[log|det(X+F−z√n)| − log|det(X′+F−z√n)|]`.
        statistic: f64,
        constrained: LogDetDecomposition,
        iid: LogDetDecomposition,
    },
    /// One of the shifted matrices was numerically singular.
    Singular { constrained: bool, iid: bool },
}

impl ReplacementOutcome {
    pub fn statistic(&self) -> Option<f64> {
        match self {
            ReplacementOutcome::Value { statistic, .. } => Some(*statistic),
            ReplacementOutcome::Singular { .. } => None,
        }
    }
}

fn check_shift(n: usize, f: Option<&DMatrix<f64>>) -> Result<()> {
    if let Some(f) = f {
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::Dimension(format!("F is {}×{}, expected {n}×{n}", f.nrows(), f.ncols())));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("F", "entries must be finite"));
        }
    }
    Ok(())
}

/// Statistic for given `X` (constrained rows) and `X′` (i.i.d. rows).
pub fn replacement_statistic_from(
    x: &DMatrix<f64>,
    x_iid: &DMatrix<f64>,
    f: Option<&DMatrix<f64>>,
    z: C64,
    m: usize,
) -> Result<ReplacementOutcome> {
    let n = x.nrows();
    if !x.is_square() || x_iid.shape() != x.shape() {
        return Err(Error::Dimension("X and X′ must be square of equal size".into()));
    }
    check_shift(n, f)?;
    let a = logdet_via_distances(&shifted_rows(x, f, z), z);
    let b = logdet_via_distances(&shifted_rows(x_iid, f, z), z);
    match (a, b) {
        (Ok(a), Ok(b)) => {
            let (a, b) = (a.with_split(m)?, b.with_split(m)?);
            let statistic = (a.total - b.total) / n as f64;
            Ok(ReplacementOutcome::Value { statistic, constrained: a, iid: b })
        }
        (a, b) => {
            let constrained = a.is_err();
            let iid = b.is_err();
            for r in [a, b] {
                match r {
                    Err(Error::Degenerate { .. }) | Ok(_) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(ReplacementOutcome::Singular { constrained, iid })
        }
    }
}

/// One paired draw: `X` with rows uniform on 𝒮, `X′` with skewed Bernoulli rows.
pub fn replacement_statistic<R: Rng + ?Sized>(
    n: usize,
    s: i64,
    f: Option<&DMatrix<f64>>,
    z: C64,
    rng: &mut R,
) -> Result<ReplacementOutcome> {
    let x = sample_row_sum_matrix(n, s, RowModel::UnionS, rng)?;
    let x_iid = sample_row_sum_matrix(n, s, RowModel::Iid, rng)?;
    replacement_statistic_from(&x, &x_iid, f, z, default_split(n).m)
}

/// Replacement statistic over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementReport {
    pub n: usize,
    pub s: i64,
    pub z: C64,
    pub values: Vec<f64>,
    pub excluded: usize,
    /// Median of `|statistic|` over the included trials.
    pub median_abs: Option<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 { values[k / 2] } else { 0.5 * (values[k / 2 - 1] + values[k / 2]) })
}

/// Runs `trials` paired draws, trial `i` using the stream derived from `(seed, i)`.
pub fn replacement_experiment(
    n: usize,
    s: i64,
    f: Option<&DMatrix<f64>>,
    z: C64,
    trials: usize,
    seed: u64,
) -> Result<ReplacementReport> {
    RowModel::UnionS.validate(n, s)?;
    let outcomes: Vec<Result<ReplacementOutcome>> = (0..trials)
        .into_par_iter()
        .map(|t| replacement_statistic(n, s, f, z, &mut trial_stream(seed, t as u64)))
        .collect();
    let mut values = Vec::with_capacity(trials);
    let mut excluded = 0;
    for o in outcomes {
        match o?.statistic() {
            Some(v) => values.push(v),
            None => excluded += 1,
        }
    }
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let median_abs = median(&mut abs);
    Ok(ReplacementReport { n, s, z, values, excluded, median_abs })
}
