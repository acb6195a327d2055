//! Distance from a random sign vector to a fixed subspace: projections, the
//! decomposition `d′² = (n−k) + d_{f′}² + Y`, moment checks and tail tables.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::logdet::median;
use crate::rng::{from_seed, trial_stream};
use crate::sampler::{RowModel, SignVector};

/// Singular values below this multiple of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Orthogonal projection onto the complement of a `k`-dimensional subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    p: CMatrix,
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    k: usize,
}

/// Deviations from the projection identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionInvariants {
    /// `max |P − P*|`.
    pub hermitian: f64,
    /// `max |P² − P|`.
    pub idempotent: f64,
    /// `|tr P − (n − k)|`.
    pub trace: f64,
}

impl ProjectionInvariants {
    pub fn holds(&self) -> bool {
        self.hermitian <= 1e-10 && self.idempotent <= 1e-10 && self.trace <= 1e-8
    }
}

impl ProjectionOperator {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// Dimension of the subspace being projected away.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.p
    }

    pub fn invariants(&self) -> ProjectionInvariants {
        let max_abs = |m: &CMatrix| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let n = self.n();
        ProjectionInvariants {
            hermitian: max_abs(&(&self.p - self.p.adjoint())),
            idempotent: max_abs(&(&self.p * &self.p - &self.p)),
            trace: (self.p.trace() - C64::new((n - self.k) as f64, 0.0)).norm(),
        }
    }

    /// `P v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        let (vr, vi) = (v.map(|z| z.re), v.map(|z| z.im));
        let re = &self.re * &vr - &self.im * &vi;
        let im = &self.re * &vi + &self.im * &vr;
        CVector::from_fn(v.len(), |i, _| C64::new(re[i], im[i]))
    }

    /// `‖P v‖²` for a real vector.
    pub fn norm_sq_real(&self, v: &DVector<f64>) -> f64 {
        (&self.re * v).norm_squared() + (&self.im * v).norm_squared()
    }
}

/// Projection onto `span(basis)^⊥` in `ℂⁿ`, with `k` the numerical rank of
/// the basis.
pub fn projection_complement(basis: &[CVector], n: usize) -> Result<ProjectionOperator> {
    if let Some(b) = basis.iter().find(|b| b.len() != n) {
        return Err(Error::Dimension(format!("basis vector of length {} in dimension {n}", b.len())));
    }
    let mut p = CMatrix::identity(n, n);
    let mut k = 0;
    if !basis.is_empty() {
        let b = CMatrix::from_columns(basis);
        let svd = b.try_svd(true, false, f64::EPSILON, 0).ok_or(Error::NoConvergence { routine: "singular value decomposition" })?;
        let u = svd.u.expect("requested U");
        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        for (j, &sigma) in svd.singular_values.iter().enumerate() {
            if top > 0.0 && sigma > RANK_TOL * top {
                let col = u.column(j);
                p -= col * col.adjoint();
                k += 1;
            }
        }
    }
    Ok(ProjectionOperator { re: p.map(|z| z.re), im: p.map(|z| z.im), p, k })
}

/// `k` i.i.d. standard complex Gaussian vectors in `ℂⁿ`.
pub fn random_complex_basis<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<CVector> {
    (0..k)
        .map(|_| CVector::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))))
        .collect()
}

/// `d′² = (n − k) + d_{f′}² + Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceDecomposition {
    /// `‖P(f + x′)‖²`.
    pub d_prime_sq: f64,
    /// `n − k`.
    pub base: f64,
    /// `‖P f′‖²` with `f′ = f + (s/n)·1`.
    pub d_f_prime_sq: f64,
    pub y: f64,
}

/// `f′ = f + (s/n)·1`.
pub fn shifted_f(f: &CVector, s: i64) -> CVector {
    let shift = s as f64 / f.len() as f64;
    f.map(|z| z + shift)
}

fn check_len(p: &ProjectionOperator, len: usize, what: &str) -> Result<()> {
    if len != p.n() {
        return Err(Error::Dimension(format!("{what} has length {len}, projection acts on ℂ^{}", p.n())));
    }
    Ok(())
}

pub fn decompose_distance(p: &ProjectionOperator, x: &SignVector, f: &CVector, s: i64) -> Result<DistanceDecomposition> {
    check_len(p, x.len(), "x′")?;
    check_len(p, f.len(), "f")?;
    let d_f_prime_sq = p.apply(&shifted_f(f, s)).norm_squared();
    Ok(decompose_with(p, x, f, d_f_prime_sq))
}

fn decompose_with(p: &ProjectionOperator, x: &SignVector, f: &CVector, d_f_prime_sq: f64) -> DistanceDecomposition {
    let d_prime_sq = if f.iter().all(|z| z.im == 0.0) {
        let v = DVector::from_fn(x.len(), |i, _| x.entries()[i] as f64 + f[i].re);
        p.norm_sq_real(&v)
    } else {
        let v = CVector::from_fn(x.len(), |i, _| f[i] + x.entries()[i] as f64);
        p.apply(&v).norm_squared()
    };
    let base = (p.n() - p.k()) as f64;
    DistanceDecomposition { d_prime_sq, base, d_f_prime_sq, y: d_prime_sq - base - d_f_prime_sq }
}

/// Draws per independent generator stream in the sampling loops.
const CHUNK: usize = 1000;

/// `samples` decompositions; chunk `c` of the draws uses the stream `(seed, c)`.
fn sample_decompositions(
    p: &ProjectionOperator,
    f: &CVector,
    s: i64,
    model: RowModel,
    samples: usize,
    seed: u64,
) -> Result<Vec<DistanceDecomposition>> {
    let n = p.n();
    check_len(p, f.len(), "f")?;
    model.validate(n, s)?;
    let d_f_prime_sq = p.apply(&shifted_f(f, s)).norm_squared();
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<DistanceDecomposition>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trial_stream(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .map(|_| Ok(decompose_with(p, &model.sample_row(n, s, &mut rng)?, f, d_f_prime_sq)))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(samples);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Sample count below which the moment and tail checks refuse to run.
pub const MIN_SAMPLES: usize = 10_000;

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub samples: usize,
    pub mean_y: f64,
    pub mean_stderr: f64,
    /// `E Y` under i.i.d. signs: `−(n−k)(s/n)²`.
    pub expected_mean: f64,
    /// `|mean − E Y| ≤ 4·stderr`.
    pub mean_ok: bool,
    pub second_moment: f64,
    pub second_moment_stderr: f64,
    /// `min(k, n−k) + 4 d_{f′}²`.
    pub bound: f64,
    /// `E Y² ≤ bound + 4·stderr`.
    pub holds: bool,
    pub d_f_prime_sq: f64,
}

/// Monte Carlo moments of `Y` under i.i.d. skewed signs.
pub fn moment_bound_check(p: &ProjectionOperator, f: &CVector, s: i64, samples: usize, seed: u64) -> Result<MomentReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::invalid("samples", format!("need at least {MIN_SAMPLES} samples")));
    }
    let draws = sample_decompositions(p, f, s, RowModel::Iid, samples, seed)?;
    let ys: Vec<f64> = draws.iter().map(|d| d.y).collect();
    let sq: Vec<f64> = ys.iter().map(|y| y * y).collect();
    let (mean_y, mean_stderr) = mean_and_stderr(&ys);
    let (second_moment, second_moment_stderr) = mean_and_stderr(&sq);
    let n = p.n() as f64;
    let k = p.k();
    let expected_mean = -((p.n() - k) as f64) * (s as f64 / n).powi(2);
    let d_f_prime_sq = draws.first().map_or(0.0, |d| d.d_f_prime_sq);
    let bound = k.min(p.n() - k) as f64 + 4.0 * d_f_prime_sq;
    Ok(MomentReport {
        samples,
        mean_y,
        mean_stderr,
        expected_mean,
        mean_ok: (mean_y - expected_mean).abs() <= 4.0 * mean_stderr,
        second_moment,
        second_moment_stderr,
        bound,
        holds: second_moment <= bound + 4.0 * second_moment_stderr,
        d_f_prime_sq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    /// Frequency of `|d′ − √(n−k+d_{f′}²)| ≥ t + 3`.
    pub frequency: f64,
    /// `exp(−t²/4)`, times `C√n` for rows from 𝒮.
    pub tail_bound: f64,
    pub holds: bool,
    /// Frequency of `|d′ − M| ≥ t` with `M` the empirical median of `d′`.
    pub median_frequency: f64,
    /// `4 exp(−t²/16)`.
    pub talagrand_bound: f64,
    pub talagrand_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub n: usize,
    pub k: usize,
    pub s: i64,
    pub model: RowModel,
    pub samples: usize,
    pub d_f_prime_sq: f64,
    /// `√(n − k + d_{f′}²)`.
    pub center: f64,
    pub median: f64,
    /// Constant `C` in `C√n·exp(−t²/4)`; 1 with no `√n` factor for i.i.d. rows.
    pub constant: f64,
    /// Smallest `C` with every frequency below `C√n·exp(−t²/4)`.
    pub fitted_constant: f64,
    pub rows: Vec<TailRow>,
    /// The asserted curve: the `exp(−t²/4)` family, per row in `holds`.
    pub asserted: String,
}

impl TailTable {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    pub fn is_monotone(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        rows.windows(2).all(|w| w[1].frequency <= w[0].frequency && w[1].median_frequency <= w[0].median_frequency)
    }
}

/// Tail of `d′ = dist(x′ + f, V)` for a random complex `k`-dimensional `V`
/// drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn talagrand_tail_experiment(
    n: usize,
    k: usize,
    s: i64,
    f: Option<&CVector>,
    t_ladder: &[f64],
    samples: usize,
    model: RowModel,
    constant: f64,
    seed: u64,
) -> Result<TailTable> {
    if k + 10 > n {
        return Err(Error::invalid("k", format!("need k ≤ n − 10, got k = {k}, n = {n}")));
    }
    let basis = random_complex_basis(n, k, &mut from_seed(seed));
    let p = projection_complement(&basis, n)?;
    tail_table(&p, s, f, t_ladder, samples, model, constant, seed.wrapping_add(1))
}

/// Tail table for a given projection.
#[allow(clippy::too_many_arguments)]
pub fn tail_table(
    p: &ProjectionOperator,
    s: i64,
    f: Option<&CVector>,
    t_ladder: &[f64],
    samples: usize,
    model: RowModel,
    constant: f64,
    seed: u64,
) -> Result<TailTable> {
    let n = p.n();
    if samples < MIN_SAMPLES {
        return Err(Error::invalid("samples", format!("need at least {MIN_SAMPLES} samples")));
    }
    if model == RowModel::FixedSum {
        return Err(Error::invalid("model", "tail tables use i.i.d. rows or rows from 𝒮"));
    }
    let zero = CVector::zeros(n);
    let f = f.unwrap_or(&zero);
    let draws = sample_decompositions(p, f, s, model, samples, seed)?;
    let d_f_prime_sq = draws.first().map_or(0.0, |d| d.d_f_prime_sq);
    let center = ((n - p.k()) as f64 + d_f_prime_sq).sqrt();
    let d: Vec<f64> = draws.iter().map(|x| x.d_prime_sq.max(0.0).sqrt()).collect();
    let med = median(&mut d.clone()).unwrap_or(0.0);
    let root_n = (n as f64).sqrt();
    let scale = if model == RowModel::Iid { 1.0 } else { constant * root_n };
    let m = d.len() as f64;
    let mut fitted_constant: f64 = 0.0;
    let rows = t_ladder
        .iter()
        .map(|&t| {
            let frequency = d.iter().filter(|&&x| (x - center).abs() >= t + 3.0).count() as f64 / m;
            let median_frequency = d.iter().filter(|&&x| (x - med).abs() >= t).count() as f64 / m;
            let gauss = (-t * t / 4.0).exp();
            fitted_constant = fitted_constant.max(frequency / (root_n * gauss));
            let tail_bound = scale * gauss;
            let talagrand_bound = 4.0 * (-t * t / 16.0).exp();
            TailRow {
                t,
                frequency,
                tail_bound,
                holds: frequency <= tail_bound,
                median_frequency,
                talagrand_bound,
                talagrand_holds: median_frequency <= talagrand_bound,
            }
        })
        .collect();
    Ok(TailTable {
        n,
        k: p.k(),
        s,
        model,
        samples,
        d_f_prime_sq,
        center,
        median: med,
        constant: if model == RowModel::Iid { 1.0 } else { constant },
        fitted_constant,
        rows,
        asserted: "exp(-t^2/4)".into(),
    })
}
