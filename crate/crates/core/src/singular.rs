//! Singular values, least-singular-value tail experiments, and exact checks
//! of interlacing, the negative second moment identity and the cofactor
//! identity.

use nalgebra::{ComplexField, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::logdet::Orthonormalizer;
use crate::rng::trial_stream;
use crate::sampler::{sample_row_sum_matrix, RowModel};

/// Singular values in nonincreasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|s| s * s).sum()
    }
}

/// Full singular spectrum of an `m × n` matrix (`min(m, n)` values).
pub fn singular_values<T: ComplexField<RealField = f64>>(matrix: &DMatrix<T>) -> Result<SingularSpectrum> {
    if matrix.iter().any(|x| !x.clone().is_finite()) {
        return Err(Error::invalid("matrix", "entries must be finite"));
    }
    if matrix.is_empty() {
        return Ok(SingularSpectrum { values: Vec::new() });
    }
    let svd = matrix
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or(Error::NoConvergence { routine: "singular value decomposition" })?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SingularSpectrum { values })
}

/// Hit count of `σ_n(X + F) < n^{−A}` for one exponent `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExperimentReport {
    pub n: usize,
    pub s: i64,
    pub a_exponent: f64,
    pub trials: usize,
    pub hits: usize,
    pub excluded: usize,
}

impl TailExperimentReport {
    pub fn frequency(&self) -> f64 {
        let used = self.trials - self.excluded;
        if used == 0 {
            0.0
        } else {
            self.hits as f64 / used as f64
        }
    }
}

/// Whether hit counts never increase along an ascending exponent ladder.
pub fn tail_is_monotone(reports: &[TailExperimentReport]) -> bool {
    let mut sorted: Vec<&TailExperimentReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.a_exponent.total_cmp(&b.a_exponent));
    sorted.windows(2).all(|w| w[1].hits <= w[0].hits)
}

/// `σ_n(X + F)` for the draw of trial `trial`.
pub fn least_singular_draw(
    n: usize,
    s: i64,
    model: RowModel,
    f: Option<&DMatrix<f64>>,
    seed: u64,
    trial: u64,
) -> Result<f64> {
    let mut rng = trial_stream(seed, trial);
    let mut x = sample_row_sum_matrix(n, s, model, &mut rng)?;
    if let Some(f) = f {
        x += f;
    }
    Ok(singular_values(&x)?.smallest())
}

/// Empirical tail of `σ_n(X + F)` over a ladder of exponents, all rungs using
/// the same draws.
pub fn least_singular_tail(
    n: usize,
    s: i64,
    model: RowModel,
    f: Option<&DMatrix<f64>>,
    a_ladder: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<TailExperimentReport>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    model.validate(n, s)?;
    if let Some(f) = f {
        if f.shape() != (n, n) {
            return Err(Error::Dimension(format!("F is {}×{}, expected {n}×{n}", f.nrows(), f.ncols())));
        }
    }
    let sigmas: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| least_singular_draw(n, s, model, f, seed, t as u64))
        .collect();
    let mut values = Vec::with_capacity(trials);
    let mut excluded = 0;
    for r in sigmas {
        match r {
            Ok(v) => values.push(v),
            Err(Error::NoConvergence { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(a_ladder
        .iter()
        .map(|&a| {
            let threshold = (n as f64).powf(-a);
            TailExperimentReport {
                n,
                s,
                a_exponent: a,
                trials,
                hits: values.iter().filter(|&&v| v < threshold).count(),
                excluded,
            }
        })
        .collect())
}

/// First index `i` (0-based) where `σ_i(A) ≥ σ_i(A′) ≥ σ_{i+k}(A)` fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterlacingViolation {
    pub index: usize,
    pub upper: f64,
    pub middle: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterlacingReport {
    pub k: usize,
    pub holds: bool,
    pub first_violation: Option<InterlacingViolation>,
}

/// Checks interlacing between `A` and the submatrix of its first `n − k` rows,
/// with tolerance `1e−9·σ_1(A)`.
pub fn interlacing_check<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, k: usize) -> Result<InterlacingReport> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Dimension("interlacing check needs a square matrix".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid("k", format!("need 1 ≤ k ≤ n − 1, got k = {k}, n = {n}")));
    }
    let full = singular_values(a)?;
    let sub = singular_values(&a.rows(0, n - k).clone_owned())?;
    let tol = 1e-9 * full.largest().max(f64::MIN_POSITIVE);
    let first_violation = (0..n - k).find_map(|i| {
        let (upper, middle, lower) = (full.values[i], sub.values[i], full.values[i + k]);
        (upper + tol < middle || middle + tol < lower).then_some(InterlacingViolation { index: i, upper, middle, lower })
    });
    Ok(InterlacingReport { k, holds: first_violation.is_none(), first_violation })
}

/// Both sides of `Σ σ_i^{−2}(A′) = Σ_i dist^{−2}(r_i, span of the other rows)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

fn complex_rows<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Vec<CVector> {
    (0..a.nrows())
        .map(|i| {
            CVector::from_fn(a.ncols(), |j, _| {
                let v = a[(i, j)].clone();
                C64::new(v.clone().real(), v.imaginary())
            })
        })
        .collect()
}

fn leave_one_out_distance(rows: &[CVector], skip: usize) -> Result<f64> {
    let mut ortho = Orthonormalizer::new(rows[skip].len());
    for (j, r) in rows.iter().enumerate() {
        if j != skip {
            ortho.push(r)?;
        }
    }
    Ok(ortho.residual(&rows[skip]).norm())
}

fn require_full_row_rank(spectrum: &SingularSpectrum, rows: usize, cols: usize) -> Result<()> {
    if rows > cols {
        return Err(Error::Dimension(format!("{rows} rows exceed {cols} columns")));
    }
    let smallest = spectrum.smallest();
    if spectrum.values.len() < rows || smallest <= 1e-10 {
        return Err(Error::Degenerate { index: rows.saturating_sub(1), value: smallest });
    }
    Ok(())
}

/// Negative second moment identity for a full-row-rank `n′ × n` matrix.
pub fn negative_second_moment_check<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<SecondMomentReport> {
    if a.nrows() == 0 {
        return Err(Error::invalid("matrix", "need at least one row"));
    }
    let spectrum = singular_values(a)?;
    require_full_row_rank(&spectrum, a.nrows(), a.ncols())?;
    let lhs: f64 = spectrum.values.iter().map(|s| s.powi(-2)).sum();
    let rows = complex_rows(a);
    let mut rhs = 0.0;
    for i in 0..rows.len() {
        rhs += leave_one_out_distance(&rows, i)?.powi(-2);
    }
    Ok(SecondMomentReport { lhs, rhs, relative_gap: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()) })
}

/// `dist^{−2}(last row, span of the others) ≤ Σ σ_i^{−2}(A′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBoundReport {
    pub inverse_square_distance: f64,
    pub inverse_square_sum: f64,
    pub holds: bool,
}

pub fn last_row_distance_bound<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DistanceBoundReport> {
    if a.nrows() == 0 {
        return Err(Error::invalid("matrix", "need at least one row"));
    }
    let spectrum = singular_values(a)?;
    require_full_row_rank(&spectrum, a.nrows(), a.ncols())?;
    let rows = complex_rows(a);
    let d = leave_one_out_distance(&rows, rows.len() - 1)?;
    let inverse_square_distance = d.powi(-2);
    let inverse_square_sum: f64 = spectrum.values.iter().map(|s| s.powi(-2)).sum();
    Ok(DistanceBoundReport {
        inverse_square_distance,
        inverse_square_sum,
        holds: inverse_square_distance <= inverse_square_sum * (1.0 + 1e-9),
    })
}

/// Largest dimension accepted by the exact cofactor routines.
pub const MAX_COFACTOR_DIM: usize = 10;

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn bareiss_determinant(m: &DMatrix<i64>) -> i128 {
    let n = m.nrows();
    assert!(m.is_square(), "determinant of a non-square matrix");
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Exact adjugate: `adj(X)_{ij} = (−1)^{i+j} det(X with row j and column i removed)`.
pub fn adjugate(x: &DMatrix<i64>) -> Result<DMatrix<i128>> {
    let n = x.nrows();
    if !x.is_square() || n == 0 {
        return Err(Error::Dimension("adjugate needs a non-empty square matrix".into()));
    }
    if n > MAX_COFACTOR_DIM {
        return Err(Error::TooLarge { size: n as u128, limit: MAX_COFACTOR_DIM as u128 });
    }
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, 1));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let minor = x.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
        sign * bareiss_determinant(&minor)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CofactorReport {
    pub determinant: i128,
    /// `‖adj(X)·b − det(X)·a‖ / |det X|`.
    pub residual: f64,
}

/// Checks `adj(X)·(X·a) = det(X)·a` with exact integer cofactors.
pub fn cofactor_identity_check(x: &DMatrix<i64>, a: &DVector<f64>) -> Result<CofactorReport> {
    let n = x.nrows();
    if a.len() != n {
        return Err(Error::Dimension(format!("vector of length {} for a {n}×{n} matrix", a.len())));
    }
    let adj = adjugate(x)?;
    let det = bareiss_determinant(x);
    if det == 0 {
        return Err(Error::Degenerate { index: 0, value: 0.0 });
    }
    let xf = x.map(|v| v as f64);
    let b = &xf * a;
    let adj_f = adj.map(|v| v as f64);
    let lhs = adj_f * b;
    let residual = (lhs - a * det as f64).norm() / (det as f64).abs();
    Ok(CofactorReport { determinant: det, residual })
}

/// Converts a matrix with integral entries to `i64`.
pub fn integer_matrix(m: &DMatrix<f64>) -> Result<DMatrix<i64>> {
    if m.iter().any(|v| v.fract() != 0.0 || v.abs() > 2f64.powi(52)) {
        return Err(Error::invalid("matrix", "entries must be integers"));
    }
    Ok(m.map(|v| v as i64))
}
