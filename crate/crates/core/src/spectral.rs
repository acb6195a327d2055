//! Eigenvalues, empirical spectral distributions and the circular law.

use std::f64::consts::PI;

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, C64};

/// Spectrum of one matrix draw with its normalization metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<C64>,
    pub n: usize,
    pub s: i64,
    /// `sqrt(1 − (s/n)²)`.
    pub sigma: f64,
}

/// Residuals of the trace and determinant identities for a computed spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCheck {
    pub trace_error: f64,
    /// `|Σ log|λ| − log|det|| / max(1, |log|det||)`; `None` for singular input.
    pub log_det_error: Option<f64>,
}

/// Eigenvalues below this multiple of the largest modulus mark the matrix as
/// numerically singular and skip the log-determinant comparison.
pub const SINGULAR_TOL: f64 = 1e-8;

impl SpectrumCheck {
    pub fn passes(&self, n: usize) -> bool {
        self.trace_error <= 1e-8 * n.max(1) as f64 && self.log_det_error.is_none_or(|e| e <= 1e-6)
    }
}

impl SpectrumSample {
    pub fn new(matrix: &DMatrix<f64>, s: i64) -> Result<Self> {
        let n = matrix.nrows();
        let eigenvalues = eigenvalues_dense(matrix)?;
        Ok(SpectrumSample { eigenvalues, n, s, sigma: sigma(n, s) })
    }

    /// Compares `Σλ` with the trace and `Σ log|λ|` with an LU log-determinant.
    pub fn check_against(&self, matrix: &DMatrix<f64>) -> SpectrumCheck {
        let sum: C64 = self.eigenvalues.iter().sum();
        let trace_error = (sum - C64::new(matrix.trace(), 0.0)).norm();
        let largest = self.eigenvalues.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let singular = self.eigenvalues.iter().any(|z| z.norm() <= SINGULAR_TOL * largest);
        let log_det_error = if singular {
            None
        } else {
            log_abs_det(matrix).map(|ld| {
                let acc: f64 = self.eigenvalues.iter().map(|z| z.norm().ln()).sum();
                crate::linalg::relative_gap(acc, ld)
            })
        };
        SpectrumCheck { trace_error, log_det_error }
    }
}

/// `sqrt(1 − (s/n)²)`, the entry standard deviation of the row-sum ensembles.
pub fn sigma(n: usize, s: i64) -> f64 {
    let r = s as f64 / n as f64;
    (1.0 - r * r).max(0.0).sqrt()
}

/// All eigenvalues of a dense real matrix via the real Schur form.
pub fn eigenvalues_dense(matrix: &DMatrix<f64>) -> Result<Vec<C64>> {
    if !matrix.is_square() {
        return Err(Error::Dimension(format!("{}×{} matrix has no spectrum", matrix.nrows(), matrix.ncols())));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix", "entries must be finite"));
    }
    let n = matrix.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let upper = (0..n).all(|i| (0..i).all(|j| matrix[(i, j)] == 0.0));
    let lower = (0..n).all(|i| (i + 1..n).all(|j| matrix[(i, j)] == 0.0));
    if upper || lower {
        return Ok(matrix.diagonal().iter().map(|&d| C64::new(d, 0.0)).collect());
    }
    let schur = |m: DMatrix<f64>| Schur::try_new(m, f64::EPSILON, 1000 * n.max(10));
    let schur = match schur(matrix.clone()) {
        Some(s) => s,
        None => {
            // the shifted QR iteration can stall on exactly structured input;
            // a fixed orthogonal similarity breaks the structure
            let q = fixed_orthogonal(n);
            schur(q.transpose() * matrix * &q).ok_or(Error::NoConvergence { routine: "real Schur decomposition" })?
        }
    };
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn fixed_orthogonal(n: usize) -> DMatrix<f64> {
    let mut rng = crate::rng::from_seed(0x0c1c_1a3e);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    g.qr().q()
}

/// Empirical spectral distribution: `μ(s,t) = #{k : Re λ_k ≤ s, Im λ_k ≤ t} / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsdFunction {
    points: Vec<C64>,
}

impl EsdFunction {
    pub fn new(points: Vec<C64>) -> Self {
        EsdFunction { points }
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cdf(&self, s: f64, t: f64) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let hits = self.points.iter().filter(|z| z.re <= s && z.im <= t).count();
        hits as f64 / self.points.len() as f64
    }

    /// CDF values on the product grid `xs × ys`, indexed `[i][j] ↔ (xs[i], ys[j])`.
    /// Both grids must be sorted ascending.
    pub fn cdf_on_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<Vec<f64>> {
        let (gx, gy) = (xs.len(), ys.len());
        let mut hist = vec![vec![0u64; gy]; gx];
        for z in &self.points {
            let ix = xs.partition_point(|&g| g < z.re);
            let iy = ys.partition_point(|&g| g < z.im);
            if ix < gx && iy < gy {
                hist[ix][iy] += 1;
            }
        }
        for i in 0..gx {
            for j in 0..gy {
                let mut v = hist[i][j];
                if i > 0 {
                    v += hist[i - 1][j];
                }
                if j > 0 {
                    v += hist[i][j - 1];
                }
                if i > 0 && j > 0 {
                    v -= hist[i - 1][j - 1];
                }
                hist[i][j] = v;
            }
        }
        let total = self.points.len().max(1) as f64;
        hist.into_iter().map(|row| row.into_iter().map(|c| c as f64 / total).collect()).collect()
    }
}

/// Eigenvalues scaled by `1/(σ√n)`, with the deterministic eigenvalue `s`
/// located and, when it sits outside the bulk, set aside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSpectrum {
    pub n: usize,
    pub s: i64,
    pub sigma: f64,
    /// All normalized eigenvalues, in solver order.
    pub points: Vec<C64>,
    /// Index of the eigenvalue closest to `s/(σ√n)`.
    pub outlier_index: Option<usize>,
    /// Whether that eigenvalue is excluded from comparisons (`|s/(σ√n)| > 1.1`).
    pub outlier_excluded: bool,
}

/// Beyond this radius the eigenvalue `s/(σ√n)` is treated as an outlier.
pub const OUTLIER_RADIUS: f64 = 1.1;

impl NormalizedSpectrum {
    pub fn outlier_location(&self) -> f64 {
        self.s as f64 / (self.sigma * (self.n as f64).sqrt())
    }

    /// ESD used for comparison with the circular law.
    pub fn esd(&self) -> EsdFunction {
        let pts = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| !(self.outlier_excluded && Some(*i) == self.outlier_index))
            .map(|(_, z)| *z)
            .collect();
        EsdFunction::new(pts)
    }
}

/// Normalizes a spectrum of an `n × n` row-sum-`s` matrix.
pub fn normalize_spectrum(eigenvalues: &[C64], n: usize, s: i64) -> Result<NormalizedSpectrum> {
    let sigma = sigma(n, s);
    if sigma == 0.0 || n == 0 {
        return Err(Error::invalid("s", format!("σ = 0 for n = {n}, s = {s}")));
    }
    let scale = 1.0 / (sigma * (n as f64).sqrt());
    let points: Vec<C64> = eigenvalues.iter().map(|z| z * scale).collect();
    let loc = C64::new(s as f64 * scale, 0.0);
    let outlier_index = points
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - loc).norm().total_cmp(&(b.1 - loc).norm()))
        .map(|(i, _)| i);
    Ok(NormalizedSpectrum {
        n,
        s,
        sigma,
        points,
        outlier_index,
        outlier_excluded: loc.re.abs() > OUTLIER_RADIUS,
    })
}

/// ESD of `M/(σ√n)` for a square matrix `M` with row sums `s`.
pub fn normalized_esd(matrix: &DMatrix<f64>, s: i64) -> Result<NormalizedSpectrum> {
    let eig = eigenvalues_dense(matrix)?;
    normalize_spectrum(&eig, matrix.nrows(), s)
}

/// `∫_{−1}^{a} sqrt(1 − x²) dx` for `a ∈ [−1, 1]`.
fn half_disk_area_left_of(a: f64) -> f64 {
    let a = a.clamp(-1.0, 1.0);
    0.5 * (a * (1.0 - a * a).sqrt() + a.asin()) + PI / 4.0
}

fn chord_integral(a: f64, b: f64) -> f64 {
    if b <= a {
        0.0
    } else {
        half_disk_area_left_of(b) - half_disk_area_left_of(a)
    }
}

/// Mass of the uniform law on the unit disk in the quadrant `{Re ≤ s, Im ≤ t}`.
pub fn circular_cdf(s: f64, t: f64) -> f64 {
    if s <= -1.0 || t <= -1.0 || s.is_nan() || t.is_nan() {
        return 0.0;
    }
    let s = s.min(1.0);
    if t >= 1.0 {
        return (2.0 * chord_integral(-1.0, s) / PI).min(1.0);
    }
    // Column above x spans [−h, min(t, h)], h = sqrt(1 − x²); the cap y ≤ t
    // binds exactly on |x| < c.
    let c = (1.0 - t * t).sqrt();
    let mut area = 0.0;
    if t >= 0.0 {
        area += 2.0 * chord_integral(-1.0, s.min(-c));
    }
    if s > -c {
        let hi = s.min(c);
        area += t * (hi + c) + chord_integral(-c, hi);
    }
    if t >= 0.0 && s > c {
        area += 2.0 * chord_integral(c, s);
    }
    (area / PI).clamp(0.0, 1.0)
}

/// `grid` equally spaced values covering `[−1.5, 1.5]`.
pub fn ks_grid(grid: usize) -> Vec<f64> {
    let step = 3.0 / (grid - 1) as f64;
    (0..grid).map(|i| -1.5 + step * i as f64).collect()
}

/// `max |F(s,t) − G(s,t)|` over the `grid × grid` lattice on `[−1.5, 1.5]²`.
pub fn ks_grid_distance<F, G>(f: F, g: G, grid: usize) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    if grid < 2 {
        return Err(Error::invalid("grid", "need at least 2 grid points per axis"));
    }
    let axis = ks_grid(grid);
    let mut best = 0.0f64;
    for &x in &axis {
        for &y in &axis {
            best = best.max((f(x, y) - g(x, y)).abs());
        }
    }
    Ok(best)
}

/// Grid-sup distance between an ESD and the circular law.
pub fn ks_distance_to_circular(esd: &EsdFunction, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::invalid("grid", "need at least 2 grid points per axis"));
    }
    let axis = ks_grid(grid);
    let table = esd.cdf_on_grid(&axis, &axis);
    let mut best = 0.0f64;
    for (i, &x) in axis.iter().enumerate() {
        for (j, &y) in axis.iter().enumerate() {
            best = best.max((table[i][j] - circular_cdf(x, y)).abs());
        }
    }
    Ok(best)
}

/// Spectrum of a constant-row-sum matrix split as `{s} ∪ spec(X − F)`, where
/// `X` is the leading `(n−1)×(n−1)` block and every row of `F` equals the
/// first `n−1` entries of the last row.
pub fn spectrum_via_reduction(m: &DMatrix<f64>) -> Result<(f64, Vec<C64>)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Dimension("reduction needs a non-empty square matrix".into()));
    }
    let n = m.nrows();
    let s = m.row(0).sum();
    for i in 1..n {
        let r = m.row(i).sum();
        if r != s {
            return Err(Error::invalid("matrix", format!("row {i} sums to {r}, row 0 to {s}")));
        }
    }
    let reduced = reduced_matrix(m);
    Ok((s, eigenvalues_dense(&reduced)?))
}

/// Comparison of `spec(M)` with `{s} ∪ spec(X − F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionCheck {
    pub s: f64,
    /// Largest paired distance with both spectra from the Schur form.
    pub schur_error: f64,
    /// Largest paired distance actually reported: `schur_error`, or for
    /// integer matrices above `refine_above`, the distance between spectra
    /// from exact characteristic polynomials with exact multiplicities.
    pub error: f64,
    pub refined: bool,
    /// `det(xI − M) = (x − s)·det(xI − (X − F))` exactly; `None` for
    /// non-integer matrices.
    pub charpoly_identity: Option<bool>,
}

/// Checks the reduction identity. Defective eigenvalues limit the Schur
/// comparison to about `ε^{1/k}` for Jordan blocks of size `k`; integer
/// matrices whose Schur error exceeds `refine_above` are recomputed exactly.
pub fn reduction_check(m: &DMatrix<f64>, refine_above: f64) -> Result<ReductionCheck> {
    let full = eigenvalues_dense(m)?;
    let (s, mut reduced) = spectrum_via_reduction(m)?;
    reduced.push(C64::new(s, 0.0));
    let schur_error = multiset_distance(&full, &reduced)?;
    let Ok(mi) = crate::singular::integer_matrix(m) else {
        return Ok(ReductionCheck { s, schur_error, error: schur_error, refined: false, charpoly_identity: None });
    };
    use crate::polynomial::{charpoly_integer, eigenvalues_integer, from_integers, mul};
    let ri = reduced_matrix(m).map(|v| v as i64);
    let lhs = from_integers(&charpoly_integer(&mi)?);
    let linear = from_integers(&[num_bigint::BigInt::from(-(s as i64)), num_bigint::BigInt::from(1)]);
    let rhs = mul(&linear, &from_integers(&charpoly_integer(&ri)?));
    let charpoly_identity = Some(lhs == rhs);
    if schur_error <= refine_above {
        return Ok(ReductionCheck { s, schur_error, error: schur_error, refined: false, charpoly_identity });
    }
    let full = eigenvalues_integer(&mi)?;
    let mut reduced = eigenvalues_integer(&ri)?;
    reduced.push(C64::new(s, 0.0));
    let error = multiset_distance(&full, &reduced)?;
    Ok(ReductionCheck { s, schur_error, error, refined: true, charpoly_identity })
}

/// `X_{n−1} − F_{n−1}` for the reduction above.
pub fn reduced_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows().saturating_sub(1);
    DMatrix::from_fn(k, k, |i, j| m[(i, j)] - m[(k, j)])
}

/// Greedy nearest-neighbour pairing of two equal-size multisets; returns the
/// largest paired distance.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("multisets of sizes {} and {}", a.len(), b.len())));
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].re.total_cmp(&a[j].re).then(a[i].im.total_cmp(&a[j].im)));
    for i in order {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, z)| (j, (a[i] - z).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("sizes match");
        used[j] = true;
        worst = worst.max(d);
    }
    Ok(worst)
}
