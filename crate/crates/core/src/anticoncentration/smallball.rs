//! Small-ball probabilities `ρ_β(V) = sup_v P(|Σ v_i x_i − v| ≤ β)` for
//! i.i.d. skewed signs and for uniformly random signs of fixed sum.
//!
//! Exact mode enumerates every sign pattern, merges identical sums, and takes
//! the supremum over a finite candidate set of centers: in one dimension the
//! windows whose left end is an achievable sum, in two dimensions the
//! achievable sums themselves and the centers of radius-β circles through two
//! of them.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{binomial, masks_with_popcount, to_f64};
use crate::sampler::{sample_fixed_sum_vector, sample_skewed_bernoulli_vector, SkewedBernoulli};

/// Largest number of sign patterns enumerated in exact mode.
pub const EXACT_PATTERN_LIMIT: u64 = 1 << 24;

/// Sign law of the coefficients `x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallModel {
    /// I.i.d. entries with `P(+1) = 1/2 + s/(2n)`.
    Iid { s: i64 },
    /// Uniform over sign vectors with entry sum `s_bar`.
    FixedSum { s_bar: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallQuery {
    /// Points of `ℝ^dim`; in one dimension the second coordinate is 0.
    pub points: Vec<[f64; 2]>,
    pub dim: usize,
    pub beta: f64,
    pub model: BallModel,
}

impl SmallBallQuery {
    pub fn new(points: Vec<[f64; 2]>, dim: usize, beta: f64, model: BallModel) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid("dim", format!("dimension must be 1 or 2, got {dim}")));
        }
        if points.is_empty() {
            return Err(Error::invalid("points", "need at least one point"));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", format!("radius must be finite and ≥ 0, got {beta}")));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("points", "coordinates must be finite"));
        }
        if dim == 1 && points.iter().any(|p| p[1] != 0.0) {
            return Err(Error::invalid("points", "one-dimensional points need a zero second coordinate"));
        }
        let n = points.len();
        match model {
            BallModel::Iid { s } => {
                SkewedBernoulli::new(n, s)?;
            }
            BallModel::FixedSum { s_bar } => {
                if s_bar.unsigned_abs() > n as u64 {
                    return Err(Error::invalid("s_bar", format!("|{s_bar}| exceeds n = {n}")));
                }
                if (n as i64 + s_bar).rem_euclid(2) != 0 {
                    return Err(Error::Parity { n, sum: s_bar });
                }
            }
        }
        Ok(SmallBallQuery { points, dim, beta, model })
    }

    pub fn one_dimensional(values: &[f64], beta: f64, model: BallModel) -> Result<Self> {
        Self::new(values.iter().map(|&v| [v, 0.0]).collect(), 1, beta, model)
    }

    pub fn planar(points: Vec<[f64; 2]>, beta: f64, model: BallModel) -> Result<Self> {
        Self::new(points, 2, beta, model)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// `Σ ‖v_i‖²`.
    pub fn squared_norm(&self) -> f64 {
        self.points.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum()
    }

    /// The same query rescaled so that `Σ ‖v_i‖² = 1`; `β` scales along, so
    /// the small-ball value is unchanged. Returns the factor applied.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let norm = self.squared_norm().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("points", "all points are zero"));
        }
        let k = 1.0 / norm;
        let points = self.points.iter().map(|p| [p[0] * k, p[1] * k]).collect();
        Ok((SmallBallQuery { points, beta: self.beta * k, ..self.clone() }, k))
    }

    /// Largest possible `|Σ ± v_i|`, used to scale boundary tolerances.
    pub fn scale(&self) -> f64 {
        self.points.iter().map(|p| p[0].hypot(p[1])).sum()
    }

    pub fn tolerance(&self) -> f64 {
        ball_tolerance(self.beta, self.scale())
    }
}

/// Slack added to the radius so that sums landing on the sphere up to
/// rounding are counted inside.
pub fn ball_tolerance(beta: f64, scale: f64) -> f64 {
    1e-12 * (1.0 + beta + scale)
}

/// Supremum of ball mass with a witnessing center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallValue {
    #[serde(with = "crate::exact::serde_rational")]
    pub value: BigRational,
    pub center: [f64; 2],
}

impl SmallBallValue {
    pub fn value_f64(&self) -> f64 {
        to_f64(&self.value)
    }
}

/// Distinct achievable sums with, for each, the number of patterns of each
/// weight class producing it.
struct WeightedPoints {
    xy: Vec<[f64; 2]>,
    counts: Vec<u64>,
    classes: usize,
}

impl WeightedPoints {
    fn from_patterns(patterns: impl Iterator<Item = ([f64; 2], usize)>, classes: usize) -> Self {
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut xy = Vec::new();
        let mut counts = Vec::new();
        for (p, class) in patterns {
            // −0.0 and 0.0 are the same sum
            let key = ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits());
            let slot = *index.entry(key).or_insert_with(|| {
                xy.push(p);
                counts.extend(std::iter::repeat_n(0, classes));
                xy.len() - 1
            });
            counts[slot * classes + class] += 1;
        }
        WeightedPoints { xy, counts, classes }
    }

    fn class_counts(&self, i: usize) -> &[u64] {
        &self.counts[i * self.classes..(i + 1) * self.classes]
    }
}

/// Per-class pattern weights `numerators[c] / denominator`.
struct ClassWeights {
    numerators: Vec<BigUint>,
    denominator: BigUint,
    approx: Vec<f64>,
}

impl ClassWeights {
    fn new(numerators: Vec<BigUint>, denominator: BigUint) -> Self {
        let approx = numerators.iter().map(|w| to_f64(&crate::exact::ratio(w.clone(), denominator.clone()))).collect();
        ClassWeights { numerators, denominator, approx }
    }

    fn exact_mass(&self, totals: &[u64]) -> BigRational {
        let num: BigUint = totals.iter().zip(&self.numerators).map(|(&c, w)| w * c).sum();
        BigRational::new(BigInt::from(num), BigInt::from(self.denominator.clone()))
    }
}

fn pattern_sum(points: &[[f64; 2]], mask: u64) -> [f64; 2] {
    let mut acc = [0.0, 0.0];
    for (i, p) in points.iter().enumerate() {
        if mask >> i & 1 == 1 {
            acc[0] += p[0];
            acc[1] += p[1];
        } else {
            acc[0] -= p[0];
            acc[1] -= p[1];
        }
    }
    acc
}

/// Candidate centers in the plane: every point, plus the centers of the
/// radius-`beta` circles through each pair of points at most `2β` apart.
fn planar_candidates(xy: &[[f64; 2]], beta: f64, tol: f64) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = xy.to_vec();
    if beta == 0.0 {
        return out;
    }
    let grid = Grid::new(xy, 2.0 * beta);
    for (i, p) in xy.iter().enumerate() {
        for j in grid.near(*p) {
            if j <= i {
                continue;
            }
            let q = xy[j];
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let d = dx.hypot(dy);
            if d == 0.0 || d > 2.0 * beta + tol {
                continue;
            }
            let h = (beta * beta - d * d / 4.0).max(0.0).sqrt();
            let (mx, my) = (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]));
            let (ux, uy) = (-dy / d, dx / d);
            out.push([mx + h * ux, my + h * uy]);
            out.push([mx - h * ux, my - h * uy]);
        }
    }
    out
}

/// Uniform grid of cell width `cell` over the points, for neighbour lookup
/// within one cell width.
struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(xy: &[[f64; 2]], cell: f64) -> Self {
        let cell = if cell > 0.0 { cell } else { 1.0 };
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in xy.iter().enumerate() {
            buckets.entry(Self::key(cell, *p)).or_default().push(i);
        }
        Grid { cell, buckets }
    }

    fn key(cell: f64, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    fn near(&self, p: [f64; 2]) -> impl Iterator<Item = usize> + '_ {
        let (kx, ky) = Self::key(self.cell, p);
        (-1..=1)
            .flat_map(move |a| (-1..=1).map(move |b| (kx + a, ky + b)))
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
    }
}

/// Supremum of ball mass over candidate centers: an `f64` pass selects the
/// near-maximal candidates, whose masses are then recomputed exactly.
fn sup_mass(wp: &WeightedPoints, weights: &ClassWeights, beta: f64, dim: usize, tol: f64) -> SmallBallValue {
    let approx_mass: Vec<f64> = (0..wp.xy.len())
        .map(|i| wp.class_counts(i).iter().zip(&weights.approx).map(|(&c, w)| c as f64 * w).sum())
        .collect();
    // (center, members) for each candidate
    let mut scored: Vec<(f64, [f64; 2], Vec<usize>)> = Vec::new();
    if dim == 1 {
        let mut order: Vec<usize> = (0..wp.xy.len()).collect();
        order.sort_by(|&a, &b| wp.xy[a][0].total_cmp(&wp.xy[b][0]));
        let mut prefix = vec![0.0; order.len() + 1];
        for (k, &i) in order.iter().enumerate() {
            prefix[k + 1] = prefix[k] + approx_mass[i];
        }
        let mut right = 0;
        for left in 0..order.len() {
            let x0 = wp.xy[order[left]][0];
            right = right.max(left);
            while right + 1 < order.len() && wp.xy[order[right + 1]][0] - x0 <= 2.0 * beta + tol {
                right += 1;
            }
            let mass = prefix[right + 1] - prefix[left];
            scored.push((mass, [x0 + beta, 0.0], order[left..=right].to_vec()));
        }
    } else {
        let grid = Grid::new(&wp.xy, 2.0 * beta);
        for c in planar_candidates(&wp.xy, beta, tol) {
            let members: Vec<usize> = grid
                .near(c)
                .filter(|&j| (wp.xy[j][0] - c[0]).hypot(wp.xy[j][1] - c[1]) <= beta + tol)
                .collect();
            let mass = members.iter().map(|&j| approx_mass[j]).sum();
            scored.push((mass, c, members));
        }
    }
    let best = scored.iter().map(|s| s.0).fold(0.0, f64::max);
    let cutoff = best * (1.0 - 1e-9) - 1e-300;
    let mut result: Option<SmallBallValue> = None;
    for (mass, center, members) in scored {
        if mass < cutoff {
            continue;
        }
        let mut totals = vec![0u64; wp.classes];
        for &j in &members {
            for (t, &c) in totals.iter_mut().zip(wp.class_counts(j)) {
                *t += c;
            }
        }
        let value = weights.exact_mass(&totals);
        if result.as_ref().is_none_or(|r| value > r.value) {
            result = Some(SmallBallValue { value, center });
        }
    }
    result.unwrap_or(SmallBallValue { value: BigRational::zero(), center: [0.0, 0.0] })
}

/// Exact `P(+1)^j P(−1)^{n−j}` numerators over `(2n)^n`, indexed by `j`.
fn iid_weights(n: usize, s: i64) -> ClassWeights {
    let plus = BigUint::from((n as i64 + s) as u64);
    let minus = BigUint::from((n as i64 - s) as u64);
    let numerators = (0..=n).map(|j| plus.pow(j as u32) * minus.pow((n - j) as u32)).collect();
    ClassWeights::new(numerators, BigUint::from(2 * n as u64).pow(n as u32))
}

fn check_exact_size(count: u128) -> Result<()> {
    if count > EXACT_PATTERN_LIMIT as u128 {
        return Err(Error::TooLarge { size: count, limit: EXACT_PATTERN_LIMIT as u128 });
    }
    Ok(())
}

/// Exact `ρ_β(V)` under i.i.d. skewed signs.
pub fn rho_iid(query: &SmallBallQuery) -> Result<SmallBallValue> {
    let BallModel::Iid { s } = query.model else {
        return Err(Error::invalid("model", "rho_iid needs the i.i.d. model"));
    };
    let n = query.n();
    if n >= 64 {
        return Err(Error::TooLarge { size: u128::MAX, limit: EXACT_PATTERN_LIMIT as u128 });
    }
    check_exact_size(1u128 << n)?;
    let patterns = (0..1u64 << n).map(|mask| (pattern_sum(&query.points, mask), mask.count_ones() as usize));
    let wp = WeightedPoints::from_patterns(patterns, n + 1);
    Ok(sup_mass(&wp, &iid_weights(n, s), query.beta, query.dim, query.tolerance()))
}

/// Exact `ρ*_β(V)` under uniform signs with entry sum `s̄`.
pub fn rho_star(query: &SmallBallQuery) -> Result<SmallBallValue> {
    let BallModel::FixedSum { s_bar } = query.model else {
        return Err(Error::invalid("model", "rho_star needs the fixed-sum model"));
    };
    let n = query.n();
    let k = (n as i64 + s_bar) / 2;
    let support = binomial(n as u64, k);
    check_exact_size(u128::try_from(&support).unwrap_or(u128::MAX))?;
    let patterns = masks_with_popcount(n as u32, k as u32).map(|mask| (pattern_sum(&query.points, mask), 0));
    let wp = WeightedPoints::from_patterns(patterns, 1);
    Ok(sup_mass(&wp, &ClassWeights::new(vec![BigUint::one()], support), query.beta, query.dim, query.tolerance()))
}

pub fn small_ball(query: &SmallBallQuery) -> Result<SmallBallValue> {
    match query.model {
        BallModel::Iid { .. } => rho_iid(query),
        BallModel::FixedSum { .. } => rho_star(query),
    }
}

/// Monte Carlo estimate of the small-ball value from `samples` sign draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallEstimate {
    pub estimate: f64,
    pub center: [f64; 2],
    pub samples: usize,
}

pub fn small_ball_monte_carlo<R: Rng + ?Sized>(query: &SmallBallQuery, samples: usize, rng: &mut R) -> Result<SmallBallEstimate> {
    if samples == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let n = query.n();
    let mut drawn = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = match query.model {
            BallModel::Iid { s } => sample_skewed_bernoulli_vector(&SkewedBernoulli::new(n, s)?, rng),
            BallModel::FixedSum { s_bar } => sample_fixed_sum_vector(n, s_bar, rng)?,
        };
        let mut acc = [0.0, 0.0];
        for (p, &e) in query.points.iter().zip(x.entries()) {
            acc[0] += e as f64 * p[0];
            acc[1] += e as f64 * p[1];
        }
        drawn.push((acc, 0));
    }
    let wp = WeightedPoints::from_patterns(drawn.into_iter(), 1);
    let weights = ClassWeights::new(vec![BigUint::one()], BigUint::from(samples));
    let best = sup_mass(&wp, &weights, query.beta, query.dim, query.tolerance());
    Ok(SmallBallEstimate { estimate: best.value_f64(), center: best.center, samples })
}

/// `C(n, ⌊n/2⌋) / 2ⁿ`.
pub fn erdos_bound(n: usize) -> BigRational {
    crate::exact::ratio(binomial(n as u64, (n / 2) as i64), BigUint::one() << n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErdosCheck {
    #[serde(with = "crate::exact::serde_rational")]
    pub rho: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub bound: BigRational,
    pub holds: bool,
}

/// Checks `ρ_β(V) ≤ C(n,⌊n/2⌋)/2ⁿ` for symmetric signs in one dimension.
///
/// The bound needs `|v_i| > β` strictly: with closed balls, `V = {1}` and
/// `β = 1` give `ρ = 1`.
pub fn erdos_lo_check(values: &[f64], beta: f64) -> Result<ErdosCheck> {
    if let Some(v) = values.iter().find(|v| v.abs() <= beta) {
        return Err(Error::invalid("values", format!("|{v}| ≤ β = {beta}; the bound needs |v_i| > β")));
    }
    let query = SmallBallQuery::one_dimensional(values, beta, BallModel::Iid { s: 0 })?;
    let rho = rho_iid(&query)?.value;
    let bound = erdos_bound(values.len());
    Ok(ErdosCheck { holds: rho <= bound, rho, bound })
}

/// `P(Σ x_i = target)` for i.i.d. signs with `P(+1) = 1/2 + s/(2n)`.
pub fn sum_probability(n: usize, s: i64, target: i64) -> Result<BigRational> {
    SkewedBernoulli::new(n, s)?;
    if target.unsigned_abs() > n as u64 || (n as i64 + target).rem_euclid(2) != 0 {
        return Ok(BigRational::zero());
    }
    let j = ((n as i64 + target) / 2) as usize;
    let w = iid_weights(n, s);
    let num = binomial(n as u64, j as i64) * &w.numerators[j];
    Ok(crate::exact::ratio(num, w.denominator))
}

/// `ρ` under `IID(n, s)` against `ρ*` for `s̄ = s ± 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub n: usize,
    pub s: i64,
    #[serde(with = "crate::exact::serde_rational")]
    pub rho: BigRational,
    /// `(s̄, ρ*_{s̄}, P(Σx = s̄))` for each feasible `s̄`.
    pub conditioned: Vec<RelationTerm>,
    /// Largest `ρ*` among the feasible `s̄`.
    pub rho_star_max: f64,
    /// `ρ·√n / ρ*_max`.
    pub ratio: f64,
    /// `ρ ≥ P(Σx = s̄)·ρ*_{s̄}` exactly for every `s̄`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTerm {
    pub s_bar: i64,
    #[serde(with = "crate::exact::serde_rational")]
    pub rho_star: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub sum_probability: BigRational,
    /// `P(Σx = s̄)·√n`.
    pub conditioning_constant: f64,
}

pub fn rho_relation_check(points: &[[f64; 2]], dim: usize, beta: f64, s: i64) -> Result<RelationReport> {
    let n = points.len();
    if (n as i64 + s).rem_euclid(2) != 1 {
        return Err(Error::Parity { n, sum: s + 1 });
    }
    let rho = rho_iid(&SmallBallQuery::new(points.to_vec(), dim, beta, BallModel::Iid { s })?)?.value;
    let mut conditioned = Vec::new();
    for s_bar in [s - 1, s + 1] {
        if s_bar.unsigned_abs() > n as u64 {
            continue;
        }
        let q = SmallBallQuery::new(points.to_vec(), dim, beta, BallModel::FixedSum { s_bar })?;
        let rho_star = rho_star(&q)?.value;
        let p = sum_probability(n, s, s_bar)?;
        conditioned.push(RelationTerm {
            s_bar,
            conditioning_constant: to_f64(&p) * (n as f64).sqrt(),
            rho_star,
            sum_probability: p,
        });
    }
    let holds = conditioned.iter().all(|t| rho >= &t.sum_probability * &t.rho_star);
    let rho_star_max = conditioned.iter().map(|t| to_f64(&t.rho_star)).fold(0.0, f64::max);
    let ratio = to_f64(&rho) * (n as f64).sqrt() / rho_star_max;
    Ok(RelationReport { n, s, rho, conditioned, rho_star_max, ratio, holds })
}
