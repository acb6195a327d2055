//! Generalized arithmetic progressions `Q = {g_0 + Σ k_i g_i : K_i ≤ k_i ≤ K′_i}`
//! with exact rational generators.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{from_f64, ratio, to_f64};

use super::smallball::{rho_iid, BallModel, SmallBallQuery};

/// Largest volume enumerated point by point.
pub const GAP_ENUMERATION_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    base: Vec<BigRational>,
    generators: Vec<Vec<BigRational>>,
    lower: Vec<i64>,
    upper: Vec<i64>,
}

impl Gap {
    pub fn new(base: Vec<BigRational>, generators: Vec<Vec<BigRational>>, lower: Vec<i64>, upper: Vec<i64>) -> Result<Self> {
        let d = base.len();
        if d == 0 {
            return Err(Error::invalid("base", "dimension must be at least 1"));
        }
        if generators.iter().any(|g| g.len() != d) {
            return Err(Error::Dimension(format!("generators must lie in dimension {d}")));
        }
        let r = generators.len();
        if lower.len() != r || upper.len() != r {
            return Err(Error::Dimension(format!("{r} generators need {r} lower and upper bounds")));
        }
        if let Some(i) = (0..r).find(|&i| lower[i] > upper[i]) {
            return Err(Error::invalid("bounds", format!("K_{} = {} exceeds K′_{} = {}", i + 1, lower[i], i + 1, upper[i])));
        }
        Ok(Gap { base, generators, lower, upper })
    }

    /// `{Σ k_i g_i : −K_i ≤ k_i ≤ K_i}`.
    pub fn symmetric(generators: Vec<Vec<BigRational>>, bounds: Vec<i64>) -> Result<Self> {
        let d = generators.first().map_or(1, |g| g.len());
        if bounds.iter().any(|&k| k < 0) {
            return Err(Error::invalid("bounds", "symmetric bounds must be nonnegative"));
        }
        let lower = bounds.iter().map(|k| -k).collect();
        Gap::new(vec![BigRational::zero(); d], generators, lower, bounds)
    }

    /// Symmetric GAP with generators given as floats (converted exactly).
    pub fn symmetric_f64(generators: &[Vec<f64>], bounds: Vec<i64>) -> Result<Self> {
        Gap::symmetric(generators.iter().map(|g| g.iter().map(|&x| from_f64(x)).collect()).collect(), bounds)
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn base(&self) -> &[BigRational] {
        &self.base
    }

    pub fn generators(&self) -> &[Vec<BigRational>] {
        &self.generators
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    /// `Π (K′_i − K_i + 1)`.
    pub fn volume(&self) -> BigUint {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| BigUint::from((u - l + 1) as u64)).product()
    }

    pub fn is_symmetric(&self) -> bool {
        self.base.iter().all(Zero::is_zero) && self.lower.iter().zip(&self.upper).all(|(&l, &u)| l == -u)
    }

    pub fn contains_coefficients(&self, k: &[i64]) -> bool {
        k.len() == self.rank() && k.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&k, (&l, &u))| l <= k && k <= u)
    }

    /// `g_0 + Σ k_i g_i`.
    pub fn point(&self, k: &[i64]) -> Vec<BigRational> {
        let mut p = self.base.clone();
        for (g, &ki) in self.generators.iter().zip(k) {
            let c = BigRational::from_integer(ki.into());
            for (pj, gj) in p.iter_mut().zip(g) {
                *pj += &c * gj;
            }
        }
        p
    }

    fn check_enumerable(&self) -> Result<u64> {
        let vol = self.volume();
        match vol.to_u64() {
            Some(v) if v <= GAP_ENUMERATION_LIMIT => Ok(v),
            _ => Err(Error::TooLarge {
                size: vol.to_u128().unwrap_or(u128::MAX),
                limit: GAP_ENUMERATION_LIMIT as u128,
            }),
        }
    }

    /// Every `(coefficients, point)` pair in lexicographic coefficient order.
    pub fn enumerate_with_coefficients(&self) -> Result<Vec<(Vec<i64>, Vec<BigRational>)>> {
        let vol = self.check_enumerable()?;
        let mut out = Vec::with_capacity(vol as usize);
        let mut k = self.lower.clone();
        loop {
            out.push((k.clone(), self.point(&k)));
            let mut i = self.rank();
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                if k[i] < self.upper[i] {
                    k[i] += 1;
                    break;
                }
                k[i] = self.lower[i];
            }
        }
    }

    /// The multiset `Φ(box)`.
    pub fn enumerate(&self) -> Result<Vec<Vec<BigRational>>> {
        Ok(self.enumerate_with_coefficients()?.into_iter().map(|(_, p)| p).collect())
    }

    /// `|Q|`, the number of distinct points.
    pub fn distinct_count(&self) -> Result<usize> {
        Ok(self.enumerate()?.into_iter().collect::<HashSet<_>>().len())
    }

    /// Whether `k ↦ g_0 + Σ k_i g_i` is injective on the box.
    pub fn is_proper(&self) -> Result<bool> {
        Ok(BigUint::from(self.distinct_count()?) == self.volume())
    }

    /// `nQ`: base and bounds multiplied by `n`.
    pub fn dilate(&self, n: i64) -> Gap {
        let c = BigRational::from_integer(n.into());
        Gap {
            base: self.base.iter().map(|b| b * &c).collect(),
            generators: self.generators.clone(),
            lower: self.lower.iter().map(|l| l * n).collect(),
            upper: self.upper.iter().map(|u| u * n).collect(),
        }
    }
}

/// Nearest GAP point to one element of `V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub coefficients: Vec<i64>,
    pub nearest: Vec<f64>,
    pub distance: f64,
    pub close: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Closeness {
    pub assignments: Vec<Assignment>,
    pub close_count: usize,
}

/// For each `v`, the nearest point of `Q` and whether it is within `δ`.
pub fn gap_closeness(values: &[Vec<f64>], gap: &Gap, delta: f64) -> Result<Closeness> {
    if let Some(v) = values.iter().find(|v| v.len() != gap.dim()) {
        return Err(Error::Dimension(format!("point of dimension {} for a GAP in dimension {}", v.len(), gap.dim())));
    }
    let points: Vec<(Vec<i64>, Vec<f64>)> = gap
        .enumerate_with_coefficients()?
        .into_iter()
        .map(|(k, p)| (k, p.iter().map(to_f64).collect()))
        .collect();
    let scale = points.iter().flat_map(|(_, p)| p.iter()).fold(1.0f64, |m, x| m.max(x.abs()));
    let slack = 1e-12 * (scale + delta);
    let assignments: Vec<Assignment> = values
        .iter()
        .map(|v| {
            let (k, p, d) = points
                .iter()
                .map(|(k, p)| {
                    let d = p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    (k, p, d)
                })
                .min_by(|a, b| a.2.total_cmp(&b.2))
                .expect("a GAP has at least one point");
            Assignment { coefficients: k.clone(), nearest: p.clone(), distance: d, close: d <= delta + slack }
        })
        .collect();
    let close_count = assignments.iter().filter(|a| a.close).count();
    Ok(Closeness { assignments, close_count })
}

/// Pigeonhole lower bound `ρ_{nδ}(V) ≥ 1/|nQ|` against the exact value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PigeonholeReport {
    pub n: usize,
    /// `|nQ|`, distinct points of the dilate.
    pub dilate_size: usize,
    pub gap_size: usize,
    /// `|nQ| ≤ n^r |Q|`.
    pub counting_bound_holds: bool,
    #[serde(with = "crate::exact::serde_rational")]
    pub bound: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub rho: BigRational,
    pub holds: bool,
}

/// Every `v_i` must be `δ`-close to the symmetric GAP `Q`. Signs are i.i.d.
/// with skew parameter `s`.
pub fn gap_pigeonhole_bound(values: &[Vec<f64>], gap: &Gap, delta: f64, s: i64) -> Result<PigeonholeReport> {
    if !gap.is_symmetric() {
        return Err(Error::invalid("gap", "pigeonhole bound needs a symmetric GAP"));
    }
    if gap.dim() > 2 {
        return Err(Error::invalid("gap", "small-ball oracle supports dimension 1 or 2"));
    }
    let closeness = gap_closeness(values, gap, delta)?;
    if let Some(i) = closeness.assignments.iter().position(|a| !a.close) {
        return Err(Error::invalid("values", format!("v_{} is not δ-close to Q", i + 1)));
    }
    let n = values.len();
    let dilate_size = gap.dilate(n as i64).distinct_count()?;
    let gap_size = gap.distinct_count()?;
    let counting_bound_holds =
        BigUint::from(dilate_size) <= BigUint::from(n).pow(gap.rank() as u32) * BigUint::from(gap_size);
    let points: Vec<[f64; 2]> = values.iter().map(|v| [v[0], v.get(1).copied().unwrap_or(0.0)]).collect();
    let query = SmallBallQuery::new(points, gap.dim(), n as f64 * delta, BallModel::Iid { s })?;
    let rho = rho_iid(&query)?.value;
    let bound = ratio(BigUint::from(1u32), BigUint::from(dilate_size));
    Ok(PigeonholeReport { n, dilate_size, gap_size, counting_bound_holds, holds: rho >= bound, bound, rho })
}
