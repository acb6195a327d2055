//! Samplers for ±1 vectors and matrices with prescribed row sums.
//!
//! Three row laws are supported:
//!
//! * **fixed sum**: uniform over all ±1 vectors of length `n` with entry sum
//!   exactly `s`;
//! * **union 𝒮**: uniform over all ±1 vectors with entry sum `s − 1` or
//!   `s + 1` (the row law of the reduced matrix obtained from a fixed-sum
//!   matrix by eliminating the all-ones eigenvector);
//! * **skewed Bernoulli**: i.i.d. entries with `P(+1) = 1/2 + s/(2n)`, which
//!   matches the mean of the two constrained laws.
//!
//! All probabilities are exact: class choices are made by drawing uniform
//! integers against exact rational thresholds, never by comparing floats.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{binomial, masks_with_popcount, ratio};

/// A ±1 vector together with its entry sum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignVector {
    entries: Vec<i8>,
    sum: i64,
}

impl SignVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("entries", "sign vector must be non-empty"));
        }
        if let Some(pos) = entries.iter().position(|&e| e != 1 && e != -1) {
            return Err(Error::invalid("entries", format!("entry {pos} is not ±1")));
        }
        let sum = entries.iter().map(|&e| e as i64).sum();
        Ok(SignVector { entries, sum })
    }

    /// Vector whose `+1` entries are exactly the set bits of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let entries: Vec<i8> = (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
        let sum = 2 * mask.count_ones() as i64 - n as i64;
        SignVector { entries, sum }
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sum(&self) -> i64 {
        self.sum
    }

    pub fn plus_count(&self) -> usize {
        (self.entries.len() as i64 + self.sum) as usize / 2
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&e| e as f64).collect()
    }
}

fn check_sum_feasible(n: usize, sum: i64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "length must be at least 1"));
    }
    if sum.unsigned_abs() > n as u64 {
        return Err(Error::invalid("s", format!("|{sum}| exceeds n = {n}")));
    }
    if (n as i64 + sum).rem_euclid(2) != 0 {
        return Err(Error::Parity { n, sum });
    }
    Ok(())
}

/// Validates `(n, s)` for the union set 𝒮: `n + s` odd and both sums
/// `s ± 1` attainable, i.e. `|s| ≤ n − 1`.
fn check_union_feasible(n: usize, s: i64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "length must be at least 1"));
    }
    if (n as i64 + s).rem_euclid(2) != 1 {
        return Err(Error::Parity { n, sum: s + 1 });
    }
    if s.unsigned_abs() + 1 > n as u64 {
        return Err(Error::invalid(
            "s",
            format!("𝒮 needs both sums s−1 and s+1 attainable; |{s}| > n − 1 = {}", n - 1),
        ));
    }
    Ok(())
}

/// Uniform draw among the `C(n, (n+s)/2)` ±1 vectors with entry sum `s`.
pub fn sample_fixed_sum_vector<R: Rng + ?Sized>(n: usize, s: i64, rng: &mut R) -> Result<SignVector> {
    check_sum_feasible(n, s)?;
    let plus = ((n as i64 + s) / 2) as usize;
    let mut entries = vec![-1i8; n];
    for idx in rand::seq::index::sample(rng, n, plus) {
        entries[idx] = 1;
    }
    Ok(SignVector { entries, sum: s })
}

/// Uniform draw from 𝒮 = {x ∈ {±1}ⁿ : Σx ∈ {s−1, s+1}}.
///
/// The class with sum `s + 1` has `C(n, k)` members and the other `C(n, k−1)`
/// where `k = (n+s+1)/2`, so the upper class is chosen with probability
/// `C(n,k)/C(n+1,k) = (n−s+1) / (2(n+1))`: one uniform integer in `0..=n`.
pub fn sample_union_s_vector<R: Rng + ?Sized>(n: usize, s: i64, rng: &mut R) -> Result<SignVector> {
    check_union_feasible(n, s)?;
    let threshold = (n as i64 - s + 1) / 2;
    let u = rng.random_range(0..=n as i64);
    let target = if u < threshold { s + 1 } else { s - 1 };
    sample_fixed_sum_vector(n, target, rng)
}

/// I.i.d. ±1 law with `P(+1) = 1/2 + s/(2n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewedBernoulli {
    n: usize,
    s: i64,
}

impl SkewedBernoulli {
    pub fn new(n: usize, s: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "length must be at least 1"));
        }
        if s.unsigned_abs() > n as u64 {
            return Err(Error::invalid("s", format!("|{s}| exceeds n = {n}")));
        }
        Ok(SkewedBernoulli { n, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> i64 {
        self.s
    }

    pub fn p_plus(&self) -> BigRational {
        BigRational::new(BigInt::from(self.n as i64 + self.s), BigInt::from(2 * self.n as i64))
    }

    pub fn p_minus(&self) -> BigRational {
        BigRational::new(BigInt::from(self.n as i64 - self.s), BigInt::from(2 * self.n as i64))
    }

    pub fn p_plus_f64(&self) -> f64 {
        0.5 + self.s as f64 / (2.0 * self.n as f64)
    }

    /// Mean of a single entry, `s/n`.
    pub fn mean(&self) -> f64 {
        self.s as f64 / self.n as f64
    }
}

pub fn sample_skewed_bernoulli_vector<R: Rng + ?Sized>(model: &SkewedBernoulli, rng: &mut R) -> SignVector {
    let n = model.n as i64;
    // +1 iff a uniform integer in [0, 2n) falls below n + s
    let cut = n + model.s;
    let entries: Vec<i8> = (0..model.n)
        .map(|_| if rng.random_range(0..2 * n) < cut { 1 } else { -1 })
        .collect();
    let sum = entries.iter().map(|&e| e as i64).sum();
    SignVector { entries, sum }
}

/// The union set 𝒮 with its exact class sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionSetS {
    n: usize,
    s: i64,
    /// `(C(n, (n+s−1)/2), C(n, (n+s+1)/2))`: sizes of the `s−1` and `s+1` classes.
    counts: (BigUint, BigUint),
}

impl UnionSetS {
    pub fn new(n: usize, s: i64) -> Result<Self> {
        check_union_feasible(n, s)?;
        let lower = binomial(n as u64, (n as i64 + s - 1) / 2);
        let upper = binomial(n as u64, (n as i64 + s + 1) / 2);
        Ok(UnionSetS { n, s, counts: (lower, upper) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> i64 {
        self.s
    }

    pub fn counts(&self) -> &(BigUint, BigUint) {
        &self.counts
    }

    pub fn size(&self) -> BigUint {
        &self.counts.0 + &self.counts.1
    }

    pub fn contains(&self, x: &SignVector) -> bool {
        x.len() == self.n && (x.sum() == self.s - 1 || x.sum() == self.s + 1)
    }

    /// All members, lower class first, each class in mask order. `n < 64`.
    pub fn members(&self) -> impl Iterator<Item = SignVector> + '_ {
        let n = self.n;
        [self.s - 1, self.s + 1].into_iter().flat_map(move |sum| {
            let plus = ((n as i64 + sum) / 2) as u32;
            masks_with_popcount(n as u32, plus).map(move |m| SignVector::from_mask(n, m))
        })
    }
}

/// Row law used to fill a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowModel {
    FixedSum,
    UnionS,
    Iid,
}

impl std::str::FromStr for RowModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-sum" | "fixed" => Ok(RowModel::FixedSum),
            "union-s" | "union" => Ok(RowModel::UnionS),
            "iid" => Ok(RowModel::Iid),
            other => Err(Error::invalid("model", format!("unknown row model `{other}`"))),
        }
    }
}

impl std::fmt::Display for RowModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowModel::FixedSum => "fixed-sum",
            RowModel::UnionS => "union-s",
            RowModel::Iid => "iid",
        })
    }
}

impl RowModel {
    /// One row of length `n` under this law with parameter `s`.
    pub fn sample_row<R: Rng + ?Sized>(&self, n: usize, s: i64, rng: &mut R) -> Result<SignVector> {
        match self {
            RowModel::FixedSum => sample_fixed_sum_vector(n, s, rng),
            RowModel::UnionS => sample_union_s_vector(n, s, rng),
            RowModel::Iid => Ok(sample_skewed_bernoulli_vector(&SkewedBernoulli::new(n, s)?, rng)),
        }
    }

    pub fn validate(&self, n: usize, s: i64) -> Result<()> {
        match self {
            RowModel::FixedSum => check_sum_feasible(n, s),
            RowModel::UnionS => check_union_feasible(n, s),
            RowModel::Iid => SkewedBernoulli::new(n, s).map(|_| ()),
        }
    }
}

/// `n × n` matrix with independent rows from `model`.
pub fn sample_row_sum_matrix<R: Rng + ?Sized>(
    n: usize,
    s: i64,
    model: RowModel,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    model.validate(n, s)?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let row = model.sample_row(n, s, rng)?;
        for (j, &e) in row.entries().iter().enumerate() {
            m[(i, j)] = e as f64;
        }
    }
    Ok(m)
}

/// Row class of a vector drawn from 𝒮.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeTag {
    /// Entry sum `s + 1`.
    Type1,
    /// Entry sum `s − 1`.
    Type2,
}

impl TypeTag {
    pub fn row_sum(&self, s: i64) -> i64 {
        match self {
            TypeTag::Type1 => s + 1,
            TypeTag::Type2 => s - 1,
        }
    }
}

/// Joint law of `(type, x₁ + … + x_{n0})` for `x` uniform on 𝒮, restricted to one type.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedLaw {
    pub n: usize,
    pub n0: usize,
    pub s: i64,
    pub type_tag: TypeTag,
    /// `k ↦ P(type, x₁+…+x_{n0} = k)`; only values with nonzero mass are stored.
    pub pmf: BTreeMap<i64, BigRational>,
}

impl CollapsedLaw {
    pub fn total(&self) -> BigRational {
        self.pmf.values().fold(BigRational::zero(), |acc, p| acc + p)
    }

    /// Law of the collapsed coordinate conditioned on the type.
    pub fn conditional(&self) -> BTreeMap<i64, BigRational> {
        let total = self.total();
        self.pmf.iter().map(|(&k, p)| (k, p / &total)).collect()
    }
}

/// Exact law of the collapsed first coordinate `x₁ + … + x_{n0}` jointly with
/// the row type, for `x` uniform on 𝒮:
///
/// `P(type, k) = C(n0, (n0+k)/2) · C(n−n0, (n−n0+t−k)/2) / |𝒮|`, where `t` is
/// the type's row sum.
pub fn collapsed_coordinate_law(n: usize, n0: usize, s: i64, type_tag: TypeTag) -> Result<CollapsedLaw> {
    if n0 == 0 || n0 > n {
        return Err(Error::invalid("n0", format!("need 1 ≤ n0 ≤ n, got n0 = {n0}, n = {n}")));
    }
    let set = UnionSetS::new(n, s)?;
    let denom = set.size();
    let t = type_tag.row_sum(s);
    let rest = (n - n0) as i64;
    let mut pmf = BTreeMap::new();
    for k in (-(n0 as i64)..=n0 as i64).step_by(2) {
        let head = binomial(n0 as u64, (n0 as i64 + k) / 2);
        let tail_twice = rest + t - k;
        if tail_twice.rem_euclid(2) != 0 {
            return Err(Error::Parity { n: n - n0, sum: t - k });
        }
        let tail = binomial(rest as u64, tail_twice / 2);
        let count = head * tail;
        if !count.is_zero() {
            pmf.insert(k, ratio(count, denom.clone()));
        }
    }
    Ok(CollapsedLaw { n, n0, s, type_tag, pmf })
}

/// Exact `(P(type 1), P(type 2))` for `x` uniform on 𝒮.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSplit {
    pub type1: BigRational,
    pub type2: BigRational,
}

/// Outcome of checking the lower bound `min P(type) ≥ (1−ε)/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeSplitBound {
    pub eps: f64,
    /// Whether `|s| ≤ (1−ε)n`, the regime in which the bound is claimed.
    pub in_regime: bool,
    pub min_probability: f64,
    pub bound: f64,
    pub holds: bool,
}

impl TypeSplit {
    pub fn min(&self) -> &BigRational {
        if self.type1 < self.type2 {
            &self.type1
        } else {
            &self.type2
        }
    }

    /// Evaluates `min P(type) ≥ (1−ε)/4` in exact arithmetic.
    ///
    /// Note `P(type 1) = (n−s+1)/(2(n+1))`, so for `|s|` close to `(1−ε)n`
    /// the smaller class has mass near `ε/2` and the check can fail.
    pub fn lower_bound(&self, n: usize, s: i64, eps: f64) -> TypeSplitBound {
        let in_regime = (s.unsigned_abs() as f64) <= (1.0 - eps) * n as f64;
        let bound_exact = (BigRational::from_integer(1.into()) - crate::exact::from_f64(eps))
            / BigRational::from_integer(4.into());
        TypeSplitBound {
            eps,
            in_regime,
            min_probability: crate::exact::to_f64(self.min()),
            bound: (1.0 - eps) / 4.0,
            holds: *self.min() >= bound_exact,
        }
    }
}

pub fn type_split_probabilities(n: usize, s: i64) -> Result<TypeSplit> {
    let set = UnionSetS::new(n, s)?;
    let total = set.size();
    let (lower, upper) = set.counts().clone();
    Ok(TypeSplit { type1: ratio(upper, total.clone()), type2: ratio(lower, total) })
}
