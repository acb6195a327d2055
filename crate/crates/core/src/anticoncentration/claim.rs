//! Exact probability that a row drawn uniformly from 𝒮 is nearly orthogonal
//! to a collapsed lattice vector.
//!
//! The first `n0` coordinates of `x ∈ 𝒮` are merged into `x′₁ = x₁ + … + x_{n0}`;
//! the remaining coordinates are kept. For a complex vector
//! `u′ = h·(m₁, m_{n0+1}, …, m_n)` on the lattice `hℤ²` with `h = β′n⁴` and an
//! integer shift `f′`, the event `|⟨x′ + f′, u′⟩| ≤ β′n⁵` is exactly
//! `|Σ_c (x′_c + f′_c)·m_c| ≤ n` in Gaussian integers.

use num_bigint::BigUint;
use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{from_f64, masks_with_popcount, ratio, to_f64};
use crate::sampler::{type_split_probabilities, UnionSetS};

/// Largest `n` handled by exact enumeration of 𝒮.
pub const CLAIM_MAX_N: usize = 20;

/// Gaussian integer `(re, im)`.
pub type GaussInt = (i64, i64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsedRowInstance {
    pub n: usize,
    pub n0: usize,
    pub s: i64,
    pub beta_prime: f64,
    /// `u′ / h`, of length `n − n0 + 1`.
    pub lattice: Vec<GaussInt>,
    /// Shift in collapsed coordinates, of length `n − n0 + 1`.
    pub f_prime: Vec<GaussInt>,
    pub eps: f64,
}

/// Which branch of the case analysis the instance falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimCase {
    /// Two tail coefficients at least `β′n⁵` apart.
    FarPair,
    /// Tail coefficients clustered, head at least `β′n⁸` from the cluster.
    FarHead,
    /// Everything clustered.
    Clustered,
}

/// Hypotheses of the bound, each checked separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `β′ ≤ n^{−12}`.
    pub beta_small: bool,
    /// `n0|u′₁|² + Σ|u′_i|² ∈ [1/2, 2]`.
    pub normalized: bool,
    /// `1 ≤ n0 ≤ n − 2`.
    pub n0_in_range: bool,
    /// `0 < ε < 1/4`.
    pub eps_in_range: bool,
    /// `|s| ≤ (1−ε)n`.
    pub s_in_regime: bool,
    /// Both row types have probability at least `(1−ε)/4`.
    pub types_comparable: bool,
}

impl Admissibility {
    pub fn all(&self) -> bool {
        self.beta_small && self.normalized && self.n0_in_range && self.eps_in_range && self.s_in_regime && self.types_comparable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    #[serde(with = "crate::exact::serde_rational")]
    pub probability: BigRational,
    /// `1 − (1−ε)/8`.
    pub bound: f64,
    pub holds: bool,
    pub case: ClaimCase,
    pub admissibility: Admissibility,
    /// `n0|u′₁|² + Σ|u′_i|²`.
    pub squared_norm: f64,
}

fn gauss_dist_sq(a: GaussInt, b: GaussInt) -> i128 {
    let (dr, di) = ((a.0 - b.0) as i128, (a.1 - b.1) as i128);
    dr * dr + di * di
}

impl CollapsedRowInstance {
    fn validate(&self) -> Result<()> {
        if self.n > CLAIM_MAX_N {
            return Err(Error::TooLarge { size: self.n as u128, limit: CLAIM_MAX_N as u128 });
        }
        if self.n0 == 0 || self.n0 > self.n {
            return Err(Error::invalid("n0", format!("need 1 ≤ n0 ≤ n, got {}", self.n0)));
        }
        let len = self.n - self.n0 + 1;
        if self.lattice.len() != len || self.f_prime.len() != len {
            return Err(Error::Dimension(format!("collapsed vectors must have length n − n0 + 1 = {len}")));
        }
        if !(self.beta_prime > 0.0 && self.beta_prime.is_finite()) {
            return Err(Error::invalid("beta_prime", "must be positive and finite"));
        }
        UnionSetS::new(self.n, self.s).map(|_| ())
    }

    /// `h = β′n⁴`.
    pub fn spacing(&self) -> f64 {
        self.beta_prime * (self.n as f64).powi(4)
    }

    pub fn squared_norm(&self) -> f64 {
        let h = self.spacing();
        let sq = |m: GaussInt| (m.0 as f64 * h).powi(2) + (m.1 as f64 * h).powi(2);
        self.n0 as f64 * sq(self.lattice[0]) + self.lattice[1..].iter().map(|&m| sq(m)).sum::<f64>()
    }

    pub fn case(&self) -> ClaimCase {
        let n = self.n as i128;
        let tail = &self.lattice[1..];
        let far_pair = tail
            .iter()
            .enumerate()
            .any(|(i, &a)| tail[i + 1..].iter().any(|&b| gauss_dist_sq(a, b) >= n * n));
        if far_pair {
            return ClaimCase::FarPair;
        }
        let anchor = tail.first().copied().unwrap_or(self.lattice[0]);
        if gauss_dist_sq(self.lattice[0], anchor) >= n.pow(8) {
            ClaimCase::FarHead
        } else {
            ClaimCase::Clustered
        }
    }

    pub fn admissibility(&self) -> Result<Admissibility> {
        let n = self.n as f64;
        let split = type_split_probabilities(self.n, self.s)?;
        let floor = (BigRational::from_integer(1.into()) - from_f64(self.eps)) / BigRational::from_integer(4.into());
        let norm = self.squared_norm();
        Ok(Admissibility {
            beta_small: self.beta_prime <= n.powi(-12),
            normalized: (0.5..=2.0).contains(&norm),
            n0_in_range: self.n0 >= 1 && self.n0 + 2 <= self.n,
            eps_in_range: self.eps > 0.0 && self.eps < 0.25,
            s_in_regime: self.s.unsigned_abs() as f64 <= (1.0 - self.eps) * n,
            types_comparable: *split.min() >= floor,
        })
    }

    /// Random instance of the requested case, with `β′ = n^{−12}`, a shift
    /// that is adversarial (cancelling one member of 𝒮) half the time, and
    /// `s` uniform over the feasible values with `|s| ≤ (1−ε)n`.
    pub fn random<R: Rng + ?Sized>(n: usize, case: ClaimCase, rng: &mut R) -> Result<Self> {
        if !(4..=CLAIM_MAX_N).contains(&n) {
            return Err(Error::invalid("n", format!("need 4 ≤ n ≤ {CLAIM_MAX_N}")));
        }
        let eps = rng.random_range(1e-3..0.25);
        let feasible: Vec<i64> = (-(n as i64 - 1)..=n as i64 - 1)
            .filter(|s| (n as i64 + s).rem_euclid(2) == 1 && s.unsigned_abs() as f64 <= (1.0 - eps) * n as f64)
            .collect();
        let s = feasible[rng.random_range(0..feasible.len())];
        let n0 = rng.random_range(1..=n - 2);
        let len = n - n0 + 1;
        let nf = n as f64;
        // |m| ≈ 1/(h√n) with h = n^{−8} gives a squared norm close to 1
        let magnitude = nf.powi(8) / nf.sqrt();
        let direction = |rng: &mut R| {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            ((magnitude * t.cos()).round() as i64, (magnitude * t.sin()).round() as i64)
        };
        let jitter = |rng: &mut R, r: i64| (rng.random_range(-r..=r), rng.random_range(-r..=r));
        let small = (n as i64 / 4).max(0);
        let centre = direction(rng);
        let mut lattice: Vec<GaussInt> = Vec::with_capacity(len);
        match case {
            ClaimCase::FarPair => {
                lattice.push(direction(rng));
                for _ in 1..len {
                    lattice.push(direction(rng));
                }
                if len >= 3 {
                    let last = lattice[len - 2];
                    lattice[len - 1] = (last.0 + n as i64 + rng.random_range(0..=n as i64), last.1);
                }
            }
            ClaimCase::FarHead | ClaimCase::Clustered => {
                let head_offset = if case == ClaimCase::FarHead {
                    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let r = 2.0 * nf.powi(4);
                    ((r * t.cos()).round() as i64, (r * t.sin()).round() as i64)
                } else {
                    jitter(rng, small)
                };
                lattice.push((centre.0 + head_offset.0, centre.1 + head_offset.1));
                for _ in 1..len {
                    let j = jitter(rng, small);
                    lattice.push((centre.0 + j.0, centre.1 + j.1));
                }
            }
        }
        let f_prime = if rng.random::<bool>() {
            // cancel ⟨x*, m⟩ for one member x* of 𝒮
            let target = if rng.random::<bool>() { s + 1 } else { s - 1 };
            let x = crate::sampler::sample_fixed_sum_vector(n, target, rng)?;
            let head: i64 = x.entries()[..n0].iter().map(|&e| e as i64).sum();
            std::iter::once(head).chain(x.entries()[n0..].iter().map(|&e| e as i64)).map(|v| (-v, 0)).collect()
        } else {
            (0..len).map(|_| (rng.random_range(-2..=2), rng.random_range(-2..=2))).collect()
        };
        Ok(CollapsedRowInstance { n, n0, s, beta_prime: nf.powi(-12), lattice, f_prime, eps })
    }
}

/// `P(|⟨x′ + f′, u′⟩| ≤ β′n⁵)` for `x` uniform on 𝒮, by enumeration.
pub fn claim1_probability(instance: &CollapsedRowInstance) -> Result<ClaimReport> {
    instance.validate()?;
    let (n, n0, s) = (instance.n, instance.n0, instance.s);
    let shift: (i128, i128) = instance.f_prime.iter().zip(&instance.lattice).fold((0, 0), |acc, (f, m)| {
        let (fr, fi, mr, mi) = (f.0 as i128, f.1 as i128, m.0 as i128, m.1 as i128);
        (acc.0 + fr * mr - fi * mi, acc.1 + fr * mi + fi * mr)
    });
    let limit = (n as i128) * (n as i128);
    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    for sum in [s - 1, s + 1] {
        let plus = ((n as i64 + sum) / 2) as u32;
        for mask in masks_with_popcount(n as u32, plus) {
            let sign = |i: usize| if mask >> i & 1 == 1 { 1i128 } else { -1 };
            let head: i128 = (0..n0).map(sign).sum();
            let m0 = instance.lattice[0];
            let mut re = shift.0 + head * m0.0 as i128;
            let mut im = shift.1 + head * m0.1 as i128;
            for (c, i) in (n0..n).enumerate() {
                let m = instance.lattice[c + 1];
                re += sign(i) * m.0 as i128;
                im += sign(i) * m.1 as i128;
            }
            if re * re + im * im <= limit {
                hits += 1;
            }
            total += 1;
        }
    }
    let probability = ratio(BigUint::from(hits), BigUint::from(total));
    let bound = 1.0 - (1.0 - instance.eps) / 8.0;
    let bound_exact = BigRational::from_integer(1.into())
        - (BigRational::from_integer(1.into()) - from_f64(instance.eps)) / BigRational::from_integer(8.into());
    Ok(ClaimReport {
        holds: probability <= bound_exact,
        probability,
        bound,
        case: instance.case(),
        admissibility: instance.admissibility()?,
        squared_norm: instance.squared_norm(),
    })
}

impl ClaimReport {
    pub fn probability_f64(&self) -> f64 {
        to_f64(&self.probability)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use num_traits::One;

    /// Direct enumeration over 𝒮 members using floating coordinates.
    fn enumerate_float(inst: &CollapsedRowInstance) -> f64 {
        let set = UnionSetS::new(inst.n, inst.s).unwrap();
        let h = inst.spacing();
        let u: Vec<(f64, f64)> = inst.lattice.iter().map(|m| (m.0 as f64 * h, m.1 as f64 * h)).collect();
        let (mut hits, mut total) = (0usize, 0usize);
        for x in set.members() {
            let e = x.entries();
            let mut coords = vec![e[..inst.n0].iter().map(|&v| v as f64).sum::<f64>()];
            coords.extend(e[inst.n0..].iter().map(|&v| v as f64));
            let (mut re, mut im) = (0.0, 0.0);
            for ((c, f), m) in coords.iter().zip(&inst.f_prime).zip(&u) {
                let a = c + f.0 as f64;
                let b = f.1 as f64;
                re += a * m.0 - b * m.1;
                im += a * m.1 + b * m.0;
            }
            if re.hypot(im) <= inst.beta_prime * (inst.n as f64).powi(5) * (1.0 + 1e-9) {
                hits += 1;
            }
            total += 1;
        }
        hits as f64 / total as f64
    }

    #[test]
    fn random_instances_have_requested_case() {
        let mut rng = from_seed(61);
        for case in [ClaimCase::FarPair, ClaimCase::FarHead, ClaimCase::Clustered] {
            for n in [8usize, 11, 14] {
                let inst = CollapsedRowInstance::random(n, case, &mut rng).unwrap();
                assert_eq!(inst.case(), case);
                let adm = inst.admissibility().unwrap();
                assert!(adm.beta_small && adm.normalized && adm.n0_in_range && adm.eps_in_range, "{adm:?}");
            }
        }
    }

    #[test]
    fn exact_matches_float_enumeration() {
        let mut rng = from_seed(62);
        for case in [ClaimCase::FarPair, ClaimCase::FarHead, ClaimCase::Clustered] {
            for _ in 0..5 {
                let inst = CollapsedRowInstance::random(9, case, &mut rng).unwrap();
                let rep = claim1_probability(&inst).unwrap();
                assert!((rep.probability_f64() - enumerate_float(&inst)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_constant_vector_is_flagged() {
        let n = 10;
        let inst = CollapsedRowInstance {
            n,
            n0: 4,
            s: 1,
            beta_prime: 1.0,
            lattice: vec![(1, 0); 7],
            f_prime: vec![(0, 0); 7],
            eps: 0.1,
        };
        let rep = claim1_probability(&inst).unwrap();
        assert!(rep.probability.is_one());
        assert!(!rep.holds);
        assert!(!rep.admissibility.normalized && !rep.admissibility.beta_small);
    }

    #[test]
    fn bound_on_admissible_instances() {
        let mut rng = from_seed(63);
        let mut checked = 0;
        while checked < 12 {
            let case = [ClaimCase::FarPair, ClaimCase::FarHead, ClaimCase::Clustered][checked % 3];
            let inst = CollapsedRowInstance::random(10, case, &mut rng).unwrap();
            let rep = claim1_probability(&inst).unwrap();
            if rep.admissibility.all() {
                assert!(rep.holds, "{inst:?} {rep:?}");
                checked += 1;
            }
        }
    }

    #[test]
    fn input_validation() {
        let mut inst = CollapsedRowInstance::random(8, ClaimCase::Clustered, &mut from_seed(64)).unwrap();
        inst.lattice.pop();
        assert!(claim1_probability(&inst).is_err());
        let mut inst = CollapsedRowInstance::random(8, ClaimCase::Clustered, &mut from_seed(64)).unwrap();
        inst.s += 1;
        assert!(matches!(claim1_probability(&inst), Err(Error::Parity { .. })));
    }
}
