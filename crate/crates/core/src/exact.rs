//! Exact integer and rational helpers shared by the samplers and oracles.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Binomial coefficient `C(n, k)`, zero when `k` is outside `0..=n`.
pub fn binomial(n: u64, k: i64) -> BigUint {
    if k < 0 || k as u64 > n {
        return BigUint::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite `f64`.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Iterator over all `n`-bit masks with exactly `k` bits set, in increasing
/// numeric order (Gosper's hack). Requires `n < 64`.
#[derive(Debug, Clone)]
pub struct MasksWithPopcount {
    next: Option<u64>,
    limit: u64,
}

pub fn masks_with_popcount(n: u32, k: u32) -> MasksWithPopcount {
    assert!(n < 64, "mask enumeration needs n < 64");
    let next = if k > n {
        None
    } else if k == 0 {
        Some(0)
    } else {
        Some((1u64 << k) - 1)
    };
    MasksWithPopcount { next, limit: 1u64 << n }
}

impl Iterator for MasksWithPopcount {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let nxt = (((r ^ cur) >> 2) / c) | r;
            (nxt < self.limit).then_some(nxt)
        };
        Some(cur)
    }
}

/// Serializes a [`BigRational`] as the string `"p/q"` (or `"p"`).
pub mod serde_rational {
    use num_rational::BigRational;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(q)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(de)?;
        text.parse().map_err(|e| D::Error::custom(format!("bad rational `{text}`: {e:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(6, 4), BigUint::from(15u32));
        assert_eq!(binomial(10, 5), BigUint::from(252u32));
        assert_eq!(binomial(4, -1), BigUint::zero());
        assert_eq!(binomial(4, 5), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
        // exceeds u64
        assert_eq!(binomial(100, 50).to_string(), "100891344545564193334812497256");
    }

    #[test]
    fn rational_serde_round_trip() {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct W(#[serde(with = "serde_rational")] BigRational);
        let w = W(ratio(BigUint::from(6u32), BigUint::from(16u32)));
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(text, "\"3/8\"");
        assert_eq!(serde_json::from_str::<W>(&text).unwrap(), w);
    }

    #[test]
    fn gosper_counts_match_binomials() {
        for n in 0..12u32 {
            for k in 0..=n + 1 {
                let masks: Vec<u64> = masks_with_popcount(n, k).collect();
                assert_eq!(BigUint::from(masks.len()), binomial(n as u64, k as i64), "n={n} k={k}");
                assert!(masks.iter().all(|m| m.count_ones() == k && *m < (1u64 << n)));
                assert!(masks.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
