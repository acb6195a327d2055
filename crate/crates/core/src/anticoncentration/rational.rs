//! Exact rational linear algebra for expressing GAP generators through
//! elements of the GAP.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

use super::gap::Gap;

pub type QMatrix = Vec<Vec<BigRational>>;

fn int(k: i64) -> BigRational {
    BigRational::from_integer(k.into())
}

/// Reduced row echelon form; returns the pivot columns.
fn rref(m: &mut QMatrix) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &QMatrix) -> usize {
    rref(&mut m.clone()).len()
}

/// Exact inverse of a square matrix, `None` when singular.
pub fn inverse(m: &QMatrix) -> Option<QMatrix> {
    let n = m.len();
    let mut aug: QMatrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Exact determinant by elimination.
pub fn determinant(m: &QMatrix) -> BigRational {
    let n = m.len();
    let mut a = m.clone();
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else { return BigRational::zero() };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= &a[c][c];
        for i in c + 1..n {
            let f = &a[i][c] / &a[c][c];
            for j in c..n {
                let delta = &f * &a[c][j];
                a[i][j] -= delta;
            }
        }
    }
    det
}

/// Coefficients `y` with `target = Σ_j y_j · rows[j]`, if any exist.
pub fn solve_combination(rows: &[Vec<BigRational>], target: &[BigRational]) -> Option<Vec<BigRational>> {
    let r = rows.len();
    let dim = target.len();
    // columns are the rows, augmented by the target
    let mut m: QMatrix = (0..dim)
        .map(|i| {
            let mut row: Vec<BigRational> = rows.iter().map(|v| v[i].clone()).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let pivots = rref(&mut m);
    if pivots.contains(&r) {
        return None;
    }
    let mut y = vec![BigRational::zero(); r];
    for (i, &p) in pivots.iter().enumerate() {
        y[p] = m[i][r].clone();
    }
    Some(y)
}

/// Coefficient vectors `k_i` of elements `w_i = Σ_j k_ij g_j` of a GAP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RationalMatrixProblem {
    pub coefficients: Vec<Vec<i64>>,
}

impl RationalMatrixProblem {
    pub fn matrix(&self) -> QMatrix {
        self.coefficients.iter().map(|r| r.iter().map(|&k| int(k)).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GeneratorExpression {
    /// `g_i = Σ_j y[i][j] w_j`, with the reconstruction verified exactly.
    Generators {
        #[serde(serialize_with = "serialize_matrix")]
        y: QMatrix,
        /// `max |p|, |q|` over the entries `p/q` of `y`.
        #[serde(serialize_with = "serialize_display")]
        height: BigInt,
        /// `det K`; every denominator of `y` divides it.
        #[serde(serialize_with = "serialize_display")]
        determinant: BigRational,
        exact: bool,
    },
    /// `k_index = Σ_{j<index} y[j] k_j` for the first dependent coefficient vector.
    Dependency {
        index: usize,
        #[serde(serialize_with = "serialize_vector")]
        y: Vec<BigRational>,
        #[serde(serialize_with = "serialize_display")]
        height: BigInt,
    },
}

fn serialize_display<T: std::fmt::Display, S: serde::Serializer>(q: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(q)
}

fn serialize_vector<S: serde::Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|q| q.to_string()))
}

fn serialize_matrix<S: serde::Serializer>(m: &QMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|r| r.iter().map(|q| q.to_string()).collect::<Vec<_>>()))
}

fn height<'a>(qs: impl Iterator<Item = &'a BigRational>) -> BigInt {
    qs.map(|q| q.numer().abs().max(q.denom().abs())).max().unwrap_or_else(BigInt::zero)
}

fn combine(coeffs: &[BigRational], vectors: &[Vec<BigRational>]) -> Vec<BigRational> {
    let d = vectors.first().map_or(0, |v| v.len());
    let mut out = vec![BigRational::zero(); d];
    for (c, v) in coeffs.iter().zip(vectors) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

/// Expresses each generator of a proper symmetric GAP through the elements
/// `w_i = Σ_j k_ij g_j`, or, when the `k_i` are dependent, the first
/// dependent `k_i` through its predecessors.
pub fn express_generators(gap: &Gap, problem: &RationalMatrixProblem) -> Result<GeneratorExpression> {
    let r = gap.rank();
    if problem.coefficients.len() != r || problem.coefficients.iter().any(|k| k.len() != r) {
        return Err(Error::Dimension(format!("need {r} coefficient vectors of length {r}")));
    }
    if !gap.is_symmetric() {
        return Err(Error::invalid("gap", "GAP must be symmetric"));
    }
    if !gap.is_proper()? {
        return Err(Error::invalid("gap", "GAP must be proper"));
    }
    if let Some(i) = problem.coefficients.iter().position(|k| !gap.contains_coefficients(k)) {
        return Err(Error::invalid("coefficients", format!("w_{} lies outside the GAP box", i + 1)));
    }
    let k = problem.matrix();
    if rank(&k) < r {
        for i in 1..r {
            if let Some(y) = solve_combination(&k[..i], &k[i]) {
                return Ok(GeneratorExpression::Dependency { index: i, height: height(y.iter()), y });
            }
        }
        // only a zero first row is dependent on nothing
        return Ok(GeneratorExpression::Dependency { index: 0, y: Vec::new(), height: BigInt::zero() });
    }
    let y = inverse(&k).expect("full rank");
    let w: Vec<Vec<BigRational>> = k.iter().map(|row| combine(row, gap.generators())).collect();
    let exact = (0..r).all(|i| combine(&y[i], &w) == gap.generators()[i]);
    Ok(GeneratorExpression::Generators { height: height(y.iter().flatten()), determinant: determinant(&k), y, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use rand::Rng;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    /// Widely spaced generators keep the GAP proper.
    fn proper_gap(bounds: Vec<i64>) -> Gap {
        let gens = vec![vec![q(1, 1)], vec![q(1000, 1)], vec![q(1_000_000, 1)]];
        Gap::symmetric(gens[..bounds.len()].to_vec(), bounds).unwrap()
    }

    #[test]
    fn identity_coefficients() {
        let g = proper_gap(vec![3, 3]);
        let p = RationalMatrixProblem { coefficients: vec![vec![1, 0], vec![0, 1]] };
        match express_generators(&g, &p).unwrap() {
            GeneratorExpression::Generators { y, exact, .. } => {
                assert!(exact);
                assert_eq!(y, vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_by_two_inverse() {
        let g = proper_gap(vec![2, 2]);
        let p = RationalMatrixProblem { coefficients: vec![vec![1, 1], vec![1, -1]] };
        match express_generators(&g, &p).unwrap() {
            GeneratorExpression::Generators { y, exact, determinant, .. } => {
                assert!(exact);
                assert_eq!(determinant, q(-2, 1));
                assert_eq!(y, vec![vec![q(1, 2), q(1, 2)], vec![q(1, 2), q(-1, 2)]]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_three_by_three_reconstructs() {
        let g = proper_gap(vec![5, 5, 5]);
        let mut rng = from_seed(51);
        let mut seen = 0;
        while seen < 20 {
            let coefficients: Vec<Vec<i64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(-5..=5)).collect()).collect();
            let p = RationalMatrixProblem { coefficients };
            if let GeneratorExpression::Generators { y, exact, determinant, .. } = express_generators(&g, &p).unwrap() {
                assert!(exact);
                let det = determinant.to_integer();
                assert!(y.iter().flatten().all(|e| (&det % e.denom()).is_zero()));
                seen += 1;
            }
        }
    }

    #[test]
    fn dependent_coefficients() {
        let g = proper_gap(vec![4, 4, 4]);
        let p = RationalMatrixProblem { coefficients: vec![vec![1, 2, 0], vec![0, 1, 1], vec![2, 1, -3]] };
        match express_generators(&g, &p).unwrap() {
            GeneratorExpression::Dependency { index, y, .. } => {
                assert_eq!(index, 2);
                assert_eq!(y, vec![q(2, 1), q(-3, 1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preconditions() {
        let improper = Gap::symmetric(vec![vec![q(1, 1)], vec![q(2, 1)]], vec![1, 1]).unwrap();
        let p = RationalMatrixProblem { coefficients: vec![vec![1, 0], vec![0, 1]] };
        assert!(express_generators(&improper, &p).is_err());
        let g = proper_gap(vec![1, 1]);
        let outside = RationalMatrixProblem { coefficients: vec![vec![2, 0], vec![0, 1]] };
        assert!(express_generators(&g, &outside).is_err());
    }

    #[test]
    fn determinant_and_inverse_agree() {
        let m = vec![vec![q(2, 1), q(1, 3)], vec![q(-1, 1), q(4, 5)]];
        assert_eq!(determinant(&m), q(8, 5) + q(1, 3));
        let inv = inverse(&m).unwrap();
        assert_eq!(determinant(&inv), determinant(&m).recip());
        assert!(inverse(&vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]]).is_none());
    }
}
