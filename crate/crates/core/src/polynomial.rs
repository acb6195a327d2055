//! Exact characteristic polynomials of integer matrices and eigenvalues with
//! exact multiplicities.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Coefficients from the constant term upward, no trailing zeros.
pub type Poly = Vec<BigRational>;

/// 62-bit primes for the modular characteristic polynomial.
const PRIMES: [u64; 12] = [
    4611686018427387847,
    4611686018427387817,
    4611686018427387787,
    4611686018427387733,
    4611686018427387709,
    4611686018427387697,
    4611686018427387691,
    4611686018427387673,
    4611686018427387649,
    4611686018427387619,
    4611686018427387599,
    4611686018427387551,
];

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

/// `det(xI − A) mod p` by Hessenberg reduction, constant term first.
fn charpoly_mod(a: &DMatrix<i64>, p: u64) -> Vec<u64> {
    let n = a.nrows();
    let mut h: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)].rem_euclid(p as i64) as u64).collect()).collect();
    for m in 1..n.saturating_sub(1) {
        let Some(piv) = (m..n).find(|&i| h[i][m - 1] != 0) else { continue };
        if piv != m {
            h.swap(piv, m);
            for row in h.iter_mut() {
                row.swap(piv, m);
            }
        }
        let inv = pow_mod(h[m][m - 1], p - 2, p);
        for i in m + 1..n {
            let u = mul_mod(h[i][m - 1], inv, p);
            if u == 0 {
                continue;
            }
            // row_i −= u·row_m, then col_m += u·col_i keeps the similarity
            for j in 0..n {
                let d = mul_mod(u, h[m][j], p);
                h[i][j] = (h[i][j] + p - d) % p;
            }
            for row in h.iter_mut() {
                let d = mul_mod(u, row[i], p);
                row[m] = (row[m] + d) % p;
            }
        }
    }
    // p_m = (x − h_mm) p_{m−1} − Σ_{i<m} h_im (∏_{j=i+1}^{m} h_{j,j−1}) p_{i−1}
    let mut polys: Vec<Vec<u64>> = vec![vec![1]];
    for m in 0..n {
        let prev = &polys[m];
        let mut next = vec![0u64; m + 2];
        for (k, &c) in prev.iter().enumerate() {
            next[k + 1] = (next[k + 1] + c) % p;
            next[k] = (next[k] + p - mul_mod(h[m][m], c, p)) % p;
        }
        let mut t = 1u64;
        for i in (0..m).rev() {
            t = mul_mod(t, h[i + 1][i], p);
            let coef = mul_mod(t, h[i][m], p);
            if coef == 0 {
                continue;
            }
            for (k, &c) in polys[i].iter().enumerate() {
                next[k] = (next[k] + p - mul_mod(coef, c, p)) % p;
            }
        }
        polys.push(next);
    }
    polys.pop().expect("p_0 exists")
}

/// `log₂` of a bound on every coefficient: `|c_k| ≤ C(n,k)·R^{n−k}` with `R`
/// the largest row norm (Hadamard on each principal minor).
fn coefficient_bound_log2(a: &DMatrix<i64>) -> f64 {
    let n = a.nrows();
    let r = a.row_iter().map(|row| row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()).fold(1.0, f64::max);
    (n as f64) + (n as f64) * r.log2()
}

/// Characteristic polynomial `det(xI − A)`, constant term first, from its
/// residues modulo enough primes to pin every coefficient down.
pub fn charpoly_integer(a: &DMatrix<i64>) -> Result<Vec<BigInt>> {
    if !a.is_square() {
        return Err(Error::Dimension("characteristic polynomial needs a square matrix".into()));
    }
    let n = a.nrows();
    let needed = coefficient_bound_log2(a) + 2.0;
    let count = (needed / 61.0).ceil().max(1.0) as usize;
    if count > PRIMES.len() {
        return Err(Error::TooLarge { size: needed as u128, limit: 61 * PRIMES.len() as u128 });
    }
    let mut modulus = BigInt::one();
    let mut coeffs = vec![BigInt::zero(); n + 1];
    for &p in &PRIMES[..count] {
        let residues = charpoly_mod(a, p);
        let pb = BigInt::from(p);
        // CRT: c ≡ coeffs (mod modulus), c ≡ r (mod p)
        let inv = BigInt::from(pow_mod((&modulus % &pb).to_u64().expect("reduced"), p - 2, p));
        for (c, &r) in coeffs.iter_mut().zip(&residues) {
            let diff = (BigInt::from(r) - &*c % &pb) * &inv % &pb;
            let diff = if diff.is_negative() { diff + &pb } else { diff };
            *c += &modulus * diff;
        }
        modulus *= pb;
    }
    let half = &modulus / 2;
    for c in coeffs.iter_mut() {
        if *c > half {
            *c -= &modulus;
        }
    }
    Ok(coeffs)
}

fn trim(mut p: Poly) -> Poly {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

pub fn from_integers(c: &[BigInt]) -> Poly {
    trim(c.iter().map(|x| BigRational::from_integer(x.clone())).collect())
}

fn degree(p: &Poly) -> usize {
    p.len().saturating_sub(1)
}

fn derivative(p: &Poly) -> Poly {
    trim(p.iter().enumerate().skip(1).map(|(i, c)| c * BigRational::from_integer(i.into())).collect())
}

fn monic(p: Poly) -> Poly {
    match p.last().cloned() {
        Some(lead) => p.into_iter().map(|c| c / &lead).collect(),
        None => p,
    }
}

/// `(q, r)` with `a = q·b + r`, `deg r < deg b`.
fn div_rem(a: &Poly, b: &Poly) -> (Poly, Poly) {
    assert!(!b.is_empty(), "division by the zero polynomial");
    let mut r = a.clone();
    if a.len() < b.len() {
        return (Vec::new(), r);
    }
    let lead = b.last().expect("non-empty");
    let mut q = vec![BigRational::zero(); a.len() - b.len() + 1];
    for k in (0..q.len()).rev() {
        let c = &r[k + b.len() - 1] / lead;
        if !c.is_zero() {
            for (j, bj) in b.iter().enumerate() {
                let delta = &c * bj;
                r[k + j] -= delta;
            }
        }
        q[k] = c;
    }
    (trim(q), trim(r))
}

fn gcd(a: &Poly, b: &Poly) -> Poly {
    let (mut a, mut b) = (a.clone(), b.clone());
    while !b.is_empty() {
        let (_, r) = div_rem(&a, &b);
        a = b;
        b = monic(r);
    }
    monic(a)
}

pub fn mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

/// Yun's algorithm: `p = c·∏ f_i^i` with each `f_i` monic and square-free;
/// returns the non-constant `(f_i, i)`.
pub fn squarefree_decomposition(p: &Poly) -> Vec<(Poly, usize)> {
    let p = monic(trim(p.clone()));
    if degree(&p) == 0 {
        return Vec::new();
    }
    let dp = derivative(&p);
    let a0 = gcd(&p, &dp);
    let mut b = div_rem(&p, &a0).0;
    let mut c = div_rem(&dp, &a0).0;
    let mut d = trim(sub(&c, &derivative(&b)));
    let mut out = Vec::new();
    let mut i = 1;
    while degree(&b) > 0 {
        let a = gcd(&b, &d);
        b = div_rem(&b, &a).0;
        c = div_rem(&d, &a).0;
        d = trim(sub(&c, &derivative(&b)));
        if degree(&a) > 0 {
            out.push((monic(a), i));
        }
        i += 1;
    }
    out
}

fn sub(a: &Poly, b: &Poly) -> Poly {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(BigRational::zero);
            let y = b.get(i).cloned().unwrap_or_else(BigRational::zero);
            x - y
        })
        .collect()
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| if q.is_negative() { f64::MIN } else { f64::MAX })
}

fn horner(p: &[f64], z: C64) -> (C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut dv = C64::new(0.0, 0.0);
    for &c in p.iter().rev() {
        dv = dv * z + v;
        v = v * z + c;
    }
    (v, dv)
}

/// Roots of a monic square-free polynomial: companion eigenvalues polished by
/// Newton steps.
fn simple_roots(p: &Poly) -> Result<Vec<C64>> {
    let d = degree(p);
    let c: Vec<f64> = p.iter().map(to_f64).collect();
    match d {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![C64::new(-to_f64(&(&p[0] / &p[1])), 0.0)]),
        _ => {}
    }
    let companion = DMatrix::from_fn(d, d, |i, j| {
        if i == 0 {
            -c[d - 1 - j] / c[d]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut roots = crate::spectral::eigenvalues_dense(&companion)?;
    for z in roots.iter_mut() {
        for _ in 0..8 {
            let (v, dv) = horner(&c, *z);
            if dv.norm() == 0.0 {
                break;
            }
            let step = v / dv;
            *z -= step;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        }
    }
    Ok(roots)
}

/// Eigenvalues of an integer matrix, each repeated by its exact algebraic
/// multiplicity.
pub fn eigenvalues_integer(a: &DMatrix<i64>) -> Result<Vec<C64>> {
    let p = from_integers(&charpoly_integer(a)?);
    let mut out = Vec::with_capacity(a.nrows());
    for (f, mult) in squarefree_decomposition(&p) {
        for z in simple_roots(&f)? {
            out.extend(std::iter::repeat_n(z, mult));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use rand::Rng;

    /// Faddeev–LeVerrier in exact integers.
    fn faddeev_leverrier(a: &DMatrix<i64>) -> Vec<BigInt> {
        let n = a.nrows();
        let a: Vec<Vec<BigInt>> = (0..n).map(|i| (0..n).map(|j| BigInt::from(a[(i, j)])).collect()).collect();
        // Faddeev–LeVerrier: M_k = A M_{k−1} + c_{n−k+1} I, c_{n−k} = −tr(A M_k)/k
        let mut coeffs = vec![BigInt::zero(); n + 1];
        coeffs[n] = BigInt::one();
        let mut m: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); n]; n];
        for k in 1..=n {
            let mut am = vec![vec![BigInt::zero(); n]; n];
            for i in 0..n {
                for l in 0..n {
                    if a[i][l].is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        if !m[l][j].is_zero() {
                            am[i][j] += &a[i][l] * &m[l][j];
                        }
                    }
                }
            }
            // M_k = A M_{k−1} + c_{n−k+1} I
            for (i, row) in am.iter_mut().enumerate() {
                row[i] += &coeffs[n - k + 1];
            }
            m = am;
            let mut tr = BigInt::zero();
            for (i, row) in a.iter().enumerate() {
                for (l, x) in row.iter().enumerate() {
                    tr += x * &m[l][i];
                }
            }
            coeffs[n - k] = -tr / BigInt::from(k);
        }
        coeffs
    }

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn small_characteristic_polynomials() {
        let a = DMatrix::from_row_slice(2, 2, &[1i64, 2, 3, 4]);
        // x² − 5x − 2
        assert_eq!(charpoly_integer(&a).unwrap(), ints(&[-2, -5, 1]));
        let j = DMatrix::from_row_slice(3, 3, &[0i64, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(charpoly_integer(&j).unwrap(), ints(&[0, 0, 0, 1]));
        assert_eq!(charpoly_integer(&DMatrix::<i64>::zeros(0, 0)).unwrap(), ints(&[1]));
    }

    #[test]
    fn charpoly_matches_determinant_and_trace() {
        let mut rng = from_seed(81);
        for n in 1..9 {
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3i64..=3));
            let c = charpoly_integer(&a).unwrap();
            let det = crate::singular::bareiss_determinant(&a);
            let sign = if n % 2 == 0 { 1 } else { -1 };
            assert_eq!(c[0], BigInt::from(sign * det));
            assert_eq!(c[n - 1], BigInt::from(-a.trace()));
        }
    }

    #[test]
    fn modular_matches_faddeev_leverrier() {
        let mut rng = from_seed(83);
        for n in [1usize, 2, 5, 12, 30] {
            for _ in 0..3 {
                let a = DMatrix::from_fn(n, n, |_, _| if rng.random::<bool>() { 1i64 } else { -1 });
                assert_eq!(charpoly_integer(&a).unwrap(), faddeev_leverrier(&a));
            }
        }
        let wide = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1000i64..=1000));
        assert_eq!(charpoly_integer(&wide).unwrap(), faddeev_leverrier(&wide));
    }

    #[test]
    fn squarefree_parts() {
        // (x − 1)²(x + 2)³ x
        let q = |v: i64| BigRational::from_integer(v.into());
        let lin = |r: i64| vec![q(-r), q(1)];
        let mut p = lin(0);
        for _ in 0..2 {
            p = mul(&p, &lin(1));
        }
        for _ in 0..3 {
            p = mul(&p, &lin(-2));
        }
        let parts = squarefree_decomposition(&p);
        assert_eq!(parts, vec![(lin(0), 1), (lin(1), 2), (lin(-2), 3)]);
    }

    #[test]
    fn nilpotent_and_defective_spectra() {
        let j = DMatrix::from_fn(6, 6, |i, k| (k == i + 1) as i64);
        let e = eigenvalues_integer(&j).unwrap();
        assert_eq!(e.len(), 6);
        assert!(e.iter().all(|z| z.norm() == 0.0));
        // rotation block with a repeated pair ±i
        let r = DMatrix::from_row_slice(4, 4, &[0i64, -1, 1, 0, 1, 0, 0, 1, 0, 0, 0, -1, 0, 0, 1, 0]);
        let e = eigenvalues_integer(&r).unwrap();
        assert_eq!(e.len(), 4);
        for z in e {
            assert!((z.norm() - 1.0).abs() < 1e-14 && z.re.abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_schur_on_generic_matrices() {
        let mut rng = from_seed(82);
        for n in [3usize, 8, 15] {
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-5i64..=5));
            let exact = eigenvalues_integer(&a).unwrap();
            let schur = crate::spectral::eigenvalues_dense(&a.map(|v| v as f64)).unwrap();
            assert!(crate::spectral::multiset_distance(&exact, &schur).unwrap() < 1e-8);
        }
    }
}
