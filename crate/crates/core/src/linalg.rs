//! Dense linear-algebra plumbing shared across modules.

use nalgebra::{ComplexField, DMatrix, DVector};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// `log |det m|` from a partially pivoted LU factorization, or `None` when a
/// pivot is exactly zero.
pub fn log_abs_det<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Option<f64> {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let p = u[(i, i)].clone().modulus();
        if p == 0.0 {
            return None;
        }
        acc += p.ln();
    }
    Some(acc)
}

/// Rows of `(x + f) − z·√n·I` as complex vectors.
pub fn shifted_rows(x: &DMatrix<f64>, f: Option<&DMatrix<f64>>, z: C64) -> Vec<CVector> {
    let n = x.nrows();
    let shift = z * (n as f64).sqrt();
    (0..n)
        .map(|i| {
            CVector::from_fn(x.ncols(), |j, _| {
                let mut v = C64::new(x[(i, j)] + f.map_or(0.0, |f| f[(i, j)]), 0.0);
                if i == j {
                    v -= shift;
                }
                v
            })
        })
        .collect()
}

pub fn rows_to_matrix(rows: &[CVector]) -> CMatrix {
    let ncols = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Relative difference with a unit floor on the denominator.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
