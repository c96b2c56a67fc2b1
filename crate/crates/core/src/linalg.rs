//! Small dense linear-algebra helpers over complex `nalgebra` matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Relative threshold below which a Gram-Schmidt residual counts as linearly
/// dependent.
const RANK_TOL: f64 = 1e-12;

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_vec(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-entry distance between two equally sized amplitude vectors.
pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `max |M†M − I|` for a square or tall matrix.
pub fn isometry_deviation(m: &DMatrix<C64>) -> f64 {
    let g = m.adjoint() * m;
    max_abs(&(g - DMatrix::identity(m.ncols(), m.ncols())))
}

/// Deviation from unitarity; infinite when `m` is not square.
pub fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    isometry_deviation(m)
}

/// Normalizes a vector, or returns `None` if it has zero norm.
pub fn normalized(v: &DVector<C64>) -> Option<DVector<C64>> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v.unscale(n))
}

/// Thin QR by twice-iterated Gram-Schmidt.
///
/// Columns that are linearly dependent on earlier ones do not open a new
/// direction, so `Q` is `m × r` with `r` the numerical rank and `R` is `r × n`
/// in row-echelon form. For full column rank `R` is upper triangular. Every
/// pivot of `R` is real and positive. A zero matrix yields `Q = e₀` and a
/// single zero row in `R`.
pub fn qr(m: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let (rows, cols) = m.shape();
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tol = RANK_TOL * scale.max(f64::MIN_POSITIVE);

    let mut q: Vec<DVector<C64>> = Vec::new();
    let mut r_cols: Vec<Vec<C64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut v: DVector<C64> = m.column(j).into_owned();
        let mut coeffs = vec![C64::new(0.0, 0.0); q.len()];
        for _ in 0..2 {
            for (l, ql) in q.iter().enumerate() {
                let c = ql.dotc(&v);
                v.axpy(-c, ql, C64::new(1.0, 0.0));
                coeffs[l] += c;
            }
        }
        let norm = v.norm();
        if norm > tol && q.len() < rows {
            q.push(v.unscale(norm));
            coeffs.push(C64::new(norm, 0.0));
        }
        r_cols.push(coeffs);
    }

    if q.is_empty() {
        let mut e0 = DVector::zeros(rows);
        e0[0] = C64::new(1.0, 0.0);
        return (DMatrix::from_columns(&[e0]), DMatrix::zeros(1, cols));
    }
    let rank = q.len();
    let mut r = DMatrix::zeros(rank, cols);
    for (j, col) in r_cols.iter().enumerate() {
        for (i, &c) in col.iter().enumerate() {
            r[(i, j)] = c;
        }
    }
    (DMatrix::from_columns(&q), r)
}

/// Extends a matrix with orthonormal columns to a square unitary.
///
/// New columns are obtained by Gram-Schmidt over the standard basis vectors
/// `e₀, e₁, …` in index order, skipping those already in the span. The given
/// columns are kept verbatim as the leading block.
pub fn complete_unitary(isometry: &DMatrix<C64>) -> DMatrix<C64> {
    let n = isometry.nrows();
    let mut cols: Vec<DVector<C64>> = isometry.column_iter().map(|c| c.into_owned()).collect();
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let p = c.dotc(&v);
                v.axpy(-p, c, C64::new(1.0, 0.0));
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v.unscale(norm));
        }
    }
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, rng_from_seed};
    use proptest::prelude::*;

    #[test]
    fn rank_deficient_columns_shrink_q() {
        let mut rng = rng_from_seed(3);
        let a = random_matrix(&mut rng, 4, 1);
        let m =
            DMatrix::from_columns(&[a.column(0).into_owned(), a.column(0) * C64::new(0.0, 2.0)]);
        let (q, r) = qr(&m);
        assert_eq!(q.ncols(), 1);
        assert_eq!(r.shape(), (1, 2));
        assert!(max_abs(&(&q * &r - &m)) < 1e-12);
    }

    #[test]
    fn zero_matrix_collapses_to_one_column() {
        let m = DMatrix::<C64>::zeros(3, 2);
        let (q, r) = qr(&m);
        assert_eq!(q.shape(), (3, 1));
        assert_eq!(q[(0, 0)], C64::new(1.0, 0.0));
        assert!(max_abs(&r) == 0.0);
    }

    #[test]
    fn wide_matrix() {
        let mut rng = rng_from_seed(8);
        let m = random_matrix(&mut rng, 2, 5);
        let (q, r) = qr(&m);
        assert_eq!(q.shape(), (2, 2));
        assert!(isometry_deviation(&q) < 1e-12);
        assert!(max_abs(&(&q * &r - &m)) < 1e-12);
    }

    #[test]
    fn completion_keeps_leading_block() {
        let mut rng = rng_from_seed(21);
        let (q, _) = qr(&random_matrix(&mut rng, 6, 2));
        let u = complete_unitary(&q);
        assert_eq!(u.shape(), (6, 6));
        assert!(unitarity_deviation(&u) < 1e-12);
        assert_eq!(u.columns(0, 2), q.columns(0, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn qr_reconstructs(seed in any::<u64>(), rows in 1usize..=8, cols in 1usize..=8) {
            let mut rng = rng_from_seed(seed);
            let m = random_matrix(&mut rng, rows.max(cols), cols);
            let (q, r) = qr(&m);
            prop_assert!(isometry_deviation(&q) <= 1e-12);
            prop_assert!(max_abs(&(&q * &r - &m)) <= 1e-12);
            for i in 0..r.nrows() {
                prop_assert!(r[(i, i)].im == 0.0 && r[(i, i)].re >= 0.0);
                for j in 0..i {
                    prop_assert!(r[(i, j)].norm() == 0.0);
                }
            }
        }
    }
}
