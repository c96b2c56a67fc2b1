//! Seeded random instances for the verification suites and benches.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;

pub type SuiteRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for case `case` of a suite seeded with `seed`.
pub fn case_rng(seed: u64, case: usize) -> SuiteRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64 + 1);
    rng
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<C64> {
    loop {
        let v = DVector::from_fn(n, |_, _| gaussian(rng));
        if let Some(u) = linalg::normalized(&v) {
            return u;
        }
    }
}

/// Haar-distributed unitary (QR of a Ginibre matrix with real positive
/// pivots).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<C64> {
    random_isometry(rng, n, n)
}

/// `rows × cols` matrix with orthonormal columns, `rows ≥ cols`.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    assert!(rows >= cols);
    loop {
        let (q, _) = linalg::qr(&random_matrix(rng, rows, cols));
        if q.ncols() == cols {
            return q;
        }
    }
}
