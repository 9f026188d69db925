//! Small dense helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Solves `a x = b` for Hermitian positive definite `a` by Cholesky.
///
/// Returns `None` when the factorization breaks down or the smallest
/// pivot is below `rel_tol` times the largest one.
pub fn hermitian_solve(a: DMatrix<C64>, b: &DVector<C64>, rel_tol: f64) -> Option<DVector<C64>> {
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    // pivots of a are the squares of diag(L)
    if !(lo * lo > rel_tol * hi * hi) {
        return None;
    }
    Some(chol.solve(b))
}

pub fn to_dvector(x: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[
            C64::new(2.0, 0.0), C64::new(0.0, 1.0),
            C64::new(0.0, -1.0), C64::new(2.0, 0.0),
        ]);
        let b = DVector::from_column_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let x = hermitian_solve(a.clone(), &b, 1e-12).unwrap();
        assert!((&a * &x - &b).norm() < 1e-12);

        let ones = DMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        let b3 = DVector::from_element(3, C64::new(1.0, 0.0));
        assert!(hermitian_solve(ones, &b3, 1e-12).is_none());
    }
}
