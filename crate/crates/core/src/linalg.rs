//! Small dense helpers over `nalgebra` used by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::scalar::Real;

/// Cholesky factor of `a`, retrying once with `ridge * I` added.
pub(crate) fn cholesky_with_ridge<T: Real>(a: &DMatrix<T>, ridge: T) -> Option<Cholesky<T, Dyn>> {
    Cholesky::new(a.clone()).or_else(|| {
        let mut shifted = a.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += ridge;
        }
        Cholesky::new(shifted)
    })
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub(crate) fn spd_solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>, ridge: T) -> Option<DVector<T>> {
    cholesky_with_ridge(a, ridge).map(|c| c.solve(b))
}

pub(crate) fn symmetrize<T: Real>(a: &mut DMatrix<T>) {
    let n = a.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in i + 1..n {
            let m = (a[(i, j)] + a[(j, i)]) * half;
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

pub(crate) fn max_abs<T: Real>(v: impl IntoIterator<Item = T>) -> T {
    v.into_iter().fold(T::zero(), |m, x| m.max(x.magnitude()))
}
