//! Small dense Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
///
/// Column `k` of the returned matrix is the eigenvector for `values[k]`.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigvalsh(m)[0]
}

/// Smallest eigenpair.
pub fn min_eigvec(m: &CMatrix) -> (f64, CVector) {
    let (vals, vecs) = eigh(m);
    (vals[0], vecs.column(0).into_owned())
}

/// Largest eigenpair.
pub fn max_eigvec(m: &CMatrix) -> (f64, CVector) {
    let (vals, vecs) = eigh(m);
    let n = vals.len() - 1;
    (vals[n], vecs.column(n).into_owned())
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// `⟨v|M|v⟩` for Hermitian `M`, real part.
pub fn quad_form(m: &CMatrix, v: &CVector) -> f64 {
    let mut acc = ZERO;
    for i in 0..v.len() {
        let mut row = ZERO;
        for j in 0..v.len() {
            row += m[(i, j)] * v[j];
        }
        acc += v[i].conj() * row;
    }
    acc.re
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let db = b.len();
    CVector::from_fn(a.len() * db, |i, _| a[i / db] * b[i % db])
}

pub fn conj_vec(v: &CVector) -> CVector {
    v.map(|z| z.conj())
}

/// Orthonormal basis (as columns) of the span of the given columns; eigenvalues
/// of the Gram operator below `tol` are discarded.
pub fn orthonormal_span(columns: &CMatrix, tol: f64) -> CMatrix {
    let n = columns.nrows();
    if columns.ncols() == 0 {
        return CMatrix::zeros(n, 0);
    }
    let frame = columns * columns.adjoint();
    let (vals, vecs) = eigh(&frame);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > tol).collect();
    let mut basis = CMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &vecs.column(k));
    }
    basis
}

/// Columns spanning the orthogonal complement of an orthonormal basis.
pub fn orthogonal_complement(basis: &CMatrix) -> CMatrix {
    let n = basis.nrows();
    let proj = CMatrix::identity(n, n) - basis * basis.adjoint();
    let (vals, vecs) = eigh(&proj);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > 0.5).collect();
    let mut out = CMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        out.set_column(c, &vecs.column(k));
    }
    out
}

/// Rotate `v` so that its first component with modulus above `1e-12` is real positive.
pub fn fix_phase(v: &CVector) -> CVector {
    match v.iter().find(|z| z.norm() > 1e-12) {
        Some(z) => {
            let phase = z.conj() / z.norm();
            v.map(|x| x * phase)
        }
        None => v.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let (vals, vecs) = eigh(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let diag = CMatrix::from_diagonal(&DVector::from_iterator(
            2,
            vals.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let back = &vecs * diag * vecs.adjoint();
        assert!(frobenius(&(back - m)) < 1e-12);
    }

    #[test]
    fn complement_has_right_dimension() {
        let b = CMatrix::from_fn(4, 1, |i, _| if i == 0 { ONE } else { ZERO });
        let c = orthogonal_complement(&b);
        assert_eq!(c.ncols(), 3);
        assert!(frobenius(&(b.adjoint() * c)) < 1e-12);
    }
}
