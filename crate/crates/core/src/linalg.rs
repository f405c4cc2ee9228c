//! Small Hermitian-matrix helpers shared by the spectral, water-filling and
//! joint-constraint code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// nonincreasing order and eigenvector columns permuted to match.
pub fn eigh_desc(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// `U diag(d) U^H`, returned exactly Hermitian.
pub fn from_eigen(vecs: &CMat, vals: &[f64]) -> CMat {
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v, 0.0)));
    let scaled = vecs * CMat::from_diagonal(&d);
    hermitian_part(&(scaled * vecs.adjoint()))
}

/// Keeps the positive eigenmodes of a Hermitian matrix, `(A)_+`.
pub fn positive_part(a: &CMat) -> CMat {
    let (vals, vecs) = eigh_desc(a);
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    from_eigen(&vecs, &clipped)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `ln det(I + A)` for `A` similar to a Hermitian PSD matrix, via LU.
pub fn ln_det_i_plus(a: &CMat) -> f64 {
    let n = a.nrows();
    let m = identity(n) + a;
    m.lu().determinant().ln().re
}
