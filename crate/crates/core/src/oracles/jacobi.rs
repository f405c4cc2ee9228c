//! Cyclic complex Jacobi eigensolver for small Hermitian matrices.

use num_complex::Complex64;

use crate::linalg::CMat;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn jacobi_eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let mut a = (a + a.adjoint()).scale(0.5);
    let mut v = CMat::identity(n, n);
    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g == 0.0 {
                    continue;
                }
                let phase = apq / g;
                let tau = (a[(p, p)].re - a[(q, q)].re) / (2.0 * g);
                let sgn = if tau >= 0.0 { 1.0 } else { -1.0 };
                let t = -1.0 / (tau + sgn * (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) on (p, q) followed by a real rotation.
                let mut rot = CMat::identity(n, n);
                rot[(p, p)] = Complex64::new(c, 0.0);
                rot[(p, q)] = Complex64::new(s, 0.0);
                rot[(q, p)] = phase.conj() * -s;
                rot[(q, q)] = phase.conj() * c;
                a = rot.adjoint() * &a * &rot;
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                v *= &rot;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let vals = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = CMat::from_fn(n, n, |r, col| v[(r, order[col])]);
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frobenius};
    use nalgebra::DVector;

    #[test]
    fn diagonalizes_complex_hermitian() {
        let a = CMat::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0), c(0.5, 1.0), c(-0.3, 0.2),
                c(0.5, -1.0), c(1.0, 0.0), c(0.0, 0.7),
                c(-0.3, -0.2), c(0.0, -0.7), c(3.0, 0.0),
            ],
        );
        let (vals, vecs) = jacobi_eigh(&a);
        assert!(vals.windows(2).all(|p| p[0] <= p[1]));
        let d = CMat::from_diagonal(&DVector::from_iterator(3, vals.iter().map(|&x| c(x, 0.0))));
        let back = &vecs * d * vecs.adjoint();
        assert!(frobenius(&(back - &a)) < 1e-12);
        assert!(frobenius(&(vecs.adjoint() * &vecs - CMat::identity(3, 3))) < 1e-12);
        // trace is preserved
        assert!((vals.iter().sum::<f64>() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn handles_scalar_and_diagonal() {
        let (v, _) = jacobi_eigh(&CMat::from_element(1, 1, c(4.0, 0.0)));
        assert_eq!(v, vec![4.0]);
        let (v, _) = jacobi_eigh(&CMat::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)])));
        assert_eq!(v, vec![1.0, 3.0]);
    }
}
