use crate::error::{Error, Result};
use crate::linalg::{eigh_desc, from_eigen, hermitian_part, CMat};

/// Smallest admissible eigenvalue of `M`, relative to its largest.
const M_PD_REL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub(crate) struct InnerSolution {
    pub psd: CMat,
    /// `ln det(I + W R) - tr(M R)` at the maximizer.
    pub value: f64,
}

/// Maximizer of `ln det(I + W R) - tr(M R)` over Hermitian PSD `R`.
///
/// With `W~ = M^{-1/2} W M^{-1/2} = U diag(l) U^H` the maximizer is
/// `R = M^{-1/2} U diag((1 - 1/l)_+) U^H M^{-1/2}`. For `M = m I` this is
/// ordinary water-filling at level `1/m`.
pub fn inner_waterfill(w: &CMat, m: &CMat) -> Result<CMat> {
    inner_solve(w, m).map(|s| s.psd)
}

pub(crate) fn inner_solve(w: &CMat, m: &CMat) -> Result<InnerSolution> {
    let (mv, mvecs) = eigh_desc(m);
    let top = mv.first().copied().unwrap_or(0.0);
    let bottom = mv.last().copied().unwrap_or(0.0);
    if !(bottom > M_PD_REL * top.abs()) || !(top > 0.0) {
        return Err(Error::MNotPositive { min_eig: bottom });
    }
    let inv_sqrt_vals: Vec<f64> = mv.iter().map(|v| 1.0 / v.sqrt()).collect();
    let inv_sqrt = from_eigen(&mvecs, &inv_sqrt_vals);
    let w_t = hermitian_part(&(&inv_sqrt * w * &inv_sqrt));
    let (lt, ut) = eigh_desc(&w_t);
    let fill: Vec<f64> = lt.iter().map(|&l| if l > 1.0 { 1.0 - 1.0 / l } else { 0.0 }).collect();
    let value = lt.iter().filter(|&&l| l > 1.0).map(|&l| l.ln() - 1.0 + 1.0 / l).sum();
    let core = from_eigen(&ut, &fill);
    let psd = hermitian_part(&(&inv_sqrt * core * &inv_sqrt));
    Ok(InnerSolution { psd, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frobenius};
    use nalgebra::DVector;

    fn diag(xs: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(xs.len(), xs.iter().map(|&x| c(x, 0.0))))
    }

    #[test]
    fn scalar_is_classic_waterfill() {
        for (sigma2, mu) in [(1.0, 0.25), (0.5, 1.0), (2.0, 0.1), (1.0, 2.0)] {
            let r = inner_waterfill(&diag(&[1.0 / sigma2]), &diag(&[mu])).unwrap();
            let expect = (1.0 / mu - sigma2).max(0.0);
            assert!((r[(0, 0)].re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn two_mode_reference() {
        let r = inner_waterfill(&diag(&[1.0, 1.0 / 3.0]), &diag(&[0.5, 0.5])).unwrap();
        assert!(frobenius(&(r - diag(&[1.0, 0.0]))) < 1e-12);
    }

    #[test]
    fn rejects_non_positive_weight() {
        let w = diag(&[1.0, 1.0]);
        assert!(matches!(inner_waterfill(&w, &diag(&[1.0, 0.0])), Err(Error::MNotPositive { .. })));
        assert!(matches!(inner_waterfill(&w, &diag(&[1.0, -0.5])), Err(Error::MNotPositive { .. })));
    }

    #[test]
    fn value_matches_objective() {
        let w = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        let m = CMat::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(0.4, 0.0)]);
        let sol = inner_solve(&w, &m).unwrap();
        let obj = crate::linalg::ln_det_i_plus(&(&w * &sol.psd)) - crate::linalg::trace_re(&(&m * &sol.psd));
        assert!((obj - sol.value).abs() < 1e-12);
    }
}
