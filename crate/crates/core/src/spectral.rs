//! Frequency grids, quadrature, and the whitened channel `W = H^H R^{-1} H`
//! with its eigendecomposition at each grid node.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::channel_model::ChannelSpec;
use crate::error::{Error, Result};
use crate::linalg::{eigh_desc, frobenius, hermitian_part, CMat};

/// Eigenvalues of `W` below this fraction of the largest one are set to zero.
pub const EIG_CLIP_REL: f64 = 1e-12;

/// Quadrature nodes on `[-pi, pi]` with positive weights summing to `2 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl FrequencyGrid {
    /// Midpoint rule: `theta_i = -pi + (i + 1/2) 2 pi / n`, equal weights.
    /// Never samples the band edge.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "grid needs at least one node");
        let w = 2.0 * PI / n as f64;
        Self {
            nodes: (0..n).map(|i| -PI + (i as f64 + 0.5) * w).collect(),
            weights: vec![w; n],
        }
    }

    /// Periodic trapezoid rule: `theta_i = -pi + i 2 pi / n`, equal weights.
    /// The `+pi` endpoint is folded into `-pi`.
    pub fn periodic(n: usize) -> Self {
        assert!(n >= 1, "grid needs at least one node");
        let w = 2.0 * PI / n as f64;
        Self {
            nodes: (0..n).map(|i| -PI + i as f64 * w).collect(),
            weights: vec![w; n],
        }
    }

    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidSpec("frequency grid is empty".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::LengthMismatch { expected: nodes.len(), got: weights.len() });
        }
        if nodes.iter().any(|t| !(-PI..=PI).contains(t)) || nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidSpec("grid nodes must be strictly increasing in [-pi, pi]".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidSpec("grid weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 2.0 * PI).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("grid weights sum to {total}, not 2 pi")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `sum_i values_i * dtheta_i`.
pub fn integrate(grid: &FrequencyGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    Ok(values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum())
}

/// Whitened channel at one frequency.
#[derive(Debug, Clone)]
pub struct SpectralSample {
    pub theta: f64,
    pub w: CMat,
    /// Nonincreasing, nonnegative.
    pub eigvals: Vec<f64>,
    pub eigvecs: CMat,
}

impl SpectralSample {
    /// Builds a sample directly from a Hermitian PSD `W`, clipping relative
    /// to its own largest eigenvalue.
    pub fn from_whitened(theta: f64, w: CMat) -> Self {
        Self::from_whitened_scaled(theta, w, 0.0)
    }

    /// As [`SpectralSample::from_whitened`], with eigenvalues at or below
    /// `EIG_CLIP_REL * max(lambda_max, scale)` set to zero. `scale` carries
    /// the magnitude of `W` elsewhere in the band so that a scalar channel
    /// with a spectral null is still recognized as singular there.
    pub fn from_whitened_scaled(theta: f64, w: CMat, scale: f64) -> Self {
        let w = hermitian_part(&w);
        let (mut eigvals, eigvecs) = eigh_desc(&w);
        let top = eigvals.first().copied().unwrap_or(0.0).max(scale);
        for v in eigvals.iter_mut() {
            if *v <= EIG_CLIP_REL * top {
                *v = 0.0;
            }
        }
        Self { theta, w, eigvals, eigvecs }
    }

    /// Noise-referred levels `1 / lambda_w`; `+inf` for zero modes.
    pub fn noise_levels(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigvals.iter().map(|&l| if l > 0.0 { 1.0 / l } else { f64::INFINITY })
    }
}

/// `W(theta) = H^H R^{-1} H`, with `R^{-1}` applied through the Cholesky
/// factor `R = L L^H` as `W = X^H X`, `X = L^{-1} H`.
pub fn whiten(spec: &ChannelSpec, theta: f64) -> Result<SpectralSample> {
    let h = spec.transfer_function(theta);
    let r = spec.noise_psd(theta);
    let chol = r.clone().cholesky().ok_or_else(|| {
        let (eigs, _) = eigh_desc(&spec.noise_psd(theta));
        Error::NoiseSingular { theta, min_eig: eigs[eigs.len() - 1] }
    })?;
    let x = chol.l().solve_lower_triangular(&h).ok_or(Error::NoiseSingular { theta, min_eig: 0.0 })?;
    // Upper bound on ||H(theta)||^2 over the band, referred to the local noise level.
    let gain: f64 = spec.h_taps().iter().map(|t| frobenius(&t.matrix)).sum();
    let noise_top = eigh_desc(&r).0[0];
    Ok(SpectralSample::from_whitened_scaled(theta, x.adjoint() * x, gain * gain / noise_top))
}

/// `whiten` at every grid node, in node order.
pub fn whiten_grid(spec: &ChannelSpec, grid: &FrequencyGrid) -> Result<Vec<SpectralSample>> {
    grid.nodes().par_iter().map(|&t| whiten(spec, t)).collect()
}

/// Sorted (nondecreasing) eigenvalues of `H^{-1} R (H^H)^{-1}`, computed
/// without forming `W`. Only defined for square, nonsingular `H(theta)`.
pub fn noise_referred_eigvals(spec: &ChannelSpec, theta: f64) -> Option<Vec<f64>> {
    if spec.n_tx() != spec.n_rx() {
        return None;
    }
    let h = spec.transfer_function(theta);
    let lu = h.lu();
    if !lu.is_invertible() {
        return None;
    }
    let a = lu.solve(&spec.noise_psd(theta))?;
    let z = lu.solve(&a.adjoint())?;
    let (mut vals, _) = eigh_desc(&z);
    vals.reverse();
    Some(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::Tap;
    use crate::linalg::c;

    #[test]
    fn uniform_grid_small_cases() {
        let g1 = FrequencyGrid::uniform(1);
        assert_eq!(g1.nodes(), &[0.0]);
        assert!((g1.weights()[0] - 2.0 * PI).abs() < 1e-15);

        let g2 = FrequencyGrid::uniform(2);
        assert!((g2.nodes()[0] + PI / 2.0).abs() < 1e-15);
        assert!((g2.nodes()[1] - PI / 2.0).abs() < 1e-15);
        assert!(g2.weights().iter().all(|&w| (w - PI).abs() < 1e-15));

        let g4 = FrequencyGrid::uniform(4);
        let expect = [-3.0 * PI / 4.0, -PI / 4.0, PI / 4.0, 3.0 * PI / 4.0];
        for (a, b) in g4.nodes().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![], vec![]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 0.0], vec![PI, PI]).is_err());
        assert!(FrequencyGrid::new(vec![0.0], vec![1.0]).is_err());
        assert!(FrequencyGrid::new(vec![-1.0, 1.0], vec![PI, PI]).is_ok());
    }

    #[test]
    fn integrate_reference_values() {
        for n in [1, 7, 64] {
            let g = FrequencyGrid::uniform(n);
            let v = integrate(&g, &vec![1.0; n]).unwrap();
            assert!((v - 2.0 * PI).abs() < 1e-12);
        }
        let g = FrequencyGrid::uniform(64);
        let cos: Vec<f64> = g.nodes().iter().map(|t| t.cos()).collect();
        assert!(integrate(&g, &cos).unwrap().abs() < 1e-12);
        let cos2: Vec<f64> = g.nodes().iter().map(|t| t.cos().powi(2)).collect();
        assert!((integrate(&g, &cos2).unwrap() - PI).abs() < 1e-10);
        assert!(matches!(integrate(&g, &[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn whiten_reference_values() {
        let s = whiten(&ChannelSpec::identity_white(3, 0.5), 0.4).unwrap();
        assert!(s.eigvals.iter().all(|&l| (l - 2.0).abs() < 1e-12));

        let s = whiten(&ChannelSpec::scalar(&[1.0, 0.5], &[1.0]).unwrap(), 0.0).unwrap();
        assert!((s.w[(0, 0)].re - 2.25).abs() < 1e-12);

        let h = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]));
        let spec = ChannelSpec::new(2, 2, vec![Tap::new(0, h)], vec![Tap::new(0, CMat::identity(2, 2))]).unwrap();
        let s = whiten(&spec, 1.0).unwrap();
        assert!((s.eigvals[0] - 4.0).abs() < 1e-12 && (s.eigvals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_invariants_on_correlated_channel() {
        let h0 = CMat::from_row_slice(2, 2, &[c(1.0, 0.2), c(0.3, 0.0), c(-0.1, 0.4), c(0.8, 0.0)]);
        let h1 = CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.0, -0.3), c(0.1, 0.1), c(0.3, 0.0)]);
        let r0 = CMat::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(1.0, 0.0)]);
        let r1 = CMat::from_row_slice(2, 2, &[c(0.2, 0.1), c(0.0, 0.0), c(0.1, 0.0), c(0.1, 0.0)]);
        let spec = ChannelSpec::new(2, 2, vec![Tap::new(0, h0), Tap::new(1, h1)], vec![Tap::new(0, r0), Tap::new(1, r1)]).unwrap();
        let grid = FrequencyGrid::uniform(32);
        for s in whiten_grid(&spec, &grid).unwrap() {
            let u = &s.eigvecs;
            assert!(frobenius(&(u.adjoint() * u - CMat::identity(2, 2))) < 1e-10);
            let back = crate::linalg::from_eigen(u, &s.eigvals);
            assert!(frobenius(&(back - &s.w)) <= 1e-10 * frobenius(&s.w));
            assert!(s.eigvals.windows(2).all(|p| p[0] >= p[1]));
            let levels = noise_referred_eigvals(&spec, s.theta).unwrap();
            let mut recip: Vec<f64> = s.eigvals.iter().map(|l| 1.0 / l).collect();
            recip.sort_by(f64::total_cmp);
            for (a, b) in levels.iter().zip(&recip) {
                assert!((a - b).abs() <= 1e-8 * b.abs());
            }
        }
    }

    #[test]
    fn singular_channel_mode_is_clipped() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let spec = ChannelSpec::new(2, 2, vec![Tap::new(0, h)], vec![Tap::new(0, CMat::identity(2, 2))]).unwrap();
        let s = whiten(&spec, 0.0).unwrap();
        assert!((s.eigvals[0] - 4.0).abs() < 1e-12);
        assert_eq!(s.eigvals[1], 0.0);
        assert!(noise_referred_eigvals(&spec, 0.0).is_none());
    }

    #[test]
    fn rectangular_channel_gives_tx_sized_w() {
        let h = CMat::from_row_slice(3, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let spec = ChannelSpec::new(2, 3, vec![Tap::new(0, h)], vec![Tap::new(0, CMat::identity(3, 3))]).unwrap();
        let s = whiten(&spec, 0.2).unwrap();
        assert_eq!(s.w.shape(), (2, 2));
        // W = [[2,1],[1,2]]
        assert!((s.eigvals[0] - 3.0).abs() < 1e-12 && (s.eigvals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn whiten_surfaces_singular_noise() {
        let spec = ChannelSpec::scalar(&[1.0], &[1.0, 0.5]).unwrap();
        assert!(matches!(whiten(&spec, PI), Err(Error::NoiseSingular { .. })));
    }
}
