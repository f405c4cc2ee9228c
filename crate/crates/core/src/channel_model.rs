//! Time-domain description of a Gaussian MIMO channel with memory and its
//! frequency-domain transforms.
//!
//! The channel is `y(t) = sum_tau H(t - tau) x(tau) + xi(t)` with causal
//! finite matrix taps `H(t)` and a wide-sense-stationary noise process whose
//! covariance `R(tau) = E{xi(t) xi(t - tau)^H}` is given at nonnegative lags.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, eigh_desc, frobenius, CMat};
use crate::spectral::FrequencyGrid;

/// Default relative tolerance for flagging singular frequencies.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-10;

/// One matrix coefficient of a causal sequence, at a nonnegative delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub matrix: CMat,
}

impl Tap {
    pub fn new(delay: usize, matrix: CMat) -> Self {
        Self { delay, matrix }
    }

    pub fn scalar(delay: usize, value: Complex64) -> Self {
        Self { delay, matrix: DMatrix::from_element(1, 1, value) }
    }
}

/// Finite DTFT `sum_t A(t) e^{-j t theta}` of a causal tap list.
///
/// Every frequency-domain channel in the crate (the link itself and the
/// interference / harvesting factor channels) goes through this function.
pub fn dtft(taps: &[Tap], rows: usize, cols: usize, theta: f64) -> CMat {
    let mut acc = CMat::zeros(rows, cols);
    for tap in taps {
        let phase = Complex64::from_polar(1.0, -(tap.delay as f64) * theta);
        acc += tap.matrix.map(|z| z * phase);
    }
    acc
}

fn check_taps(taps: &[Tap], rows: usize, cols: usize, what: &str) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for tap in taps {
        if tap.matrix.shape() != (rows, cols) {
            return Err(Error::InvalidSpec(format!(
                "{what} tap at delay {} is {}x{}, expected {rows}x{cols}",
                tap.delay,
                tap.matrix.nrows(),
                tap.matrix.ncols()
            )));
        }
        if !seen.insert(tap.delay) {
            return Err(Error::InvalidSpec(format!("{what} has duplicate delay {}", tap.delay)));
        }
        if tap.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "{what} tap at delay {} has non-finite entries",
                tap.delay
            )));
        }
    }
    Ok(())
}

/// Channel impulse response plus one-sided noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    n_tx: usize,
    n_rx: usize,
    h_taps: Vec<Tap>,
    noise_taps: Vec<Tap>,
}

impl ChannelSpec {
    /// Validates dimensions, duplicate delays and the zero-lag noise
    /// covariance (Hermitian positive semidefinite). Taps are stored sorted by
    /// delay.
    pub fn new(n_tx: usize, n_rx: usize, mut h_taps: Vec<Tap>, mut noise_taps: Vec<Tap>) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::InvalidSpec("antenna counts must be positive".into()));
        }
        check_taps(&h_taps, n_rx, n_tx, "channel")?;
        check_taps(&noise_taps, n_rx, n_rx, "noise")?;
        h_taps.sort_by_key(|t| t.delay);
        noise_taps.sort_by_key(|t| t.delay);

        let r0 = noise_taps
            .iter()
            .find(|t| t.delay == 0)
            .ok_or_else(|| Error::InvalidSpec("noise covariance needs a lag-0 tap".into()))?;
        let scale = 1.0 + frobenius(&r0.matrix);
        if frobenius(&(&r0.matrix - r0.matrix.adjoint())) > 1e-12 * scale {
            return Err(Error::InvalidSpec("noise lag-0 covariance is not Hermitian".into()));
        }
        let (vals, _) = eigh_desc(&r0.matrix);
        if vals.last().copied().unwrap_or(0.0) < -1e-12 * scale {
            return Err(Error::InvalidSpec(
                "noise lag-0 covariance is not positive semidefinite".into(),
            ));
        }
        Ok(Self { n_tx, n_rx, h_taps, noise_taps })
    }

    /// Memoryless identity channel with white noise `sigma2 * I`.
    pub fn identity_white(n: usize, sigma2: f64) -> Self {
        Self::new(
            n,
            n,
            vec![Tap::new(0, CMat::identity(n, n))],
            vec![Tap::new(0, CMat::identity(n, n).scale(sigma2))],
        )
        .expect("identity channel is valid")
    }

    /// Scalar channel from real taps at delays `0, 1, ...`.
    pub fn scalar(h: &[f64], noise: &[f64]) -> Result<Self> {
        let taps = |xs: &[f64]| {
            xs.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(d, &v)| Tap::scalar(d, c(v, 0.0)))
                .collect::<Vec<_>>()
        };
        let mut noise_taps = taps(noise);
        if noise_taps.first().is_none_or(|t| t.delay != 0) {
            noise_taps.insert(0, Tap::scalar(0, c(noise.first().copied().unwrap_or(0.0), 0.0)));
        }
        Self::new(1, 1, taps(h), noise_taps)
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn h_taps(&self) -> &[Tap] {
        &self.h_taps
    }

    pub fn noise_taps(&self) -> &[Tap] {
        &self.noise_taps
    }

    /// True when the impulse response is a single identity tap at delay 0.
    pub fn is_identity_channel(&self) -> bool {
        self.n_tx == self.n_rx
            && self.h_taps.len() == 1
            && self.h_taps[0].delay == 0
            && frobenius(&(&self.h_taps[0].matrix - CMat::identity(self.n_tx, self.n_tx))) == 0.0
    }

    /// `H(theta) = sum_t H(t) e^{-j t theta}`.
    pub fn transfer_function(&self, theta: f64) -> CMat {
        dtft(&self.h_taps, self.n_rx, self.n_tx, theta)
    }

    /// Noise PSD `R(0) + sum_{tau>0} (R(tau) e^{-j tau theta} + R(tau)^H e^{j tau theta})`,
    /// symmetrized to be exactly Hermitian.
    pub fn noise_psd(&self, theta: f64) -> CMat {
        let mut acc = CMat::zeros(self.n_rx, self.n_rx);
        for tap in &self.noise_taps {
            if tap.delay == 0 {
                acc += &tap.matrix;
            } else {
                let phase = Complex64::from_polar(1.0, -(tap.delay as f64) * theta);
                acc += tap.matrix.map(|z| z * phase);
                acc += tap.matrix.adjoint().map(|z| z * phase.conj());
            }
        }
        (&acc + acc.adjoint()).scale(0.5)
    }

    /// Smallest `b` with `||H(t)||_F <= b / t` for every stored `t > 0`.
    /// Any larger value witnesses the decay condition strictly.
    pub fn witness_b(&self) -> f64 {
        self.h_taps
            .iter()
            .filter(|t| t.delay > 0)
            .map(|t| t.delay as f64 * frobenius(&t.matrix))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub min_channel_sv: f64,
    pub min_noise_eig: f64,
    /// Grid frequencies where the channel transfer matrix is (numerically)
    /// singular. These only produce warnings.
    pub singular_frequencies: Vec<f64>,
    pub causal: bool,
    pub summable: bool,
    pub witness_b: f64,
}

impl AdmissibilityReport {
    pub fn channel_singular(&self) -> bool {
        !self.singular_frequencies.is_empty()
    }
}

/// Evaluates the channel and noise on every node of `grid`.
///
/// `tol` is relative to the largest singular value (channel) or eigenvalue
/// (noise) seen over the grid. A noise PSD eigenvalue at or below `tol`
/// is fatal; below `-tol` means the covariance taps are inconsistent.
pub fn check_admissibility(spec: &ChannelSpec, grid: &FrequencyGrid, tol: f64) -> Result<AdmissibilityReport> {
    let per_node: Vec<(f64, f64, f64, f64, f64)> = grid
        .nodes()
        .par_iter()
        .map(|&theta| {
            let svs = spec.transfer_function(theta).singular_values();
            let sv_min = svs.iter().copied().fold(f64::INFINITY, f64::min);
            let sv_max = svs.iter().copied().fold(0.0, f64::max);
            let (eigs, _) = eigh_desc(&spec.noise_psd(theta));
            (theta, sv_min, sv_max, eigs[eigs.len() - 1], eigs[0])
        })
        .collect();

    let sv_scale = per_node.iter().map(|p| p.2).fold(0.0, f64::max);
    let eig_scale = per_node.iter().map(|p| p.4).fold(0.0, f64::max);

    for &(theta, _, _, eig_min, _) in &per_node {
        if eig_min < -tol * eig_scale {
            return Err(Error::NoiseIndefinite { theta, min_eig: eig_min });
        }
    }
    for &(theta, _, _, eig_min, _) in &per_node {
        if eig_min <= tol * eig_scale {
            return Err(Error::NoiseSingular { theta, min_eig: eig_min });
        }
    }

    let singular_frequencies = per_node
        .iter()
        .filter(|p| p.1 <= tol * sv_scale)
        .map(|p| p.0)
        .collect();

    Ok(AdmissibilityReport {
        min_channel_sv: per_node.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).max(0.0),
        min_noise_eig: per_node.iter().map(|p| p.3).fold(f64::INFINITY, f64::min),
        singular_frequencies,
        // Delays are unsigned and tap lists are finite.
        causal: true,
        summable: true,
        witness_b: spec.witness_b(),
    })
}
