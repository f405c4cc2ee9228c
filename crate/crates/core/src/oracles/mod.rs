//! Brute-force reference computations.
//!
//! Nothing here reuses the numerical paths of the main modules: transforms
//! are re-summed locally, eigenvalues come from a Jacobi solver, the
//! frequency integral uses the periodic trapezoid rule instead of the
//! midpoint rule, and the joint problem is solved by exhaustive search.

mod grid_search;
mod jacobi;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

pub use grid_search::{grid_search_joint, miso_pac_split_search, MAX_GRID_POINTS};
pub use jacobi::jacobi_eigh;

use crate::channel_model::{ChannelSpec, Tap};
use crate::error::{Error, Result};
use crate::linalg::CMat;

pub const MAX_ORACLE_DIM: usize = 4;
pub const DEFAULT_DENSE_NODES: usize = 1 << 16;
const BISECTION_STEPS: usize = 200;

/// Comparison of one oracle value against the main implementation.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub case_id: String,
    pub oracle_value: f64,
    pub main_value: f64,
    pub abs_deviation: f64,
    pub rel_deviation: f64,
    pub tolerance: f64,
    /// Whether `tolerance` applies to the relative or the absolute deviation.
    pub relative: bool,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(case_id: impl Into<String>, oracle_value: f64, main_value: f64, tolerance: f64, relative: bool) -> Self {
        let abs_deviation = (oracle_value - main_value).abs();
        let rel_deviation = if oracle_value == 0.0 { abs_deviation } else { abs_deviation / oracle_value.abs() };
        let dev = if relative { rel_deviation } else { abs_deviation };
        Self {
            case_id: case_id.into(),
            oracle_value,
            main_value,
            abs_deviation,
            rel_deviation,
            tolerance,
            relative,
            pass: dev <= tolerance,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn sum_taps(taps: &[Tap], rows: usize, cols: usize, theta: f64) -> CMat {
    let mut out = CMat::zeros(rows, cols);
    for tap in taps {
        let (s, c) = (tap.delay as f64 * theta).sin_cos();
        let e = Complex64::new(c, -s);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] += tap.matrix[(i, j)] * e;
            }
        }
    }
    out
}

fn noise_two_sided(spec: &ChannelSpec, theta: f64) -> CMat {
    let n = spec.n_rx();
    let mut out = CMat::zeros(n, n);
    for tap in spec.noise_taps() {
        let (s, c) = (tap.delay as f64 * theta).sin_cos();
        let e = Complex64::new(c, -s);
        for i in 0..n {
            for j in 0..n {
                if tap.delay == 0 {
                    out[(i, j)] += tap.matrix[(i, j)];
                } else {
                    // R(tau) e^{-j tau theta} + R(-tau) e^{+j tau theta}, R(-tau) = R(tau)^H
                    out[(i, j)] += tap.matrix[(i, j)] * e + tap.matrix[(j, i)].conj() * e.conj();
                }
            }
        }
    }
    out
}

/// `H^H R^{-1} H` through a general inverse of `R`.
pub(crate) fn whitened(spec: &ChannelSpec, theta: f64) -> Result<CMat> {
    let h = sum_taps(spec.h_taps(), spec.n_rx(), spec.n_tx(), theta);
    let r_inv = noise_two_sided(spec, theta)
        .try_inverse()
        .ok_or(Error::NoiseSingular { theta, min_eig: 0.0 })?;
    let w = h.adjoint() * r_inv * h;
    Ok((&w + w.adjoint()).scale(0.5))
}

pub(crate) fn factor_gram(taps: &[Tap], n_out: usize, n_tx: usize, theta: f64) -> CMat {
    let h = sum_taps(taps, n_out, n_tx, theta);
    h.adjoint() * h
}

/// Capacity under a total budget by the textbook route: trapezoid rule on
/// `n_dense` nodes, Jacobi eigenvalues, fixed-count bisection on the water
/// level.
pub fn dense_bisection_capacity(spec: &ChannelSpec, power: f64, n_dense: usize) -> Result<f64> {
    if spec.n_tx() > MAX_ORACLE_DIM || spec.n_rx() > MAX_ORACLE_DIM {
        return Err(Error::DimensionTooLarge { got: spec.n_tx().max(spec.n_rx()), max: MAX_ORACLE_DIM });
    }
    let n_dense = n_dense.max(1);
    let mut eigs = Vec::with_capacity(n_dense * spec.n_tx());
    for k in 0..n_dense {
        let theta = -PI + 2.0 * PI * k as f64 / n_dense as f64;
        let (vals, _) = jacobi_eigh(&whitened(spec, theta)?);
        eigs.extend(vals);
    }
    let top = eigs.iter().copied().fold(0.0, f64::max);
    let levels: Vec<f64> = eigs.iter().filter(|&&l| l > 1e-12 * top).map(|l| 1.0 / l).collect();
    if levels.is_empty() {
        return Err(Error::AllModesSingular);
    }
    if power == 0.0 {
        return Ok(0.0);
    }
    let nodes = n_dense as f64;
    let spent = |mu: f64| levels.iter().map(|l| (mu - l).max(0.0)).sum::<f64>() / nodes;

    let lo0 = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = lo0 + power + 1.0;
    while spent(hi) < power {
        hi = lo0 + 2.0 * (hi - lo0);
    }
    let mut lo = lo0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if spent(mid) < power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(0.5 * levels.iter().map(|l| (mu / l).ln().max(0.0)).sum::<f64>() / nodes)
}
