use nalgebra::DVector;
use num_complex::Complex64;

use super::{ConstraintSet, JointResult};
use crate::channel_model::ChannelSpec;
use crate::error::{Error, Result};
use crate::linalg::eigh_desc;
use crate::spectral::FrequencyGrid;

/// Antennas with less than this share of the beam power are ignored by the
/// phase check.
const PHASE_CHECK_MIN_POWER: f64 = 1e-9;
const PHASE_TOL: f64 = 1e-6;

/// Dominant direction of the optimal covariance at one frequency.
#[derive(Debug, Clone)]
pub struct Beam {
    pub theta: f64,
    /// `sqrt(lambda_1) u_1`, so that `w w^H` is the best rank-one fit.
    pub w: DVector<Complex64>,
    /// `lambda_2 / lambda_1`, zero for a zero covariance.
    pub residual: f64,
}

/// MISO link, white noise, per-antenna budgets only.
fn is_miso_pac(spec: &ChannelSpec, constraints: &ConstraintSet) -> bool {
    spec.n_rx() == 1
        && constraints.pac.is_some()
        && constraints.tpc.is_none()
        && constraints.ipc.is_empty()
        && constraints.ehc.is_empty()
        && spec.noise_taps().iter().all(|t| t.delay == 0)
}

/// Extracts the dominant eigenpair of every optimal covariance.
///
/// On MISO links with white noise and per-antenna budgets only, the optimum
/// is beamforming: the covariance must be rank one (`residual <= tol`) and
/// each antenna's beam phase must equal the phase of its channel
/// coefficient `h_i = conj(H_i)` up to one common phase per frequency.
pub fn extract_rank_one(
    result: &JointResult,
    spec: &ChannelSpec,
    constraints: &ConstraintSet,
    grid: &FrequencyGrid,
    tol: f64,
) -> Result<Vec<Beam>> {
    let enforce = is_miso_pac(spec, constraints);
    let mut beams = Vec::with_capacity(result.psd.len());
    for (r, &theta) in result.psd.iter().zip(grid.nodes()) {
        let (vals, vecs) = eigh_desc(r);
        let top = vals[0].max(0.0);
        let residual = if top > 0.0 { vals.get(1).copied().unwrap_or(0.0).max(0.0) / top } else { 0.0 };
        let w: DVector<Complex64> = vecs.column(0).map(|z| z * top.sqrt());

        if enforce {
            if residual > tol {
                return Err(Error::NotRankOne { theta, residual });
            }
            let h = spec.transfer_function(theta);
            let power: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            // conj(h_i) w_i must share a single phase over the used antennas.
            let aligned: Vec<Complex64> = (0..w.len())
                .filter(|&i| w[i].norm_sqr() > PHASE_CHECK_MIN_POWER * power && h[(0, i)].norm() > 0.0)
                .map(|i| h[(0, i)] * w[i])
                .collect();
            if let Some(first) = aligned.first() {
                for z in &aligned[1..] {
                    let err = (z * first.conj()).arg().abs();
                    if err > PHASE_TOL {
                        return Err(Error::NotRankOne { theta, residual: err });
                    }
                }
            }
        }
        beams.push(Beam { theta, w, residual });
    }
    Ok(beams)
}
