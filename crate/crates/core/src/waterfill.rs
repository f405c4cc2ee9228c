//! Closed-form capacity under a total power budget.
//!
//! Power is poured across eigenmodes and frequencies: mode `i` at frequency
//! `theta` with noise-referred level `lambda_i = 1 / lambda_w,i` receives
//! `(mu - lambda_i)_+`, where the water level `mu` spends the budget exactly.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel_model::ChannelSpec;
use crate::error::{Error, Result};
use crate::linalg::{from_eigen, positive_part, CMat};
use crate::spectral::{FrequencyGrid, SpectralSample};

/// Absolute tolerance on the spent power.
pub const POWER_TOL: f64 = 1e-12;
pub const MAX_BISECTIONS: usize = 500;
pub const MAX_DOUBLINGS: usize = 200;
/// Relative agreement required between the two capacity expressions.
pub const FORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct TpcResult {
    pub capacity_nats: f64,
    pub water_level: f64,
    #[serde(skip)]
    pub psd: Vec<CMat>,
    pub power_used: f64,
}

/// `(1/2pi) sum_k dtheta_k sum_i (mu - 1/lambda_w,i)_+`, zero modes excluded.
pub fn total_power_at(mu: f64, samples: &[SpectralSample], grid: &FrequencyGrid) -> f64 {
    let per_node: f64 = samples
        .iter()
        .zip(grid.weights())
        .map(|(s, w)| w * s.noise_levels().map(|lvl| (mu - lvl).max(0.0)).sum::<f64>())
        .sum();
    per_node / (2.0 * PI)
}

/// Smallest finite noise-referred level over all nodes and modes.
fn floor_level(samples: &[SpectralSample]) -> Option<f64> {
    samples
        .iter()
        .flat_map(|s| s.noise_levels())
        .filter(|l| l.is_finite())
        .min_by(f64::total_cmp)
}

/// Bisection for the water level spending exactly `power`.
pub fn solve_water_level(power: f64, samples: &[SpectralSample], grid: &FrequencyGrid, tol: f64) -> Result<f64> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::InvalidSpec(format!("power budget must be finite and nonnegative, got {power}")));
    }
    if samples.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: samples.len() });
    }
    let lower = floor_level(samples).ok_or(Error::AllModesSingular)?;
    if power == 0.0 {
        return Ok(lower);
    }

    let mut lo = lower;
    let mut hi = lower + power + 1.0;
    let mut doublings = 0;
    while total_power_at(hi, samples, grid) < power {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoConvergence("water-level bracket expansion".into()));
        }
        hi = lower + 2.0 * (hi - lower);
    }

    let mut mu = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mu = 0.5 * (lo + hi);
        let spent = total_power_at(mu, samples, grid);
        if (spent - power).abs() <= tol || mu <= lo || mu >= hi {
            return Ok(mu);
        }
        if spent < power {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    Ok(mu)
}

/// Capacity in nats per channel use as `(1/4pi) sum_i int (ln(mu / lambda_i))_+`.
///
/// The same value is recomputed as `(1/4pi) sum_i int_{mu lambda_w,i > 1} ln(mu lambda_w,i)`
/// and the two must agree to [`FORM_TOL`].
pub fn capacity_tpc(samples: &[SpectralSample], grid: &FrequencyGrid, mu: f64) -> Result<f64> {
    let (first, second) = capacity_forms(samples, grid, mu);
    let scale = first.abs().max(second.abs());
    if (first - second).abs() > FORM_TOL * scale {
        return Err(Error::FormMismatch { first, second });
    }
    Ok(first)
}

/// Both capacity expressions, noise-referred form first.
pub fn capacity_forms(samples: &[SpectralSample], grid: &FrequencyGrid, mu: f64) -> (f64, f64) {
    let mut first = 0.0;
    let mut second = 0.0;
    for (s, w) in samples.iter().zip(grid.weights()) {
        let a: f64 = s
            .noise_levels()
            .filter(|l| l.is_finite())
            .map(|lvl| (mu / lvl).ln().max(0.0))
            .sum();
        let b: f64 = s
            .eigvals
            .iter()
            .filter(|&&lw| mu * lw > 1.0)
            .map(|&lw| (mu * lw).ln())
            .sum();
        first += w * a;
        second += w * b;
    }
    (first / (4.0 * PI), second / (4.0 * PI))
}

/// `R*(theta) = U_w diag((mu - 1/lambda_w,i)_+) U_w^H` at every node.
pub fn optimal_psd(samples: &[SpectralSample], mu: f64) -> Vec<CMat> {
    samples
        .par_iter()
        .map(|s| {
            let d: Vec<f64> = s.noise_levels().map(|lvl| (mu - lvl).max(0.0)).collect();
            from_eigen(&s.eigvecs, &d)
        })
        .collect()
}

/// `(mu I - R(theta))_+` on each node; only valid when the channel is the
/// single identity tap.
pub fn identity_channel_psd(spec: &ChannelSpec, grid: &FrequencyGrid, mu: f64) -> Result<Vec<CMat>> {
    if !spec.is_identity_channel() {
        return Err(Error::NotIdentityChannel);
    }
    let n = spec.n_tx();
    Ok(grid
        .nodes()
        .par_iter()
        .map(|&t| positive_part(&(CMat::identity(n, n).scale(mu) - spec.noise_psd(t))))
        .collect())
}

/// Water level, capacity and optimal PSD in one call.
pub fn solve_tpc(power: f64, samples: &[SpectralSample], grid: &FrequencyGrid) -> Result<TpcResult> {
    let mu = solve_water_level(power, samples, grid, POWER_TOL)?;
    let capacity = if power == 0.0 { 0.0 } else { capacity_tpc(samples, grid, mu)? };
    let psd = if power == 0.0 {
        samples.iter().map(|s| CMat::zeros(s.w.nrows(), s.w.ncols())).collect()
    } else {
        optimal_psd(samples, mu)
    };
    Ok(TpcResult {
        capacity_nats: capacity,
        water_level: mu,
        psd,
        power_used: if power == 0.0 { 0.0 } else { total_power_at(mu, samples, grid) },
    })
}

/// Weighted fraction of (frequency, eigenmode) pairs that receive power.
pub fn active_mode_fraction(samples: &[SpectralSample], grid: &FrequencyGrid, mu: f64) -> f64 {
    let n = samples.first().map_or(1, |s| s.eigvals.len()).max(1) as f64;
    samples
        .iter()
        .zip(grid.weights())
        .map(|(s, w)| w * s.noise_levels().filter(|&lvl| mu > lvl).count() as f64)
        .sum::<f64>()
        / (2.0 * PI * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::Tap;
    use crate::linalg::{c, frobenius, trace_re};
    use crate::spectral::whiten_grid;
    use nalgebra::DVector;

    fn flat(levels: &[f64], n_nodes: usize) -> (Vec<SpectralSample>, FrequencyGrid) {
        let grid = FrequencyGrid::uniform(n_nodes);
        let w = CMat::from_diagonal(&DVector::from_iterator(levels.len(), levels.iter().map(|l| c(1.0 / l, 0.0))));
        let samples = grid.nodes().iter().map(|&t| SpectralSample::from_whitened(t, w.clone())).collect();
        (samples, grid)
    }

    #[test]
    fn total_power_reference_values() {
        let (s, g) = flat(&[1.0], 8);
        assert!((total_power_at(2.0, &s, &g) - 1.0).abs() < 1e-12);
        let (s, g) = flat(&[1.0, 3.0], 8);
        assert!((total_power_at(2.0, &s, &g) - 1.0).abs() < 1e-12);
        assert!((total_power_at(4.0, &s, &g) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn water_level_reference_values() {
        let (s, g) = flat(&[1.0], 8);
        assert!((solve_water_level(1.0, &s, &g, POWER_TOL).unwrap() - 2.0).abs() < 1e-10);
        let (s, g) = flat(&[1.0, 3.0], 8);
        assert!((solve_water_level(1.0, &s, &g, POWER_TOL).unwrap() - 2.0).abs() < 1e-10);
        let mu = solve_water_level(4.0, &s, &g, POWER_TOL).unwrap();
        assert!((mu - 4.0).abs() < 1e-10);
        let psd = optimal_psd(&s, mu);
        let d: Vec<f64> = psd[0].diagonal().iter().map(|z| z.re).collect();
        // W = diag(1, 1/3) puts the level-1 mode first.
        assert!((d[0] - 3.0).abs() < 1e-9 && (d[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn all_singular_is_an_error() {
        let grid = FrequencyGrid::uniform(4);
        let s: Vec<_> = grid.nodes().iter().map(|&t| SpectralSample::from_whitened(t, CMat::zeros(2, 2))).collect();
        assert!(matches!(solve_water_level(1.0, &s, &grid, POWER_TOL), Err(Error::AllModesSingular)));
    }

    #[test]
    fn capacity_reference_values() {
        let (s, g) = flat(&[1.0], 16);
        let r = solve_tpc(1.0, &s, &g).unwrap();
        assert!((r.capacity_nats - 0.5 * 2f64.ln()).abs() < 1e-12);

        let spec = ChannelSpec::identity_white(2, 1.0);
        let g = FrequencyGrid::uniform(16);
        let s = whiten_grid(&spec, &g).unwrap();
        let r = solve_tpc(2.0, &s, &g).unwrap();
        assert!((r.capacity_nats - 2f64.ln()).abs() < 1e-12);
        assert!((r.water_level - 2.0).abs() < 1e-10);
        for m in &r.psd {
            assert!(frobenius(&(m - CMat::identity(2, 2))) < 1e-9);
        }
    }

    #[test]
    fn zero_power_is_degenerate_but_defined() {
        let (s, g) = flat(&[1.0, 3.0], 4);
        let r = solve_tpc(0.0, &s, &g).unwrap();
        assert_eq!(r.capacity_nats, 0.0);
        assert!((r.water_level - 1.0).abs() < 1e-15);
        assert!(r.psd.iter().all(|m| frobenius(m) == 0.0));
    }

    #[test]
    fn flat_two_mode_psd() {
        let (s, _) = flat(&[1.0, 3.0], 2);
        let psd = optimal_psd(&s, 2.0);
        let expect = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(frobenius(&(&psd[0] - expect)) < 1e-12);
    }

    #[test]
    fn identity_channel_matches_general_formula() {
        let spec = ChannelSpec::scalar(&[1.0], &[1.0, 0.25]).unwrap();
        let g = FrequencyGrid::uniform(64);
        let s = whiten_grid(&spec, &g).unwrap();
        let direct = identity_channel_psd(&spec, &g, 2.0).unwrap();
        let general = optimal_psd(&s, 2.0);
        for ((a, b), t) in direct.iter().zip(&general).zip(g.nodes()) {
            assert!(frobenius(&(a - b)) < 1e-10);
            assert!((a[(0, 0)].re - (1.0 - 0.5 * t.cos())).abs() < 1e-12);
        }

        let r = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0)]));
        let spec = ChannelSpec::new(2, 2, vec![Tap::new(0, CMat::identity(2, 2))], vec![Tap::new(0, r)]).unwrap();
        let p = identity_channel_psd(&spec, &FrequencyGrid::uniform(2), 2.0).unwrap();
        assert!((p[0][(0, 0)].re - 1.0).abs() < 1e-12 && p[0][(1, 1)].re.abs() < 1e-12);

        let two = ChannelSpec::scalar(&[1.0, 0.5], &[1.0]).unwrap();
        assert!(matches!(identity_channel_psd(&two, &g, 2.0), Err(Error::NotIdentityChannel)));
    }

    #[test]
    fn budget_is_spent_exactly() {
        let spec = ChannelSpec::scalar(&[1.0, 0.5], &[1.0]).unwrap();
        let g = FrequencyGrid::uniform(512);
        let s = whiten_grid(&spec, &g).unwrap();
        for p in [0.1, 1.0, 7.5] {
            let r = solve_tpc(p, &s, &g).unwrap();
            let traces: Vec<f64> = r.psd.iter().map(trace_re).collect();
            let spent = crate::spectral::integrate(&g, &traces).unwrap() / (2.0 * PI);
            assert!((spent - p).abs() < 1e-11);
            assert!((r.power_used - p).abs() < 1e-11);
        }
    }

    #[test]
    fn singular_frequencies_get_no_power() {
        let spec = ChannelSpec::scalar(&[1.0, 1.0], &[1.0]).unwrap();
        let g = FrequencyGrid::periodic(64);
        let s = whiten_grid(&spec, &g).unwrap();
        assert_eq!(s[0].eigvals[0], 0.0);
        let r = solve_tpc(1.0, &s, &g).unwrap();
        assert_eq!(frobenius(&r.psd[0]), 0.0);
        assert!(r.capacity_nats > 0.0);
    }
}
