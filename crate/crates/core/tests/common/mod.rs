#![allow(dead_code)]

use std::f64::consts::PI;

use memcap::linalg::{c, frobenius, CMat};
use memcap::{ChannelSpec, FrequencyGrid, Tap};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0)))
}

/// Random square channel with `taps` taps and colored noise whose PSD stays
/// bounded away from zero.
pub fn random_channel(rng: &mut impl Rng, n: usize, taps: usize) -> ChannelSpec {
    let h: Vec<Tap> = (0..taps)
        .map(|d| {
            let mut m = random_matrix(rng, n, n, 0.6f64.powi(d as i32));
            if d == 0 {
                for i in 0..n {
                    m[(i, i)] += c(1.5, 0.0);
                }
            }
            Tap::new(d, m)
        })
        .collect();
    let noise_lags = rng.gen_range(0..taps.max(1));
    let higher: Vec<Tap> = (1..=noise_lags).map(|d| Tap::new(d, random_matrix(rng, n, n, 0.15))).collect();
    let spill: f64 = higher.iter().map(|t| 2.0 * frobenius(&t.matrix)).sum();
    let a = random_matrix(rng, n, n, 0.5);
    let mut r0 = &a * a.adjoint();
    for i in 0..n {
        r0[(i, i)] += c(0.3 + spill, 0.0);
    }
    let mut noise = vec![Tap::new(0, r0)];
    noise.extend(higher);
    ChannelSpec::new(n, n, h, noise).expect("random channel is valid")
}

/// Random PSD field scaled so `(1/2pi) int tr R = power` exactly.
pub fn random_feasible_field(rng: &mut impl Rng, n: usize, grid: &FrequencyGrid, power: f64) -> Vec<CMat> {
    let rank = rng.gen_range(1..=n);
    let raw: Vec<CMat> = (0..grid.len())
        .map(|_| {
            let scale = rng.gen_range(0.0..2.0);
            let a = random_matrix(rng, n, rank, scale);
            &a * a.adjoint()
        })
        .collect();
    let spent: f64 = raw.iter().zip(grid.weights()).map(|(r, w)| w * r.trace().re).sum::<f64>() / (2.0 * PI);
    raw.into_iter().map(|r| r.scale(power / spent)).collect()
}

pub fn objective(samples: &[memcap::SpectralSample], grid: &FrequencyGrid, psd: &[CMat]) -> f64 {
    samples
        .iter()
        .zip(psd)
        .zip(grid.weights())
        .map(|((s, r), w)| w * memcap::linalg::ln_det_i_plus(&(&s.w * r)))
        .sum::<f64>()
        / (4.0 * PI)
}

pub fn two_tap() -> ChannelSpec {
    ChannelSpec::scalar(&[1.0, 0.5], &[1.0]).unwrap()
}

pub fn correlated_noise_identity() -> ChannelSpec {
    ChannelSpec::scalar(&[1.0], &[1.0, 0.25]).unwrap()
}

/// 2x2 channel with memory on both the link and the noise.
pub fn mimo_with_memory() -> ChannelSpec {
    let h0 = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.4, 0.2), c(-0.3, 0.1), c(0.9, 0.0)]);
    let h1 = CMat::from_row_slice(2, 2, &[c(0.3, -0.1), c(0.0, 0.2), c(0.1, 0.0), c(-0.4, 0.0)]);
    let r0 = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.1), c(0.3, -0.1), c(0.8, 0.0)]);
    let r1 = CMat::from_row_slice(2, 2, &[c(0.15, 0.0), c(0.05, 0.0), c(0.0, 0.05), c(0.1, 0.0)]);
    ChannelSpec::new(2, 2, vec![Tap::new(0, h0), Tap::new(1, h1)], vec![Tap::new(0, r0), Tap::new(1, r1)]).unwrap()
}
