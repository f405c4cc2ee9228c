use serde::Serialize;

use crate::channel_model::{dtft, Tap};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::spectral::FrequencyGrid;

/// Channel from the transmitter to a third-party receiver with `n_out`
/// antennas, given by causal taps of size `n_out x n_tx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorChannel {
    pub n_out: usize,
    pub taps: Vec<Tap>,
}

impl FactorChannel {
    pub fn new(n_out: usize, taps: Vec<Tap>) -> Self {
        Self { n_out, taps }
    }

    /// `H_k(theta)^H H_k(theta)` at every grid node.
    pub fn gram_field(&self, n_tx: usize, grid: &FrequencyGrid) -> Vec<CMat> {
        grid.nodes()
            .iter()
            .map(|&t| {
                let h = dtft(&self.taps, self.n_out, n_tx, t);
                h.adjoint() * h
            })
            .collect()
    }
}

/// Interference power induced at another user must stay at or below `limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceLimit {
    pub channel: FactorChannel,
    pub limit: f64,
}

/// Power delivered to an energy-harvesting user must reach at least `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestFloor {
    pub channel: FactorChannel,
    pub floor: f64,
}

/// Joint power constraints. Any subset may be given as long as a total or
/// per-antenna budget bounds the transmit power.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub tpc: Option<f64>,
    pub pac: Option<Vec<f64>>,
    pub ipc: Vec<InterferenceLimit>,
    pub ehc: Vec<HarvestFloor>,
}

impl ConstraintSet {
    pub fn total(power: f64) -> Self {
        Self { tpc: Some(power), ..Self::default() }
    }

    pub fn per_antenna(budgets: Vec<f64>) -> Self {
        Self { pac: Some(budgets), ..Self::default() }
    }

    pub fn with_ipc(mut self, channel: FactorChannel, limit: f64) -> Self {
        self.ipc.push(InterferenceLimit { channel, limit });
        self
    }

    pub fn with_ehc(mut self, channel: FactorChannel, floor: f64) -> Self {
        self.ehc.push(HarvestFloor { channel, floor });
        self
    }

    pub fn validate(&self, n_tx: usize) -> Result<()> {
        if self.tpc.is_none() && self.pac.is_none() {
            return Err(Error::Unbounded);
        }
        let check = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} must be finite and nonnegative, got {v}")))
            }
        };
        if let Some(p) = self.tpc {
            check(p, "total power budget")?;
        }
        if let Some(pac) = &self.pac {
            if pac.len() != n_tx {
                return Err(Error::InvalidSpec(format!(
                    "per-antenna budgets: expected {n_tx} entries, got {}",
                    pac.len()
                )));
            }
            for (i, &p) in pac.iter().enumerate() {
                check(p, &format!("per-antenna budget {i}"))?;
            }
        }
        let check_channel = |ch: &FactorChannel, what: &str| -> Result<()> {
            if ch.n_out == 0 {
                return Err(Error::InvalidSpec(format!("{what}: receiver needs at least one antenna")));
            }
            for tap in &ch.taps {
                if tap.matrix.shape() != (ch.n_out, n_tx) {
                    return Err(Error::InvalidSpec(format!(
                        "{what}: tap at delay {} is {}x{}, expected {}x{n_tx}",
                        tap.delay,
                        tap.matrix.nrows(),
                        tap.matrix.ncols(),
                        ch.n_out
                    )));
                }
            }
            Ok(())
        };
        for (k, c) in self.ipc.iter().enumerate() {
            check(c.limit, &format!("interference limit {k}"))?;
            check_channel(&c.channel, &format!("interference channel {k}"))?;
        }
        for (m, c) in self.ehc.iter().enumerate() {
            check(c.floor, &format!("harvest floor {m}"))?;
            check_channel(&c.channel, &format!("harvest channel {m}"))?;
        }
        Ok(())
    }

    /// Upper bound on total transmit power implied by the budgets.
    pub(crate) fn power_bound(&self) -> f64 {
        let tpc = self.tpc.unwrap_or(f64::INFINITY);
        let pac = self.pac.as_ref().map_or(f64::INFINITY, |p| p.iter().sum());
        tpc.min(pac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Tpc,
    Pac,
    Ipc,
    Ehc,
}

/// Per-node weight of a linear constraint `(1/2pi) sum_k dtheta_k tr(A_k R_k)`.
#[derive(Debug, Clone)]
pub(crate) enum Weight {
    Identity,
    Antenna(usize),
    Field(Vec<CMat>),
}

/// One linear constraint, with `>=` (harvest) or `<=` (everything else).
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub kind: ConstraintKind,
    pub bound: f64,
    pub weight: Weight,
}

impl Linear {
    pub fn is_floor(&self) -> bool {
        self.kind == ConstraintKind::Ehc
    }

    /// `tr(A_k R)` at node `k`.
    pub fn node_value(&self, k: usize, r: &CMat) -> f64 {
        match &self.weight {
            Weight::Identity => crate::linalg::trace_re(r),
            Weight::Antenna(i) => r[(*i, *i)].re,
            Weight::Field(a) => (&a[k] * r).trace().re,
        }
    }

    /// Adds `coef * A_k` to `m`.
    pub fn accumulate(&self, k: usize, coef: f64, m: &mut CMat) {
        match &self.weight {
            Weight::Identity => {
                for i in 0..m.nrows() {
                    m[(i, i)].re += coef;
                }
            }
            Weight::Antenna(i) => m[(*i, *i)].re += coef,
            Weight::Field(a) => *m += a[k].scale(coef),
        }
    }

    pub fn max_eig_at(&self, k: usize) -> f64 {
        match &self.weight {
            Weight::Identity | Weight::Antenna(_) => 1.0,
            Weight::Field(a) => crate::linalg::eigh_desc(&a[k]).0.first().copied().unwrap_or(0.0),
        }
    }
}

/// Flattens a constraint set into linear constraints on the grid, in the
/// order tpc, pac (per antenna), ipc, ehc.
pub(crate) fn linearize(set: &ConstraintSet, n_tx: usize, grid: &FrequencyGrid) -> Vec<Linear> {
    let mut out = Vec::new();
    if let Some(p) = set.tpc {
        out.push(Linear { kind: ConstraintKind::Tpc, bound: p, weight: Weight::Identity });
    }
    if let Some(pac) = &set.pac {
        for (i, &p) in pac.iter().enumerate() {
            out.push(Linear { kind: ConstraintKind::Pac, bound: p, weight: Weight::Antenna(i) });
        }
    }
    for c in &set.ipc {
        let field = c.channel.gram_field(n_tx, grid);
        out.push(Linear { kind: ConstraintKind::Ipc, bound: c.limit, weight: Weight::Field(field) });
    }
    for c in &set.ehc {
        let field = c.channel.gram_field(n_tx, grid);
        out.push(Linear { kind: ConstraintKind::Ehc, bound: c.floor, weight: Weight::Field(field) });
    }
    out
}
