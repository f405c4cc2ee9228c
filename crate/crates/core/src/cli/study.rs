//! Capacity-vs-power sweeps and grid-refinement studies.

use serde::Serialize;

use crate::channel_model::ChannelSpec;
use crate::error::{Error, Result};
use crate::joint_solver::{solve_joint, ConstraintSet, JointOptions, JointStatus};
use crate::spectral::{whiten_grid, FrequencyGrid};
use crate::waterfill::{active_mode_fraction, solve_tpc};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub power: f64,
    pub capacity: f64,
    pub water_level: f64,
    pub active_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeRow {
    pub n: usize,
    pub capacity: f64,
    /// `|C_N - C_{N_prev}|`, absent on the first row.
    pub diff: Option<f64>,
}

fn strictly_increasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|p| p[0] < p[1])
}

/// Total-power capacity at each budget in `powers` on a midpoint grid of `n` nodes.
pub fn run_sweep(spec: &ChannelSpec, powers: &[f64], n: usize) -> Result<Vec<SweepRow>> {
    if powers.is_empty() || !strictly_increasing(powers) {
        return Err(Error::InvalidSpec("sweep powers must be a nonempty increasing list".into()));
    }
    let grid = FrequencyGrid::uniform(n);
    let samples = whiten_grid(spec, &grid)?;
    powers
        .iter()
        .map(|&p| {
            let r = solve_tpc(p, &samples, &grid)?;
            Ok(SweepRow {
                power: p,
                capacity: r.capacity_nats,
                water_level: r.water_level,
                active_fraction: if p == 0.0 { 0.0 } else { active_mode_fraction(&samples, &grid, r.water_level) },
            })
        })
        .collect()
}

fn tpc_only(c: &ConstraintSet) -> Option<f64> {
    match c {
        ConstraintSet { tpc: Some(p), pac: None, ipc, ehc } if ipc.is_empty() && ehc.is_empty() => Some(*p),
        _ => None,
    }
}

/// Capacity on midpoint grids of increasing size. A total budget alone uses
/// the closed form; anything else goes through the joint solver.
pub fn run_converge(
    spec: &ChannelSpec,
    constraints: &ConstraintSet,
    sizes: &[usize],
    opts: &JointOptions,
) -> Result<Vec<ConvergeRow>> {
    if sizes.is_empty() || sizes[0] == 0 || !strictly_increasing(sizes) {
        return Err(Error::InvalidSpec("grid sizes must be a nonempty increasing list of positive integers".into()));
    }
    let mut rows: Vec<ConvergeRow> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let grid = FrequencyGrid::uniform(n);
        let samples = whiten_grid(spec, &grid)?;
        let capacity = match tpc_only(constraints) {
            Some(p) => solve_tpc(p, &samples, &grid)?.capacity_nats,
            None => {
                let r = solve_joint(constraints, &samples, &grid, opts)?;
                match r.status {
                    JointStatus::Optimal => r.capacity_nats,
                    JointStatus::Infeasible => {
                        return Err(Error::Infeasible(r.infeasibility.unwrap_or_default()));
                    }
                    JointStatus::MaxIters => {
                        return Err(Error::NoConvergence(format!("joint solver at N = {n}")));
                    }
                }
            }
        };
        let diff = rows.last().map(|prev| (capacity - prev.capacity).abs());
        rows.push(ConvergeRow { n, capacity, diff });
    }
    Ok(rows)
}
