//! Capacity under joint power constraints by dual decomposition.
//!
//! The objective `(1/4pi) int ln det(I + W R) dtheta` is maximized subject to
//! linear constraints in the input PSD field `R(theta)`: a total budget, per
//! antenna budgets, interference limits toward other users and harvest floors
//! toward energy-harvesting users. Dualizing every constraint leaves one
//! independent problem per frequency, `max ln det(I + W R) - tr(M R)`, with
//! `M = 2 (mu_tpc I + diag(mu_pac) + sum mu_ipc H_k^H H_k - sum nu_ehc H_m^H H_m)`,
//! whose maximizer is a generalized water-filling ([`inner_waterfill`]).
//! The dual function is minimized over the nonnegative orthant; its gradient
//! is the vector of constraint slacks at the per-frequency maximizers.
//!
//! Every iterate yields a primal candidate, scaled to the boundary of the
//! `<=` constraints. The best feasible candidate gives the reported capacity
//! and the smallest dual value bounds it from above, so the duality gap
//! certifies the result.

mod constraints;
mod feasibility;
mod inner;
mod rank_one;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

pub use constraints::{ConstraintKind, ConstraintSet, FactorChannel, HarvestFloor, InterferenceLimit};
pub use feasibility::{delivered_power, feasibility_check, Feasibility};
pub use inner::inner_waterfill;
pub use rank_one::{extract_rank_one, Beam};

use constraints::{linearize, Linear};
use inner::inner_solve;

use crate::error::{Error, Result};
use crate::linalg::{ln_det_i_plus, CMat};
use crate::spectral::{FrequencyGrid, SpectralSample};

/// Iterations without gap progress after which a within-tolerance run stops.
const STALL_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Projected gradient with Barzilai-Borwein steps and Armijo backtracking.
    Spectral,
    /// Projected subgradient with step `a * scale / sqrt(t)` and primal averaging.
    Diminishing { a: f64 },
}

#[derive(Debug, Clone)]
pub struct JointOptions {
    pub max_iters: usize,
    /// Relative duality gap (`gap / (1 + C)`) required for `Optimal`.
    pub gap_tol: f64,
    /// Relative gap at which iteration stops early.
    pub stop_gap: f64,
    /// Allowed shortfall on harvest floors, relative to `1 + floor`.
    pub feas_tol: f64,
    pub step: StepRule,
}

impl Default for JointOptions {
    fn default() -> Self {
        Self { max_iters: 5000, gap_tol: 1e-5, stop_gap: 1e-12, feas_tol: 1e-9, step: StepRule::Spectral }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JointStatus {
    Optimal,
    Infeasible,
    MaxIters,
}

/// One number per constraint, grouped like [`ConstraintSet`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PerConstraint {
    pub tpc: Option<f64>,
    pub pac: Vec<f64>,
    pub ipc: Vec<f64>,
    pub ehc: Vec<f64>,
}

impl PerConstraint {
    fn from_flat(cons: &[Linear], values: &[f64]) -> Self {
        let mut out = Self::default();
        for (lin, &v) in cons.iter().zip(values) {
            match lin.kind {
                ConstraintKind::Tpc => out.tpc = Some(v),
                ConstraintKind::Pac => out.pac.push(v),
                ConstraintKind::Ipc => out.ipc.push(v),
                ConstraintKind::Ehc => out.ehc.push(v),
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.tpc.iter().chain(&self.pac).chain(&self.ipc).chain(&self.ehc).copied()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualTrace {
    pub iteration: usize,
    pub dual: f64,
    pub best_primal: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointResult {
    pub capacity_nats: f64,
    #[serde(skip)]
    pub psd: Vec<CMat>,
    pub multipliers: PerConstraint,
    /// Nonnegative when satisfied: `bound - value` for limits, `value - floor`
    /// for harvest floors.
    pub constraint_slacks: PerConstraint,
    pub duality_gap: f64,
    pub dual_value: f64,
    pub status: JointStatus,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<String>,
    #[serde(skip)]
    pub history: Vec<DualTrace>,
}

struct Problem<'a> {
    grid: &'a FrequencyGrid,
    w: Vec<CMat>,
    cons: Vec<Linear>,
    n: usize,
    /// Antennas allowed to radiate (zero per-antenna budget switches one off).
    active: Vec<usize>,
}

struct DualPoint {
    value: f64,
    psd: Vec<CMat>,
    slack: Vec<f64>,
}

struct Candidate {
    objective: f64,
    psd: Vec<CMat>,
}

impl<'a> Problem<'a> {
    fn restrict(&self, m: &CMat) -> CMat {
        let k = self.active.len();
        CMat::from_fn(k, k, |i, j| m[(self.active[i], self.active[j])])
    }

    fn embed(&self, sub: &CMat) -> CMat {
        let mut full = CMat::zeros(self.n, self.n);
        for (i, &a) in self.active.iter().enumerate() {
            for (j, &b) in self.active.iter().enumerate() {
                full[(a, b)] = sub[(i, j)];
            }
        }
        full
    }

    fn values(&self, psd: &[CMat]) -> Vec<f64> {
        self.cons
            .iter()
            .map(|lin| {
                psd.iter()
                    .zip(self.grid.weights())
                    .enumerate()
                    .map(|(k, (r, w))| w * lin.node_value(k, r))
                    .sum::<f64>()
                    / (2.0 * PI)
            })
            .collect()
    }

    fn slacks(&self, values: &[f64]) -> Vec<f64> {
        self.cons
            .iter()
            .zip(values)
            .map(|(lin, &g)| if lin.is_floor() { g - lin.bound } else { lin.bound - g })
            .collect()
    }

    /// Dual function value and gradient; `None` outside the dual domain.
    fn dual(&self, y: &[f64]) -> Option<DualPoint> {
        let nodes: Vec<Option<(CMat, f64)>> = (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let mut m = CMat::zeros(self.n, self.n);
                for (lin, &yc) in self.cons.iter().zip(y) {
                    if yc != 0.0 {
                        lin.accumulate(k, if lin.is_floor() { -2.0 * yc } else { 2.0 * yc }, &mut m);
                    }
                }
                let sol = inner_solve(&self.restrict(&self.w[k]), &self.restrict(&m)).ok()?;
                Some((self.embed(&sol.psd), sol.value))
            })
            .collect();
        let mut psd = Vec::with_capacity(nodes.len());
        let mut value = 0.0;
        for (node, w) in nodes.into_iter().zip(self.grid.weights()) {
            let (r, v) = node?;
            value += w * v / (4.0 * PI);
            psd.push(r);
        }
        for (lin, &yc) in self.cons.iter().zip(y) {
            value += if lin.is_floor() { -yc * lin.bound } else { yc * lin.bound };
        }
        let slack = self.slacks(&self.values(&psd));
        Some(DualPoint { value, psd, slack })
    }

    fn objective(&self, psd: &[CMat]) -> f64 {
        let per_node: Vec<f64> = psd
            .par_iter()
            .zip(self.w.par_iter())
            .map(|(r, w)| ln_det_i_plus(&(w * r)))
            .collect();
        per_node.iter().zip(self.grid.weights()).map(|(v, w)| v * w).sum::<f64>() / (4.0 * PI)
    }

    /// Scales `psd` onto the boundary of the `<=` constraints and keeps it
    /// if the harvest floors still hold.
    fn project(&self, psd: &[CMat], feas_tol: f64) -> Option<Candidate> {
        let values = self.values(psd);
        let mut scale = f64::INFINITY;
        for (lin, &g) in self.cons.iter().zip(&values) {
            if !lin.is_floor() && g > 0.0 {
                scale = scale.min(lin.bound / g);
            }
        }
        if !scale.is_finite() {
            scale = 0.0;
        }
        for (lin, &g) in self.cons.iter().zip(&values) {
            if lin.is_floor() && scale * g < lin.bound - feas_tol * (1.0 + lin.bound) {
                return None;
            }
        }
        let scaled: Vec<CMat> = psd.iter().map(|r| r.scale(scale)).collect();
        Some(Candidate { objective: self.objective(&scaled), psd: scaled })
    }

    fn initial_multipliers(&self, samples: &[SpectralSample]) -> Vec<f64> {
        let mut levels: Vec<f64> = samples
            .iter()
            .flat_map(|s| s.noise_levels())
            .filter(|l| l.is_finite())
            .collect();
        levels.sort_by(f64::total_cmp);
        let typical = levels.get(levels.len() / 2).copied().unwrap_or(1.0);
        let has_tpc = self.cons.iter().any(|l| l.kind == ConstraintKind::Tpc);
        let n_active = self.active.len().max(1) as f64;
        self.cons
            .iter()
            .map(|lin| match (lin.kind, &lin.weight) {
                (ConstraintKind::Tpc, _) => 0.5 / (lin.bound / n_active + typical),
                (ConstraintKind::Pac, constraints::Weight::Antenna(i)) if !has_tpc && self.active.contains(i) => {
                    0.5 / (lin.bound + typical)
                }
                _ => 0.0,
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_nonneg(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v.max(0.0)).collect()
}

/// Maximizes the capacity over the joint constraint set.
///
/// Returns `status = Infeasible` (capacity zero) when the budgets cannot
/// meet a harvest floor, either by [`feasibility_check`] or because the dual
/// value drops below zero during the iteration.
pub fn solve_joint(
    constraints: &ConstraintSet,
    samples: &[SpectralSample],
    grid: &FrequencyGrid,
    opts: &JointOptions,
) -> Result<JointResult> {
    if samples.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: samples.len() });
    }
    let n = samples.first().map(|s| s.w.nrows()).ok_or(Error::InvalidSpec("empty grid".into()))?;
    constraints.validate(n)?;

    let cons = linearize(constraints, n, grid);
    let active: Vec<usize> = match &constraints.pac {
        Some(pac) => (0..n).filter(|&i| pac[i] > 0.0).collect(),
        None => (0..n).collect(),
    };
    let problem = Problem { grid, w: samples.iter().map(|s| s.w.clone()).collect(), cons, n, active };

    let zero_psd = || vec![CMat::zeros(n, n); grid.len()];
    let finish = |psd: Vec<CMat>, y: Vec<f64>, capacity: f64, dual: f64, status, iterations, note, history| {
        let slack = problem.slacks(&problem.values(&psd));
        JointResult {
            capacity_nats: capacity,
            psd,
            multipliers: PerConstraint::from_flat(&problem.cons, &y),
            constraint_slacks: PerConstraint::from_flat(&problem.cons, &slack),
            duality_gap: (dual - capacity).max(0.0),
            dual_value: dual,
            status,
            iterations,
            infeasibility: note,
            history,
        }
    };

    if let Feasibility::Infeasible { witness } = feasibility_check(constraints, n, grid) {
        let y = vec![0.0; problem.cons.len()];
        return Ok(finish(zero_psd(), y, 0.0, 0.0, JointStatus::Infeasible, 0, Some(witness), Vec::new()));
    }
    let all_dark = samples.iter().all(|s| s.eigvals.iter().all(|&l| l == 0.0));
    if constraints.power_bound() == 0.0 || problem.active.is_empty() || (all_dark && constraints.ehc.is_empty()) {
        let y = vec![0.0; problem.cons.len()];
        return Ok(finish(zero_psd(), y, 0.0, 0.0, JointStatus::Optimal, 0, None, Vec::new()));
    }

    let mut y = problem.initial_multipliers(samples);
    let mut point = None;
    for _ in 0..200 {
        if let Some(p) = problem.dual(&y) {
            point = Some(p);
            break;
        }
        y.iter_mut().for_each(|v| *v *= 2.0);
    }
    let mut point = point.ok_or_else(|| Error::NoConvergence("no dual-feasible starting point".into()))?;

    let mut best: Option<Candidate> = None;
    let mut best_dual = point.value;
    let mut best_y = y.clone();
    let mut history = Vec::new();
    let mut average: Option<Vec<CMat>> = None;

    let g0 = norm(&point.slack).max(f64::MIN_POSITIVE);
    let scale = norm(&y).max(1e-12) / g0;
    let mut alpha = match opts.step {
        StepRule::Spectral => scale,
        StepRule::Diminishing { a } => a * scale,
    };

    let mut iterations = 0;
    let mut infeasible = false;
    let mut last_progress = (0usize, f64::INFINITY);
    for t in 1..=opts.max_iters {
        iterations = t;
        if point.value < best_dual {
            best_dual = point.value;
            best_y = y.clone();
        }
        if best_dual < -1e-12 {
            infeasible = true;
            break;
        }

        let mut candidates = vec![point.psd.clone()];
        if let StepRule::Diminishing { .. } = opts.step {
            let avg = match average.take() {
                None => point.psd.clone(),
                Some(prev) => prev
                    .iter()
                    .zip(&point.psd)
                    .map(|(a, r)| a.scale((t - 1) as f64 / t as f64) + r.scale(1.0 / t as f64))
                    .collect(),
            };
            candidates.push(avg.clone());
            average = Some(avg);
        }
        for psd in &candidates {
            if let Some(cand) = problem.project(psd, opts.feas_tol) {
                if best.as_ref().is_none_or(|b| cand.objective > b.objective) {
                    best = Some(cand);
                }
            }
        }
        if let Some(b) = &best {
            history.push(DualTrace { iteration: t, dual: best_dual, best_primal: b.objective });
            let gap = best_dual - b.objective;
            let rel = 1.0 + b.objective.abs();
            if gap <= opts.stop_gap * rel {
                break;
            }
            // Rounding sets a floor on the gap; once within tolerance, stop
            // when it has not shrunk for a while.
            if gap < last_progress.1 * (1.0 - 1e-3) {
                last_progress = (t, gap);
            } else if gap <= opts.gap_tol * rel && t - last_progress.0 >= STALL_ITERS {
                break;
            }
        }

        let grad = point.slack.clone();
        match opts.step {
            StepRule::Spectral => {
                let target = project_nonneg(&y.iter().zip(&grad).map(|(v, g)| v - alpha * g).collect::<Vec<_>>());
                let dir: Vec<f64> = target.iter().zip(&y).map(|(a, b)| a - b).collect();
                if norm(&dir) <= 1e-15 * norm(&y).max(1e-300) {
                    break;
                }
                let slope = dot(&grad, &dir);
                let mut lambda = 1.0;
                let mut accepted = None;
                for _ in 0..60 {
                    let trial: Vec<f64> = y.iter().zip(&dir).map(|(v, d)| (v + lambda * d).max(0.0)).collect();
                    if let Some(p) = problem.dual(&trial) {
                        if p.value <= point.value + 1e-4 * lambda * slope {
                            accepted = Some((trial, p));
                            break;
                        }
                    }
                    lambda *= 0.5;
                }
                let Some((next_y, next)) = accepted else { break };
                let s: Vec<f64> = next_y.iter().zip(&y).map(|(a, b)| a - b).collect();
                let r: Vec<f64> = next.slack.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let sr = dot(&s, &r);
                alpha = if sr > 0.0 { (dot(&s, &s) / sr).clamp(1e-30, 1e30) } else { alpha * 10.0 };
                y = next_y;
                point = next;
            }
            StepRule::Diminishing { .. } => {
                let mut step = alpha / (t as f64).sqrt();
                let mut moved = false;
                for _ in 0..60 {
                    let trial = project_nonneg(&y.iter().zip(&grad).map(|(v, g)| v - step * g).collect::<Vec<_>>());
                    if let Some(p) = problem.dual(&trial) {
                        y = trial;
                        point = p;
                        moved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
        }
    }
    if point.value < best_dual {
        best_dual = point.value;
        best_y = y.clone();
    }

    if infeasible || best_dual < -1e-12 {
        let note = Some("dual value below zero: constraints are incompatible".to_string());
        return Ok(finish(
            zero_psd(),
            best_y,
            0.0,
            best_dual,
            JointStatus::Infeasible,
            iterations,
            note,
            history,
        ));
    }

    match best {
        Some(b) => {
            let gap = best_dual - b.objective;
            let status =
                if gap <= opts.gap_tol * (1.0 + b.objective.abs()) { JointStatus::Optimal } else { JointStatus::MaxIters };
            Ok(finish(b.psd, best_y, b.objective, best_dual, status, iterations, None, history))
        }
        None => Ok(finish(
            zero_psd(),
            best_y,
            0.0,
            best_dual,
            JointStatus::MaxIters,
            iterations,
            Some("no feasible iterate found".into()),
            history,
        )),
    }
}
