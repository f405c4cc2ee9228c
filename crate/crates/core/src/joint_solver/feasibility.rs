use std::f64::consts::PI;

use serde::Serialize;

use super::constraints::{linearize, ConstraintKind, ConstraintSet};
use crate::linalg::CMat;
use crate::spectral::FrequencyGrid;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Feasibility {
    Feasible,
    Infeasible { witness: String },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Checks every harvest floor against the largest power the budgets can
/// deliver to that user.
///
/// The harvested power is linear in the input PSD, so its maximum over the
/// total/per-antenna budget set is attained by putting all transmit power on
/// the dominant eigenvector of `H_m^H H_m` at the best frequency:
/// `max_k lambda_max(H_m^H H_m)(theta_k) * min(P, sum_i P_i)`. Under a total
/// budget this is exact; with per-antenna budgets it is an upper bound, so an
/// `Infeasible` verdict is always certain. Joint incompatibility between
/// several floors and interference limits is left to the dual solver, whose
/// dual value drops below zero on infeasible sets.
pub fn feasibility_check(constraints: &ConstraintSet, n_tx: usize, grid: &FrequencyGrid) -> Feasibility {
    let budget = constraints.power_bound();
    for (m, lin) in linearize(&ConstraintSet { ipc: Vec::new(), ..constraints.clone() }, n_tx, grid)
        .iter()
        .filter(|l| l.kind == ConstraintKind::Ehc)
        .enumerate()
    {
        if lin.bound == 0.0 {
            continue;
        }
        let gain = (0..grid.len()).map(|k| lin.max_eig_at(k)).fold(0.0, f64::max);
        let reachable = gain * budget;
        if reachable < lin.bound {
            return Feasibility::Infeasible {
                witness: format!(
                    "harvest floor {m}: requires {:.6e} but at most {:.6e} can be delivered",
                    lin.bound, reachable
                ),
            };
        }
    }
    Feasibility::Feasible
}

/// Power delivered by a PSD field through the weight field `a`,
/// `(1/2pi) sum_k dtheta_k tr(A_k R_k)`.
pub fn delivered_power(a: &[CMat], psd: &[CMat], grid: &FrequencyGrid) -> f64 {
    a.iter()
        .zip(psd)
        .zip(grid.weights())
        .map(|((a, r), w)| w * (a * r).trace().re)
        .sum::<f64>()
        / (2.0 * PI)
}
