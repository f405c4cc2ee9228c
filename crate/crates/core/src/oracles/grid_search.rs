//! Exhaustive search over parameterized PSD fields for tiny joint problems.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{factor_gram, whitened};
use crate::channel_model::ChannelSpec;
use crate::error::{Error, Result};
use crate::joint_solver::ConstraintSet;
use crate::spectral::FrequencyGrid;

pub const MAX_GRID_POINTS: f64 = 1e8;
const MAX_NODES: usize = 4;
const MAX_TX: usize = 2;
const ZOOM_PASSES: usize = 12;

type M2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn to_m2(m: &crate::linalg::CMat) -> M2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn trace_prod(a: &M2, b: &M2) -> f64 {
    (a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]).re
}

/// `ln det(I + W R)`; unused second row/column is zero for single-antenna links.
fn ln_det_i_plus(w: &M2, r: &M2) -> f64 {
    let p = mul(w, r);
    let det = (Complex64::new(1.0, 0.0) + p[0][0]) * (Complex64::new(1.0, 0.0) + p[1][1]) - p[0][1] * p[1][0];
    det.re.ln()
}

/// `V(a, phi) diag(p1, p2) V^H` with `V = [[cos a, -e^{j phi} sin a], [e^{-j phi} sin a, cos a]]`.
fn psd_from_params(params: &[f64]) -> M2 {
    if params.len() == 1 {
        let mut r = [[ZERO; 2]; 2];
        r[0][0] = Complex64::new(params[0], 0.0);
        return r;
    }
    let (p1, p2, a, phi) = (params[0], params[1], params[2], params[3]);
    let (s, c) = a.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    let v = [[Complex64::new(c, 0.0), -e * s], [e.conj() * s, Complex64::new(c, 0.0)]];
    let d = [[Complex64::new(p1, 0.0), ZERO], [ZERO, Complex64::new(p2, 0.0)]];
    let vh = [[v[0][0].conj(), v[1][0].conj()], [v[0][1].conj(), v[1][1].conj()]];
    mul(&mul(&v, &d), &vh)
}

struct Limit {
    weights: Vec<M2>,
    bound: f64,
    floor: bool,
}

/// Visits every point of a rectangular grid with `res` values per dimension.
fn for_each_point(lo: &[f64], hi: &[f64], res: usize, mut f: impl FnMut(&[f64])) {
    let dims = lo.len();
    let mut idx = vec![0usize; dims];
    let mut point = vec![0.0; dims];
    loop {
        for d in 0..dims {
            point[d] = if res == 1 { 0.5 * (lo[d] + hi[d]) } else { lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / (res - 1) as f64 };
        }
        f(&point);
        let mut d = 0;
        loop {
            if d == dims {
                return;
            }
            idx[d] += 1;
            if idx[d] < res {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Largest objective over a grid of PSD fields satisfying every constraint.
///
/// Each node's PSD is `V diag(p) V^H` with eigenvalues `p` in
/// `[0, 2 pi B / dtheta]` (`B` the total power the budgets allow) and, for
/// two antennas, rotation angle `a in [0, pi/2]` and phase `phi in [0, 2 pi]`.
/// The full joint grid is searched, then re-searched on boxes shrunk around
/// the incumbent. Every returned value is attained by a feasible field, so it
/// is a lower bound on the capacity.
pub fn grid_search_joint(spec: &ChannelSpec, constraints: &ConstraintSet, grid: &FrequencyGrid, resolution: usize) -> Result<f64> {
    let n = spec.n_tx();
    if n > MAX_TX {
        return Err(Error::DimensionTooLarge { got: n, max: MAX_TX });
    }
    if grid.len() > MAX_NODES {
        return Err(Error::DimensionTooLarge { got: grid.len(), max: MAX_NODES });
    }
    constraints.validate(n)?;
    let per_node_dims = if n == 1 { 1 } else { 4 };
    let dims = per_node_dims * grid.len();
    let resolution = resolution.max(2);
    let points = (resolution as f64).powi(dims as i32);
    if points > MAX_GRID_POINTS {
        return Err(Error::BudgetExceeded { points, max: MAX_GRID_POINTS });
    }

    let w: Vec<M2> = grid.nodes().iter().map(|&t| whitened(spec, t).map(|m| to_m2(&m))).collect::<Result<_>>()?;

    let unit = |i: usize| {
        let mut m = [[ZERO; 2]; 2];
        m[i][i] = Complex64::new(1.0, 0.0);
        m
    };
    let mut limits = Vec::new();
    if let Some(p) = constraints.tpc {
        let mut id = unit(0);
        if n == 2 {
            id[1][1] = Complex64::new(1.0, 0.0);
        }
        limits.push(Limit { weights: vec![id; grid.len()], bound: p, floor: false });
    }
    if let Some(pac) = &constraints.pac {
        for (i, &p) in pac.iter().enumerate() {
            limits.push(Limit { weights: vec![unit(i); grid.len()], bound: p, floor: false });
        }
    }
    let gram = |taps: &[crate::channel_model::Tap], n_out: usize| -> Vec<M2> {
        grid.nodes().iter().map(|&t| to_m2(&factor_gram(taps, n_out, n, t))).collect()
    };
    for c in &constraints.ipc {
        limits.push(Limit { weights: gram(&c.channel.taps, c.channel.n_out), bound: c.limit, floor: false });
    }
    for c in &constraints.ehc {
        limits.push(Limit { weights: gram(&c.channel.taps, c.channel.n_out), bound: c.floor, floor: true });
    }

    let budget = {
        let tpc = constraints.tpc.unwrap_or(f64::INFINITY);
        let pac: f64 = constraints.pac.as_ref().map_or(f64::INFINITY, |p| p.iter().sum());
        tpc.min(pac)
    };
    let mut lo0 = Vec::with_capacity(dims);
    let mut hi0 = Vec::with_capacity(dims);
    for &dt in grid.weights() {
        let pmax = 2.0 * PI * budget / dt;
        if n == 1 {
            lo0.push(0.0);
            hi0.push(pmax);
        } else {
            lo0.extend([0.0, 0.0, 0.0, 0.0]);
            hi0.extend([pmax, pmax, PI / 2.0, 2.0 * PI]);
        }
    }

    let n_nodes = grid.len();
    let n_lim = limits.len();
    let mut best = f64::NEG_INFINITY;
    let mut best_point: Option<Vec<f64>> = None;
    let (mut lo, mut hi) = (lo0.clone(), hi0.clone());

    for _ in 0..ZOOM_PASSES {
        // Per-node tables of (objective, constraint contributions) for every local point.
        let mut tables: Vec<Vec<(f64, Vec<f64>, Vec<f64>)>> = Vec::with_capacity(n_nodes);
        for k in 0..n_nodes {
            let dt = grid.weights()[k];
            let slice = k * per_node_dims..(k + 1) * per_node_dims;
            let mut table = Vec::new();
            for_each_point(&lo[slice.clone()], &hi[slice], resolution, |p| {
                let r = psd_from_params(p);
                let obj = dt * ln_det_i_plus(&w[k], &r) / (4.0 * PI);
                let cons = limits.iter().map(|l| dt * trace_prod(&l.weights[k], &r) / (2.0 * PI)).collect();
                table.push((obj, cons, p.to_vec()));
            });
            tables.push(table);
        }

        let sizes: Vec<usize> = tables.iter().map(|t| t.len()).collect();
        let mut idx = vec![0usize; n_nodes];
        let mut sums = vec![0.0; n_lim];
        'combos: loop {
            let mut obj = 0.0;
            sums.iter_mut().for_each(|s| *s = 0.0);
            for (k, &i) in idx.iter().enumerate() {
                let (o, c, _) = &tables[k][i];
                obj += o;
                for (s, v) in sums.iter_mut().zip(c) {
                    *s += v;
                }
            }
            let feasible = limits.iter().zip(&sums).all(|(l, &s)| if l.floor { s >= l.bound } else { s <= l.bound });
            if feasible && obj > best {
                best = obj;
                best_point = Some(idx.iter().enumerate().flat_map(|(k, &i)| tables[k][i].2.clone()).collect());
            }
            let mut k = 0;
            loop {
                if k == n_nodes {
                    break 'combos;
                }
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }

        let Some(center) = &best_point else { break };
        for d in 0..dims {
            let half = 2.0 * (hi[d] - lo[d]) / (resolution - 1) as f64;
            lo[d] = (center[d] - half).max(lo0[d]);
            hi[d] = (center[d] + half).min(hi0[d]);
        }
    }

    if best_point.is_none() {
        return Err(Error::Infeasible("no grid point satisfies the constraints".into()));
    }
    Ok(best)
}

/// Per-antenna power split search for a flat MISO channel `h` with white
/// noise `sigma2`: beamforming with phases matched to `h` gives
/// `(1/2) ln(1 + |sum_i |h_i| sqrt(r_i)|^2 / sigma2)`, maximized over
/// `r_i in [0, P_i]` on a uniform grid with endpoints.
pub fn miso_pac_split_search(h: &[Complex64], sigma2: f64, pac: &[f64], resolution: usize) -> Result<f64> {
    if h.len() != pac.len() {
        return Err(Error::LengthMismatch { expected: h.len(), got: pac.len() });
    }
    let resolution = resolution.max(2);
    let points = (resolution as f64).powi(h.len() as i32);
    if points > MAX_GRID_POINTS {
        return Err(Error::BudgetExceeded { points, max: MAX_GRID_POINTS });
    }
    let lo = vec![0.0; h.len()];
    let mut best = f64::NEG_INFINITY;
    for_each_point(&lo, pac, resolution, |r| {
        let amp: f64 = h.iter().zip(r).map(|(hi, ri)| hi.norm() * ri.sqrt()).sum();
        best = best.max(0.5 * (1.0 + amp * amp / sigma2).ln());
    });
    Ok(best)
}
