//! JSON channel/constraint documents.
//!
//! ```json
//! {
//!   "n_tx": 1, "n_rx": 1,
//!   "channel": { "taps": [ { "delay": 0, "matrix": [[[1.0, 0.0]]] } ] },
//!   "noise":   { "taps": [ { "lag": 0,   "matrix": [[[1.0, 0.0]]] } ] },
//!   "constraints": {
//!     "tpc": 1.0,
//!     "pac": [1.0],
//!     "ipc": [ { "taps": [...], "limit": 0.1 } ],
//!     "ehc": [ { "taps": [...], "floor": 0.2 } ]
//!   },
//!   "grid": { "N": 256 }
//! }
//! ```
//!
//! Matrices are row-major lists of rows; complex entries are `[re, im]`
//! pairs (a bare number is accepted as a real entry). `n_tx`/`n_rx` may be
//! omitted and are then taken from the first channel tap.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel_model::{ChannelSpec, Tap};
use crate::error::{Error, Result};
use crate::joint_solver::{ConstraintSet, FactorChannel, HarvestFloor, InterferenceLimit};
use crate::linalg::{c, CMat};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum Entry {
    Pair([f64; 2]),
    Real(f64),
}

impl Entry {
    fn value(self) -> num_complex::Complex64 {
        match self {
            Entry::Pair([re, im]) => c(re, im),
            Entry::Real(re) => c(re, 0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelTap {
    delay: i64,
    matrix: Vec<Vec<Entry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseTap {
    lag: i64,
    matrix: Vec<Vec<Entry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    taps: Vec<ChannelTap>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    taps: Vec<NoiseTap>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IpcEntry {
    taps: Vec<ChannelTap>,
    limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EhcEntry {
    taps: Vec<ChannelTap>,
    floor: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tpc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pac: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ipc: Vec<IpcEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ehc: Vec<EhcEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(rename = "N")]
    n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_tx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_rx: Option<usize>,
    channel: ChannelSection,
    noise: NoiseSection,
    #[serde(default)]
    constraints: ConstraintSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSection>,
}

/// A parsed input document.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSpec {
    pub channel: ChannelSpec,
    pub constraints: ConstraintSet,
    pub grid_n: Option<usize>,
}

fn matrix(rows: &[Vec<Entry>], n_rows: usize, n_cols: usize, field: &str) -> Result<CMat> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
        return Err(Error::InvalidSpec(format!(
            "{field}: expected a {n_rows}x{n_cols} matrix, got rows of lengths {shape:?}"
        )));
    }
    Ok(CMat::from_fn(n_rows, n_cols, |i, j| rows[i][j].value()))
}

fn delay(d: i64, field: &str) -> Result<usize> {
    usize::try_from(d).map_err(|_| Error::InvalidSpec(format!("{field}: negative delay {d}; taps must be causal")))
}

fn channel_taps(taps: &[ChannelTap], n_rows: usize, n_cols: usize, field: &str) -> Result<Vec<Tap>> {
    taps.iter()
        .enumerate()
        .map(|(i, t)| {
            let f = format!("{field}[{i}]");
            Ok(Tap::new(delay(t.delay, &format!("{f}.delay"))?, matrix(&t.matrix, n_rows, n_cols, &format!("{f}.matrix"))?))
        })
        .collect()
}

fn rows_of(taps: &[ChannelTap]) -> Option<usize> {
    taps.first().map(|t| t.matrix.len())
}

/// Parses and validates a document held in memory.
pub fn parse_spec_str(text: &str) -> Result<ParsedSpec> {
    let doc: SpecDocument = serde_json::from_str(text).map_err(|e| {
        Error::InvalidSpec(format!("schema violation at line {}, column {}: {e}", e.line(), e.column()))
    })?;

    let first = doc.channel.taps.first().ok_or_else(|| Error::InvalidSpec("channel.taps: at least one tap required".into()))?;
    let n_rx = doc.n_rx.unwrap_or(first.matrix.len());
    let n_tx = doc.n_tx.unwrap_or(first.matrix.first().map_or(0, Vec::len));

    let h = channel_taps(&doc.channel.taps, n_rx, n_tx, "channel.taps")?;
    let noise = doc
        .noise
        .taps
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let f = format!("noise.taps[{i}]");
            Ok(Tap::new(delay(t.lag, &format!("{f}.lag"))?, matrix(&t.matrix, n_rx, n_rx, &format!("{f}.matrix"))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let channel = ChannelSpec::new(n_tx, n_rx, h, noise)?;

    let cs = &doc.constraints;
    let mut constraints = ConstraintSet { tpc: cs.tpc, pac: cs.pac.clone(), ..ConstraintSet::default() };
    for (k, e) in cs.ipc.iter().enumerate() {
        let field = format!("constraints.ipc[{k}].taps");
        let n_out = rows_of(&e.taps).ok_or_else(|| Error::InvalidSpec(format!("{field}: at least one tap required")))?;
        let taps = channel_taps(&e.taps, n_out, n_tx, &field)?;
        constraints.ipc.push(InterferenceLimit { channel: FactorChannel::new(n_out, taps), limit: e.limit });
    }
    for (m, e) in cs.ehc.iter().enumerate() {
        let field = format!("constraints.ehc[{m}].taps");
        let n_out = rows_of(&e.taps).ok_or_else(|| Error::InvalidSpec(format!("{field}: at least one tap required")))?;
        let taps = channel_taps(&e.taps, n_out, n_tx, &field)?;
        constraints.ehc.push(HarvestFloor { channel: FactorChannel::new(n_out, taps), floor: e.floor });
    }
    constraints.validate(n_tx)?;

    let grid_n = doc.grid.map(|g| g.n);
    if grid_n == Some(0) {
        return Err(Error::InvalidSpec("grid.N must be at least 1".into()));
    }
    Ok(ParsedSpec { channel, constraints, grid_n })
}

pub fn parse_spec(path: &Path) -> Result<ParsedSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
    parse_spec_str(&text)
}

fn entries(m: &CMat) -> Vec<Vec<Entry>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Entry::Pair([m[(i, j)].re, m[(i, j)].im])).collect()).collect()
}

fn emit_taps(taps: &[Tap]) -> Vec<ChannelTap> {
    taps.iter().map(|t| ChannelTap { delay: t.delay as i64, matrix: entries(&t.matrix) }).collect()
}

/// Canonical JSON form of a parsed document; parsing it again gives back the
/// same values.
pub fn emit_spec(spec: &ParsedSpec) -> String {
    let doc = SpecDocument {
        n_tx: Some(spec.channel.n_tx()),
        n_rx: Some(spec.channel.n_rx()),
        channel: ChannelSection { taps: emit_taps(spec.channel.h_taps()) },
        noise: NoiseSection {
            taps: spec
                .channel
                .noise_taps()
                .iter()
                .map(|t| NoiseTap { lag: t.delay as i64, matrix: entries(&t.matrix) })
                .collect(),
        },
        constraints: ConstraintSection {
            tpc: spec.constraints.tpc,
            pac: spec.constraints.pac.clone(),
            ipc: spec
                .constraints
                .ipc
                .iter()
                .map(|c| IpcEntry { taps: emit_taps(&c.channel.taps), limit: c.limit })
                .collect(),
            ehc: spec
                .constraints
                .ehc
                .iter()
                .map(|c| EhcEntry { taps: emit_taps(&c.channel.taps), floor: c.floor })
                .collect(),
        },
        grid: spec.grid_n.map(|n| GridSection { n }),
    };
    serde_json::to_string_pretty(&doc).expect("spec document serializes")
}
