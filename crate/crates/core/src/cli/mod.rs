//! The `memcap` command-line tool.

pub mod output;
pub mod spec_file;
pub mod study;

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::channel_model::{check_admissibility, ChannelSpec, DEFAULT_SINGULAR_TOL};
use crate::error::Error;
use crate::joint_solver::{solve_joint, JointOptions, JointStatus};
use crate::oracles::{dense_bisection_capacity, grid_search_joint, OracleReport, DEFAULT_DENSE_NODES};
use crate::spectral::{whiten_grid, FrequencyGrid};
use crate::waterfill::{solve_tpc, POWER_TOL};

use output::{psd_csv, write_atomic, Header};
use spec_file::{emit_spec, parse_spec, ParsedSpec};

pub const DEFAULT_GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Admissibility report only.
    Check,
    /// Closed-form capacity under the total power budget.
    Capacity,
    /// Capacity under every constraint in the spec.
    Joint,
    /// Capacity versus total power.
    Sweep,
    /// Capacity versus grid size.
    Converge,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Capacity => "capacity",
            Command::Joint => "joint",
            Command::Sweep => "sweep",
            Command::Converge => "converge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    Nats,
    Bits,
}

impl LogBase {
    pub fn scale(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / LN_2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            LogBase::Nats => "nats",
            LogBase::Bits => "bits",
        }
    }
}

/// Capacity of Gaussian MIMO channels with memory.
#[derive(Debug, Clone, Parser)]
#[command(name = "memcap", version)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Channel / constraint document (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Number of midpoint grid nodes; defaults to the spec's grid.N, else 256.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long = "log", value_enum, default_value = "nats")]
    pub log_base: LogBase,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also run the brute-force reference and write oracle.jsonl.
    #[arg(long)]
    pub oracle: bool,
    /// Relative singularity tolerance for the admissibility check.
    #[arg(long, default_value_t = DEFAULT_SINGULAR_TOL)]
    pub singular_tol: f64,
    /// Total power budgets for `sweep`.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0, 4.0, 8.0])]
    pub powers: Vec<f64>,
    /// Grid sizes for `converge`.
    #[arg(long, value_delimiter = ',', default_values_t = vec![64usize, 128, 256, 512])]
    pub grids: Vec<usize>,
    /// Iteration cap for the joint solver.
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Relative duality-gap tolerance for the joint solver.
    #[arg(long, default_value_t = 1e-5)]
    pub gap_tol: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 infeasible, 3 inadmissible spec, 4 no convergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                Error::Infeasible(_) => 2,
                Error::NoConvergence(_) => 4,
                Error::InvalidSpec(_)
                | Error::NoiseSingular { .. }
                | Error::NoiseIndefinite { .. }
                | Error::Unbounded
                | Error::AllModesSingular
                | Error::NotIdentityChannel => 3,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// Points per pass for the CLI's grid-search reference; zoom passes refine it.
const CLI_GRID_POINTS: f64 = 1e7;

fn describe_theta(theta: f64) -> String {
    if (theta.abs() - PI).abs() < 1e-12 {
        "theta = ±pi".to_string()
    } else {
        format!("theta = {theta:.6}")
    }
}

/// Runs the admissibility check on a grid that contains every computation
/// node (`uniform(n)`) plus the band edge and DC (`periodic(2n)` covers all three).
fn admissibility(spec: &ChannelSpec, n: usize, tol: f64) -> Result<(serde_json::Value, Vec<String>), CliError> {
    let audit = FrequencyGrid::periodic(2 * n);
    let report = check_admissibility(spec, &audit, tol).map_err(|e| match e {
        Error::NoiseSingular { theta, min_eig } => Error::InvalidSpec(format!(
            "noise PSD is singular at {} (min eigenvalue {min_eig:.3e}); capacity requires an invertible noise PSD",
            describe_theta(theta)
        )),
        other => other,
    })?;
    let mut warnings = Vec::new();
    if report.channel_singular() {
        let shown: Vec<String> = report.singular_frequencies.iter().take(8).map(|&t| describe_theta(t)).collect();
        warnings.push(format!(
            "channel transfer matrix is singular at {} frequencies ({}); those modes get no power",
            report.singular_frequencies.len(),
            shown.join(", ")
        ));
    }
    Ok((serde_json::to_value(&report).expect("report serializes"), warnings))
}

fn tolerances(cfg: &RunConfig) -> BTreeMap<String, f64> {
    let mut t = BTreeMap::new();
    t.insert("singular".into(), cfg.singular_tol);
    t.insert("power".into(), POWER_TOL);
    t.insert("gap".into(), cfg.gap_tol);
    t
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let parsed = parse_spec(&cfg.spec)?;
    run_parsed(cfg, &parsed)
}

pub fn run_parsed(cfg: &RunConfig, parsed: &ParsedSpec) -> Result<Outcome, CliError> {
    let n = cfg.grid.or(parsed.grid_n).unwrap_or(DEFAULT_GRID);
    if n == 0 {
        return Err(Error::InvalidSpec("grid size must be at least 1".into()).into());
    }
    let spec = &parsed.channel;
    let header = Header::new(cfg.command.name(), &emit_spec(parsed), n, cfg.log_base.name(), tolerances(cfg));
    let (report, warnings) = admissibility(spec, n, cfg.singular_tol)?;
    let base = cfg.log_base;
    let mut files = Vec::new();
    let mut oracle_lines: Vec<String> = Vec::new();
    let mut exit_code = 0;
    let opts = JointOptions { max_iters: cfg.max_iters, gap_tol: cfg.gap_tol, ..JointOptions::default() };

    let summary = match cfg.command {
        Command::Check => {
            let doc = json!({ "header": header, "admissibility": report, "warnings": warnings });
            write_atomic(&cfg.out, "admissibility.json", &pretty(&doc))?;
            files.push("admissibility.json".into());
            "spec is admissible".to_string()
        }
        Command::Capacity => {
            let power = parsed.constraints.tpc.ok_or_else(|| {
                Error::InvalidSpec("`capacity` needs constraints.tpc; use `joint` for per-antenna budgets".into())
            })?;
            let grid = FrequencyGrid::uniform(n);
            let samples = whiten_grid(spec, &grid)?;
            let r = solve_tpc(power, &samples, &grid)?;
            let doc = json!({
                "header": header,
                "capacity": base.scale(r.capacity_nats),
                "unit": format!("{} per channel use", base.name()),
                "water_level": r.water_level,
                "power_used": r.power_used,
                "admissibility": report,
                "warnings": warnings,
            });
            write_atomic(&cfg.out, "capacity.json", &pretty(&doc))?;
            write_atomic(&cfg.out, "psd.csv", &psd_csv(&header, grid.nodes(), &r.psd))?;
            files.extend(["capacity.json".into(), "psd.csv".into()]);
            if cfg.oracle {
                let reference = dense_bisection_capacity(spec, power, DEFAULT_DENSE_NODES)?;
                let rep = OracleReport::new("capacity_tpc", base.scale(reference), base.scale(r.capacity_nats), 1e-6, true);
                oracle_lines.push(rep.to_json_line());
            }
            format!("capacity = {:.12} {} per channel use (water level {:.9})", base.scale(r.capacity_nats), base.name(), r.water_level)
        }
        Command::Joint => {
            let grid = FrequencyGrid::uniform(n);
            let samples = whiten_grid(spec, &grid)?;
            let r = solve_joint(&parsed.constraints, &samples, &grid, &opts)?;
            exit_code = match r.status {
                JointStatus::Optimal => 0,
                JointStatus::Infeasible => 2,
                JointStatus::MaxIters => 4,
            };
            let doc = json!({
                "header": header,
                "capacity": base.scale(r.capacity_nats),
                "unit": format!("{} per channel use", base.name()),
                "status": r.status,
                "multipliers": r.multipliers,
                "slacks": r.constraint_slacks,
                "duality_gap": base.scale(r.duality_gap),
                "dual_value": base.scale(r.dual_value),
                "iterations": r.iterations,
                "infeasibility": r.infeasibility,
                "admissibility": report,
                "warnings": warnings,
            });
            write_atomic(&cfg.out, "capacity.json", &pretty(&doc))?;
            write_atomic(&cfg.out, "psd.csv", &psd_csv(&header, grid.nodes(), &r.psd))?;
            files.extend(["capacity.json".into(), "psd.csv".into()]);
            if cfg.oracle && r.status == JointStatus::Optimal {
                let c = &parsed.constraints;
                if c.pac.is_none() && c.ipc.is_empty() && c.ehc.is_empty() {
                    let reference = dense_bisection_capacity(spec, c.tpc.unwrap_or(0.0), DEFAULT_DENSE_NODES)?;
                    let rep = OracleReport::new("joint_vs_dense", base.scale(reference), base.scale(r.capacity_nats), 1e-6, true);
                    oracle_lines.push(rep.to_json_line());
                } else if spec.n_tx() <= 2 && n <= 4 {
                    let resolution = if spec.n_tx() == 1 { 60 } else { (CLI_GRID_POINTS.powf(1.0 / (4 * n) as f64)) as usize };
                    let reference = grid_search_joint(spec, c, &grid, resolution)?;
                    let rep = OracleReport::new("joint_vs_grid_search", base.scale(reference), base.scale(r.capacity_nats), 1e-3, false);
                    oracle_lines.push(rep.to_json_line());
                }
            }
            format!("{:?}: capacity = {:.12} {} per channel use, gap {:.3e}", r.status, base.scale(r.capacity_nats), base.name(), r.duality_gap)
        }
        Command::Sweep => {
            let rows = study::run_sweep(spec, &cfg.powers, n)?;
            let mut csv = header.comment_block();
            csv.push_str("P,capacity,mu,active_fraction\n");
            for row in &rows {
                csv.push_str(&format!(
                    "{:e},{:.15e},{:.15e},{:.15e}\n",
                    row.power,
                    base.scale(row.capacity),
                    row.water_level,
                    row.active_fraction
                ));
                if cfg.oracle {
                    let reference = dense_bisection_capacity(spec, row.power, DEFAULT_DENSE_NODES)?;
                    let rep = OracleReport::new(format!("sweep_P={}", row.power), base.scale(reference), base.scale(row.capacity), 1e-6, true);
                    oracle_lines.push(rep.to_json_line());
                }
            }
            write_atomic(&cfg.out, "sweep.csv", &csv)?;
            files.push("sweep.csv".into());
            format!("{} sweep points", rows.len())
        }
        Command::Converge => {
            let rows = study::run_converge(spec, &parsed.constraints, &cfg.grids, &opts)?;
            let mut csv = header.comment_block();
            csv.push_str("N,capacity,abs_diff\n");
            for row in &rows {
                let diff = row.diff.map(|d| format!("{:.15e}", base.scale(d))).unwrap_or_default();
                csv.push_str(&format!("{},{:.15e},{}\n", row.n, base.scale(row.capacity), diff));
            }
            write_atomic(&cfg.out, "converge.csv", &csv)?;
            files.push("converge.csv".into());
            let c = &parsed.constraints;
            if cfg.oracle && c.pac.is_none() && c.ipc.is_empty() && c.ehc.is_empty() {
                let reference = dense_bisection_capacity(spec, c.tpc.unwrap_or(0.0), DEFAULT_DENSE_NODES)?;
                let last = rows.last().expect("nonempty");
                let rep = OracleReport::new(format!("converge_N={}", last.n), base.scale(reference), base.scale(last.capacity), 1e-6, false);
                oracle_lines.push(rep.to_json_line());
            }
            format!("{} grid sizes", rows.len())
        }
    };

    if !oracle_lines.is_empty() {
        write_atomic(&cfg.out, "oracle.jsonl", &(oracle_lines.join("\n") + "\n"))?;
        files.push("oracle.jsonl".into());
    }
    Ok(Outcome { exit_code, summary, files, warnings })
}
