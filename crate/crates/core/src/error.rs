use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel specification: {0}")]
    InvalidSpec(String),

    #[error("noise PSD is singular at theta = {theta:.6} (min eigenvalue {min_eig:.3e})")]
    NoiseSingular { theta: f64, min_eig: f64 },

    #[error("noise covariance taps are inconsistent: PSD eigenvalue {min_eig:.3e} < 0 at theta = {theta:.6}")]
    NoiseIndefinite { theta: f64, min_eig: f64 },

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("every eigenmode at every frequency is singular; nothing can be filled")]
    AllModesSingular,

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("capacity forms disagree: {first} vs {second}")]
    FormMismatch { first: f64, second: f64 },

    #[error("Lagrangian weight matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    MNotPositive { min_eig: f64 },

    #[error("optimal covariance is not rank one at theta = {theta:.6} (residual {residual:.3e})")]
    NotRankOne { theta: f64, residual: f64 },

    #[error("channel is not the single-tap identity")]
    NotIdentityChannel,

    #[error("constraint set is infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded problem: neither a total nor a per-antenna power budget is given")]
    Unbounded,

    #[error("dimension {got} exceeds oracle limit {max}")]
    DimensionTooLarge { got: usize, max: usize },

    #[error("search budget exceeded: {points} grid points > {max}")]
    BudgetExceeded { points: f64, max: f64 },
}
