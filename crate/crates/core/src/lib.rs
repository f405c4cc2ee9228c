//! Capacity of discrete-time Gaussian MIMO channels with memory.
//!
//! The channel `y(t) = sum_tau H(t - tau) x(tau) + xi(t)` is described by
//! finite matrix taps and a colored noise covariance. Everything is moved to
//! the frequency domain on a quadrature grid, where the capacity under a
//! total power budget has a closed-form water-filling solution
//! ([`waterfill`]) and the capacity under joint per-antenna, interference and
//! energy-harvesting constraints is found by dual decomposition
//! ([`joint_solver`]). Capacities are in nats per channel use.

pub mod channel_model;
pub mod cli;
pub mod error;
pub mod joint_solver;
pub mod linalg;
pub mod oracles;
pub mod spectral;
pub mod waterfill;

pub use channel_model::{check_admissibility, AdmissibilityReport, ChannelSpec, Tap};
pub use error::{Error, Result};
pub use joint_solver::{solve_joint, ConstraintSet, JointOptions, JointResult, JointStatus};
pub use spectral::{whiten, whiten_grid, FrequencyGrid, SpectralSample};
pub use waterfill::{solve_tpc, TpcResult};
