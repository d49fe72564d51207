//! Cubature construction and verification.

pub mod flow;
pub mod kernel;
pub mod mz;
pub mod residual;
pub mod rule;
pub mod smooth;
pub mod solver;
pub mod verify;

pub use flow::{default_eps, flow_run, stiff_steps, FlowParams, Trajectory};
pub use kernel::{kernel_psi, kernel_w, riesz_coefficients, KernelSpace};
pub use mz::{mz_ratio_algebraic, mz_ratio_diffusion, mz_sweep, MzIntegrator, MzMode, MzRow, MzSweep};
pub use residual::{residual_vector, Residual};
pub use rule::{CubatureRule, SCHEMA_VERSION};
pub use smooth::{cutoff_h, smooth_step, SmootherV};
pub use solver::{build_space, polish, restart_seeds, solve, solve_in, FlowConfig, SolverMode};
pub use verify::{verify_rule, RuleReport};
