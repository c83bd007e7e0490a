//! Pseudo-spectral solver for the nonlocal Cahn-Hilliard-Navier-Stokes
//! system on a periodic box, with tangent and adjoint solvers for
//! distributed optimal control.
//!
//! Everything is generic over the scalar type [`Real`] (`f32` or `f64`);
//! the aliases at the crate root fix it to `f64`, which is what all
//! tolerances in the test suites assume.

pub mod adjoint;
pub mod error;
pub mod field;
pub mod forward;
pub mod io;
pub mod optimize;
pub mod physics;
pub mod random;
pub mod scalar;
pub mod second_order;
mod scheme;
pub mod tangent;
pub mod verify;

pub use error::{Error, Result};
pub use forward::{
    default_stabilization, diagnostics, solve_forward, step, DiagnosticsRow, ForwardFailure,
};
pub use scalar::Real;
pub use optimize::{
    cost, gradient_check, hamiltonian_gap, optimality_residual, optimize, reduced_gradient, CostReport,
    OptimOptions,
};
pub use second_order::{curvature_fd, curvature_study, feasible_difference, quadratic_form, CurvatureRow};
pub use tangent::solve_tangent;
pub use adjoint::solve_adjoint;

/// Double-precision aliases.
pub type Grid = field::Grid<f64>;
pub type ScalarField = field::ScalarField<f64>;
pub type VectorField = field::VectorField<f64>;
pub type Kernel = physics::Kernel<f64>;
pub type KernelSpec = physics::KernelSpec<f64>;
pub type Potential = physics::Potential<f64>;
pub type SolverConfig = forward::SolverConfig<f64>;
pub type State = forward::State<f64>;
pub type Control = forward::Control<f64>;
pub type Trajectory = forward::Trajectory<f64>;
pub type TargetSpec = adjoint::TargetSpec<f64>;
pub type ControlProblem = optimize::ControlProblem<f64>;
pub type OptimReport = optimize::OptimReport<f64>;
pub type TangentState = tangent::TangentState<f64>;
pub type AdjointState = adjoint::AdjointState<f64>;

/// Single-precision aliases.
pub mod single {
    pub type Grid = crate::field::Grid<f32>;
    pub type ScalarField = crate::field::ScalarField<f32>;
    pub type VectorField = crate::field::VectorField<f32>;
    pub type Kernel = crate::physics::Kernel<f32>;
    pub type Potential = crate::physics::Potential<f32>;
    pub type SolverConfig = crate::forward::SolverConfig<f32>;
    pub type State = crate::forward::State<f32>;
    pub type Control = crate::forward::Control<f32>;
    pub type Trajectory = crate::forward::Trajectory<f32>;
}

/// Sizes the global worker pool from `CHNS_THREADS` (default: all cores).
/// Returns the number of workers; later calls keep the first setting.
pub fn init_threads() -> usize {
    let requested = std::env::var("CHNS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested {
        b = b.num_threads(n);
    }
    let _ = b.build_global();
    rayon::current_num_threads()
}
