//! Kinetic transport models of cell migration with nonlocal turning kernels,
//! their aggregate (drift-diffusion) limits, effective Hamiltonians and the
//! Hamilton-Jacobi / eikonal equations governing concentration profiles.
//!
//! The crate is organised around the pipeline
//!
//! ```text
//! signal S(x) ── turning kernel T[S] ── kinetic BGK solver ── density rho(t,x)
//!                      │                                          │
//!                      ├── moments U_S, D_S ── macroscopic solver │
//!                      │                                          │
//!                      └── effective Hamiltonian H(x,p) ── HJ/eikonal solver
//!                                                          └── peak / slope analysis
//! ```
//!
//! All solvers are 1D in space; Hamiltonian evaluation additionally supports
//! planar (2D) velocity sets.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod hj;
pub mod kernel;
pub mod kinetic;
pub mod macroscopic;
pub mod quad;
pub mod signal;

pub use error::{Error, Result};
pub use grid::{Domain1D, ScalarField};
pub use hamiltonian::{
    closed_h_linear_1d, closed_h_nonlinear_1d, sawtooth_slope, stability_report,
    HamiltonianEvaluator, LinearFormulaVersion, Stability, StabilityReport,
};
pub use hj::PhaseField;
pub use kernel::{
    build_kernel, clipped_radius, kernel_moments, limit_kernel, DiscreteKernel, KernelMoments,
    KernelSpec, Regime, Sensing, SpeedDistribution, SymMat2, Vec2,
};
pub use kinetic::{
    BoundarySpec, KineticConfig, KineticSolver, KineticState, KineticTrajectory, Reflection,
};
pub use macroscopic::{MacroModel, MacroSolver, MacroState};
pub use signal::SignalField;
