//! Shared setups for the solver benchmarks.

use kinotaxis_core::grid::{Domain1D, ScalarField};
use kinotaxis_core::kernel::{KernelSpec, Regime, Sensing, SpeedDistribution};
use kinotaxis_core::kinetic::{BoundarySpec, KineticConfig, KineticSolver, SensedKind};
use kinotaxis_core::signal::SignalField;

pub fn adhesion_solver(n_cells: usize) -> (KineticSolver, ScalarField) {
    let dom = Domain1D::new(0.0, 1.0, n_cells, true).unwrap();
    let cfg = KineticConfig {
        domain: dom,
        kernel: KernelSpec {
            sensing: Sensing::Adhesion,
            radius: 0.05,
            speed: SpeedDistribution::Dirac { speed: 1.0 },
            regime: Regime::NonlocalHyp,
        },
        sensed: SensedKind::SelfDensity,
        boundary: BoundarySpec::Periodic,
        rate: 100.0,
        cfl: 0.9,
        t_final: 1.0,
        output_every: None,
        quasi_stationary_rate: None,
        store_distribution: false,
        track_entropy: false,
        isotropic_init: false,
    };
    let solver = KineticSolver::new(cfg).unwrap();
    let rho0 = ScalarField::from_fn(dom, |x| {
        1.0 + 0.01 * (2.0 * std::f64::consts::PI * 4.0 * x).cos()
    });
    (solver, rho0)
}

pub fn linear_signal_solver(n_cells: usize) -> (KineticSolver, ScalarField) {
    let dom = Domain1D::new(0.0, 1.0, n_cells, false).unwrap();
    let cfg = KineticConfig {
        domain: dom,
        kernel: KernelSpec {
            sensing: Sensing::LinearId,
            radius: 0.01,
            speed: SpeedDistribution::Uniform {
                max: 5e-5,
                n_nodes: 8,
            },
            regime: Regime::NonlocalHyp,
        },
        sensed: SensedKind::Signal(SignalField::gaussian(1.0, 1.0, 0.05)),
        boundary: BoundarySpec::Maxwellian {
            alpha: 0.0,
            reflection: kinotaxis_core::kinetic::Reflection::BounceBack,
        },
        rate: 1.0,
        cfl: 0.9,
        t_final: 1.0,
        output_every: None,
        quasi_stationary_rate: None,
        store_distribution: false,
        track_entropy: false,
        isotropic_init: false,
    };
    let solver = KineticSolver::new(cfg).unwrap();
    let rho0 = ScalarField::constant(dom, 0.1);
    (solver, rho0)
}
