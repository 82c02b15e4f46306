use kinotaxis_core::grid::{Domain1D, ScalarField};
use kinotaxis_core::kernel::*;
use kinotaxis_core::kinetic::*;
use kinotaxis_core::signal::SignalField;

fn main() {
    let dom = Domain1D::new(0.0, 1.0, 1000, false).unwrap();
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
            reflection: Reflection::BounceBack,
        },
        rate: 1.0,
        cfl: 0.9,
        t_final: 100.0,
        output_every: Some(1),
        quasi_stationary_rate: None,
        store_distribution: false,
        track_entropy: true,
        isotropic_init: true,
    };
    let solver = KineticSolver::new(cfg).unwrap();
    let w = solver
        .direction_weights(&ScalarField::constant(dom, 0.1))
        .unwrap();
    let minw = w
        .iter()
        .map(|p| p[0].min(p[1]))
        .fold(f64::INFINITY, f64::min);
    println!("min direction weight = {minw:.3e}");
    let rho0 = ScalarField::constant(dom, 0.1);
    match solver.run(&rho0) {
        Ok(t) => println!("ok, entropy[0..3] = {:?}", &t.entropy.unwrap()[0..3]),
        Err(e) => println!("ERR: {e}"),
    }
}
