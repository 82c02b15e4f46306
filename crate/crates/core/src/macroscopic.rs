//! Conservative finite-volume solvers for the aggregate density equations:
//! the dominant-drift conservation law, its small-diffusivity correction,
//! the diffusive limits and the small-radius Keller-Segel model.
//!
//! All models share one flux assembly: upwind advection plus central
//! differences for the diffusion terms, with wall fluxes forced to zero on
//! bounded domains so the discrete mass telescopes exactly.

use crate::error::{Error, Result};
use crate::grid::{Domain1D, ScalarField};
use crate::kernel::{KernelSpec, SensedField};
use crate::kinetic::direction_profile;
use crate::signal::SignalField;

/// Drift and covariance profiles (U_S, D_S as scalars in 1D) of a kernel
/// spec against a sensed field.
pub fn moment_profiles(
    spec: &KernelSpec,
    field: &dyn SensedField,
    dom: &Domain1D,
) -> Result<(ScalarField, ScalarField)> {
    let weights = direction_profile(spec, field, dom)?;
    let v_mean = spec.speed.mean();
    let d2 = spec.speed.second_moment();
    let mut u = Vec::with_capacity(dom.n_cells);
    let mut d = Vec::with_capacity(dom.n_cells);
    for w in weights {
        let drift = v_mean * (w[0] - w[1]);
        u.push(drift);
        d.push(d2 - drift * drift);
    }
    Ok((
        ScalarField {
            domain: *dom,
            values: u,
        },
        ScalarField {
            domain: *dom,
            values: d,
        },
    ))
}

#[derive(Debug, Clone)]
pub enum MacroModel {
    /// Conservation law with the epsilon-scaled diffusion correction:
    /// flux = rho U - eps (d(D rho)/dx + rho U dU/dx).
    LinearAggregate {
        u: ScalarField,
        d: ScalarField,
        epsilon: f64,
        drift_correction: bool,
    },
    /// Pure conservation law, flux = rho U.
    Conservation { u: ScalarField },
    /// Diffusive limit keeping the nonlocal drift: flux = rho U - d(D rho)/dx.
    DiffusiveNonlocal { u: ScalarField, d: ScalarField },
    /// Localised diffusive limit with first-order drift U1 and covariance D0.
    DiffusiveLocal { u1: ScalarField, d0: ScalarField },
    /// Small-radius limit: drift R S'/S, unit diffusion.
    KellerSegel { signal: SignalField, radius: f64 },
    /// Adhesion aggregate: drift/covariance rebuilt from the current density
    /// each step; aborts when gradients leave the smooth regime.
    NonlinearAggregate {
        spec: KernelSpec,
        epsilon: f64,
        drift_correction: bool,
        /// abort when eps * max |grad rho| / rho exceeds this
        concentration_guard: f64,
    },
}

#[derive(Debug, Clone)]
pub struct MacroState {
    pub rho: ScalarField,
    pub time: f64,
}

pub struct MacroSolver {
    pub domain: Domain1D,
    pub model: MacroModel,
    pub cfl: f64,
}

struct Coeffs {
    u: Vec<f64>,
    d: Vec<f64>,
    /// multiplier on the diffusion flux (epsilon or 1)
    diffusion_scale: f64,
    drift_correction: bool,
}

impl MacroSolver {
    pub fn new(domain: Domain1D, model: MacroModel, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidConfig(format!("CFL {cfl} outside (0, 1]")));
        }
        Ok(MacroSolver { domain, model, cfl })
    }

    fn coefficients(&self, rho: &ScalarField) -> Result<Coeffs> {
        match &self.model {
            MacroModel::LinearAggregate {
                u,
                d,
                epsilon,
                drift_correction,
            } => Ok(Coeffs {
                u: u.values.clone(),
                d: d.values.clone(),
                diffusion_scale: *epsilon,
                drift_correction: *drift_correction,
            }),
            MacroModel::Conservation { u } => Ok(Coeffs {
                u: u.values.clone(),
                d: vec![0.0; self.domain.n_cells],
                diffusion_scale: 0.0,
                drift_correction: false,
            }),
            MacroModel::DiffusiveNonlocal { u, d } => Ok(Coeffs {
                u: u.values.clone(),
                d: d.values.clone(),
                diffusion_scale: 1.0,
                drift_correction: false,
            }),
            MacroModel::DiffusiveLocal { u1, d0 } => Ok(Coeffs {
                u: u1.values.clone(),
                d: d0.values.clone(),
                diffusion_scale: 1.0,
                drift_correction: false,
            }),
            MacroModel::KellerSegel { signal, radius } => {
                let mut u = Vec::with_capacity(self.domain.n_cells);
                for x in self.domain.centers() {
                    u.push(radius * signal.gradient(x) / signal.eval(x)?);
                }
                Ok(Coeffs {
                    u,
                    d: vec![1.0; self.domain.n_cells],
                    diffusion_scale: 1.0,
                    drift_correction: false,
                })
            }
            MacroModel::NonlinearAggregate {
                spec,
                epsilon,
                drift_correction,
                ..
            } => {
                let (u, d) = moment_profiles(spec, rho, &self.domain)?;
                Ok(Coeffs {
                    u: u.values,
                    d: d.values,
                    diffusion_scale: *epsilon,
                    drift_correction: *drift_correction,
                })
            }
        }
    }

    /// Largest admissible dt for the current state (advective and diffusive
    /// bounds combined).
    pub fn stable_dt(&self, state: &MacroState) -> Result<f64> {
        let c = self.coefficients(&state.rho)?;
        let dx = self.domain.dx();
        let u_max = c.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d_max = c.d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // the drift correction acts like extra advection
        let du_max = if c.drift_correction {
            c.u.windows(2)
                .map(|w| (w[1] - w[0]).abs() / dx)
                .fold(0.0f64, f64::max)
        } else {
            0.0
        };
        let advective = u_max + c.diffusion_scale * u_max * du_max * dx;
        // positivity needs the advective and diffusive fractions combined
        let rate = advective / dx + 2.0 * c.diffusion_scale * d_max / (dx * dx);
        Ok(if rate > 0.0 {
            self.cfl / rate
        } else {
            f64::INFINITY
        })
    }

    /// One conservative step.
    pub fn step(&self, state: &mut MacroState, dt: f64) -> Result<()> {
        let limit = self.stable_dt(state)?;
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::TimestepTooLarge { dt, limit });
        }
        let c = self.coefficients(&state.rho)?;
        if let MacroModel::NonlinearAggregate {
            epsilon,
            concentration_guard,
            ..
        } = &self.model
        {
            let dx = self.domain.dx();
            let mut worst = 0.0f64;
            for w in state.rho.values.windows(2) {
                let avg = 0.5 * (w[0] + w[1]);
                if avg > 0.0 {
                    worst = worst.max((w[1] - w[0]).abs() / dx / avg);
                }
            }
            if epsilon * worst > *concentration_guard {
                return Err(Error::ConcentrationDetected { t: state.time });
            }
        }

        let n = self.domain.n_cells;
        let dx = self.domain.dx();
        let rho = &state.rho.values;
        // face f sits between cells f-1 and f; faces 0 and n touch the walls
        let mut flux = vec![0.0; n + 1];
        let wrap = |i: isize| -> usize { i.rem_euclid(n as isize) as usize };
        let face_range = if self.domain.periodic { 0..n } else { 1..n };
        for f in face_range {
            let il = wrap(f as isize - 1);
            let ir = f % n;
            let u_face = 0.5 * (c.u[il] + c.u[ir]);
            let upwind = if u_face >= 0.0 { rho[il] } else { rho[ir] };
            let mut total = u_face * upwind;
            if c.diffusion_scale != 0.0 {
                let mut diffusive = (c.d[ir] * rho[ir] - c.d[il] * rho[il]) / dx;
                if c.drift_correction {
                    let rho_face = 0.5 * (rho[il] + rho[ir]);
                    let du = (c.u[ir] - c.u[il]) / dx;
                    diffusive += rho_face * u_face * du;
                }
                total -= c.diffusion_scale * diffusive;
            }
            flux[f] = total;
        }
        if self.domain.periodic {
            flux[n] = flux[0];
        } else {
            apply_macro_boundary(&mut flux, &self.domain);
        }
        for i in 0..n {
            state.rho.values[i] -= dt / dx * (flux[i + 1] - flux[i]);
        }
        let min = state
            .rho
            .values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-12 * state.rho.max().abs() - 1e-300 {
            return Err(Error::SchemeFailure {
                what: "negative density",
                t: state.time,
            });
        }
        state.time += dt;
        Ok(())
    }

    /// March to the final time; outputs at the given cadence.
    pub fn run(
        &self,
        rho0: &ScalarField,
        t_final: f64,
        output_every: Option<usize>,
        quasi_stationary_rate: Option<f64>,
    ) -> Result<MacroTrajectory> {
        let mut state = MacroState {
            rho: rho0.clone(),
            time: 0.0,
        };
        let dt_cap = self.stable_dt(&state)?;
        if !dt_cap.is_finite() {
            return Err(Error::InvalidConfig("degenerate macro model".into()));
        }
        let n_steps = (t_final / dt_cap).ceil().max(1.0) as usize;
        let dt = t_final / n_steps as f64;
        let every = output_every.unwrap_or_else(|| (n_steps / 200).max(1));
        let initial_mass = state.rho.mass();
        let mut times = vec![0.0];
        let mut frames = vec![state.rho.values.clone()];
        let mut stopped = false;
        for k in 1..=n_steps {
            self.step(&mut state, dt)?;
            if k % every == 0 || k == n_steps {
                let prev = frames.last().expect("nonempty");
                let prev_t = *times.last().expect("nonempty");
                let l1: f64 = state
                    .rho
                    .values
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                let scale: f64 = state.rho.values.iter().sum::<f64>().max(f64::MIN_POSITIVE);
                times.push(state.time);
                frames.push(state.rho.values.clone());
                if let Some(qs) = quasi_stationary_rate {
                    if l1 / scale / (state.time - prev_t) < qs {
                        stopped = true;
                        break;
                    }
                }
            }
        }
        Ok(MacroTrajectory {
            times,
            frames,
            initial_mass,
            final_mass: state.rho.mass(),
            stopped_quasi_stationary: stopped,
            final_state: state,
        })
    }
}

/// Zero the wall fluxes of a bounded domain: no-flux closure of the
/// conservation law and of its diffusive correction.
pub fn apply_macro_boundary(fluxes: &mut [f64], domain: &Domain1D) {
    if !domain.periodic {
        fluxes[0] = 0.0;
        *fluxes.last_mut().expect("nonempty") = 0.0;
    }
}

#[derive(Debug, Clone)]
pub struct MacroTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub stopped_quasi_stationary: bool,
    pub final_state: MacroState,
}

impl MacroTrajectory {
    pub fn relative_mass_drift(&self) -> f64 {
        ((self.final_mass - self.initial_mass) / self.initial_mass).abs()
    }

    pub fn final_density(&self) -> ScalarField {
        self.final_state.rho.clone()
    }
}
