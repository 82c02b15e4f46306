//! Time integration of the kinetic BGK equation on a 1D grid:
//! upwind transport of every velocity beam, exact exponential relaxation
//! toward the turning-kernel equilibrium, and Maxwellian wall laws.
//!
//! The distribution is stored in node-mass form: `f[(i, d, s)]` already
//! carries the velocity quadrature weight of beam (d, s), so the density is
//! a plain sum over beams and the equilibrium is `rho * t[(d, s)]` with `t`
//! the kernel probability weights.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::grid::{Domain1D, ScalarField};
use crate::kernel::{clipped_radius, KernelSpec, Regime, SensedField, Sensing};
use crate::signal::SignalField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflection {
    /// v̂ -> -v̂ (coincides with specular reflection in 1D).
    BounceBack,
    Specular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundarySpec {
    Periodic,
    /// alpha * reflection + (1 - alpha) * diffuse re-emission.
    Maxwellian {
        alpha: f64,
        reflection: Reflection,
    },
}

impl BoundarySpec {
    pub fn validate(&self, domain: &Domain1D) -> Result<()> {
        match self {
            BoundarySpec::Periodic => {
                if !domain.periodic {
                    return Err(Error::InvalidConfig(
                        "periodic boundary on a bounded domain".into(),
                    ));
                }
            }
            BoundarySpec::Maxwellian { alpha, .. } => {
                if domain.periodic {
                    return Err(Error::InvalidConfig(
                        "wall boundary on a periodic domain".into(),
                    ));
                }
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::InvalidConfig(format!(
                        "wall accommodation alpha = {alpha} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What the turning kernel senses.
#[derive(Debug, Clone)]
pub enum SensedKind {
    Signal(SignalField),
    /// Adhesion: the kernel is rebuilt from the current density every step.
    SelfDensity,
}

/// Distribution over (cell, direction, speed node) at one time.
#[derive(Debug, Clone)]
pub struct KineticState {
    pub domain: Domain1D,
    pub speeds: Vec<f64>,
    pub speed_weights: Vec<f64>,
    pub f: Array3<f64>,
    pub time: f64,
    /// Inflow values at [left, right] walls per (direction, speed node).
    pub ghosts: Option<[Array2<f64>; 2]>,
}

pub const DIR_PLUS: usize = 0;
pub const DIR_MINUS: usize = 1;

impl KineticState {
    pub fn density(&self) -> ScalarField {
        let n = self.domain.n_cells;
        let mut rho = vec![0.0; n];
        for i in 0..n {
            for d in 0..2 {
                for s in 0..self.speeds.len() {
                    rho[i] += self.f[(i, d, s)];
                }
            }
        }
        ScalarField {
            domain: self.domain,
            values: rho,
        }
    }

    pub fn mass(&self) -> f64 {
        self.f.sum() * self.domain.dx()
    }

    pub fn min_value(&self) -> f64 {
        self.f.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Net mass flux v v̂·n at [left, right] walls, combining inflow ghosts
    /// and outflow wall-cell values. Zero for conservative wall laws.
    pub fn wall_flux_residual(&self) -> Option<[f64; 2]> {
        let ghosts = self.ghosts.as_ref()?;
        let n = self.domain.n_cells;
        let mut res = [0.0, 0.0];
        for (s, &v) in self.speeds.iter().enumerate() {
            // left wall: n = -1; incoming beams dir +1, outgoing dir -1
            res[0] += v * self.f[(0, DIR_MINUS, s)] - v * ghosts[0][(DIR_PLUS, s)];
            // right wall: n = +1
            res[1] += v * self.f[(n - 1, DIR_PLUS, s)] - v * ghosts[1][(DIR_MINUS, s)];
        }
        Some(res)
    }
}

/// Kinetic solver configuration.
#[derive(Debug, Clone)]
pub struct KineticConfig {
    pub domain: Domain1D,
    pub kernel: KernelSpec,
    pub sensed: SensedKind,
    pub boundary: BoundarySpec,
    /// Relaxation frequency of the BGK operator.
    pub rate: f64,
    pub cfl: f64,
    pub t_final: f64,
    /// Output every k steps; default max(1, n_steps / 200).
    pub output_every: Option<usize>,
    /// Stop when the relative L1 change of rho per unit time drops below
    /// this rate.
    pub quasi_stationary_rate: Option<f64>,
    /// Record full distribution snapshots at output times.
    pub store_distribution: bool,
    /// Record the relative entropy monitor (signal-driven case only).
    pub track_entropy: bool,
    /// Start with direction-uniform velocities instead of the local kernel
    /// equilibrium.
    pub isotropic_init: bool,
}

impl KineticConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.boundary.validate(&self.domain)?;
        if !(self.rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation rate {} must be positive",
                self.rate
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "CFL number {} outside (0, 1]",
                self.cfl
            )));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidConfig("final time must be positive".into()));
        }
        if matches!(self.kernel.regime, Regime::SmallRExpansion) {
            return Err(Error::InvalidConfig(
                "small-radius expansion kernels are not time-steppable".into(),
            ));
        }
        if matches!(self.sensed, SensedKind::SelfDensity)
            && !matches!(self.kernel.sensing, Sensing::Adhesion)
        {
            return Err(Error::InvalidConfig(
                "self-density runs need adhesion sensing".into(),
            ));
        }
        Ok(())
    }
}

/// Recorded run output.
#[derive(Debug, Clone)]
pub struct KineticTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub distribution_frames: Option<Vec<Array3<f64>>>,
    pub entropy: Option<Vec<f64>>,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub stopped_quasi_stationary: bool,
    pub final_state: KineticState,
}

impl KineticTrajectory {
    pub fn relative_mass_drift(&self) -> f64 {
        ((self.final_mass - self.initial_mass) / self.initial_mass).abs()
    }

    pub fn final_density(&self) -> ScalarField {
        ScalarField {
            domain: self.final_state.domain,
            values: self.frames.last().expect("at least one frame").clone(),
        }
    }
}

pub struct KineticSolver {
    pub config: KineticConfig,
    /// Direction weights per cell for the signal-driven case (fixed signal).
    cached_weights: Option<Vec<[f64; 2]>>,
}

impl KineticSolver {
    pub fn new(config: KineticConfig) -> Result<Self> {
        config.validate()?;
        let cached_weights = match &config.sensed {
            SensedKind::Signal(sig) => {
                Some(direction_profile(&config.kernel, sig, &config.domain)?)
            }
            SensedKind::SelfDensity => None,
        };
        Ok(KineticSolver {
            config,
            cached_weights,
        })
    }

    /// Direction weights per cell against the current density.
    pub fn direction_weights(&self, rho: &ScalarField) -> Result<Vec<[f64; 2]>> {
        match &self.config.sensed {
            SensedKind::Signal(_) => Ok(self.cached_weights.clone().expect("cached for signals")),
            SensedKind::SelfDensity => {
                direction_profile(&self.config.kernel, rho, &self.config.domain)
            }
        }
    }

    /// Initial state for a given density profile: each cell carries either
    /// the local kernel equilibrium or a direction-uniform distribution.
    pub fn initial_state(&self, rho0: &ScalarField) -> Result<KineticState> {
        if rho0.domain != self.config.domain {
            return Err(Error::InvalidConfig(
                "initial density lives on a different grid".into(),
            ));
        }
        if rho0.values.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidConfig("initial density negative".into()));
        }
        let weights = if self.config.isotropic_init {
            vec![[0.5, 0.5]; self.config.domain.n_cells]
        } else {
            self.direction_weights(rho0)?
        };
        let (speeds, speed_weights) = self.config.kernel.speed.nodes();
        let n = self.config.domain.n_cells;
        let mut f = Array3::zeros((n, 2, speeds.len()));
        for i in 0..n {
            for d in 0..2 {
                for (s, ws) in speed_weights.iter().enumerate() {
                    f[(i, d, s)] = rho0.values[i] * weights[i][d] * ws;
                }
            }
        }
        let mut state = KineticState {
            domain: self.config.domain,
            speeds,
            speed_weights,
            f,
            time: 0.0,
            ghosts: None,
        };
        self.apply_boundary(&mut state)?;
        Ok(state)
    }

    pub fn max_speed(&self) -> f64 {
        self.config
            .kernel
            .speed
            .nodes()
            .0
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn stable_dt(&self) -> f64 {
        let c = self.max_speed();
        if c == 0.0 {
            f64::INFINITY
        } else {
            self.config.cfl * self.config.domain.dx() / c
        }
    }

    /// Refresh wall inflow ghosts from the current outgoing beams. The wall
    /// law redistributes exactly the outgoing mass flux, so the net wall flux
    /// vanishes identically.
    pub fn apply_boundary(&self, state: &mut KineticState) -> Result<()> {
        let alpha = match self.config.boundary {
            BoundarySpec::Periodic => {
                state.ghosts = None;
                return Ok(());
            }
            BoundarySpec::Maxwellian { alpha, .. } => alpha,
        };
        let n = state.domain.n_cells;
        let n_s = state.speeds.len();
        let v_mean: f64 = state
            .speeds
            .iter()
            .zip(&state.speed_weights)
            .map(|(v, w)| v * w)
            .sum();
        let mut left = Array2::zeros((2, n_s));
        let mut right = Array2::zeros((2, n_s));
        let mut j_left = 0.0;
        let mut j_right = 0.0;
        for (s, &v) in state.speeds.iter().enumerate() {
            j_left += v * state.f[(0, DIR_MINUS, s)];
            j_right += v * state.f[(n - 1, DIR_PLUS, s)];
        }
        for (s, &_v) in state.speeds.iter().enumerate() {
            // diffuse part re-emits the outgoing flux with the speed profile
            // of psi, flux-normalised
            let diffuse = if v_mean > 0.0 {
                state.speed_weights[s] / v_mean
            } else {
                0.0
            };
            left[(DIR_PLUS, s)] =
                alpha * state.f[(0, DIR_MINUS, s)] + (1.0 - alpha) * j_left * diffuse;
            left[(DIR_MINUS, s)] = state.f[(0, DIR_MINUS, s)];
            right[(DIR_MINUS, s)] =
                alpha * state.f[(n - 1, DIR_PLUS, s)] + (1.0 - alpha) * j_right * diffuse;
            right[(DIR_PLUS, s)] = state.f[(n - 1, DIR_PLUS, s)];
        }
        state.ghosts = Some([left, right]);
        Ok(())
    }

    /// One step: upwind transport of every beam, then exact relaxation
    /// toward the kernel equilibrium built at the start of the step.
    pub fn step(&self, state: &mut KineticState, dt: f64) -> Result<()> {
        let dx = state.domain.dx();
        let limit = self.stable_dt();
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::TimestepTooLarge { dt, limit });
        }
        let weights = self.direction_weights(&state.density())?;

        self.apply_boundary(state)?;
        let n = state.domain.n_cells;
        let n_s = state.speeds.len();
        let periodic = state.domain.periodic;
        let mut shifted = vec![0.0; n];
        for d in 0..2 {
            let sign = if d == DIR_PLUS { 1.0 } else { -1.0 };
            for s in 0..n_s {
                let c = sign * state.speeds[s];
                if c == 0.0 {
                    continue;
                }
                let nu = c.abs() * dt / dx;
                if c > 0.0 {
                    for i in 0..n {
                        let upstream = if i == 0 {
                            if periodic {
                                state.f[(n - 1, d, s)]
                            } else {
                                state.ghosts.as_ref().expect("bounded has ghosts")[0][(d, s)]
                            }
                        } else {
                            state.f[(i - 1, d, s)]
                        };
                        shifted[i] = state.f[(i, d, s)] - nu * (state.f[(i, d, s)] - upstream);
                    }
                } else {
                    for i in 0..n {
                        let upstream = if i == n - 1 {
                            if periodic {
                                state.f[(0, d, s)]
                            } else {
                                state.ghosts.as_ref().expect("bounded has ghosts")[1][(d, s)]
                            }
                        } else {
                            state.f[(i + 1, d, s)]
                        };
                        shifted[i] = state.f[(i, d, s)] - nu * (state.f[(i, d, s)] - upstream);
                    }
                }
                for i in 0..n {
                    state.f[(i, d, s)] = shifted[i];
                }
            }
        }

        // exact relaxation: f <- rho t + (f - rho t) exp(-rate dt)
        let decay = (-self.config.rate * dt).exp();
        let rho = state.density();
        for i in 0..n {
            for d in 0..2 {
                for s in 0..n_s {
                    let eq = rho.values[i] * weights[i][d] * state.speed_weights[s];
                    let v = state.f[(i, d, s)];
                    state.f[(i, d, s)] = eq + (v - eq) * decay;
                }
            }
        }

        let min = state.min_value();
        if min < -1e-12 * state.f.iter().cloned().fold(0.0, f64::max) - 1e-300 {
            return Err(Error::SchemeFailure {
                what: "negative distribution value",
                t: state.time,
            });
        }
        if !state.f.iter().all(|v| v.is_finite()) {
            return Err(Error::SchemeFailure {
                what: "non-finite distribution value",
                t: state.time,
            });
        }
        state.time += dt;
        Ok(())
    }

    pub fn run(&self, rho0: &ScalarField) -> Result<KineticTrajectory> {
        let mut state = self.initial_state(rho0)?;
        let dt_cap = self.stable_dt();
        if !dt_cap.is_finite() {
            return Err(Error::InvalidConfig(
                "all speeds vanish; nothing to integrate".into(),
            ));
        }
        let n_steps = (self.config.t_final / dt_cap).ceil().max(1.0) as usize;
        let dt = self.config.t_final / n_steps as f64;
        let every = self
            .config
            .output_every
            .unwrap_or_else(|| (n_steps / 200).max(1));

        let initial_mass = state.mass();
        let mut times = vec![0.0];
        let mut frames = vec![state.density().values];
        let mut dist_frames = if self.config.store_distribution {
            Some(vec![state.f.clone()])
        } else {
            None
        };
        let track_entropy =
            self.config.track_entropy && matches!(self.config.sensed, SensedKind::Signal(_));
        let mut entropy = if track_entropy {
            let w = self.direction_weights(&state.density())?;
            Some(vec![relative_entropy(&state, &w)?])
        } else {
            None
        };

        let mut stopped = false;
        let mut step_idx = 0usize;
        while step_idx < n_steps {
            self.step(&mut state, dt)?;
            step_idx += 1;
            if step_idx % every == 0 || step_idx == n_steps {
                let rho = state.density();
                if let Some(ref mut e) = entropy {
                    let w = self.direction_weights(&rho)?;
                    e.push(relative_entropy(&state, &w)?);
                }
                if let Some(ref mut dts) = dist_frames {
                    dts.push(state.f.clone());
                }
                let prev = frames.last().expect("nonempty");
                let prev_t = *times.last().expect("nonempty");
                let l1: f64 = rho
                    .values
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                let scale: f64 = rho.values.iter().sum::<f64>().max(f64::MIN_POSITIVE);
                let rate = l1 / scale / (state.time - prev_t);
                times.push(state.time);
                frames.push(rho.values);
                if let Some(qs) = self.config.quasi_stationary_rate {
                    if rate < qs {
                        stopped = true;
                        break;
                    }
                }
            }
        }

        let final_mass = state.mass();
        Ok(KineticTrajectory {
            times,
            frames,
            distribution_frames: dist_frames,
            entropy,
            initial_mass,
            final_mass,
            stopped_quasi_stationary: stopped,
            final_state: state,
        })
    }
}

/// Normalised direction weights (w+, w-) at every cell center.
pub fn direction_profile(
    spec: &KernelSpec,
    field: &dyn SensedField,
    dom: &Domain1D,
) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(dom.n_cells);
    let localized = matches!(spec.regime, Regime::LocalHyp);
    if localized && !matches!(spec.sensing, Sensing::Comparative { .. }) {
        out.resize(dom.n_cells, [0.5, 0.5]);
        return Ok(out);
    }
    for x in dom.centers() {
        let (bp, bm) = match spec.sensing {
            Sensing::LinearId | Sensing::Adhesion => {
                let lp = clipped_radius(dom, x, 1.0, spec.radius);
                let lm = clipped_radius(dom, x, -1.0, spec.radius);
                (field.value(x + lp)?, field.value(x - lm)?)
            }
            Sensing::Comparative { alpha, beta, k } if localized => {
                // fast-adaptation limit keeps the directional derivative
                let s = field.value(x)?;
                let g = field.slope(x);
                let b = |dir: f64| alpha + beta * spec.radius * g * dir / (k + s);
                (b(1.0), b(-1.0))
            }
            Sensing::Comparative { alpha, beta, k } => {
                let lam = clipped_radius(dom, x, 1.0, spec.radius).min(clipped_radius(
                    dom,
                    x,
                    -1.0,
                    spec.radius,
                ));
                let ahead = field.value(x + lam)?;
                let behind = field.value(x - lam)?;
                let b = |fw: f64, bw: f64| alpha + beta * (bw - fw) / (2.0 * k + fw + bw);
                (b(ahead, behind), b(behind, ahead))
            }
        };
        let total = bp + bm;
        if !(total > 0.0) || bp < 0.0 || bm < 0.0 {
            return Err(Error::DegenerateKernel { x });
        }
        out.push([bp / total, bm / total]);
    }
    Ok(out)
}

/// Relative entropy of f against its local equilibrium rho T:
/// integral of u ln u weighted by rho T, with u = f / (rho T).
pub fn relative_entropy(state: &KineticState, dir_weights: &[[f64; 2]]) -> Result<f64> {
    let n = state.domain.n_cells;
    let mut total = 0.0;
    let rho = state.density();
    for i in 0..n {
        if rho.values[i] <= 0.0 {
            continue;
        }
        for d in 0..2 {
            for s in 0..state.speeds.len() {
                let t = dir_weights[i][d] * state.speed_weights[s];
                let f = state.f[(i, d, s)];
                if f <= 0.0 {
                    continue;
                }
                if t <= 0.0 {
                    return Err(Error::SupportMismatch);
                }
                // f (ln f - ln rho t): stays finite when rho t underflows
                total += f * (f.ln() - (rho.values[i].ln() + t.ln()));
            }
        }
    }
    Ok(total * state.domain.dx())
}
