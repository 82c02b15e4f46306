//! Monotone (global Lax-Friedrichs) time stepping for the limiting
//! Hamilton-Jacobi equation and its quadratic eikonal forms.
//!
//! The update at each cell is
//!
//! ```text
//! phi <- phi - dt * [ H(x, (D+phi + D-phi)/2) - lambda (D+phi - D-phi)/2 ]
//! ```
//!
//! which is monotone for dt <= dx / (2 lambda) when lambda dominates |dH/dp|.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Domain1D, ScalarField};
use crate::hamiltonian::{closed_h_nonlinear_1d, HamiltonianEvaluator};
use crate::kernel::{adhesion_limit_kernel, directions_1d, kernel_moments, SpeedDistribution};

/// Phase (log-density) profile on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub domain: Domain1D,
    pub values: Vec<f64>,
    pub time: f64,
}

impl PhaseField {
    pub fn new(domain: Domain1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_cells {
            return Err(Error::InvalidConfig("phase field size mismatch".into()));
        }
        Ok(PhaseField {
            domain,
            values,
            time: 0.0,
        })
    }

    pub fn from_fn(domain: Domain1D, f: impl Fn(f64) -> f64) -> Self {
        PhaseField {
            values: domain.centers().iter().map(|&x| f(x)).collect(),
            domain,
            time: 0.0,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    /// One-sided slopes (phi_{i+1} - phi_i)/dx, wrapping when periodic.
    pub fn one_sided_slopes(&self) -> Vec<f64> {
        let n = self.values.len();
        let dx = self.domain.dx();
        let last = if self.domain.periodic { n } else { n - 1 };
        (0..last)
            .map(|i| (self.values[(i + 1) % n] - self.values[i]) / dx)
            .collect()
    }
}

/// Boundary extension used by the scheme's one-sided differences.
#[derive(Debug, Clone)]
pub enum HjBoundary {
    Periodic,
    /// Zero-gradient extension.
    Neumann,
    /// Zero-flux closure [phi U + D grad phi]·n = 0 from the aggregate limit.
    Flux {
        u: ScalarField,
        d: ScalarField,
    },
}

/// Ghost values (left, right) implementing the boundary closure.
pub fn boundary_ghosts(phi: &PhaseField, boundary: &HjBoundary) -> Result<(f64, f64)> {
    let n = phi.values.len();
    let dx = phi.domain.dx();
    match boundary {
        HjBoundary::Periodic => Ok((phi.values[n - 1], phi.values[0])),
        HjBoundary::Neumann => Ok((phi.values[0], phi.values[n - 1])),
        HjBoundary::Flux { u, d } => {
            let (u0, d0) = (u.values[0], d.values[0]);
            let (u1, d1) = (u.values[n - 1], d.values[n - 1]);
            if d0.abs() < 1e-300 {
                return Err(Error::BoundaryDegenerate {
                    x: phi.domain.x_min,
                });
            }
            if d1.abs() < 1e-300 {
                return Err(Error::BoundaryDegenerate {
                    x: phi.domain.x_max,
                });
            }
            // grad phi·n = -phi (U·n) / D at each wall
            let left = phi.values[0] + dx * phi.values[0] * u0 / d0;
            let right = phi.values[n - 1] - dx * phi.values[n - 1] * u1 / d1;
            Ok((left, right))
        }
    }
}

/// One global Lax-Friedrichs step with a caller-supplied Hamiltonian
/// H(cell index, p) and dissipation coefficient lambda.
pub fn step_hj(
    phi: &PhaseField,
    hamiltonian: impl Fn(usize, f64) -> f64,
    lambda: f64,
    dt: f64,
    boundary: &HjBoundary,
) -> Result<PhaseField> {
    let dx = phi.domain.dx();
    if lambda > 0.0 {
        let limit = dx / (2.0 * lambda);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::TimestepTooLarge { dt, limit });
        }
    }
    let n = phi.values.len();
    let (ghost_l, ghost_r) = boundary_ghosts(phi, boundary)?;
    let at = |i: isize| -> f64 {
        if i < 0 {
            ghost_l
        } else if i as usize >= n {
            ghost_r
        } else {
            phi.values[i as usize]
        }
    };
    let mut out = vec![0.0; n];
    for i in 0..n {
        let ii = i as isize;
        let dp = (at(ii + 1) - at(ii)) / dx;
        let dm = (at(ii) - at(ii - 1)) / dx;
        out[i] = phi.values[i] - dt * (hamiltonian(i, 0.5 * (dp + dm)) - 0.5 * lambda * (dp - dm));
    }
    Ok(PhaseField {
        domain: phi.domain,
        values: out,
        time: phi.time + dt,
    })
}

/// Quadratic eikonal step with static drift/covariance fields:
/// H(x, p) = U(x) p + D(x) p^2. The dissipation bound is recomputed from the
/// current gradients.
pub fn step_eikonal(
    phi: &PhaseField,
    u: &ScalarField,
    d: &ScalarField,
    dt: f64,
    boundary: &HjBoundary,
) -> Result<PhaseField> {
    let lambda = eikonal_lambda(phi, u, d, boundary)?;
    step_hj(
        phi,
        |i, p| u.values[i] * p + d.values[i] * p * p,
        lambda,
        dt,
        boundary,
    )
}

/// Lipschitz bound |U| + 2 |D| max|grad phi| for the quadratic Hamiltonian.
pub fn eikonal_lambda(
    phi: &PhaseField,
    u: &ScalarField,
    d: &ScalarField,
    boundary: &HjBoundary,
) -> Result<f64> {
    let n = phi.values.len();
    let dx = phi.domain.dx();
    let (ghost_l, ghost_r) = boundary_ghosts(phi, boundary)?;
    let mut max_grad = (phi.values[0] - ghost_l).abs() / dx;
    max_grad = max_grad.max((ghost_r - phi.values[n - 1]).abs() / dx);
    for w in phi.values.windows(2) {
        max_grad = max_grad.max((w[1] - w[0]).abs() / dx);
    }
    let u_max = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d_max = d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(u_max + 2.0 * d_max * max_grad)
}

/// Quadratic eikonal step for the adhesion case: drift and covariance are
/// the p-dependent moments of the limit kernel G_R.
pub fn step_eikonal_adhesion(
    phi: &PhaseField,
    speed: &SpeedDistribution,
    radius: f64,
    dt: f64,
    boundary: &HjBoundary,
) -> Result<PhaseField> {
    let n = phi.values.len();
    let dx = phi.domain.dx();
    let (ghost_l, ghost_r) = boundary_ghosts(phi, boundary)?;
    let mut max_grad = (phi.values[0] - ghost_l).abs() / dx;
    max_grad = max_grad.max((ghost_r - phi.values[n - 1]).abs() / dx);
    for w in phi.values.windows(2) {
        max_grad = max_grad.max((w[1] - w[0]).abs() / dx);
    }
    let lambda = speed.mean() + 2.0 * speed.second_moment() * max_grad;
    step_hj(
        phi,
        |_, p| {
            let g = adhesion_limit_kernel(speed, directions_1d(), radius, [p, 0.0]);
            let m = kernel_moments(&g);
            m.mean[0] * p + m.cov.xx * p * p
        },
        lambda,
        dt,
        boundary,
    )
}

/// How the HJ driver evaluates H.
#[derive(Debug, Clone)]
pub enum HjHamiltonian {
    /// Closed-form adhesion Hamiltonian (x-independent).
    ClosedNonlinear { speed: f64, mu: f64, radius: f64 },
    /// Precomputed table, linear in p (one row per cell, or a single row for
    /// x-independent Hamiltonians).
    Table(HTable),
    /// Quadratic eikonal with static fields.
    Quadratic { u: ScalarField, d: ScalarField },
    /// Quadratic eikonal with the p-dependent adhesion moments.
    QuadraticAdhesion {
        speed: SpeedDistribution,
        radius: f64,
    },
}

/// Tabulated H over (cell, p) with linear interpolation in p.
#[derive(Debug, Clone)]
pub struct HTable {
    pub p_min: f64,
    pub p_max: f64,
    pub values: Array2<f64>,
}

impl HTable {
    pub fn eval(&self, cell: usize, p: f64) -> f64 {
        let rows = self.values.nrows();
        let row = if rows == 1 { 0 } else { cell.min(rows - 1) };
        let n = self.values.ncols();
        let s = ((p - self.p_min) / (self.p_max - self.p_min) * (n - 1) as f64)
            .clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let w = s - i as f64;
        self.values[(row, i)] * (1.0 - w) + self.values[(row, i + 1)] * w
    }
}

/// Tabulate an evaluator over the domain cells and a uniform p-grid.
pub fn tabulate_h(
    eval: &HamiltonianEvaluator,
    dom: &Domain1D,
    x_dependent: bool,
    p_min: f64,
    p_max: f64,
    n_p: usize,
) -> Result<HTable> {
    let rows = if x_dependent { dom.n_cells } else { 1 };
    let mut values = Array2::zeros((rows, n_p));
    for r in 0..rows {
        let x = if x_dependent { dom.cell_center(r) } else { 0.0 };
        for j in 0..n_p {
            let p = p_min + (p_max - p_min) * j as f64 / (n_p - 1) as f64;
            values[(r, j)] = eval.solve_h(x, [p, 0.0])?;
        }
    }
    Ok(HTable {
        p_min,
        p_max,
        values,
    })
}

#[derive(Debug, Clone)]
pub struct HjConfig {
    pub hamiltonian: HjHamiltonian,
    pub boundary: HjBoundary,
    /// Dissipation coefficient; defaults to the kinematic speed bound U in
    /// the runners. Ignored by the quadratic variant, which recomputes it.
    pub lambda: f64,
    pub t_final: f64,
    pub output_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct HjTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub final_phase: PhaseField,
}

/// March the HJ equation to the final time, recording the phase at the
/// output cadence. The quadratic variants re-derive their dissipation bound
/// from the live gradients, so their step size adapts as profiles steepen.
pub fn run_hj(phi0: &PhaseField, cfg: &HjConfig) -> Result<HjTrajectory> {
    let dx = phi0.domain.dx();
    let mut phi = phi0.clone();
    let live_dt = |phi: &PhaseField| -> Result<f64> {
        let lam = match &cfg.hamiltonian {
            HjHamiltonian::Quadratic { u, d } => eikonal_lambda(phi, u, d, &cfg.boundary)?,
            HjHamiltonian::QuadraticAdhesion { speed, .. } => {
                let max_grad = phi
                    .one_sided_slopes()
                    .iter()
                    .fold(0.0f64, |m, s| m.max(s.abs()));
                speed.mean() + 2.0 * speed.second_moment() * max_grad
            }
            _ => cfg.lambda,
        };
        Ok(dx / (2.0 * lam.max(1e-12)))
    };
    let est_steps = (cfg.t_final / live_dt(&phi)?).ceil().max(1.0) as usize;
    let every = cfg.output_every.unwrap_or_else(|| (est_steps / 200).max(1));
    let mut times = vec![0.0];
    let mut frames = vec![phi.values.clone()];
    let mut k = 0usize;
    while phi.time < cfg.t_final * (1.0 - 1e-12) {
        let dt = live_dt(&phi)?.min(cfg.t_final - phi.time);
        phi = match &cfg.hamiltonian {
            HjHamiltonian::ClosedNonlinear { speed, mu, radius } => step_hj(
                &phi,
                |_, p| closed_h_nonlinear_1d(p, *speed, *mu, *radius),
                cfg.lambda,
                dt,
                &cfg.boundary,
            )?,
            HjHamiltonian::Table(table) => {
                step_hj(&phi, |i, p| table.eval(i, p), cfg.lambda, dt, &cfg.boundary)?
            }
            HjHamiltonian::Quadratic { u, d } => step_eikonal(&phi, u, d, dt, &cfg.boundary)?,
            HjHamiltonian::QuadraticAdhesion { speed, radius } => {
                step_eikonal_adhesion(&phi, speed, *radius, dt, &cfg.boundary)?
            }
        };
        k += 1;
        if k % every == 0 || phi.time >= cfg.t_final * (1.0 - 1e-12) {
            times.push(phi.time);
            frames.push(phi.values.clone());
        }
    }
    Ok(HjTrajectory {
        times,
        frames,
        final_phase: phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn periodic(n: usize) -> Domain1D {
        Domain1D::new(0.0, 1.0, n, true).unwrap()
    }

    fn bounded(n: usize) -> Domain1D {
        Domain1D::new(0.0, 1.0, n, false).unwrap()
    }

    #[test]
    fn constant_phase_is_stationary() {
        let phi = PhaseField::from_fn(periodic(64), |_| 1.7);
        let next = step_hj(
            &phi,
            |_, p| 2.0 * p * p - p,
            1.0,
            0.005,
            &HjBoundary::Periodic,
        )
        .unwrap();
        for v in next.values {
            assert_relative_eq!(v, 1.7, max_relative = 1e-14);
        }
    }

    #[test]
    fn linear_hamiltonian_transports_profile() {
        // H(p) = c p moves the profile right at speed c with O(dx) error.
        let c = 0.7;
        let mut errs = Vec::new();
        for n in [128usize, 256] {
            let dom = periodic(n);
            let profile = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
            let mut phi = PhaseField::from_fn(dom, profile);
            let t_final = 0.25;
            let dt = dom.dx() / (2.0 * c) * 0.9;
            let steps = (t_final / dt).ceil() as usize;
            let dt = t_final / steps as f64;
            for _ in 0..steps {
                phi = step_hj(&phi, |_, p| c * p, c, dt, &HjBoundary::Periodic).unwrap();
            }
            let err: f64 = dom
                .centers()
                .iter()
                .enumerate()
                .map(|(i, &x)| (phi.values[i] - profile(x - c * t_final)).abs())
                .sum::<f64>()
                / n as f64;
            errs.push(err);
        }
        assert!(errs[1] < 0.75 * errs[0], "no first-order decay: {errs:?}");
        assert!(errs[0] < 0.2);
    }

    #[test]
    fn cfl_guard() {
        let phi = PhaseField::from_fn(periodic(32), |x| x);
        let err = step_hj(&phi, |_, p| p, 1.0, 1.0, &HjBoundary::Periodic);
        assert!(matches!(err, Err(Error::TimestepTooLarge { .. })));
    }

    #[test]
    fn monotone_in_neighbor_values() {
        // Raising any stencil input never lowers the output at admissible dt.
        let dom = periodic(16);
        let h = |_: usize, p: f64| 0.8 * p * p - 0.3 * p;
        let lambda = 5.0; // dominates |dH/dp| for the gradients in play
        let dt = dom.dx() / (2.0 * lambda);
        let base = PhaseField::from_fn(dom, |x| (6.0 * x).sin() * 0.4);
        let next = step_hj(&base, h, lambda, dt, &HjBoundary::Periodic).unwrap();
        for j in 0..16 {
            let mut bumped = base.clone();
            bumped.values[j] += 0.01;
            let bn = step_hj(&bumped, h, lambda, dt, &HjBoundary::Periodic).unwrap();
            for i in 0..16 {
                if i == j {
                    continue;
                }
                assert!(
                    bn.values[i] >= next.values[i] - 1e-14,
                    "cell {i} decreased when raising {j}"
                );
            }
        }
    }

    #[test]
    fn max_norm_stable_when_h0_vanishes() {
        let dom = periodic(64);
        let mut phi = PhaseField::from_fn(dom, |x| 0.3 * (12.6 * x).sin());
        let m0 = phi.max_abs();
        for _ in 0..50 {
            phi = step_hj(
                &phi,
                |_, p| p * p / (1.0 + p.abs()),
                1.0,
                dom.dx() / 2.0,
                &HjBoundary::Periodic,
            )
            .unwrap();
            assert!(phi.max_abs() <= m0 + 1e-12);
        }
    }

    #[test]
    fn eikonal_cone_matches_hopf_lax() {
        // dphi/dt + |grad phi|^2 = 0 with an inverted cone: the viscosity
        // solution is the Hopf-Lax envelope, computed here by discrete
        // minimisation as an independent oracle.
        let dom = bounded(400);
        let x0 = 0.5;
        let phi0 = |x: f64| -(x - x0).abs();
        let mut phi = PhaseField::from_fn(dom, phi0);
        let u = ScalarField::constant(dom, 0.0);
        let d = ScalarField::constant(dom, 1.0);
        let t_final = 0.02;
        let mut t = 0.0;
        while t < t_final - 1e-12 {
            let lambda = eikonal_lambda(&phi, &u, &d, &HjBoundary::Neumann)
                .unwrap()
                .max(1e-6);
            let dt = (dom.dx() / (2.0 * lambda)).min(t_final - t);
            phi = step_eikonal(&phi, &u, &d, dt, &HjBoundary::Neumann).unwrap();
            t += dt;
        }
        // Hopf-Lax: phi(t,x) = min_y [ phi0(y) + (x-y)^2 / (4t) ]
        let oracle = |x: f64| {
            dom.centers()
                .iter()
                .map(|&y| phi0(y) + (x - y) * (x - y) / (4.0 * t_final))
                .fold(f64::INFINITY, f64::min)
        };
        // tip decreases at unit rate
        assert_abs_diff_eq!(oracle(x0), -t_final, epsilon = 1e-4);
        for (i, &x) in dom.centers().iter().enumerate() {
            if (x - x0).abs() < 0.3 {
                assert_abs_diff_eq!(phi.values[i], oracle(x), epsilon = 5e-3);
            }
        }
    }

    #[test]
    fn small_gradient_eikonal_agrees_with_full_h() {
        // One step of the quadratic scheme against one step with the full
        // closed-form H differs at cubic order in the gradient.
        let dom = periodic(200);
        let (v, mu, r) = (1.0, 1.0, 0.3);
        let phi = PhaseField::from_fn(dom, |x| 0.01 * (2.0 * std::f64::consts::PI * x).sin());
        let dt = dom.dx() / 4.0;
        // quadratic coefficients of the adhesion H at p = 0
        let u = ScalarField::constant(dom, 0.0);
        let d = ScalarField::constant(dom, v * v / mu - v * r);
        let quad = step_eikonal(&phi, &u, &d, dt, &HjBoundary::Periodic).unwrap();
        let full = step_hj(
            &phi,
            |_, p| closed_h_nonlinear_1d(p, v, mu, r),
            v,
            dt,
            &HjBoundary::Periodic,
        )
        .unwrap();
        let max_p = phi
            .one_sided_slopes()
            .iter()
            .fold(0.0f64, |m, s| m.max(s.abs()));
        assert!(max_p < 0.1);
        for (a, b) in quad.values.iter().zip(full.values.iter()) {
            assert!((a - b).abs() <= 10.0 * dt * max_p.powi(3) + 1e-15);
        }
    }

    #[test]
    fn flux_boundary_reduces_to_neumann() {
        let dom = bounded(50);
        let phi = PhaseField::from_fn(dom, |x| x * x);
        let d = ScalarField::constant(dom, 1.0);
        // zero drift at the walls
        let u = ScalarField::constant(dom, 0.0);
        let (l, r) = boundary_ghosts(&phi, &HjBoundary::Flux { u, d: d.clone() }).unwrap();
        assert_relative_eq!(l, phi.values[0]);
        assert_relative_eq!(r, phi.values[49]);
        // zero phase at the walls behaves the same way
        let mut zero_ends = phi.clone();
        zero_ends.values[0] = 0.0;
        zero_ends.values[49] = 0.0;
        let u2 = ScalarField::constant(dom, 3.0);
        let (l2, r2) = boundary_ghosts(&zero_ends, &HjBoundary::Flux { u: u2, d }).unwrap();
        assert_relative_eq!(l2, 0.0);
        assert_relative_eq!(r2, 0.0);
    }

    #[test]
    fn degenerate_wall_covariance_rejected() {
        let dom = bounded(10);
        let phi = PhaseField::from_fn(dom, |x| x);
        let u = ScalarField::constant(dom, 1.0);
        let d = ScalarField::constant(dom, 0.0);
        assert!(matches!(
            boundary_ghosts(&phi, &HjBoundary::Flux { u, d }),
            Err(Error::BoundaryDegenerate { .. })
        ));
    }

    #[test]
    fn stable_nonlinear_regime_raises_minima() {
        // V/(mu R) = 2: H >= 0, so minima cannot deepen.
        let dom = periodic(200);
        let cfg = HjConfig {
            hamiltonian: HjHamiltonian::ClosedNonlinear {
                speed: 1.0,
                mu: 100.0,
                radius: 0.005,
            },
            boundary: HjBoundary::Periodic,
            lambda: 1.0,
            t_final: 0.05,
            output_every: Some(10),
        };
        let phi0 = PhaseField::from_fn(dom, |x| 0.05 * (2.0 * std::f64::consts::PI * x).cos());
        let traj = run_hj(&phi0, &cfg).unwrap();
        let mins: Vec<f64> = traj
            .frames
            .iter()
            .map(|f| f.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        for pair in mins.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
    }

    #[test]
    fn unstable_nonlinear_regime_strengthens_concentration() {
        // Convex-concave H: the phase rises away from its pinned minima, so
        // the valley walls steepen toward the saw-tooth slope while the
        // minimum itself barely moves.
        let dom = periodic(1000);
        let cfg = HjConfig {
            hamiltonian: HjHamiltonian::ClosedNonlinear {
                speed: 1.0,
                mu: 100.0,
                radius: 0.05,
            },
            boundary: HjBoundary::Periodic,
            lambda: 1.0,
            t_final: 0.08,
            output_every: Some(100),
        };
        let phi0 = PhaseField::from_fn(dom, |x| 2.0 * (2.0 * std::f64::consts::PI * x).cos());
        let traj = run_hj(&phi0, &cfg).unwrap();
        let mean = |f: &Vec<f64>| f.iter().sum::<f64>() / f.len() as f64;
        let min = |f: &Vec<f64>| f.iter().cloned().fold(f64::INFINITY, f64::min);
        let first = traj.frames.first().unwrap();
        let last = traj.frames.last().unwrap();
        assert!(mean(last) > mean(first) + 0.15, "bulk phase should rise");
        assert!(
            min(last) < min(first) + 0.05,
            "minimum should stay pinned while the bulk rises"
        );
    }

    #[test]
    fn table_matches_closed_form() {
        let eval = HamiltonianEvaluator::nonlinear_adhesion(
            SpeedDistribution::Dirac { speed: 1.0 },
            0.05,
            100.0,
            1,
            0,
        )
        .unwrap();
        let dom = periodic(10);
        let table = tabulate_h(&eval, &dom, false, -150.0, 150.0, 2048).unwrap();
        for &p in &[-120.0, -3.0, 0.4, 88.0] {
            assert_abs_diff_eq!(
                table.eval(0, p),
                closed_h_nonlinear_1d(p, 1.0, 100.0, 0.05),
                epsilon = 2e-2
            );
        }
    }
}
