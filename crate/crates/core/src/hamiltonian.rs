//! The effective Hamiltonian H(x,p) of the high-frequency limit.
//!
//! H is the principal eigenvalue of the velocity-space relaxation operator at
//! frozen (x,p), characterised implicitly by
//!
//! ```text
//! 1 = mu * sum_k  w_k / (mu + H - v_k v̂_k·p)
//! ```
//!
//! where w_k are the limit-kernel weights: the x-dependent turning kernel in
//! the signal-driven case, the p-dependent kernel G_R in the adhesion case.
//! The root is bracketed between the denominator-vanishing value and the
//! kinematic bound U|p| and solved by bisection plus Newton polish.

use crate::error::{Error, Result};
use crate::grid::Domain1D;
use crate::kernel::{
    adhesion_limit_kernel, directions_1d, directions_2d, dot, limit_kernel, norm, DiscreteKernel,
    KernelSpec, SpeedDistribution, SymMat2, Vec2,
};
use crate::signal::SignalField;

/// Default number of angular nodes for planar velocity sets.
pub const DEFAULT_ANGLES_2D: usize = 64;

const ROOT_TOL: f64 = 1e-12;
const GRAD_STEP: f64 = 1e-5;
const HESS_STEP: f64 = 3e-4;

#[derive(Debug, Clone)]
enum EvalKind {
    /// Kernel rebuilt from the signal at every position (regime-aware).
    Linear {
        spec: KernelSpec,
        signal: SignalField,
        domain: Domain1D,
    },
    /// Adhesion limit kernel, rebuilt at every covector p.
    NonlinearAdhesion {
        speed: SpeedDistribution,
        radius: f64,
        dirs: Vec<Vec2>,
    },
    /// A frozen kernel, independent of x and p.
    Fixed(DiscreteKernel),
}

#[derive(Debug, Clone)]
pub struct HamiltonianEvaluator {
    kind: EvalKind,
    /// Relaxation rate; the unit-rate formulas are the mu = 1 case.
    pub mu: f64,
    /// Spatial dimension of the covector (1 or 2).
    pub dim: usize,
}

impl HamiltonianEvaluator {
    pub fn linear(
        spec: KernelSpec,
        signal: SignalField,
        domain: Domain1D,
        mu: f64,
    ) -> Result<Self> {
        spec.validate()?;
        if !(mu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation rate {mu} invalid"
            )));
        }
        Ok(HamiltonianEvaluator {
            kind: EvalKind::Linear {
                spec,
                signal,
                domain,
            },
            mu,
            dim: 1,
        })
    }

    pub fn nonlinear_adhesion(
        speed: SpeedDistribution,
        radius: f64,
        mu: f64,
        dim: usize,
        n_angles: usize,
    ) -> Result<Self> {
        speed.validate()?;
        if !(mu > 0.0) || radius < 0.0 {
            return Err(Error::InvalidConfig(
                "adhesion Hamiltonian needs mu > 0, R >= 0".into(),
            ));
        }
        let dirs = match dim {
            1 => directions_1d(),
            2 => directions_2d(n_angles),
            _ => return Err(Error::InvalidConfig(format!("unsupported dimension {dim}"))),
        };
        Ok(HamiltonianEvaluator {
            kind: EvalKind::NonlinearAdhesion {
                speed,
                radius,
                dirs,
            },
            mu,
            dim,
        })
    }

    pub fn fixed(kernel: DiscreteKernel, mu: f64, dim: usize) -> Self {
        HamiltonianEvaluator {
            kind: EvalKind::Fixed(kernel),
            mu,
            dim,
        }
    }

    /// The kernel the spectral problem relaxes to at (x, p).
    pub fn kernel_at(&self, x: f64, p: Vec2) -> Result<DiscreteKernel> {
        match &self.kind {
            EvalKind::Linear {
                spec,
                signal,
                domain,
            } => Ok(limit_kernel(spec, signal, domain, x)?.t0),
            EvalKind::NonlinearAdhesion {
                speed,
                radius,
                dirs,
            } => Ok(adhesion_limit_kernel(speed, dirs.clone(), *radius, p)),
            EvalKind::Fixed(kernel) => Ok(kernel.clone()),
        }
    }

    /// Value of H at which the smallest denominator vanishes,
    /// -mu + max over quadrature nodes of v v̂·p.
    pub fn underline_h(&self, x: f64, p: Vec2) -> Result<f64> {
        let kernel = self.kernel_at(x, p)?;
        Ok(underline_h(&kernel, p, self.mu))
    }

    /// Integrability test guaranteeing a root strictly above the singular
    /// value. Evaluated against the kinematic bound U|p|; a diverging sum
    /// passes. Always passes at p = 0 and for 1D dirac speeds.
    pub fn check_dimensionality(&self, x: f64, p: Vec2) -> Result<bool> {
        let kernel = self.kernel_at(x, p)?;
        Ok(check_dimensionality(&kernel, p, self.mu))
    }

    /// Solve the implicit relation for H(x, p).
    pub fn solve_h(&self, x: f64, p: Vec2) -> Result<f64> {
        self.solve_h_with_rate(x, p, self.mu)
    }

    /// Same spectral problem with the relaxation rate replaced by nu.
    pub fn scaled_h_nu(&self, x: f64, p: Vec2, nu: f64) -> Result<f64> {
        self.solve_h_with_rate(x, p, nu)
    }

    fn solve_h_with_rate(&self, x: f64, p: Vec2, rate: f64) -> Result<f64> {
        let kernel = self.kernel_at(x, p)?;
        solve_h_on_kernel(&kernel, p, rate)
    }

    /// Solve for H together with its offset above the singular value.
    pub fn solve_h_detailed(&self, x: f64, p: Vec2) -> Result<HRoot> {
        let kernel = self.kernel_at(x, p)?;
        solve_h_root(&kernel, p, self.mu)
    }

    /// Positive normalised eigenfunction at the solved H, as kernel-shaped
    /// weights over the same velocity nodes.
    pub fn corrector_q(&self, x: f64, p: Vec2) -> Result<DiscreteKernel> {
        let kernel = self.kernel_at(x, p)?;
        let root = solve_h_root(&kernel, p, self.mu)?;
        let mut q = kernel.clone();
        let mut total = 0.0;
        for d in 0..q.n_dirs() {
            for s in 0..q.n_speeds() {
                let w = kernel.weights[(d, s)];
                if w == 0.0 {
                    q.weights[(d, s)] = 0.0;
                    continue;
                }
                let denom = (root.max_along - q.speeds[s] * dot(q.dirs[d], p)) + root.delta;
                if denom <= 0.0 {
                    return Err(Error::SingularHamiltonian { p_norm: norm(p) });
                }
                let v = self.mu * w / denom;
                q.weights[(d, s)] = v;
                total += v;
            }
        }
        q.weights.mapv_inplace(|w| w / total);
        Ok(q)
    }

    /// Gradient of H in p by central differences.
    pub fn grad_h(&self, x: f64, p: Vec2) -> Result<Vec2> {
        let h = GRAD_STEP * norm(p).max(1.0);
        let mut g = [0.0, 0.0];
        for c in 0..self.dim {
            let mut pp = p;
            let mut pm = p;
            pp[c] += h;
            pm[c] -= h;
            g[c] = (self.solve_h(x, pp)? - self.solve_h(x, pm)?) / (2.0 * h);
        }
        Ok(g)
    }

    /// Hessian of H in p by central differences. The step is wider than for
    /// the gradient so the root-solve noise stays below the curvature scale.
    pub fn hess_h(&self, x: f64, p: Vec2) -> Result<SymMat2> {
        let h = HESS_STEP * norm(p).max(1.0);
        let at = |dp0: f64, dp1: f64| self.solve_h(x, [p[0] + dp0, p[1] + dp1]);
        let h00 = (at(h, 0.0)? - 2.0 * at(0.0, 0.0)? + at(-h, 0.0)?) / (h * h);
        if self.dim == 1 {
            return Ok(SymMat2 {
                xx: h00,
                xy: 0.0,
                yy: 0.0,
            });
        }
        let h11 = (at(0.0, h)? - 2.0 * at(0.0, 0.0)? + at(0.0, -h)?) / (h * h);
        let h01 = (at(h, h)? - at(h, -h)? - at(-h, h)? + at(-h, -h)?) / (4.0 * h * h);
        Ok(SymMat2 {
            xx: h00,
            xy: h01,
            yy: h11,
        })
    }
}

/// -mu + max over quadrature nodes of v v̂·p: H values at and below this make
/// some denominator nonpositive.
pub fn underline_h(kernel: &DiscreteKernel, p: Vec2, mu: f64) -> f64 {
    -mu + kernel.max_node_speed_along(p)
}

/// Defining integral mu * sum w / (mu + h - v v̂·p); equals 1 at the root.
pub fn defining_integral(kernel: &DiscreteKernel, p: Vec2, mu: f64, h: f64) -> f64 {
    let mut sum = 0.0;
    for (w, v, dir) in kernel.nodes() {
        sum += w / (mu + h - v * dot(dir, p));
    }
    mu * sum
}

/// Defining integral evaluated through the offset delta = h - underline_h.
/// The denominators (max - v v̂·p) + delta are exact at the near-singular
/// node, so this form stays accurate where the plain one cancels.
pub fn defining_integral_delta(kernel: &DiscreteKernel, p: Vec2, mu: f64, delta: f64) -> f64 {
    let max_along = positive_weight_max_along(kernel, p);
    let mut sum = 0.0;
    for (w, v, dir) in kernel.nodes() {
        if w == 0.0 {
            continue;
        }
        sum += w / ((max_along - v * dot(dir, p)) + delta);
    }
    mu * sum
}

fn positive_weight_max_along(kernel: &DiscreteKernel, p: Vec2) -> f64 {
    kernel
        .nodes()
        .filter(|(w, _, _)| *w > 0.0)
        .map(|(_, v, dir)| v * dot(dir, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Root of the defining integral split as h = (max v v̂·p - mu) + delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HRoot {
    pub h: f64,
    /// Distance above the singular value; strictly positive.
    pub delta: f64,
    /// max v v̂·p over positive-weight nodes.
    pub max_along: f64,
}

/// Dimensionality condition on a raw kernel; see
/// [`HamiltonianEvaluator::check_dimensionality`].
pub fn check_dimensionality(kernel: &DiscreteKernel, p: Vec2, mu: f64) -> bool {
    let pn = norm(p);
    if pn == 0.0 {
        return true;
    }
    let bound = kernel.speed_sup * pn;
    let tiny = 1e-12 * bound.max(1.0);
    let mut sum = 0.0;
    for (w, v, dir) in kernel.nodes() {
        if w == 0.0 {
            continue;
        }
        let denom = bound - v * dot(dir, p);
        if denom <= tiny {
            return true; // divergent integral
        }
        sum += w / denom;
    }
    mu * sum > 1.0
}

/// Bisection with Newton polish on the defining integral, carried out in the
/// offset variable delta = h - underline_h for accuracy near the singular
/// value.
pub fn solve_h_root(kernel: &DiscreteKernel, p: Vec2, mu: f64) -> Result<HRoot> {
    let pn = norm(p);
    if pn == 0.0 {
        return Ok(HRoot {
            h: 0.0,
            delta: mu,
            max_along: 0.0,
        });
    }
    if !check_dimensionality(kernel, p, mu) {
        return Err(Error::SingularHamiltonian { p_norm: pn });
    }
    let bound = kernel.speed_sup * pn;
    if bound == 0.0 {
        return Ok(HRoot {
            h: 0.0,
            delta: mu,
            max_along: 0.0,
        });
    }
    let max_along = positive_weight_max_along(kernel, p);
    // gaps (max - v v̂·p) >= 0, exact at the extremal node
    let gaps: Vec<(f64, f64)> = kernel
        .nodes()
        .filter(|(w, _, _)| *w > 0.0)
        .map(|(w, v, dir)| (w, max_along - v * dot(dir, p)))
        .collect();
    let g = |delta: f64| -> f64 {
        mu * gaps.iter().map(|(w, gap)| w / (gap + delta)).sum::<f64>() - 1.0
    };
    let dg = |delta: f64| -> f64 {
        -mu * gaps
            .iter()
            .map(|(w, gap)| w / ((gap + delta) * (gap + delta)))
            .sum::<f64>()
    };
    // h in (-bound, bound) corresponds to delta in (lo, hi)
    let mut lo = (mu - max_along - bound).max(0.0);
    let mut hi = mu - max_along + bound;
    if g(hi) > 0.0 || !(hi > lo) {
        return Err(Error::RootBracketError { lo, hi });
    }
    // At delta -> lo+ the integral exceeds 1 (it diverges when lo = 0),
    // giving the sign change without evaluating at the singularity.
    let tol = ROOT_TOL * hi.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut delta = 0.5 * (lo + hi);
    for _ in 0..40 {
        let val = g(delta);
        if val.abs() < 1e-13 {
            break;
        }
        if val > 0.0 {
            lo = delta;
        } else {
            hi = delta;
        }
        let deriv = dg(delta);
        let next = if deriv < 0.0 {
            delta - val / deriv
        } else {
            f64::NAN
        };
        delta = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(HRoot {
        h: (max_along - mu) + delta,
        delta,
        max_along,
    })
}

/// Root of the defining integral; see [`solve_h_root`].
pub fn solve_h_on_kernel(kernel: &DiscreteKernel, p: Vec2, mu: f64) -> Result<f64> {
    Ok(solve_h_root(kernel, p, mu)?.h)
}

/// Which printing of the closed-form signal-driven 1D Hamiltonian to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearFormulaVersion {
    /// The formula as printed: numerator V^2 p^2 + V p D_S with
    /// D_S = tanh(R (x - x̄) / (2 sigma^2)).
    Printed,
    /// The closed form consistent with the discrete kernel: the exact root of
    /// H^2 + H = V^2 p^2 + V p m with m = -tanh(R (x - x̄) / sigma^2).
    Derived,
}

/// Closed-form H(x,p) for the 1D Gaussian-signal case with dirac speed and
/// unit relaxation rate.
pub fn closed_h_linear_1d(
    x: f64,
    p: f64,
    speed: f64,
    radius: f64,
    sigma: f64,
    center: f64,
    version: LinearFormulaVersion,
) -> Result<f64> {
    let s2 = sigma * sigma;
    match version {
        LinearFormulaVersion::Printed => {
            let d = (radius * (x - center) / (2.0 * s2)).tanh();
            let disc = 1.0 + 4.0 * speed * speed * p * p + 4.0 * speed * p * d;
            if disc < 0.0 {
                return Err(Error::FormulaDomainError { discriminant: disc });
            }
            Ok((speed * speed * p * p + speed * p * d) / (1.0 + disc.sqrt()))
        }
        LinearFormulaVersion::Derived => {
            let m = -(radius * (x - center) / s2).tanh();
            let disc = 1.0 + 4.0 * speed * speed * p * p + 4.0 * speed * p * m;
            Ok((-1.0 + disc.max(0.0).sqrt()) / 2.0)
        }
    }
}

/// Closed-form adhesion Hamiltonian in 1D with dirac speed:
/// H = (-mu + sqrt(mu^2 + 4 V^2 p^2 - 4 mu V p tanh(R p))) / 2.
pub fn closed_h_nonlinear_1d(p: f64, speed: f64, mu: f64, radius: f64) -> f64 {
    let disc = mu * mu + 4.0 * speed * speed * p * p - 4.0 * mu * speed * p * (radius * p).tanh();
    debug_assert!(disc >= 0.0, "nonlinear closed form discriminant negative");
    (-mu + disc.max(0.0).sqrt()) / 2.0
}

/// Smallest positive zero of the closed-form adhesion Hamiltonian: the root
/// of V p = mu tanh(R p). Exists only in the unstable regime V/(mu R) < 1.
pub fn sawtooth_slope(speed: f64, mu: f64, radius: f64) -> Result<f64> {
    if !(speed > 0.0 && mu > 0.0 && radius > 0.0) {
        return Err(Error::InvalidConfig(
            "sawtooth slope needs positive V, mu, R".into(),
        ));
    }
    if speed / (mu * radius) >= 1.0 {
        return Err(Error::NoPositiveRoot);
    }
    let g = |p: f64| speed * p - mu * (radius * p).tanh();
    let mut hi = mu / speed + 1.0;
    // g < 0 just above zero (slope V - mu R < 0), g(hi) >= V > 0.
    let mut lo = 1e-12 * hi;
    if g(lo) >= 0.0 {
        return Err(Error::RootBracketError { lo, hi });
    }
    while hi - lo > 1e-14 * (mu / speed) {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = 0.5 * (lo + hi);
    for _ in 0..2 {
        let t = (radius * p).tanh();
        let deriv = speed - mu * radius * (1.0 - t * t);
        if deriv.abs() > 0.0 {
            p -= g(p) / deriv;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    StableConvex,
    UnstableConvexConcave,
}

/// Linear-stability classification of the homogeneous state under adhesion.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// V / (mu R).
    pub ratio: f64,
    /// D^2 / V against R mu; stability holds when positive.
    pub margin: f64,
    /// Hessian of H at p = 0 restricted to the first `dim` components.
    pub hessian: SymMat2,
    pub stability: Stability,
    /// Slope of the saw-tooth profile in the unstable dirac case.
    pub sawtooth_slope: Option<f64>,
}

/// Classify the homogeneous configuration for a direction-independent speed
/// distribution in dimension `dim`.
pub fn stability_report(
    speed: &SpeedDistribution,
    mu: f64,
    radius: f64,
    dim: usize,
) -> Result<StabilityReport> {
    speed.validate()?;
    if !(mu > 0.0 && radius > 0.0) {
        return Err(Error::InvalidConfig("stability needs mu, R > 0".into()));
    }
    let v = speed.mean();
    let d2 = speed.second_moment();
    let ratio = v / (mu * radius);
    let margin = d2 / v - radius * mu;
    // Curvature of H at p = 0 for the adhesion kernel; the same for every
    // component when psi is direction-independent.
    let curv = (2.0 / dim as f64) * (d2 / mu - v * radius);
    let hessian = match dim {
        1 => SymMat2 {
            xx: curv,
            xy: 0.0,
            yy: 0.0,
        },
        2 => SymMat2::diag(curv, curv),
        _ => return Err(Error::InvalidConfig(format!("unsupported dimension {dim}"))),
    };
    let stable = margin > 0.0;
    let slope = if stable {
        None
    } else if let SpeedDistribution::Dirac { speed } = speed {
        Some(sawtooth_slope(*speed, mu, radius)?)
    } else {
        numeric_positive_zero(speed, mu, radius)
    };
    Ok(StabilityReport {
        ratio,
        margin,
        hessian,
        stability: if stable {
            Stability::StableConvex
        } else {
            Stability::UnstableConvexConcave
        },
        sawtooth_slope: slope,
    })
}

/// Scan the 1D adhesion Hamiltonian for its smallest positive zero.
fn numeric_positive_zero(speed: &SpeedDistribution, mu: f64, radius: f64) -> Option<f64> {
    let eval = HamiltonianEvaluator::nonlinear_adhesion(speed.clone(), radius, mu, 1, 0).ok()?;
    let h = |p: f64| eval.solve_h(0.0, [p, 0.0]).ok();
    let p_max = 2.0 * (mu / speed.mean() + 1.0);
    let n = 400;
    let mut prev = 0.0;
    for i in 1..=n {
        let p = p_max * i as f64 / n as f64;
        let v = h(p)?;
        if v > 0.0 {
            let (mut lo, mut hi) = (prev, p);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if h(mid)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = p;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, kernel_moments, Regime, Sensing};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn dirac(v: f64) -> SpeedDistribution {
        SpeedDistribution::Dirac { speed: v }
    }

    fn nonlinear(v: f64, mu: f64, r: f64) -> HamiltonianEvaluator {
        HamiltonianEvaluator::nonlinear_adhesion(dirac(v), r, mu, 1, 0).unwrap()
    }

    fn fig1_evaluator() -> HamiltonianEvaluator {
        let spec = KernelSpec {
            sensing: Sensing::LinearId,
            radius: 0.01,
            speed: dirac(1.0),
            regime: Regime::NonlocalHyp,
        };
        let signal = SignalField::gaussian(1.0, 1.0, 0.05);
        let domain = Domain1D::new(0.0, 1.0, 1000, false).unwrap();
        HamiltonianEvaluator::linear(spec, signal, domain, 1.0).unwrap()
    }

    #[test]
    fn underline_examples() {
        let eval = nonlinear(1.0, 1.0, 0.05);
        assert_relative_eq!(eval.underline_h(0.0, [0.0, 0.0]).unwrap(), -1.0);
        assert_relative_eq!(eval.underline_h(0.0, [2.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(
            eval.underline_h(0.0, [3.0, 0.0]).unwrap(),
            eval.underline_h(0.0, [-3.0, 0.0]).unwrap()
        );
    }

    #[test]
    fn dimensionality_always_passes_in_1d() {
        let eval = fig1_evaluator();
        for &p in &[0.0, 0.3, -5.0, 40.0] {
            assert!(eval.check_dimensionality(0.5, [p, 0.0]).unwrap());
        }
    }

    #[test]
    fn dimensionality_fails_for_large_p_in_2d() {
        let kernel = DiscreteKernel::uniform(
            directions_2d(DEFAULT_ANGLES_2D),
            &SpeedDistribution::uniform(1.0),
            0.0,
        );
        let eval = HamiltonianEvaluator::fixed(kernel, 1.0, 2);
        assert!(eval.check_dimensionality(0.0, [0.1, 0.0]).unwrap());
        assert!(!eval.check_dimensionality(0.0, [50.0, 0.0]).unwrap());
        assert!(matches!(
            eval.solve_h(0.0, [50.0, 0.0]),
            Err(Error::SingularHamiltonian { .. })
        ));
    }

    #[test]
    fn h_vanishes_at_zero_covector() {
        let eval = fig1_evaluator();
        for x in [0.1, 0.5, 0.9] {
            assert_eq!(eval.solve_h(x, [0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn nonlinear_spot_value_matches_closed_form() {
        let eval = nonlinear(1.0, 100.0, 0.05);
        let h = eval.solve_h(0.0, [10.0, 0.0]).unwrap();
        assert_relative_eq!(
            h,
            closed_h_nonlinear_1d(10.0, 1.0, 100.0, 0.05),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(h, -3.7628, epsilon = 5e-4);
    }

    #[test]
    fn stable_ratio_has_positive_h() {
        let eval = nonlinear(1.0, 100.0, 0.005);
        for i in 1..=40 {
            let p = i as f64 * 5.0;
            assert!(eval.solve_h(0.0, [p, 0.0]).unwrap() > 0.0, "p = {p}");
            assert!(eval.solve_h(0.0, [-p, 0.0]).unwrap() > 0.0);
        }
    }

    #[test]
    fn h_bounds_and_residual() {
        let eval = nonlinear(1.0, 100.0, 0.05);
        let kernel_free = |p: f64| eval.kernel_at(0.0, [p, 0.0]).unwrap();
        for i in 1..=50 {
            let p = -200.0 + 8.0 * i as f64;
            if p == 0.0 {
                continue;
            }
            let root = eval.solve_h_detailed(0.0, [p, 0.0]).unwrap();
            assert!(root.h > -p.abs() && root.h < p.abs());
            assert!(root.delta > 0.0);
            let res = defining_integral_delta(&kernel_free(p), [p, 0.0], 100.0, root.delta) - 1.0;
            assert!(res.abs() < 1e-10, "residual {res} at p = {p}");
        }
    }

    #[test]
    fn corrector_reduces_to_kernel_at_zero() {
        let eval = fig1_evaluator();
        let q = eval.corrector_q(0.3, [0.0, 0.0]).unwrap();
        let t0 = eval.kernel_at(0.3, [0.0, 0.0]).unwrap();
        for (a, b) in q.weights.iter().zip(t0.weights.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn corrector_is_positive_normalised_eigenfunction() {
        let eval = nonlinear(1.0, 100.0, 0.05);
        let p = [35.0, 0.0];
        let q = eval.corrector_q(0.0, p).unwrap();
        assert_relative_eq!(q.total_weight(), 1.0, max_relative = 1e-12);
        assert!(q.weights.iter().all(|w| *w > 0.0));
        // Substitute back into the eigenvalue relation.
        let kernel = eval.kernel_at(0.0, p).unwrap();
        let h = eval.solve_h(0.0, p).unwrap();
        for d in 0..q.n_dirs() {
            for s in 0..q.n_speeds() {
                let lhs = (100.0 + h - q.speeds[s] * dot(q.dirs[d], p)) * q.weights[(d, s)];
                let rhs = 100.0 * kernel.weights[(d, s)];
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_kernel_mean_in_linear_case() {
        let eval = fig1_evaluator();
        for x in [0.1, 0.35, 0.72] {
            let g = eval.grad_h(x, [0.0, 0.0]).unwrap();
            let m = kernel_moments(&eval.kernel_at(x, [0.0, 0.0]).unwrap());
            assert_abs_diff_eq!(g[0], m.mean[0], epsilon = 1e-6);
        }
    }

    #[test]
    fn hessian_matches_twice_covariance_in_linear_case() {
        let eval = fig1_evaluator();
        for x in [0.2, 0.6] {
            let h = eval.hess_h(x, [0.0, 0.0]).unwrap();
            let m = kernel_moments(&eval.kernel_at(x, [0.0, 0.0]).unwrap());
            assert_abs_diff_eq!(h.xx, 2.0 * m.cov.xx, epsilon = 1e-4);
        }
    }

    #[test]
    fn nonlinear_hessian_at_origin() {
        let eval = nonlinear(1.0, 100.0, 0.05);
        let h = eval.hess_h(0.0, [0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(h.xx, -0.08, epsilon = 1e-4);
        let g = eval.grad_h(0.0, [0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn hessian_2d_uniform_kernel() {
        // For the planar uniform kernel the curvature at p = 0 is twice the
        // covariance D^2/2 per axis.
        let speed = SpeedDistribution::uniform(1.0);
        let kernel = DiscreteKernel::uniform(directions_2d(DEFAULT_ANGLES_2D), &speed, 0.0);
        let m = kernel_moments(&kernel);
        let eval = HamiltonianEvaluator::fixed(kernel, 1.0, 2);
        let h = eval.hess_h(0.0, [0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(h.xx, 2.0 * m.cov.xx, epsilon = 1e-4);
        assert_abs_diff_eq!(h.yy, 2.0 * m.cov.yy, epsilon = 1e-4);
        assert_abs_diff_eq!(h.xy, 0.0, epsilon = 1e-4);
    }

    #[test]
    fn constant_signal_linear_gradient_vanishes() {
        let spec = KernelSpec {
            sensing: Sensing::LinearId,
            radius: 0.05,
            speed: dirac(1.0),
            regime: Regime::NonlocalHyp,
        };
        let signal = SignalField::Constant { value: 2.0 };
        let domain = Domain1D::new(0.0, 1.0, 100, false).unwrap();
        let eval = HamiltonianEvaluator::linear(spec, signal, domain, 1.0).unwrap();
        let g = eval.grad_h(0.5, [0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn closed_linear_edge_values() {
        // vanishes at p = 0; nonnegative at the signal center
        for version in [LinearFormulaVersion::Printed, LinearFormulaVersion::Derived] {
            let h0 = closed_h_linear_1d(0.3, 0.0, 1.0, 0.01, 0.05, 1.0, version).unwrap();
            assert_abs_diff_eq!(h0, 0.0, epsilon = 1e-15);
        }
        for &p in &[-2.0, 0.5, 3.0] {
            let h = closed_h_linear_1d(1.0, p, 1.0, 0.01, 0.05, 1.0, LinearFormulaVersion::Printed)
                .unwrap();
            assert!(h >= 0.0);
        }
    }

    #[test]
    fn closed_linear_printed_vs_derived() {
        // At the signal center both tanh factors vanish and the printed
        // numerator is exactly half the true root.
        let (v, r, sigma, center) = (1.0, 0.01, 0.05, 0.5);
        for &p in &[0.4, -1.3, 7.0] {
            let printed = closed_h_linear_1d(
                center,
                p,
                v,
                r,
                sigma,
                center,
                LinearFormulaVersion::Printed,
            )
            .unwrap();
            let derived = closed_h_linear_1d(
                center,
                p,
                v,
                r,
                sigma,
                center,
                LinearFormulaVersion::Derived,
            )
            .unwrap();
            assert_relative_eq!(2.0 * printed, derived, max_relative = 1e-12);
        }
    }

    #[test]
    fn closed_linear_derived_matches_bisection() {
        let (v, r, sigma, center) = (1.0, 0.01, 0.05, 1.0);
        let spec = KernelSpec {
            sensing: Sensing::LinearId,
            radius: r,
            speed: dirac(v),
            regime: Regime::NonlocalHyp,
        };
        let signal = SignalField::gaussian(1.0, center, sigma);
        let domain = Domain1D::new(0.0, 1.0, 1000, false).unwrap();
        let eval = HamiltonianEvaluator::linear(spec, signal, domain, 1.0).unwrap();
        for x in [0.2, 0.5, 0.8] {
            for &p in &[-3.0, -0.2, 0.7, 4.0] {
                let closed =
                    closed_h_linear_1d(x, p, v, r, sigma, center, LinearFormulaVersion::Derived)
                        .unwrap();
                let solved = eval.solve_h(x, [p, 0.0]).unwrap();
                assert_abs_diff_eq!(closed, solved, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn printed_formula_zeros_disagree_with_stated_ones() {
        // The printed numerator vanishes at p = -D_S/V, not at -D_S/(2V).
        let (v, r, sigma, center) = (1.0f64, 0.01f64, 0.05f64, 1.0f64);
        let x = 0.3f64;
        let d = (r * (x - center) / (2.0 * sigma * sigma)).tanh();
        let root = -d / v;
        let h = closed_h_linear_1d(x, root, v, r, sigma, center, LinearFormulaVersion::Printed)
            .unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-14);
        let stated = -d / (2.0 * v);
        let h2 = closed_h_linear_1d(
            x,
            stated,
            v,
            r,
            sigma,
            center,
            LinearFormulaVersion::Printed,
        )
        .unwrap();
        assert!(h2.abs() > 1e-3 * d.abs());
    }

    #[test]
    fn nonlinear_closed_form_parity_and_zero() {
        assert_eq!(closed_h_nonlinear_1d(0.0, 1.0, 100.0, 0.05), 0.0);
        for &p in &[0.5, 3.0, 77.0] {
            assert_relative_eq!(
                closed_h_nonlinear_1d(p, 1.0, 100.0, 0.05),
                closed_h_nonlinear_1d(-p, 1.0, 100.0, 0.05),
                max_relative = 1e-13
            );
        }
        assert_abs_diff_eq!(
            closed_h_nonlinear_1d(10.0, 1.0, 100.0, 0.05),
            -3.7628,
            epsilon = 5e-4
        );
    }

    #[test]
    fn sawtooth_slope_root() {
        let p = sawtooth_slope(1.0, 100.0, 0.05).unwrap();
        assert_abs_diff_eq!(p, 99.991, epsilon = 1e-2);
        assert!(closed_h_nonlinear_1d(p, 1.0, 100.0, 0.05).abs() < 1e-10);
        assert!(matches!(
            sawtooth_slope(1.0, 100.0, 0.05 / 5.0),
            Err(Error::NoPositiveRoot)
        ));
    }

    #[test]
    fn scaled_h_matches_rate_substitution() {
        let eval = nonlinear(1.0, 100.0, 0.05);
        let other = nonlinear(1.0, 7.0, 0.05);
        let p = [3.0, 0.0];
        assert_relative_eq!(
            eval.scaled_h_nu(0.0, p, 7.0).unwrap(),
            other.solve_h(0.0, p).unwrap(),
            epsilon = 1e-12
        );
        assert_eq!(eval.scaled_h_nu(0.0, [0.0, 0.0], 0.3).unwrap(), 0.0);
    }

    #[test]
    fn commuting_limit_with_small_diffusivity_kernels() {
        // Kernel variance nu^2: H_nu stays quadratic with coefficients from
        // the kernel moments, and the mismatch shrinks with nu.
        let mut prev = f64::INFINITY;
        for &nu in &[1.0, 0.1, 0.01] {
            let kernel = DiscreteKernel::from_direction_weights(
                directions_1d(),
                &[0.6, 0.4],
                &dirac(nu),
                0.0,
            )
            .unwrap();
            let m = kernel_moments(&kernel);
            let eval = HamiltonianEvaluator::fixed(kernel, nu, 1);
            let mut worst = 0.0f64;
            for i in 1..=20 {
                let p = 0.1 * i as f64 / 20.0;
                for sign in [-1.0, 1.0] {
                    let ps = sign * p;
                    let h = eval.solve_h(0.0, [ps, 0.0]).unwrap();
                    let quad = m.mean[0] * ps + m.cov.xx / nu * ps * ps;
                    worst = worst.max((h - quad).abs() / (ps * ps));
                }
            }
            assert!(worst < prev, "residual did not decrease at nu = {nu}");
            prev = worst;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn stability_classification() {
        let unstable = stability_report(&dirac(1.0), 100.0, 0.05, 1).unwrap();
        assert_relative_eq!(unstable.ratio, 0.2);
        assert_eq!(unstable.stability, Stability::UnstableConvexConcave);
        assert!(unstable.hessian.xx < 0.0);
        assert_abs_diff_eq!(unstable.sawtooth_slope.unwrap(), 99.991, epsilon = 1e-2);

        let stable = stability_report(&dirac(1.0), 100.0, 0.02, 1).unwrap();
        assert_relative_eq!(stable.ratio, 0.5);
        // dirac speeds: ratio below one is unstable
        assert_eq!(stable.stability, Stability::UnstableConvexConcave);

        let really_stable = stability_report(&dirac(1.0), 10.0, 0.05, 1).unwrap();
        assert_relative_eq!(really_stable.ratio, 2.0);
        assert_eq!(really_stable.stability, Stability::StableConvex);
        assert!(really_stable.hessian.xx > 0.0);
        assert!(really_stable.sawtooth_slope.is_none());
    }

    #[test]
    fn wider_speed_distribution_is_more_stable() {
        // Variance e > 0 makes D^2 = V^2 + e; a configuration stable for the
        // dirac speed stays stable a fortiori.
        let spread = SpeedDistribution::Custom {
            nodes: vec![0.5, 1.5],
            weights: vec![0.5, 0.5],
        };
        // mean 1, second moment 1.25
        let rep = stability_report(&spread, 100.0, 0.011, 1).unwrap();
        assert!(rep.ratio < 1.0); // dirac criterion says marginally unstable
        assert_eq!(rep.stability, Stability::StableConvex); // variance rescues it
    }

    #[test]
    fn linear_hessian_positive_definite_at_order_one_speeds() {
        let spec = KernelSpec {
            sensing: Sensing::LinearId,
            radius: 0.05,
            speed: dirac(1.0),
            regime: Regime::NonlocalHyp,
        };
        let signal = SignalField::gaussian(1.0, 0.5, 0.2);
        let domain = Domain1D::new(0.0, 1.0, 200, false).unwrap();
        let eval = HamiltonianEvaluator::linear(spec, signal, domain, 1.0).unwrap();
        for x in [0.25, 0.5, 0.75] {
            for &p in &[-2.0, -0.5, 0.0, 1.0, 3.0] {
                assert!(eval.check_dimensionality(x, [p, 0.0]).unwrap());
                let h = eval.hess_h(x, [p, 0.0]).unwrap();
                assert!(h.xx > 0.0, "hessian not PD at x = {x}, p = {p}");
            }
        }
    }

    #[test]
    fn antisymmetric_drift_for_centered_gaussian() {
        let spec = KernelSpec {
            sensing: Sensing::LinearId,
            radius: 0.05,
            speed: dirac(1.0),
            regime: Regime::NonlocalHyp,
        };
        let signal = SignalField::gaussian(1.0, 1.0, 0.1);
        let domain = Domain1D::new(0.0, 2.0, 400, false).unwrap();
        for h in [0.1, 0.3, 0.62] {
            let kp = build_kernel(&spec, &signal, &domain, 1.0 + h).unwrap();
            let km = build_kernel(&spec, &signal, &domain, 1.0 - h).unwrap();
            let up = kernel_moments(&kp).mean[0];
            let um = kernel_moments(&km).mean[0];
            assert_abs_diff_eq!(up + um, 0.0, epsilon = 1e-14);
        }
    }
}
