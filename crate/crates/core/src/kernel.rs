//! Turning kernels: the reorientation probability over velocity space,
//! built from a nonlocally sampled field, with its moments and scaling limits.
//!
//! A kernel weight at direction v̂ is proportional to b(field(x + R(x,v̂) v̂)),
//! normalised over directions, times the speed distribution ψ(v|v̂).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Domain1D, ScalarField};
use crate::quad::gauss_legendre_on;
use crate::signal::{signal_variation_length, SignalField};

/// Velocity/covector in up to two dimensions; 1D quantities live in `[0]`.
pub type Vec2 = [f64; 2];

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric 2x2 matrix (covariances, Hessians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn diag(a: f64, b: f64) -> Self {
        SymMat2 {
            xx: a,
            xy: 0.0,
            yy: b,
        }
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.xx + self.yy;
        let det = self.xx * self.yy - self.xy * self.xy;
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        (0.5 * tr - disc, 0.5 * tr + disc)
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.eigenvalues().0 >= -tol
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }
}

/// Probability distribution of speeds along a given direction.
#[derive(Debug, Clone, PartialEq)]
pub enum SpeedDistribution {
    /// All mass at a single speed.
    Dirac { speed: f64 },
    /// Uniform density 1/max on [0, max], discretised by Gauss-Legendre.
    Uniform { max: f64, n_nodes: usize },
    /// Explicit nodes with probability weights.
    Custom { nodes: Vec<f64>, weights: Vec<f64> },
}

impl SpeedDistribution {
    pub fn uniform(max: f64) -> Self {
        SpeedDistribution::Uniform { max, n_nodes: 8 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpeedDistribution::Dirac { speed } => {
                if *speed < 0.0 || !speed.is_finite() {
                    return Err(Error::InvalidConfig(format!("dirac speed {speed} invalid")));
                }
            }
            SpeedDistribution::Uniform { max, n_nodes } => {
                if *max <= 0.0 || !max.is_finite() {
                    return Err(Error::InvalidConfig(format!("max speed {max} invalid")));
                }
                if *n_nodes == 0 {
                    return Err(Error::InvalidConfig("need at least one speed node".into()));
                }
            }
            SpeedDistribution::Custom { nodes, weights } => {
                if nodes.len() != weights.len() || nodes.is_empty() {
                    return Err(Error::InvalidConfig("speed nodes/weights mismatch".into()));
                }
                if weights.iter().any(|w| *w < 0.0) || nodes.iter().any(|v| *v < 0.0) {
                    return Err(Error::InvalidConfig("negative speed node or weight".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidConfig(format!(
                        "speed weights sum to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Quadrature nodes and probability weights (weights sum to 1).
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            SpeedDistribution::Dirac { speed } => (vec![*speed], vec![1.0]),
            SpeedDistribution::Uniform { max, n_nodes } => {
                let (xs, ws) = gauss_legendre_on(*n_nodes, 0.0, *max);
                let ws = ws.iter().map(|w| w / max).collect();
                (xs, ws)
            }
            SpeedDistribution::Custom { nodes, weights } => (nodes.clone(), weights.clone()),
        }
    }

    /// Mean speed V_psi.
    pub fn mean(&self) -> f64 {
        let (v, w) = self.nodes();
        v.iter().zip(&w).map(|(v, w)| v * w).sum()
    }

    /// Second moment D^2 of the speed.
    pub fn second_moment(&self) -> f64 {
        let (v, w) = self.nodes();
        v.iter().zip(&w).map(|(v, w)| v * v * w).sum()
    }

    /// Supremum of admissible speeds: the U of the velocity space `[0, U]`.
    pub fn sup(&self) -> f64 {
        match self {
            SpeedDistribution::Dirac { speed } => *speed,
            SpeedDistribution::Uniform { max, .. } => *max,
            SpeedDistribution::Custom { nodes, .. } => nodes.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// How the sampled field biases the choice of direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sensing {
    /// b(S) = S.
    LinearId,
    /// Two-point comparison between the field ahead and behind.
    Comparative { alpha: f64, beta: f64, k: f64 },
    /// The sensed field is the cell density itself.
    Adhesion,
}

/// Scaling regime of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// No rescaling: sample at the physical radius.
    Physical,
    /// Hyperbolic rescaling with localised interactions (R -> eps R, eps -> 0).
    LocalHyp,
    /// Hyperbolic rescaling keeping the radius: the limit kernel is the
    /// physical one.
    NonlocalHyp,
    /// First-order Taylor expansion in R (valid for R below the field
    /// variation length).
    SmallRExpansion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub sensing: Sensing,
    pub radius: f64,
    pub speed: SpeedDistribution,
    pub regime: Regime,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 0.0 || !self.radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sensing radius {} invalid",
                self.radius
            )));
        }
        if let Sensing::Comparative { alpha, beta, k } = self.sensing {
            if !(alpha > 0.0 && beta >= 0.0 && k > 0.0 && alpha > beta) {
                return Err(Error::InvalidConfig(format!(
                    "comparative sensing needs alpha > beta >= 0 and k > 0, got alpha={alpha} beta={beta} k={k}"
                )));
            }
        }
        self.speed.validate()
    }
}

/// A field of positions that a kernel can sample: the external signal or the
/// cell density.
pub trait SensedField {
    fn value(&self, x: f64) -> Result<f64>;
    fn slope(&self, x: f64) -> f64;
    fn variation_length(&self, dom: &Domain1D) -> Result<f64>;
}

impl SensedField for SignalField {
    fn value(&self, x: f64) -> Result<f64> {
        self.eval(x)
    }
    fn slope(&self, x: f64) -> f64 {
        self.gradient(x)
    }
    fn variation_length(&self, dom: &Domain1D) -> Result<f64> {
        signal_variation_length(self, dom)
    }
}

impl SensedField for ScalarField {
    fn value(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x))
    }
    fn slope(&self, x: f64) -> f64 {
        let h = self.domain.dx();
        (self.eval(x + h) - self.eval(x - h)) / (2.0 * h)
    }
    fn variation_length(&self, dom: &Domain1D) -> Result<f64> {
        let mut max_rel = 0.0f64;
        for x in dom.centers() {
            let v = self.eval(x);
            if v > 0.0 {
                max_rel = max_rel.max((self.slope(x) / v).abs());
            }
        }
        Ok(if max_rel == 0.0 {
            f64::INFINITY
        } else {
            1.0 / max_rel
        })
    }
}

/// The direction set: two signs in 1D, uniform angles in 2D.
pub fn directions_1d() -> Vec<Vec2> {
    vec![[1.0, 0.0], [-1.0, 0.0]]
}

pub fn directions_2d(n_angles: usize) -> Vec<Vec2> {
    (0..n_angles)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_angles as f64;
            [th.cos(), th.sin()]
        })
        .collect()
}

/// Reorientation probability at one position, discretised over
/// (direction, speed) nodes. Weights are probabilities: nonnegative, sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    pub position: f64,
    pub dirs: Vec<Vec2>,
    pub speeds: Vec<f64>,
    pub speed_weights: Vec<f64>,
    /// weights[(d, s)]: probability of direction d with speed node s.
    pub weights: Array2<f64>,
    /// Supremum of the speed distribution (not just the largest node).
    pub speed_sup: f64,
}

impl DiscreteKernel {
    /// Kernel with explicit direction probabilities (they are normalised
    /// here) and a shared speed distribution.
    pub fn from_direction_weights(
        dirs: Vec<Vec2>,
        dir_weights: &[f64],
        speed: &SpeedDistribution,
        position: f64,
    ) -> Result<Self> {
        if dirs.len() != dir_weights.len() {
            return Err(Error::InvalidConfig(
                "direction weights length mismatch".into(),
            ));
        }
        if dir_weights.iter().any(|w| *w < 0.0) {
            return Err(Error::DegenerateKernel { x: position });
        }
        let total: f64 = dir_weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateKernel { x: position });
        }
        let (speeds, speed_weights) = speed.nodes();
        let mut weights = Array2::zeros((dirs.len(), speeds.len()));
        for (d, wd) in dir_weights.iter().enumerate() {
            for (s, ws) in speed_weights.iter().enumerate() {
                weights[(d, s)] = wd / total * ws;
            }
        }
        Ok(DiscreteKernel {
            position,
            dirs,
            speeds,
            speed_weights,
            weights,
            speed_sup: speed.sup(),
        })
    }

    /// Direction-uniform kernel psi / |S^{d-1}|.
    pub fn uniform(dirs: Vec<Vec2>, speed: &SpeedDistribution, position: f64) -> Self {
        let n = dirs.len();
        Self::from_direction_weights(dirs, &vec![1.0; n], speed, position)
            .expect("uniform weights are valid")
    }

    pub fn n_dirs(&self) -> usize {
        self.dirs.len()
    }

    pub fn n_speeds(&self) -> usize {
        self.speeds.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.sum()
    }

    /// Marginal probability of each direction.
    pub fn direction_weights(&self) -> Vec<f64> {
        (0..self.n_dirs())
            .map(|d| (0..self.n_speeds()).map(|s| self.weights[(d, s)]).sum())
            .collect()
    }

    /// Iterate (weight, speed, direction) over all nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, Vec2)> + '_ {
        (0..self.n_dirs()).flat_map(move |d| {
            (0..self.n_speeds()).map(move |s| (self.weights[(d, s)], self.speeds[s], self.dirs[d]))
        })
    }

    /// Largest v v̂·p over the quadrature nodes.
    pub fn max_node_speed_along(&self, p: Vec2) -> f64 {
        self.nodes()
            .map(|(_, v, dir)| v * dot(dir, p))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// First two velocity moments of a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    /// Mean velocity U_S.
    pub mean: Vec2,
    /// Variance-covariance matrix D_S.
    pub cov: SymMat2,
}

/// Largest admissible sensing range from x along direction dir so that the
/// whole segment stays inside the domain. Periodic domains never clip.
pub fn clipped_radius(dom: &Domain1D, x: f64, dir: f64, radius: f64) -> f64 {
    if dom.periodic {
        return radius;
    }
    let room = if dir > 0.0 {
        dom.x_max - x
    } else if dir < 0.0 {
        x - dom.x_min
    } else {
        return radius;
    };
    radius.min(room).max(0.0)
}

/// Sensing weight of each direction at x (not yet normalised).
fn sensing_weights(
    spec: &KernelSpec,
    field: &dyn SensedField,
    dom: &Domain1D,
    x: f64,
) -> Result<Vec<f64>> {
    let dirs = directions_1d();
    let mut b = Vec::with_capacity(dirs.len());
    match spec.sensing {
        Sensing::LinearId | Sensing::Adhesion => {
            for dir in &dirs {
                let lam = clipped_radius(dom, x, dir[0], spec.radius);
                b.push(field.value(x + lam * dir[0])?);
            }
        }
        Sensing::Comparative { alpha, beta, k } => {
            // Symmetric two-point comparison; the probe distance is clipped
            // so both sample points stay inside the domain.
            let lam = clipped_radius(dom, x, 1.0, spec.radius).min(clipped_radius(
                dom,
                x,
                -1.0,
                spec.radius,
            ));
            for dir in &dirs {
                let ahead = field.value(x + lam * dir[0])?;
                let behind = field.value(x - lam * dir[0])?;
                b.push(alpha + beta * (behind - ahead) / (2.0 * k + ahead + behind));
            }
        }
    }
    Ok(b)
}

/// Build the discrete turning kernel at position x from the sensed field.
pub fn build_kernel(
    spec: &KernelSpec,
    field: &dyn SensedField,
    dom: &Domain1D,
    x: f64,
) -> Result<DiscreteKernel> {
    spec.validate()?;
    let b = sensing_weights(spec, field, dom, x)?;
    if b.iter().any(|v| *v < 0.0) || b.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateKernel { x });
    }
    DiscreteKernel::from_direction_weights(directions_1d(), &b, &spec.speed, x)
}

/// Mean velocity and covariance of a discrete kernel.
pub fn kernel_moments(kernel: &DiscreteKernel) -> KernelMoments {
    let mut mean = [0.0, 0.0];
    for (w, v, dir) in kernel.nodes() {
        mean[0] += w * v * dir[0];
        mean[1] += w * v * dir[1];
    }
    let mut cov = SymMat2::ZERO;
    for (w, v, dir) in kernel.nodes() {
        let dx = v * dir[0] - mean[0];
        let dy = v * dir[1] - mean[1];
        cov.xx += w * dx * dx;
        cov.xy += w * dx * dy;
        cov.yy += w * dy * dy;
    }
    KernelMoments { mean, cov }
}

/// Limit kernel and optional first-order correction.
#[derive(Debug, Clone)]
pub struct KernelExpansion {
    pub t0: DiscreteKernel,
    /// Correction weights on the same node layout; total weight is zero.
    pub t1: Option<Array2<f64>>,
}

/// Kernel in the requested scaling regime.
///
/// - localised hyperbolic: the uniform kernel (comparative sensing keeps a
///   gradient bias under fast adaptation),
/// - nonlocal hyperbolic: the physical kernel unchanged,
/// - small-radius expansion: uniform leading order plus the zero-mass
///   first-order correction.
pub fn limit_kernel(
    spec: &KernelSpec,
    field: &dyn SensedField,
    dom: &Domain1D,
    x: f64,
) -> Result<KernelExpansion> {
    spec.validate()?;
    let dirs = directions_1d();
    match spec.regime {
        Regime::Physical | Regime::NonlocalHyp => Ok(KernelExpansion {
            t0: build_kernel(spec, field, dom, x)?,
            t1: None,
        }),
        Regime::LocalHyp => match spec.sensing {
            Sensing::LinearId | Sensing::Adhesion => Ok(KernelExpansion {
                t0: DiscreteKernel::uniform(dirs, &spec.speed, x),
                t1: None,
            }),
            Sensing::Comparative { alpha, beta, k } => {
                // Fast adaptation: the directional derivative of the field
                // survives localisation.
                let s = field.value(x)?;
                let g = field.slope(x);
                let b: Vec<f64> = dirs
                    .iter()
                    .map(|dir| alpha + beta * spec.radius * g * dir[0] / (k + s))
                    .collect();
                if b.iter().any(|v| *v <= 0.0) {
                    return Err(Error::DegenerateKernel { x });
                }
                Ok(KernelExpansion {
                    t0: DiscreteKernel::from_direction_weights(dirs, &b, &spec.speed, x)?,
                    t1: None,
                })
            }
        },
        Regime::SmallRExpansion => {
            let l_s = field.variation_length(dom)?;
            if !(spec.radius < l_s) {
                return Err(Error::ExpansionInvalid {
                    radius: spec.radius,
                    l_s,
                });
            }
            let t0 = DiscreteKernel::uniform(dirs.clone(), &spec.speed, x);
            let rel_slope = field.slope(x) / field.value(x)?;
            let n_dirs = dirs.len() as f64;
            let mut t1 = Array2::zeros(t0.weights.raw_dim());
            for (d, dir) in dirs.iter().enumerate() {
                for (s, ws) in t0.speed_weights.iter().enumerate() {
                    t1[(d, s)] = ws / n_dirs * spec.radius * rel_slope * dir[0];
                }
            }
            Ok(KernelExpansion { t0, t1: Some(t1) })
        }
    }
}

/// Limit kernel of adhesion sensing under concentration: direction weights
/// exp(-R v̂·p) normalised over directions, speeds from ψ. Defined for any
/// direction set.
pub fn adhesion_limit_kernel(
    speed: &SpeedDistribution,
    dirs: Vec<Vec2>,
    radius: f64,
    p: Vec2,
) -> DiscreteKernel {
    let exponents: Vec<f64> = dirs.iter().map(|d| -radius * dot(*d, p)).collect();
    let m = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = exponents.iter().map(|e| (e - m).exp()).collect();
    DiscreteKernel::from_direction_weights(dirs, &w, speed, f64::NAN)
        .expect("exponential weights are positive")
}
