//! Experiment configuration schema: a flat-sectioned TOML file with one
//! solver per run. Unknown keys are hard errors.

use serde::{Deserialize, Serialize};

use kinotaxis_core::grid::{Domain1D, ScalarField};
use kinotaxis_core::kernel::{KernelSpec, Regime, Sensing, SpeedDistribution};
use kinotaxis_core::kinetic::{BoundarySpec, Reflection};
use kinotaxis_core::signal::SignalField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Kinetic,
    Macro,
    Hj,
    Eikonal,
    Hamiltonian,
    Analyze,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub solver: SolverKind,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSection,
    #[serde(default)]
    pub signal: Option<SignalSection>,
    #[serde(default)]
    pub kernel: Option<KernelSection>,
    #[serde(default)]
    pub speed: Option<SpeedSection>,
    pub params: ParamsSection,
    #[serde(default)]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub time: Option<TimeSection>,
    #[serde(default)]
    pub boundary: Option<BoundarySection>,
    #[serde(default)]
    pub kinetic: Option<KineticSection>,
    #[serde(default)]
    pub aggregate: Option<AggregateSection>,
    #[serde(default)]
    pub hj: Option<HjSection>,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SignalSection {
    Constant {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: f64,
        sigma: f64,
    },
    Bimodal {
        amplitude1: f64,
        center1: f64,
        sigma1: f64,
        amplitude2: f64,
        center2: f64,
        sigma2: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub sensing: SensingKind,
    pub radius: f64,
    #[serde(default = "default_regime")]
    pub regime: RegimeKind,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingKind {
    Linear,
    Comparative,
    Adhesion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Physical,
    Local,
    Nonlocal,
    SmallRadius,
}

fn default_regime() -> RegimeKind {
    RegimeKind::Nonlocal
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SpeedSection {
    Dirac {
        value: f64,
    },
    Uniform {
        max: f64,
        #[serde(default = "default_speed_nodes")]
        n_nodes: usize,
    },
    Custom {
        nodes: Vec<f64>,
        weights: Vec<f64>,
    },
}

fn default_speed_nodes() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    /// Relaxation frequency of the BGK operator.
    pub mu: f64,
    /// Concentration scale used by the Hopf-Cole transform in analysis and
    /// recorded in the manifest.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Rate substitution for scaled-Hamiltonian tabulation.
    #[serde(default)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum InitialSection {
    Constant {
        value: f64,
    },
    Gaussian {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        center: f64,
        sigma: f64,
    },
    Bimodal {
        #[serde(default)]
        base: f64,
        amplitude1: f64,
        center1: f64,
        sigma1: f64,
        amplitude2: f64,
        center2: f64,
        sigma2: f64,
    },
    /// Constant plus sinusoidal perturbation: one harmonic or several.
    Perturbed {
        base: f64,
        amplitude: f64,
        #[serde(default)]
        mode: Option<u32>,
        #[serde(default)]
        modes: Option<Vec<u32>>,
        #[serde(default)]
        phase: f64,
    },
    /// Constant plus seeded smooth random perturbation.
    Noisy {
        base: f64,
        amplitude: f64,
        #[serde(default = "default_noise_modes")]
        n_modes: usize,
    },
    /// Steep periodic profile used by the phase solvers.
    SteepSine {
        amplitude: f64,
        mode: u32,
    },
}

fn default_noise_modes() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    #[serde(default)]
    pub output_every: Option<usize>,
    #[serde(default)]
    pub quasi_stationary_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub kind: BoundaryKind,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub reflection: Option<ReflectionKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Periodic,
    Maxwellian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionKind {
    BounceBack,
    Specular,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub store_distribution: bool,
    #[serde(default)]
    pub track_entropy: bool,
    #[serde(default)]
    pub isotropic_init: bool,
}

fn default_cfl() -> f64 {
    0.9
}

impl Default for KineticSection {
    fn default() -> Self {
        KineticSection {
            cfl: 0.9,
            store_distribution: false,
            track_entropy: false,
            isotropic_init: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateSection {
    pub model: AggregateModelKind,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_true")]
    pub drift_correction: bool,
    #[serde(default = "default_guard")]
    pub concentration_guard: f64,
}

fn default_true() -> bool {
    true
}

fn default_guard() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateModelKind {
    Aggregate,
    Conservation,
    DiffusiveNonlocal,
    DiffusiveLocal,
    KellerSegel,
    NonlinearAggregate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjSection {
    pub hamiltonian: HjHamiltonianKind,
    /// Dissipation coefficient; zero means the kinematic bound U.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub p_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HjHamiltonianKind {
    ClosedNonlinear,
    TableLinear,
    QuadraticMoments,
    QuadraticAdhesion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    #[serde(default = "default_x_samples")]
    pub x_samples: usize,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default = "default_p_samples")]
    pub p_samples: usize,
}

fn default_x_samples() -> usize {
    101
}

fn default_p_samples() -> usize {
    401
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path of a numeric parameter, e.g. "kernel.radius".
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

fn missing(section: &str) -> ConfigError {
    ConfigError(format!("missing required section [{section}]"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CResult<Self> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn domain(&self) -> CResult<Domain1D> {
        Domain1D::new(
            self.domain.x_min,
            self.domain.x_max,
            self.domain.n_cells,
            self.domain.periodic,
        )
        .map_err(|e| ConfigError(format!("domain: {e}")))
    }

    pub fn signal(&self) -> CResult<SignalField> {
        let section = self.signal.as_ref().ok_or_else(|| missing("signal"))?;
        Ok(match *section {
            SignalSection::Constant { value } => SignalField::Constant { value },
            SignalSection::Gaussian {
                amplitude,
                center,
                sigma,
            } => SignalField::gaussian(amplitude, center, sigma),
            SignalSection::Bimodal {
                amplitude1,
                center1,
                sigma1,
                amplitude2,
                center2,
                sigma2,
            } => SignalField::bimodal(amplitude1, center1, sigma1, amplitude2, center2, sigma2),
        })
    }

    pub fn speed(&self) -> CResult<SpeedDistribution> {
        let section = self.speed.as_ref().ok_or_else(|| missing("speed"))?;
        let speed = match section {
            SpeedSection::Dirac { value } => SpeedDistribution::Dirac { speed: *value },
            SpeedSection::Uniform { max, n_nodes } => SpeedDistribution::Uniform {
                max: *max,
                n_nodes: *n_nodes,
            },
            SpeedSection::Custom { nodes, weights } => SpeedDistribution::Custom {
                nodes: nodes.clone(),
                weights: weights.clone(),
            },
        };
        speed
            .validate()
            .map_err(|e| ConfigError(format!("speed: {e}")))?;
        Ok(speed)
    }

    pub fn kernel_spec(&self) -> CResult<KernelSpec> {
        let section = self.kernel.as_ref().ok_or_else(|| missing("kernel"))?;
        let sensing = match section.sensing {
            SensingKind::Linear => Sensing::LinearId,
            SensingKind::Adhesion => Sensing::Adhesion,
            SensingKind::Comparative => {
                let get = |name: &str, v: Option<f64>| {
                    v.ok_or_else(|| {
                        ConfigError(format!("kernel.{name} required for comparative sensing"))
                    })
                };
                Sensing::Comparative {
                    alpha: get("alpha", section.alpha)?,
                    beta: get("beta", section.beta)?,
                    k: get("k", section.k)?,
                }
            }
        };
        let regime = match section.regime {
            RegimeKind::Physical => Regime::Physical,
            RegimeKind::Local => Regime::LocalHyp,
            RegimeKind::Nonlocal => Regime::NonlocalHyp,
            RegimeKind::SmallRadius => Regime::SmallRExpansion,
        };
        let spec = KernelSpec {
            sensing,
            radius: section.radius,
            speed: self.speed()?,
            regime,
        };
        spec.validate()
            .map_err(|e| ConfigError(format!("kernel: {e}")))?;
        Ok(spec)
    }

    pub fn boundary(&self) -> CResult<BoundarySpec> {
        let dom = self.domain()?;
        match &self.boundary {
            None => Ok(if dom.periodic {
                BoundarySpec::Periodic
            } else {
                BoundarySpec::Maxwellian {
                    alpha: 0.0,
                    reflection: Reflection::BounceBack,
                }
            }),
            Some(section) => {
                let bc = match section.kind {
                    BoundaryKind::Periodic => BoundarySpec::Periodic,
                    BoundaryKind::Maxwellian => BoundarySpec::Maxwellian {
                        alpha: section.alpha.unwrap_or(0.0),
                        reflection: match section.reflection.unwrap_or(ReflectionKind::BounceBack) {
                            ReflectionKind::BounceBack => Reflection::BounceBack,
                            ReflectionKind::Specular => Reflection::Specular,
                        },
                    },
                };
                bc.validate(&dom)
                    .map_err(|e| ConfigError(format!("boundary: {e}")))?;
                Ok(bc)
            }
        }
    }

    pub fn time(&self) -> CResult<&TimeSection> {
        self.time.as_ref().ok_or_else(|| missing("time"))
    }

    /// Initial profile (density or phase) on the grid; the seed drives the
    /// noisy variant.
    pub fn initial_profile(&self, seed: u64) -> CResult<ScalarField> {
        use rand::{Rng, SeedableRng};
        let dom = self.domain()?;
        let section = self.initial.as_ref().ok_or_else(|| missing("initial"))?;
        let tau = 2.0 * std::f64::consts::PI;
        let length = dom.length();
        let field = match section {
            InitialSection::Constant { value } => ScalarField::constant(dom, *value),
            InitialSection::Gaussian {
                base,
                amplitude,
                center,
                sigma,
            } => ScalarField::from_fn(dom, |x| {
                base + amplitude * (-0.5 * ((x - center) / sigma).powi(2)).exp()
            }),
            InitialSection::Bimodal {
                base,
                amplitude1,
                center1,
                sigma1,
                amplitude2,
                center2,
                sigma2,
            } => ScalarField::from_fn(dom, |x| {
                base + amplitude1 * (-0.5 * ((x - center1) / sigma1).powi(2)).exp()
                    + amplitude2 * (-0.5 * ((x - center2) / sigma2).powi(2)).exp()
            }),
            InitialSection::Perturbed {
                base,
                amplitude,
                mode,
                modes,
                phase,
            } => {
                let modes: Vec<u32> = match (mode, modes) {
                    (Some(m), None) => vec![*m],
                    (None, Some(ms)) => ms.clone(),
                    (None, None) => vec![1],
                    (Some(_), Some(_)) => {
                        return Err(ConfigError(
                            "initial: give either mode or modes, not both".into(),
                        ))
                    }
                };
                let amp = amplitude * base / modes.len() as f64;
                let x0 = dom.x_min;
                ScalarField::from_fn(dom, |x| {
                    let mut v = *base;
                    for (j, m) in modes.iter().enumerate() {
                        v += amp * (tau * *m as f64 * (x - x0) / length + phase + j as f64).cos();
                    }
                    v
                })
            }
            InitialSection::Noisy {
                base,
                amplitude,
                n_modes,
            } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let comps: Vec<(f64, f64)> = (0..*n_modes)
                    .map(|_| (rng.random::<f64>() * tau, rng.random::<f64>() * 2.0 - 1.0))
                    .collect();
                let norm: f64 = comps.iter().map(|(_, a)| a.abs()).sum();
                let x0 = dom.x_min;
                ScalarField::from_fn(dom, |x| {
                    let mut v = 0.0;
                    for (j, (ph, a)) in comps.iter().enumerate() {
                        v += a * (tau * (j + 1) as f64 * (x - x0) / length + ph).cos();
                    }
                    base + amplitude * v / norm.max(1e-12)
                })
            }
            InitialSection::SteepSine { amplitude, mode } => {
                let x0 = dom.x_min;
                ScalarField::from_fn(dom, |x| {
                    amplitude * (tau * *mode as f64 * (x - x0) / length).sin()
                })
            }
        };
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
solver = "kinetic"

[domain]
x_min = 0.0
x_max = 1.0
n_cells = 100

[signal]
kind = "gaussian"
amplitude = 1.0
center = 1.0
sigma = 0.05

[kernel]
sensing = "linear"
radius = 0.01

[speed]
kind = "dirac"
value = 1.0

[params]
mu = 1.0

[initial]
kind = "constant"
value = 0.1

[time]
t_final = 1.0
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverKind::Kinetic);
        assert!(cfg.kernel_spec().is_ok());
        assert!(cfg.signal().is_ok());
        let rho0 = cfg.initial_profile(0).unwrap();
        assert_eq!(rho0.values.len(), 100);
    }

    #[test]
    fn unknown_keys_rejected() {
        let broken = MINIMAL.replace("[time]", "[time]\nwhatever = 3.0\n");
        let err = ExperimentConfig::from_toml(&broken).unwrap_err();
        assert!(err.0.contains("whatever"), "message: {}", err.0);
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let text = cfg.to_toml();
        let again = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(again.domain.n_cells, 100);
    }

    #[test]
    fn comparative_requires_parameters() {
        let broken = MINIMAL.replace("sensing = \"linear\"", "sensing = \"comparative\"");
        let cfg = ExperimentConfig::from_toml(&broken).unwrap();
        let err = cfg.kernel_spec().unwrap_err();
        assert!(err.0.contains("alpha"));
    }

    #[test]
    fn noisy_initial_is_seed_deterministic() {
        let text = MINIMAL.replace(
            "[initial]\nkind = \"constant\"\nvalue = 0.1",
            "[initial]\nkind = \"noisy\"\nbase = 1.0\namplitude = 0.01",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let a = cfg.initial_profile(7).unwrap();
        let b = cfg.initial_profile(7).unwrap();
        let c = cfg.initial_profile(8).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }
}
