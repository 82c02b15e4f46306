//! Dispatches a parsed experiment configuration to the solvers and writes
//! the run outputs: delimiter-separated data files plus a manifest that
//! doubles as the completion marker.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use kinotaxis_core::analysis::{
    concentration_weight_estimates, find_peaks, hopf_cole, sawtooth_extract, singular_points,
};
use kinotaxis_core::grid::ScalarField;
use kinotaxis_core::hamiltonian::{stability_report, HamiltonianEvaluator, Stability};
use kinotaxis_core::hj::{run_hj, tabulate_h, HjBoundary, HjConfig, HjHamiltonian, PhaseField};
use kinotaxis_core::kernel::{Sensing, SpeedDistribution};
use kinotaxis_core::kinetic::{KineticConfig, KineticSolver, SensedKind};
use kinotaxis_core::macroscopic::{moment_profiles, MacroModel, MacroSolver};
use kinotaxis_core::signal::signal_variation_length;

use crate::config::{
    AggregateModelKind, ConfigError, ExperimentConfig, HjHamiltonianKind, SolverKind,
};

#[derive(Debug)]
pub enum RunFailure {
    Config(String),
    Solver(String),
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::Config(m) => write!(f, "configuration error: {m}"),
            RunFailure::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl From<ConfigError> for RunFailure {
    fn from(e: ConfigError) -> Self {
        RunFailure::Config(e.0)
    }
}

impl From<kinotaxis_core::Error> for RunFailure {
    fn from(e: kinotaxis_core::Error) -> Self {
        match e {
            kinotaxis_core::Error::InvalidConfig(m) => RunFailure::Config(m),
            other => RunFailure::Solver(other.to_string()),
        }
    }
}

fn io_fail(e: std::io::Error) -> RunFailure {
    RunFailure::Solver(format!("io: {e}"))
}

pub type RunResult<T> = Result<T, RunFailure>;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Derived {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal_variation_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sawtooth_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hessian_at_zero: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modal_abs_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular_points_failed: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionLayout {
    pub file: String,
    pub format: String,
    pub frames: usize,
    pub cells: usize,
    pub directions: usize,
    pub speed_nodes: usize,
    pub index_order: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub solver: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub final_time: f64,
    pub stopped_quasi_stationary: bool,
    pub derived: Derived,
    pub files: Vec<FileRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionLayout>,
    pub config: ExperimentConfig,
}

pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> RunResult<usize> {
    fs::create_dir_all(dir).map_err(io_fail)?;
    fs::write(dir.join(name), contents).map_err(io_fail)?;
    Ok(contents.lines().count().saturating_sub(1))
}

/// Long-format series file: one row per (time, cell).
fn series_csv(header: &str, times: &[f64], xs: &[f64], frames: &[Vec<f64>]) -> String {
    let mut out = String::with_capacity(frames.len() * xs.len() * 24);
    out.push_str(header);
    out.push('\n');
    for (t, frame) in times.iter().zip(frames) {
        for (x, v) in xs.iter().zip(frame) {
            out.push_str(&format!("{t:.16e},{x:.16e},{v:.16e}\n"));
        }
    }
    out
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> RunResult<RunOutput> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    fs::create_dir_all(out_dir).map_err(io_fail)?;

    let mut files = Vec::new();
    let mut derived = Derived {
        epsilon: cfg.params.epsilon,
        ..Derived::default()
    };
    let mut distribution = None;
    let mut final_time = 0.0;
    let mut stopped = false;

    match cfg.solver {
        SolverKind::Kinetic => {
            let traj = run_kinetic_solver(&cfg, seed, &mut derived)?;
            final_time = *traj.times.last().unwrap_or(&0.0);
            stopped = traj.stopped_quasi_stationary;
            let dom = cfg.domain()?;
            let xs = dom.centers();
            let rows = write_file(
                out_dir,
                "rho.csv",
                &series_csv("t,x,rho", &traj.times, &xs, &traj.frames),
            )?;
            files.push(FileRecord {
                name: "rho.csv".into(),
                rows,
            });
            if let Some(entropy) = &traj.entropy {
                let mut text = String::from("t,relative_entropy\n");
                for (t, e) in traj.times.iter().zip(entropy) {
                    text.push_str(&format!("{t:.16e},{e:.16e}\n"));
                }
                let rows = write_file(out_dir, "entropy.csv", &text)?;
                files.push(FileRecord {
                    name: "entropy.csv".into(),
                    rows,
                });
            }
            if let Some(frames) = &traj.distribution_frames {
                let mut bytes = Vec::new();
                for f in frames {
                    for v in f.iter() {
                        bytes.extend_from_slice(&v.to_le_bytes());
                    }
                }
                fs::write(out_dir.join("f_snapshots.bin"), &bytes).map_err(io_fail)?;
                let shape = frames[0].dim();
                distribution = Some(DistributionLayout {
                    file: "f_snapshots.bin".into(),
                    format: "little-endian f64".into(),
                    frames: frames.len(),
                    cells: shape.0,
                    directions: shape.1,
                    speed_nodes: shape.2,
                    index_order: "frame-major, then cell, direction (+1 first), speed node".into(),
                });
            }
            derived.mass_drift = Some(traj.relative_mass_drift());
        }
        SolverKind::Macro => {
            let traj = run_macro_solver(&cfg, seed, &mut derived)?;
            final_time = *traj.times.last().unwrap_or(&0.0);
            stopped = traj.stopped_quasi_stationary;
            let dom = cfg.domain()?;
            let rows = write_file(
                out_dir,
                "rho.csv",
                &series_csv("t,x,rho", &traj.times, &dom.centers(), &traj.frames),
            )?;
            files.push(FileRecord {
                name: "rho.csv".into(),
                rows,
            });
            derived.mass_drift = Some(traj.relative_mass_drift());
        }
        SolverKind::Hj | SolverKind::Eikonal => {
            let traj = run_hj_solver(&cfg, seed, &mut derived)?;
            final_time = *traj.times.last().unwrap_or(&0.0);
            let dom = cfg.domain()?;
            let rows = write_file(
                out_dir,
                "phi.csv",
                &series_csv("t,x,phi", &traj.times, &dom.centers(), &traj.frames),
            )?;
            files.push(FileRecord {
                name: "phi.csv".into(),
                rows,
            });
            let stats = sawtooth_extract(&traj.final_phase);
            derived.modal_abs_slope = Some(stats.modal_abs_slope);
            let mut text = String::from("abs_slope,count\n");
            for (s, c) in &stats.histogram {
                text.push_str(&format!("{s:.16e},{c}\n"));
            }
            let rows = write_file(out_dir, "slopes.csv", &text)?;
            files.push(FileRecord {
                name: "slopes.csv".into(),
                rows,
            });
        }
        SolverKind::Hamiltonian => {
            let (rows_written, extra) = run_hamiltonian_dump(&cfg, out_dir, &mut derived)?;
            files.extend(rows_written);
            if let Some(f) = extra {
                files.push(f);
            }
        }
        SolverKind::Analyze => {
            return Err(RunFailure::Config(
                "solver = \"analyze\" runs through the analyze subcommand on a run directory"
                    .into(),
            ));
        }
    }

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        solver: format!("{:?}", cfg.solver).to_lowercase(),
        seed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        final_time,
        stopped_quasi_stationary: stopped,
        derived,
        files,
        distribution,
        config: cfg.clone(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| RunFailure::Solver(format!("manifest: {e}")))?;
    fs::write(out_dir.join("manifest.toml"), text).map_err(io_fail)?;
    Ok(RunOutput {
        dir: out_dir.to_path_buf(),
        manifest,
    })
}

fn run_kinetic_solver(
    cfg: &ExperimentConfig,
    seed: u64,
    derived: &mut Derived,
) -> RunResult<kinotaxis_core::kinetic::KineticTrajectory> {
    let dom = cfg.domain()?;
    let spec = cfg.kernel_spec()?;
    let sensed = if matches!(spec.sensing, Sensing::Adhesion) {
        SensedKind::SelfDensity
    } else {
        let signal = cfg.signal()?;
        derived.signal_variation_length = Some(signal_variation_length(&signal, &dom)?);
        SensedKind::Signal(signal)
    };
    if matches!(spec.sensing, Sensing::Adhesion) {
        let report = stability_report(&spec.speed, cfg.params.mu, spec.radius, 1)?;
        derived.stability_ratio = Some(report.ratio);
        derived.classification = Some(classification_name(report.stability));
        derived.sawtooth_slope = report.sawtooth_slope;
    }
    let time = cfg.time()?;
    let kin = cfg.kinetic.clone().unwrap_or_default();
    let config = KineticConfig {
        domain: dom,
        kernel: spec,
        sensed,
        boundary: cfg.boundary()?,
        rate: cfg.params.mu,
        cfl: kin.cfl,
        t_final: time.t_final,
        output_every: time.output_every.filter(|e| *e > 0),
        quasi_stationary_rate: time.quasi_stationary_rate,
        store_distribution: kin.store_distribution,
        track_entropy: kin.track_entropy,
        isotropic_init: kin.isotropic_init,
    };
    let solver = KineticSolver::new(config)?;
    let rho0 = cfg.initial_profile(seed)?;
    Ok(solver.run(&rho0)?)
}

fn run_macro_solver(
    cfg: &ExperimentConfig,
    seed: u64,
    derived: &mut Derived,
) -> RunResult<kinotaxis_core::macroscopic::MacroTrajectory> {
    let dom = cfg.domain()?;
    let section = cfg
        .aggregate
        .clone()
        .ok_or_else(|| RunFailure::Config("missing required section [aggregate]".into()))?;
    let model = match section.model {
        AggregateModelKind::Aggregate => {
            let spec = cfg.kernel_spec()?;
            let signal = cfg.signal()?;
            derived.signal_variation_length = Some(signal_variation_length(&signal, &dom)?);
            let (u, d) = moment_profiles(&spec, &signal, &dom)?;
            MacroModel::LinearAggregate {
                u,
                d,
                epsilon: section.epsilon,
                drift_correction: section.drift_correction,
            }
        }
        AggregateModelKind::Conservation => {
            let spec = cfg.kernel_spec()?;
            let signal = cfg.signal()?;
            let (u, _) = moment_profiles(&spec, &signal, &dom)?;
            MacroModel::Conservation { u }
        }
        AggregateModelKind::DiffusiveNonlocal => {
            let spec = cfg.kernel_spec()?;
            let signal = cfg.signal()?;
            let (u, d) = moment_profiles(&spec, &signal, &dom)?;
            MacroModel::DiffusiveNonlocal { u, d }
        }
        AggregateModelKind::DiffusiveLocal => {
            let spec = cfg.kernel_spec()?;
            let signal = cfg.signal()?;
            let v_mean = spec.speed.mean();
            let d2 = spec.speed.second_moment();
            let mut vals = Vec::with_capacity(dom.n_cells);
            for x in dom.centers() {
                vals.push(v_mean * spec.radius * signal.gradient(x) / signal.eval(x)?);
            }
            let u1 = ScalarField::new(dom, vals)?;
            let d0 = ScalarField::constant(dom, d2);
            MacroModel::DiffusiveLocal { u1, d0 }
        }
        AggregateModelKind::KellerSegel => {
            let spec = cfg.kernel_spec()?;
            MacroModel::KellerSegel {
                signal: cfg.signal()?,
                radius: spec.radius,
            }
        }
        AggregateModelKind::NonlinearAggregate => MacroModel::NonlinearAggregate {
            spec: cfg.kernel_spec()?,
            epsilon: section.epsilon,
            drift_correction: section.drift_correction,
            concentration_guard: section.concentration_guard,
        },
    };
    let cfl = cfg.kinetic.clone().unwrap_or_default().cfl;
    let solver = MacroSolver::new(dom, model, cfl)?;
    let time = cfg.time()?;
    let rho0 = cfg.initial_profile(seed)?;
    Ok(solver.run(
        &rho0,
        time.t_final,
        time.output_every.filter(|e| *e > 0),
        time.quasi_stationary_rate,
    )?)
}

fn run_hj_solver(
    cfg: &ExperimentConfig,
    seed: u64,
    derived: &mut Derived,
) -> RunResult<kinotaxis_core::hj::HjTrajectory> {
    let dom = cfg.domain()?;
    let section = cfg
        .hj
        .clone()
        .ok_or_else(|| RunFailure::Config("missing required section [hj]".into()))?;
    if matches!(cfg.solver, SolverKind::Eikonal)
        && matches!(
            section.hamiltonian,
            HjHamiltonianKind::ClosedNonlinear | HjHamiltonianKind::TableLinear
        )
    {
        return Err(RunFailure::Config(
            "eikonal solver needs a quadratic hamiltonian kind".into(),
        ));
    }
    let speed = cfg.speed()?;
    let u_sup = speed.sup();
    let lambda = if section.lambda > 0.0 {
        section.lambda
    } else {
        u_sup
    };
    let hamiltonian = match section.hamiltonian {
        HjHamiltonianKind::ClosedNonlinear => {
            let spec = cfg.kernel_spec()?;
            let v = match speed {
                SpeedDistribution::Dirac { speed } => speed,
                _ => {
                    return Err(RunFailure::Config(
                        "closed_nonlinear needs a dirac speed".into(),
                    ))
                }
            };
            let report = stability_report(&spec.speed, cfg.params.mu, spec.radius, 1)?;
            derived.stability_ratio = Some(report.ratio);
            derived.classification = Some(classification_name(report.stability));
            derived.sawtooth_slope = report.sawtooth_slope;
            HjHamiltonian::ClosedNonlinear {
                speed: v,
                mu: cfg.params.mu,
                radius: spec.radius,
            }
        }
        HjHamiltonianKind::TableLinear => {
            let spec = cfg.kernel_spec()?;
            let signal = cfg.signal()?;
            let eval = HamiltonianEvaluator::linear(spec, signal, dom, cfg.params.mu)?;
            let ham = cfg.hamiltonian.as_ref().ok_or_else(|| {
                RunFailure::Config("table_linear needs the [hamiltonian] p-grid".into())
            })?;
            let n_p = section.p_samples.unwrap_or(2048);
            HjHamiltonian::Table(tabulate_h(&eval, &dom, true, ham.p_min, ham.p_max, n_p)?)
        }
        HjHamiltonianKind::QuadraticMoments => {
            let spec = cfg.kernel_spec()?;
            let signal = cfg.signal()?;
            let (u, d) = moment_profiles(&spec, &signal, &dom)?;
            HjHamiltonian::Quadratic { u, d }
        }
        HjHamiltonianKind::QuadraticAdhesion => {
            let spec = cfg.kernel_spec()?;
            HjHamiltonian::QuadraticAdhesion {
                speed: spec.speed.clone(),
                radius: spec.radius,
            }
        }
    };
    let boundary = if dom.periodic {
        HjBoundary::Periodic
    } else {
        match &hamiltonian {
            HjHamiltonian::Quadratic { u, d } => HjBoundary::Flux {
                u: u.clone(),
                d: d.clone(),
            },
            _ => HjBoundary::Neumann,
        }
    };
    let time = cfg.time()?;
    let phi0_field = cfg.initial_profile(seed)?;
    let phi0 = PhaseField::new(dom, phi0_field.values)?;
    let config = HjConfig {
        hamiltonian,
        boundary,
        lambda,
        t_final: time.t_final,
        output_every: time.output_every.filter(|e| *e > 0),
    };
    Ok(run_hj(&phi0, &config)?)
}

fn run_hamiltonian_dump(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    derived: &mut Derived,
) -> RunResult<(Vec<FileRecord>, Option<FileRecord>)> {
    let dom = cfg.domain()?;
    let spec = cfg.kernel_spec()?;
    let ham = cfg
        .hamiltonian
        .clone()
        .ok_or_else(|| RunFailure::Config("missing required section [hamiltonian]".into()))?;
    let nonlinear = matches!(spec.sensing, Sensing::Adhesion);
    let eval = if nonlinear {
        HamiltonianEvaluator::nonlinear_adhesion(
            spec.speed.clone(),
            spec.radius,
            cfg.params.mu,
            1,
            0,
        )?
    } else {
        let signal = cfg.signal()?;
        derived.signal_variation_length = Some(signal_variation_length(&signal, &dom)?);
        HamiltonianEvaluator::linear(spec.clone(), signal, dom, cfg.params.mu)?
    };

    let xs: Vec<f64> = if nonlinear {
        vec![0.0]
    } else {
        let n = ham.x_samples.max(1);
        (0..n)
            .map(|i| dom.x_min + (dom.x_max - dom.x_min) * (i as f64 + 0.5) / n as f64)
            .collect()
    };
    let mut failures = 0usize;
    let mut text = String::from("x,p,H\n");
    for &x in &xs {
        for j in 0..ham.p_samples {
            let p =
                ham.p_min + (ham.p_max - ham.p_min) * j as f64 / (ham.p_samples - 1).max(1) as f64;
            match eval.solve_h(x, [p, 0.0]) {
                Ok(h) => text.push_str(&format!("{x:.16e},{p:.16e},{h:.16e}\n")),
                Err(kinotaxis_core::Error::SingularHamiltonian { .. }) => {
                    failures += 1;
                    text.push_str(&format!("{x:.16e},{p:.16e},nan\n"));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    derived.singular_points_failed = Some(failures);
    let x_mid = xs[xs.len() / 2];
    derived.hessian_at_zero = Some(eval.hess_h(x_mid, [0.0, 0.0])?.xx);
    if nonlinear {
        let report = stability_report(&spec.speed, cfg.params.mu, spec.radius, 1)?;
        derived.stability_ratio = Some(report.ratio);
        derived.classification = Some(classification_name(report.stability));
        derived.sawtooth_slope = report.sawtooth_slope;
    }
    let mut records = Vec::new();
    let rows = write_file(out_dir, "hamiltonian.csv", &text)?;
    records.push(FileRecord {
        name: "hamiltonian.csv".into(),
        rows,
    });
    // scaled-rate table on the same grid when nu is supplied
    let extra = if let Some(nu) = cfg.params.nu {
        let mut text = String::from("x,p,H_nu\n");
        for &x in &xs {
            for j in 0..ham.p_samples {
                let p = ham.p_min
                    + (ham.p_max - ham.p_min) * j as f64 / (ham.p_samples - 1).max(1) as f64;
                match eval.scaled_h_nu(x, [p, 0.0], nu) {
                    Ok(h) => text.push_str(&format!("{x:.16e},{p:.16e},{h:.16e}\n")),
                    Err(kinotaxis_core::Error::SingularHamiltonian { .. }) => {
                        text.push_str(&format!("{x:.16e},{p:.16e},nan\n"))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let rows = write_file(out_dir, "hamiltonian_nu.csv", &text)?;
        Some(FileRecord {
            name: "hamiltonian_nu.csv".into(),
            rows,
        })
    } else {
        None
    };
    Ok((records, extra))
}

fn classification_name(s: Stability) -> String {
    match s {
        Stability::StableConvex => "stable_convex".into(),
        Stability::UnstableConvexConcave => "unstable_convex_concave".into(),
    }
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Serialize)]
pub struct AnalysisSummary {
    pub peak_count: usize,
    pub peak_locations: Vec<f64>,
    pub peak_heights: Vec<f64>,
    pub peak_weights: Vec<f64>,
    /// Informational split of the total mass by inverse covariance trace.
    pub expected_concentration_weights: Vec<f64>,
    pub modal_abs_slope: f64,
    pub fraction_near_mode: f64,
    pub singular_points: Vec<f64>,
    pub mass: f64,
    pub epsilon_used: f64,
}

/// Post-process a finished run directory: peaks of the final density, its
/// Hopf-Cole phase slopes and the singular points of the drift field.
pub fn analyze_run(run_dir: &Path, out_dir: &Path) -> RunResult<AnalysisSummary> {
    let manifest_text = fs::read_to_string(run_dir.join("manifest.toml")).map_err(io_fail)?;
    let manifest: Manifest =
        toml::from_str(&manifest_text).map_err(|e| RunFailure::Config(e.to_string()))?;
    let cfg = &manifest.config;
    let dom = cfg.domain()?;

    let rho_text = fs::read_to_string(run_dir.join("rho.csv")).map_err(io_fail)?;
    let mut times: Vec<f64> = Vec::new();
    let mut frames: Vec<Vec<f64>> = Vec::new();
    for line in rho_text.lines().skip(1) {
        let mut parts = line.split(',');
        let t: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RunFailure::Config(format!("bad row in rho.csv: {line}")))?;
        let _x: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RunFailure::Config(format!("bad row in rho.csv: {line}")))?;
        let v: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RunFailure::Config(format!("bad row in rho.csv: {line}")))?;
        if times
            .last()
            .map(|lt| (lt - t).abs() > 1e-300)
            .unwrap_or(true)
        {
            times.push(t);
            frames.push(Vec::with_capacity(dom.n_cells));
        }
        frames.last_mut().expect("frame started").push(v);
    }
    if frames.is_empty() {
        return Err(RunFailure::Config("rho.csv holds no frames".into()));
    }

    let mut per_frame = String::from("t,peak_count,max_rho,relative_std\n");
    for (t, frame) in times.iter().zip(&frames) {
        let rho =
            ScalarField::new(dom, frame.clone()).map_err(|e| RunFailure::Config(e.to_string()))?;
        let peaks = find_peaks(&rho, 0.2);
        per_frame.push_str(&format!(
            "{t:.16e},{},{:.16e},{:.16e}\n",
            peaks.count(),
            rho.max(),
            rho.relative_std()
        ));
    }

    let final_rho = ScalarField::new(dom, frames.last().expect("nonempty").clone())
        .map_err(|e| RunFailure::Config(e.to_string()))?;
    let peaks = find_peaks(&final_rho, 0.2);
    let eps = cfg.params.epsilon.unwrap_or(1.0);
    let phi = hopf_cole(&final_rho, eps);
    let stats = sawtooth_extract(&phi);

    // drift diagnostics are defined for signal-driven kernels
    let (roots, weights_est) = match (cfg.kernel_spec(), cfg.signal()) {
        (Ok(spec), Ok(signal)) if !matches!(spec.sensing, Sensing::Adhesion) => {
            let (u, d) = moment_profiles(&spec, &signal, &dom)?;
            let roots = singular_points(&u).points.iter().map(|p| p.x).collect();
            let est = concentration_weight_estimates(&peaks, &d, final_rho.mass());
            (roots, est)
        }
        _ => (Vec::new(), Vec::new()),
    };

    let summary = AnalysisSummary {
        peak_count: peaks.count(),
        peak_locations: peaks.locations(),
        peak_heights: peaks.peaks.iter().map(|p| p.height).collect(),
        peak_weights: peaks.peaks.iter().map(|p| p.weight).collect(),
        expected_concentration_weights: weights_est,
        modal_abs_slope: stats.modal_abs_slope,
        fraction_near_mode: stats.fraction_near_mode,
        singular_points: roots,
        mass: final_rho.mass(),
        epsilon_used: eps,
    };
    fs::create_dir_all(out_dir).map_err(io_fail)?;
    write_file(out_dir, "peaks_per_frame.csv", &per_frame)?;
    let text = toml::to_string_pretty(&summary)
        .map_err(|e| RunFailure::Solver(format!("analysis: {e}")))?;
    fs::write(out_dir.join("analysis.toml"), text).map_err(io_fail)?;
    Ok(summary)
}

// ---------------------------------------------------------------- sweeps

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: Vec<(String, f64)>,
    pub status: String,
    pub classification: Option<String>,
    pub stability_ratio: Option<f64>,
    pub pattern_formed: Option<bool>,
    pub initial_relative_std: Option<f64>,
    pub final_relative_std: Option<f64>,
    pub mass_drift: Option<f64>,
}

/// Parameter paths a sweep may vary.
pub fn set_param(cfg: &mut ExperimentConfig, path: &str, value: f64) -> RunResult<()> {
    match path {
        "kernel.radius" => {
            cfg.kernel
                .as_mut()
                .ok_or_else(|| {
                    RunFailure::Config("sweep over kernel.radius without [kernel]".into())
                })?
                .radius = value;
        }
        "params.mu" => cfg.params.mu = value,
        "params.epsilon" => cfg.params.epsilon = Some(value),
        "speed.value" => match cfg.speed.as_mut() {
            Some(crate::config::SpeedSection::Dirac { value: v }) => *v = value,
            Some(crate::config::SpeedSection::Uniform { max, .. }) => *max = value,
            _ => {
                return Err(RunFailure::Config(
                    "sweep over speed.value needs a dirac or uniform speed".into(),
                ))
            }
        },
        "time.t_final" => {
            if let Some(t) = cfg.time.as_mut() {
                t.t_final = value;
            }
        }
        other => {
            return Err(RunFailure::Config(format!(
                "unknown sweep parameter path: {other}"
            )))
        }
    }
    Ok(())
}

/// Cartesian-product sweep; failures are recorded per row and the sweep
/// continues. Rows keep the axis ordering of the config.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    threads: Option<usize>,
) -> RunResult<Vec<SweepRow>> {
    let sweep = match &cfg.sweep {
        Some(s) if !s.axes.is_empty() => s.clone(),
        _ => {
            // an empty sweep block degenerates to a single run
            let out = run_experiment(cfg, &out_dir.join("run_000"), seed_override)?;
            let rows = vec![row_from_run(0, Vec::new(), &out)];
            write_sweep_summary(out_dir, &rows)?;
            return Ok(rows);
        }
    };
    let mut combos: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in &sweep.axes {
        let mut next = Vec::new();
        for combo in &combos {
            for v in &axis.values {
                let mut c = combo.clone();
                c.push((axis.param.clone(), *v));
                next.push(c);
            }
        }
        combos = next;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| RunFailure::Solver(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        use rayon::prelude::*;
        combos
            .par_iter()
            .enumerate()
            .map(|(i, combo)| {
                let mut run_cfg = cfg.clone();
                run_cfg.sweep = None;
                for (path, value) in combo {
                    if let Err(e) = set_param(&mut run_cfg, path, *value) {
                        return SweepRow {
                            index: i,
                            params: combo.clone(),
                            status: e.to_string(),
                            classification: None,
                            stability_ratio: None,
                            pattern_formed: None,
                            initial_relative_std: None,
                            final_relative_std: None,
                            mass_drift: None,
                        };
                    }
                }
                let dir = out_dir.join(format!("run_{i:03}"));
                match run_experiment(&run_cfg, &dir, seed_override) {
                    Ok(out) => row_from_run(i, combo.clone(), &out),
                    Err(e) => SweepRow {
                        index: i,
                        params: combo.clone(),
                        status: e.to_string(),
                        classification: None,
                        stability_ratio: None,
                        pattern_formed: None,
                        initial_relative_std: None,
                        final_relative_std: None,
                        mass_drift: None,
                    },
                }
            })
            .collect()
    });

    write_sweep_summary(out_dir, &rows)?;
    Ok(rows)
}

fn write_sweep_summary(out_dir: &Path, rows: &[SweepRow]) -> RunResult<()> {
    let mut text = String::from(
        "index,params,status,classification,stability_ratio,pattern_formed,initial_relative_std,final_relative_std,mass_drift\n",
    );
    for row in rows {
        let params = row
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v:.9e}"))
            .collect::<Vec<_>>()
            .join(";");
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.index,
            params,
            row.status,
            row.classification.clone().unwrap_or_default(),
            row.stability_ratio
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_default(),
            row.pattern_formed
                .map(|b| b.to_string())
                .unwrap_or_default(),
            row.initial_relative_std
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_default(),
            row.final_relative_std
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_default(),
            row.mass_drift
                .map(|v| format!("{v:.3e}"))
                .unwrap_or_default(),
        ));
    }
    write_file(out_dir, "summary.csv", &text)?;
    Ok(())
}

fn row_from_run(index: usize, params: Vec<(String, f64)>, out: &RunOutput) -> SweepRow {
    // pattern indicator: relative spatial std of rho grew tenfold
    let (initial, fin, pattern) = match read_rel_std(&out.dir) {
        Some((a, b)) => (Some(a), Some(b), Some(b > 10.0 * a)),
        None => (None, None, None),
    };
    SweepRow {
        index,
        params,
        status: "ok".into(),
        classification: out.manifest.derived.classification.clone(),
        stability_ratio: out.manifest.derived.stability_ratio,
        pattern_formed: pattern,
        initial_relative_std: initial,
        final_relative_std: fin,
        mass_drift: out.manifest.derived.mass_drift,
    }
}

fn read_rel_std(dir: &Path) -> Option<(f64, f64)> {
    let text = fs::read_to_string(dir.join("rho.csv")).ok()?;
    let mut first_t = None;
    let mut first = Vec::new();
    let mut last_t = f64::NAN;
    let mut last = Vec::new();
    for line in text.lines().skip(1) {
        let mut parts = line.split(',');
        let t: f64 = parts.next()?.parse().ok()?;
        parts.next()?;
        let v: f64 = parts.next()?.parse().ok()?;
        match first_t {
            None => {
                first_t = Some(t);
                first.push(v);
            }
            Some(ft) if (t - ft).abs() < 1e-300 => first.push(v),
            _ => {}
        }
        if (t - last_t).abs() > 1e-300 {
            last_t = t;
            last.clear();
        }
        last.push(v);
    }
    let rel = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        var.sqrt() / mean.abs()
    };
    if first.is_empty() || last.is_empty() {
        return None;
    }
    Some((rel(&first), rel(&last)))
}
