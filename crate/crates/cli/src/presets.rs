//! Built-in experiment presets, dumpable to editable config files.

use crate::config::ExperimentConfig;

/// Named variants of a preset; each variant is a complete runnable config.
pub fn preset(name: &str) -> Option<Vec<(String, ExperimentConfig)>> {
    let texts: Vec<(&str, String)> = match name {
        "fig1" => vec![
            ("constant", fig1_config("constant")),
            ("gaussian", fig1_config("gaussian")),
            ("localized", fig1_config("localized")),
        ],
        "fig2" => vec![
            ("sep_below", fig23_config(0.4, 0.6, 0.03, 0.03)),
            ("sep_equal", fig23_config(0.3, 0.7, 0.03, 0.03)),
            ("sep_above", fig23_config(0.05, 0.95, 0.03, 0.03)),
        ],
        "fig3" => vec![
            ("sep_two_r", fig23_config(0.1, 0.9, 0.06, 0.03)),
            ("sep_half_r", fig23_config(0.4, 0.6, 0.06, 0.03)),
        ],
        "adh" => vec![
            ("perturbed", adh_config("perturbed")),
            ("bimodal_far", adh_config("bimodal_far")),
            ("bimodal_near", adh_config("bimodal_near")),
        ],
        "hamiltonian-H" => vec![("table", hamiltonian_h_config())],
        "stability" => vec![("sweep", stability_config())],
        _ => return None,
    };
    Some(
        texts
            .into_iter()
            .map(|(variant, text)| {
                let cfg = ExperimentConfig::from_toml(&text)
                    .unwrap_or_else(|e| panic!("preset {name}/{variant} invalid: {e}"));
                (variant.to_string(), cfg)
            })
            .collect(),
    )
}

pub fn preset_names() -> &'static [&'static str] {
    &["fig1", "fig2", "fig3", "adh", "hamiltonian-H", "stability"]
}

fn fig1_config(variant: &str) -> String {
    let initial = match variant {
        "gaussian" => {
            "[initial]\nkind = \"gaussian\"\nbase = 1e-3\namplitude = 1.0\ncenter = 1.5\nsigma = 0.3"
        }
        _ => "[initial]\nkind = \"constant\"\nvalue = 0.1",
    };
    let regime = if variant == "localized" {
        "local"
    } else {
        "nonlocal"
    };
    format!(
        r#"solver = "kinetic"
seed = 0

[domain]
x_min = 0.0
x_max = 1.0
n_cells = 1000
periodic = false

[signal]
kind = "gaussian"
amplitude = 1.0
center = 1.0
sigma = 0.05

[kernel]
sensing = "linear"
radius = 0.01
regime = "{regime}"

[speed]
kind = "uniform"
max = 5e-5
n_nodes = 8

[params]
mu = 1.0
epsilon = 1e-5

{initial}

[time]
t_final = 6e4
quasi_stationary_rate = 1e-6

[boundary]
kind = "maxwellian"
alpha = 0.0
reflection = "bounce_back"

[kinetic]
cfl = 0.9
track_entropy = true
isotropic_init = true
"#
    )
}

fn fig23_config(center1: f64, center2: f64, sigma1: f64, sigma2: f64) -> String {
    format!(
        r#"solver = "kinetic"
seed = 0

[domain]
x_min = 0.0
x_max = 1.0
n_cells = 1000
periodic = false

[signal]
kind = "bimodal"
amplitude1 = 1.0
center1 = {center1}
sigma1 = {sigma1}
amplitude2 = 1.0
center2 = {center2}
sigma2 = {sigma2}

[kernel]
sensing = "linear"
radius = 0.4
regime = "nonlocal"

[speed]
kind = "uniform"
max = 5e-5
n_nodes = 8

[params]
mu = 1.0
epsilon = 1e-5

[initial]
kind = "constant"
value = 0.1

[time]
t_final = 6e4
quasi_stationary_rate = 1e-6

[boundary]
kind = "maxwellian"
alpha = 0.0
reflection = "bounce_back"
"#
    )
}

fn adh_config(variant: &str) -> String {
    let initial = match variant {
        "bimodal_far" => {
            "[initial]\nkind = \"bimodal\"\namplitude1 = 1.0\ncenter1 = 2.3\nsigma1 = 0.10\namplitude2 = 1.0\ncenter2 = 2.7\nsigma2 = 0.10"
        }
        "bimodal_near" => {
            "[initial]\nkind = \"bimodal\"\namplitude1 = 1.0\ncenter1 = 2.4\nsigma1 = 0.10\namplitude2 = 1.0\ncenter2 = 2.6\nsigma2 = 0.10"
        }
        _ => "[initial]\nkind = \"perturbed\"\nbase = 1.0\namplitude = 1e-2\nmodes = [3, 5, 8]",
    };
    format!(
        r#"solver = "kinetic"
seed = 0

[domain]
x_min = 2.0
x_max = 3.0
n_cells = 1000
periodic = true

[kernel]
sensing = "adhesion"
radius = 5e-2
regime = "nonlocal"

[speed]
kind = "dirac"
value = 1.0

[params]
mu = 100.0
epsilon = 1e-2

{initial}

[time]
t_final = 4.0

[boundary]
kind = "periodic"
"#
    )
}

fn hamiltonian_h_config() -> String {
    r#"solver = "hamiltonian"
seed = 0

[domain]
x_min = 0.0
x_max = 1.0
n_cells = 100
periodic = true

[kernel]
sensing = "adhesion"
radius = 5e-2
regime = "nonlocal"

[speed]
kind = "dirac"
value = 1.0

[params]
mu = 100.0

[hamiltonian]
p_min = -130.0
p_max = 130.0
p_samples = 2048
"#
    .to_string()
}

fn stability_config() -> String {
    // ratios V/(mu R) of 0.2, 0.5, 0.9, 1.1, 2.0 via the sensing radius
    r#"solver = "kinetic"
seed = 0

[domain]
x_min = 0.0
x_max = 1.0
n_cells = 1000
periodic = true

[kernel]
sensing = "adhesion"
radius = 5e-2
regime = "nonlocal"

[speed]
kind = "dirac"
value = 1.0

[params]
mu = 100.0
epsilon = 1e-2

[initial]
kind = "perturbed"
base = 1.0
amplitude = 1e-2
mode = 4

[time]
t_final = 8.0

[boundary]
kind = "periodic"

[sweep]
axes = [
  { param = "kernel.radius", values = [0.05, 0.02, 0.011111111111111112, 0.009090909090909090, 0.005] },
]
"#
    .to_string()
}
