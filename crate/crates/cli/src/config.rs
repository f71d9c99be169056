use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use snakelab::mechanism::{exponents, BranchingMechanism, ExponentGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GaugeTable,
    Exponents,
    PackingDims,
    SnakeSample,
    PalmDensity,
    Keller,
    BoundsSeries,
    ExitTime,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GaugeTable => "gauge-table",
            Experiment::Exponents => "exponents",
            Experiment::PackingDims => "packing-dims",
            Experiment::SnakeSample => "snake-sample",
            Experiment::PalmDensity => "palm-density",
            Experiment::Keller => "keller",
            Experiment::BoundsSeries => "bounds-series",
            Experiment::ExitTime => "exit-time",
        }
    }

    fn needs_d(self) -> bool {
        !matches!(self, Experiment::GaugeTable | Experiment::Exponents)
    }

    fn needs_tree_sampler(self) -> bool {
        matches!(self, Experiment::PackingDims | Experiment::SnakeSample | Experiment::PalmDensity)
    }
}

/// The config file. Unknown fields anywhere are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub mechanism: BranchingMechanism,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn issue(field: impl Into<String>, message: impl Into<String>) -> Issue {
    Issue { field: field.into(), message: message.into() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeTableParams {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for GaugeTableParams {
    fn default() -> Self {
        GaugeTableParams { r_min: 1e-12, r_max: 0.05, per_decade: 4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentsParams {
    pub lam_min: f64,
    pub lam_max: f64,
}

impl Default for ExponentsParams {
    fn default() -> Self {
        ExponentsParams { lam_min: 1.0, lam_max: 1e8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PackingDimsParams {
    pub n_target: u64,
    pub per_decade: usize,
    /// Radii for greedy g-packings of each cloud; none by default.
    pub packing_eps: Vec<f64>,
}

impl Default for PackingDimsParams {
    fn default() -> Self {
        PackingDimsParams { n_target: 50_000, per_decade: 10, packing_eps: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnakeSampleParams {
    pub n_target: u64,
    pub sigma_floor: Option<f64>,
}

impl Default for SnakeSampleParams {
    fn default() -> Self {
        SnakeSampleParams { n_target: 1000, sigma_floor: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PalmDensityParams {
    pub a: f64,
    pub grid_step: f64,
    pub eps_trunc: f64,
    pub n_vertices: u64,
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for PalmDensityParams {
    fn default() -> Self {
        PalmDensityParams {
            a: 1.0,
            grid_step: 1e-3,
            eps_trunc: 0.01,
            n_vertices: 100,
            r_min: 1e-3,
            r_max: 1.0,
            per_decade: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KellerParams {
    pub r_list: Vec<f64>,
}

impl Default for KellerParams {
    fn default() -> Self {
        KellerParams { r_list: vec![0.02, 0.05, 0.1, 0.5] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSeriesParams {
    pub varrho: f64,
    /// Exponent of the radii ladder; the midpoint of its admissible window by default.
    pub c: Option<f64>,
    /// θ = e^{n²} for n = 1..=theta_n_max.
    pub theta_n_max: u64,
    pub ladder_n_max: u64,
    pub threshold: f64,
    pub tail_from: u64,
    /// u of the s_n sequence; the midpoint of (0, 2γ/(γ−1)) by default.
    pub sn_u: Option<f64>,
    pub sn_n_max: u64,
}

impl Default for BoundsSeriesParams {
    fn default() -> Self {
        BoundsSeriesParams {
            varrho: 1.0,
            c: None,
            theta_n_max: 6,
            ladder_n_max: 10_000,
            threshold: 5.0,
            tail_from: 50,
            sn_u: None,
            sn_n_max: 40,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExitTimeParams {
    pub r: f64,
    pub lam: f64,
    pub dt: f64,
    pub monte_carlo: bool,
}

impl Default for ExitTimeParams {
    fn default() -> Self {
        ExitTimeParams { r: 1.0, lam: 1.0, dt: 1e-4, monte_carlo: true }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Params {
    GaugeTable(GaugeTableParams),
    Exponents(ExponentsParams),
    PackingDims(PackingDimsParams),
    SnakeSample(SnakeSampleParams),
    PalmDensity(PalmDensityParams),
    Keller(KellerParams),
    BoundsSeries(BoundsSeriesParams),
    ExitTime(ExitTimeParams),
}

/// A config that passed validation, with CLI overrides applied.
#[derive(Clone, Debug, Serialize)]
pub struct Validated {
    pub experiment: Experiment,
    pub mechanism: BranchingMechanism,
    pub d: usize,
    pub seed: Option<u64>,
    pub replicas: usize,
    pub out: PathBuf,
    pub params: Params,
    pub warnings: Vec<Issue>,
}

impl Validated {
    pub fn is_stochastic(&self) -> bool {
        match &self.params {
            Params::PackingDims(_) | Params::SnakeSample(_) | Params::PalmDensity(_) => true,
            Params::ExitTime(p) => p.monte_carlo,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, Vec<Issue>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        vec![issue(if path == "." { "config".to_string() } else { path }, e.inner().to_string())]
    })
}

fn params<T: DeserializeOwned>(value: &serde_json::Value) -> Result<T, Issue> {
    serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "params".to_string() } else { format!("params.{path}") };
        issue(field, e.inner().to_string())
    })
}

/// Checks the config against the experiment; hypothesis violations that are
/// still worth running come back as warnings.
pub fn validate(experiment: Experiment, cfg: &ExperimentConfig, ov: &Overrides) -> Result<Validated, Vec<Issue>> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    if let Some(e) = cfg.experiment {
        if e != experiment {
            errors.push(issue(
                "experiment",
                format!("config is for {}, command line asks for {}", e.name(), experiment.name()),
            ));
        }
    }
    if let Err(e) = cfg.mechanism.validate() {
        errors.push(issue("mechanism", e.to_string()));
    }
    let d = cfg.d.unwrap_or(0);
    if experiment.needs_d() {
        match cfg.d {
            None => errors.push(issue("d", "required for this experiment")),
            Some(0) => errors.push(issue("d", "must be at least 1")),
            _ => {}
        }
    }
    let replicas = ov.replicas.or(cfg.replicas).unwrap_or(1);
    if replicas < 1 {
        errors.push(issue("replicas", "must be at least 1"));
    }
    let seed = ov.seed.or(cfg.seed);
    let out = ov
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("snakelab-out").join(experiment.name()));

    let parsed = match experiment {
        Experiment::GaugeTable => params(&cfg.params).map(Params::GaugeTable),
        Experiment::Exponents => params(&cfg.params).map(Params::Exponents),
        Experiment::PackingDims => params(&cfg.params).map(Params::PackingDims),
        Experiment::SnakeSample => params(&cfg.params).map(Params::SnakeSample),
        Experiment::PalmDensity => params(&cfg.params).map(Params::PalmDensity),
        Experiment::Keller => params(&cfg.params).map(Params::Keller),
        Experiment::BoundsSeries => params(&cfg.params).map(Params::BoundsSeries),
        Experiment::ExitTime => params(&cfg.params).map(Params::ExitTime),
    };
    let params = match parsed {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    let mech_ok = errors.iter().all(|e| e.field != "mechanism");

    if let Some(p) = &params {
        check_params(p, d, &mut errors);
    }
    if mech_ok && experiment.needs_tree_sampler() && cfg.mechanism.power_law().is_none() {
        errors.push(issue("mechanism", "tree samplers need a quadratic (α = 0) or pure stable mechanism"));
    }
    if mech_ok && matches!(experiment, Experiment::PackingDims | Experiment::PalmDensity) && d > 0 {
        if let Ok(rep) = exponents(&cfg.mechanism, &ExponentGrid { lam_min: 1.0, lam_max: 1e8 }) {
            let g = rep.gamma_lower;
            if g > 1.0 {
                let threshold = 2.0 * g / (g - 1.0);
                if (d as f64) <= threshold {
                    warnings.push(issue("d", format!("d ≤ 2γ/(γ−1) = {threshold}")));
                }
            }
        }
    }
    let Some(params) = params else {
        return Err(errors);
    };
    let v = Validated { experiment, mechanism: cfg.mechanism.clone(), d, seed, replicas, out, params, warnings };
    if v.is_stochastic() && v.seed.is_none() {
        errors.push(issue("seed", format!("required for the stochastic experiment {}", experiment.name())));
    }
    if errors.is_empty() {
        Ok(v)
    } else {
        Err(errors)
    }
}

fn check_params(p: &Params, d: usize, errors: &mut Vec<Issue>) {
    let mut need = |ok: bool, field: &str, msg: &str| {
        if !ok {
            errors.push(issue(format!("params.{field}"), msg));
        }
    };
    match p {
        Params::GaugeTable(p) => {
            need(p.r_min > 0.0 && p.r_min < p.r_max, "r_min", "need 0 < r_min < r_max");
            need(p.per_decade >= 1, "per_decade", "must be at least 1");
        }
        Params::Exponents(p) => {
            need(p.lam_min > 0.0 && p.lam_max >= 1e6 * p.lam_min, "lam_max", "the grid must span at least six decades");
        }
        Params::PackingDims(p) => {
            need(p.n_target >= 100, "n_target", "must be at least 100");
            need(p.per_decade >= 1, "per_decade", "must be at least 1");
            need(p.packing_eps.iter().all(|e| *e > 0.0), "packing_eps", "radii must be positive");
        }
        Params::SnakeSample(p) => {
            need(p.n_target >= 100, "n_target", "must be at least 100");
            need(p.sigma_floor.map_or(true, |f| f >= 0.0), "sigma_floor", "must be nonnegative");
        }
        Params::PalmDensity(p) => {
            need(p.a > 0.0, "a", "must be positive");
            need(p.grid_step > 0.0 && p.grid_step <= p.a, "grid_step", "need 0 < grid_step ≤ a");
            need(p.eps_trunc > 0.0, "eps_trunc", "must be positive");
            need(p.n_vertices >= 1, "n_vertices", "must be at least 1");
            need(p.r_min > 0.0 && p.r_min < p.r_max, "r_min", "need 0 < r_min < r_max");
            need(d >= 3, "d", "the spine experiments need d ≥ 3");
        }
        Params::Keller(p) => {
            need(
                !p.r_list.is_empty() && p.r_list.iter().all(|r| *r > 0.0),
                "r_list",
                "need a nonempty list of positive radii",
            );
        }
        Params::BoundsSeries(p) => {
            need(p.varrho > 0.0, "varrho", "must be positive");
            need(p.threshold > 0.0, "threshold", "must be positive");
            need(p.theta_n_max >= 1 && p.ladder_n_max >= 1, "ladder_n_max", "ladders need at least one rung");
            need(d >= 3, "d", "the bounds need d ≥ 3");
        }
        Params::ExitTime(p) => {
            need(p.r > 0.0, "r", "must be positive");
            need(p.lam >= 0.0, "lam", "must be nonnegative");
            need(p.dt > 0.0 && p.dt < p.r * p.r, "dt", "need 0 < dt < r²");
        }
    }
}
