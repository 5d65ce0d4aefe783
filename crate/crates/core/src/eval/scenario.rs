//! Scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::battery_sim::BatteryInterfaceModel;
use crate::constructor::{FitMethod, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::manager::{DEFAULT_THRESHOLD, DEFAULT_WINDOW_S};
use crate::trace_sim::{ComponentStateModel, PredictorSpec, WorkloadSpec};

pub const DEFAULT_RATE_GRID: [f64; 7] = [0.01, 0.1, 0.5, 1.0, 4.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    ErrorVsRate,
    Molding,
    Adaptation,
    RegressogramCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructorConfig {
    #[serde(default = "default_t_low")]
    pub t_low_s: f64,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default = "default_method")]
    pub method: FitMethod,
    #[serde(default = "default_bins")]
    pub regressogram_bins: usize,
    #[serde(default = "default_target")]
    pub accuracy_target: f64,
    /// Rate at which predictors are collected before stretching.
    #[serde(default = "default_base_rate")]
    pub base_rate_hz: f64,
}

fn default_t_low() -> f64 {
    100.0
}
fn default_l() -> usize {
    2
}
fn default_method() -> FitMethod {
    FitMethod::Tls
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_target() -> f64 {
    0.9
}
fn default_base_rate() -> f64 {
    1.0
}

impl Default for ConstructorConfig {
    fn default() -> Self {
        ConstructorConfig {
            t_low_s: default_t_low(),
            l: default_l(),
            method: default_method(),
            regressogram_bins: default_bins(),
            accuracy_target: default_target(),
            base_rate_hz: default_base_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManagerConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_window")]
    pub window_s: f64,
    /// Span of fresh data collected for every construction.
    #[serde(default = "default_training_span")]
    pub training_span_s: f64,
    /// Whether the changed setting is part of the configuration key.
    #[serde(default)]
    pub track_in_key: bool,
    #[serde(default = "default_device")]
    pub device: String,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_window() -> f64 {
    DEFAULT_WINDOW_S
}
fn default_training_span() -> f64 {
    1500.0
}
fn default_device() -> String {
    "simulated".into()
}

impl Default for ManagerConfig {
    fn default() -> Self {
        ManagerConfig {
            threshold: default_threshold(),
            window_s: default_window(),
            training_span_s: default_training_span(),
            track_in_key: false,
            device: default_device(),
        }
    }
}

/// A change applied part-way through an adaptation run: the workload after
/// `at_s` is replaced, and the named software setting takes a new value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeEvent {
    pub at_s: f64,
    #[serde(default = "default_setting")]
    pub setting: String,
    #[serde(default)]
    pub before: String,
    #[serde(default)]
    pub after: String,
    pub workload: WorkloadSpec,
}

fn default_setting() -> String {
    "workload".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tick")]
    pub tick_s: f64,
    /// Polling rate of fast predictors.
    #[serde(default = "default_read_rate")]
    pub read_rate_hz: f64,
    /// Extra power drawn for one tick per predictor read.
    #[serde(default)]
    pub read_overhead_w: f64,
    #[serde(default = "default_grid")]
    pub rate_grid: Vec<f64>,
    /// Leading span used for the initial model.
    #[serde(default)]
    pub train_s: f64,
    /// Span after training used for evaluation or monitoring.
    pub test_s: f64,
    pub system: ComponentStateModel,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub predictors: Vec<PredictorSpec>,
    pub battery: BatteryInterfaceModel,
    #[serde(default)]
    pub constructor: ConstructorConfig,
    #[serde(default)]
    pub manager: ManagerConfig,
    #[serde(default)]
    pub change: Option<ChangeEvent>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_tick() -> f64 {
    0.001
}
fn default_read_rate() -> f64 {
    100.0
}
fn default_grid() -> Vec<f64> {
    DEFAULT_RATE_GRID.to_vec()
}

const BUILTINS: [(&str, &str); 8] = [
    ("t61like", include_str!("../../scenarios/t61like.toml")),
    ("n85like", include_str!("../../scenarios/n85like.toml")),
    ("n900like", include_str!("../../scenarios/n900like.toml")),
    ("dvs_flip", include_str!("../../scenarios/dvs_flip.toml")),
    (
        "workload_switch",
        include_str!("../../scenarios/workload_switch.toml"),
    ),
    ("control", include_str!("../../scenarios/control.toml")),
    ("quadratic", include_str!("../../scenarios/quadratic.toml")),
    (
        "linear_noiseless",
        include_str!("../../scenarios/linear_noiseless.toml"),
    ),
];

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl Scenario {
    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTINS.iter().map(|(n, _)| *n)
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Scenario::parse(text).expect("built-in scenarios parse"))
    }

    pub fn parse(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |r| line_col(text, r.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    /// A built-in name or a path to a scenario file.
    pub fn load(spec: &str) -> Result<Scenario> {
        if let Some(s) = Scenario::builtin(spec) {
            return Ok(s);
        }
        let path = Path::new(spec);
        if !path.exists() {
            return Err(Error::Config(format!(
                "`{spec}` is neither a scenario file nor a built-in ({})",
                Scenario::builtin_names().collect::<Vec<_>>().join(", ")
            )));
        }
        Scenario::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.battery.validate()?;
        for p in &self.predictors {
            p.validate()?;
        }
        if self.rate_grid.is_empty() || self.rate_grid.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("rate grid must hold positive rates".into()));
        }
        if !(self.test_s > 0.0) || !(self.train_s >= 0.0) {
            return Err(Error::Config("spans must be positive".into()));
        }
        let c = &self.constructor;
        if !(50.0..=100.0).contains(&c.t_low_s) {
            return Err(Error::Config(format!(
                "T_low of {} s is outside 50–100 s",
                c.t_low_s
            )));
        }
        if c.l == 0 {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&c.accuracy_target) {
            return Err(Error::Config("accuracy target must lie in [0, 1)".into()));
        }
        if !(self.manager.threshold > 0.0) || !(self.manager.window_s > 0.0) {
            return Err(Error::Config(
                "manager threshold and window must be positive".into(),
            ));
        }
        let needs_model = !matches!(self.experiment, Experiment::ErrorVsRate);
        if needs_model && self.predictors.is_empty() {
            return Err(Error::Config("this experiment needs predictors".into()));
        }
        if needs_model && self.train_s < c.t_low_s {
            return Err(Error::Config("training span is shorter than T_low".into()));
        }
        if self.experiment == Experiment::Adaptation && self.manager.training_span_s < c.t_low_s {
            return Err(Error::Config(
                "manager training span is shorter than T_low".into(),
            ));
        }
        if let Some(ch) = &self.change {
            if !(ch.at_s > 0.0 && ch.at_s < self.train_s + self.test_s) {
                return Err(Error::Config("change must happen inside the run".into()));
            }
        }
        Ok(())
    }

    /// Applies the run seed to every random source.
    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.seed = seed;
        self
    }

    pub fn total_s(&self) -> f64 {
        self.train_s + self.test_s
    }
}
