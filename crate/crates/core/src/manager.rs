//! Configuration-keyed model table with error monitoring and rebuilds.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::battery_sim::ReadingStream;
use crate::collector::{aggregate_response, DesignMatrix};
use crate::constructor::{iterate_construction, EnergyModel, FitMethod};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.10;
pub const DEFAULT_WINDOW_S: f64 = 100.0;
const HISTORY_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Hardware,
    Software,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub category: Category,
    pub name: String,
    pub value: String,
}

/// A system configuration in canonical (sorted, de-duplicated) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<ConfigEntry>", into = "Vec<ConfigEntry>")]
pub struct ConfigurationKey(Vec<ConfigEntry>);

impl ConfigurationKey {
    pub fn new(entries: impl IntoIterator<Item = (Category, String, String)>) -> Self {
        entries
            .into_iter()
            .map(|(category, name, value)| ConfigEntry {
                category,
                name,
                value,
            })
            .collect::<Vec<_>>()
            .into()
    }

    pub fn entries(&self) -> &[ConfigEntry] {
        &self.0
    }
}

impl From<Vec<ConfigEntry>> for ConfigurationKey {
    fn from(mut v: Vec<ConfigEntry>) -> Self {
        v.sort();
        v.dedup();
        ConfigurationKey(v)
    }
}

impl From<ConfigurationKey> for Vec<ConfigEntry> {
    fn from(k: ConfigurationKey) -> Self {
        k.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lookup<'a> {
    Found(&'a EnergyModel),
    ColdStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub t_s: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Keep,
    Rebuild,
    Cooldown,
    Skip,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Keep => "keep",
            Action::Rebuild => "rebuild",
            Action::Cooldown => "cooldown",
            Action::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub t_s: f64,
    /// Absent for decisions taken without a monitored window.
    pub window_error: Option<f64>,
    pub threshold: f64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTable {
    models: HashMap<ConfigurationKey, EnergyModel>,
    active: Option<ConfigurationKey>,
    pub threshold: f64,
    pub window_s: f64,
    history: VecDeque<WindowError>,
    pub skipped_windows: usize,
    log: Vec<Decision>,
}

impl Default for ModelTable {
    fn default() -> Self {
        ModelTable::new(DEFAULT_THRESHOLD, DEFAULT_WINDOW_S)
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: ConfigurationKey,
    model: EnergyModel,
}

#[derive(Serialize, Deserialize)]
struct Persisted {
    threshold: f64,
    window_s: f64,
    active: Option<ConfigurationKey>,
    entries: Vec<Entry>,
    history: Vec<WindowError>,
    skipped_windows: usize,
    log: Vec<Decision>,
}

impl ModelTable {
    pub fn new(threshold: f64, window_s: f64) -> Self {
        ModelTable {
            models: HashMap::new(),
            active: None,
            threshold,
            window_s,
            history: VecDeque::new(),
            skipped_windows: 0,
            log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn active_key(&self) -> Option<&ConfigurationKey> {
        self.active.as_ref()
    }

    pub fn active_model(&self) -> Option<&EnergyModel> {
        self.active.as_ref().and_then(|k| self.models.get(k))
    }

    pub fn get(&self, key: &ConfigurationKey) -> Option<&EnergyModel> {
        self.models.get(key)
    }

    pub fn history(&self) -> impl Iterator<Item = &WindowError> {
        self.history.iter()
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.log
    }

    /// Makes `key` active and returns its model, or signals that one must be built.
    pub fn lookup_or_create(&mut self, key: &ConfigurationKey) -> Lookup<'_> {
        self.active = Some(key.clone());
        match self.models.get(key) {
            Some(m) => Lookup::Found(m),
            None => Lookup::ColdStart,
        }
    }

    /// Stores a model under the active key, returning the one it replaces.
    pub fn install(&mut self, model: EnergyModel) -> Result<Option<EnergyModel>> {
        let key = self.active.clone().ok_or_else(|| {
            Error::Argument("no active configuration to install a model under".into())
        })?;
        Ok(self.models.insert(key, model))
    }

    /// Relative error of the active model against the interface energy of
    /// each window. `x` holds one row per window.
    pub fn monitor(
        &mut self,
        x: &DesignMatrix,
        readings: &ReadingStream,
        voltage_v: f64,
    ) -> Result<Vec<WindowError>> {
        let model = self
            .active_model()
            .ok_or_else(|| Error::Argument("monitoring needs an active model".into()))?;
        if (x.interval_s() - self.window_s).abs() > 1e-9 * self.window_s {
            return Err(Error::Alignment(format!(
                "monitor rows are {} s, the window is {} s",
                x.interval_s(),
                self.window_s
            )));
        }
        let predicted = model.predict(x)?;
        let measured = aggregate_response(readings, self.window_s, voltage_v)?;
        let mut out = Vec::new();
        for ((t, p), e) in x.t_start().iter().zip(&predicted).zip(&measured) {
            if *e <= 0.0 {
                self.skipped_windows += 1;
                continue;
            }
            let w = WindowError {
                t_s: t + self.window_s,
                error: (p - e).abs() / e,
            };
            self.record(w);
            out.push(w);
        }
        Ok(out)
    }

    fn record(&mut self, w: WindowError) {
        if self.history.len() == HISTORY_CAPACITY {
            self.history.pop_front();
        }
        self.history.push_back(w);
    }

    /// Appends a decision-log line without acting on it.
    pub fn note(&mut self, t_s: f64, window_error: Option<f64>, action: Action) {
        self.log.push(Decision {
            t_s,
            window_error,
            threshold: self.threshold,
            action,
        });
    }

    pub fn should_rebuild(&self, error: f64) -> bool {
        error > self.threshold
    }

    /// Rebuilds the active model from freshly collected stretched data when
    /// `error` exceeds the threshold. `fresh` is only invoked on a rebuild.
    pub fn maybe_rebuild(
        &mut self,
        t_s: f64,
        error: f64,
        fresh: impl FnOnce() -> Result<DesignMatrix>,
        target: f64,
        method: FitMethod,
    ) -> Result<Option<&EnergyModel>> {
        if !self.should_rebuild(error) {
            self.note(t_s, Some(error), Action::Keep);
            return Ok(None);
        }
        let data = fresh()?;
        let model = iterate_construction(&data, target, method)?;
        if model.below_target {
            log::warn!("rebuilt model misses the accuracy target");
        }
        self.install(model)?;
        self.note(t_s, Some(error), Action::Rebuild);
        Ok(self.active_model())
    }

    /// Writes the decision log as `t_s,window_error,threshold,action`.
    pub fn write_decision_log<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,window_error,threshold,action")?;
        for d in &self.log {
            let err = d.window_error.map_or(String::new(), |e| e.to_string());
            writeln!(
                out,
                "{},{},{},{}",
                d.t_s,
                err,
                d.threshold,
                d.action.as_str()
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut entries: Vec<Entry> = self
            .models
            .iter()
            .map(|(k, m)| Entry {
                key: k.clone(),
                model: m.clone(),
            })
            .collect();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        let p = Persisted {
            threshold: self.threshold,
            window_s: self.window_s,
            active: self.active.clone(),
            entries,
            history: self.history.iter().copied().collect(),
            skipped_windows: self.skipped_windows,
            log: self.log.clone(),
        };
        Ok(serde_json::to_string_pretty(&p)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Persisted = serde_json::from_str(s)?;
        Ok(ModelTable {
            models: p.entries.into_iter().map(|e| (e.key, e.model)).collect(),
            active: p.active,
            threshold: p.threshold,
            window_s: p.window_s,
            history: p.history.into(),
            skipped_windows: p.skipped_windows,
            log: p.log,
        })
    }

    pub fn persist(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ModelTable::from_json(&std::fs::read_to_string(path)?)
    }
}
