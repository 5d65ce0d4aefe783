//! OS-visible predictors and their imperfections.
//!
//! Every predictor has a true per-tick value determined by one component's
//! state. What the OS exposes is the running integral of that value, refreshed
//! only at the predictor's update instants and shown `delay_s` late. Readers
//! see that integral at their own polling instants; event-driven predictors
//! are read on every change instead.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::ComponentStateModel;
use super::Trace;
use crate::error::{Error, Result};
use crate::time::{period_ticks, ticks_exact};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorMapping {
    /// Fraction of time spent in any of `states`.
    Residency {
        component: String,
        states: Vec<String>,
    },
    /// Event counter that advances `per_second[state]` per second in a state.
    Counter {
        component: String,
        per_second: BTreeMap<String, f64>,
    },
    /// A level such as backlight brightness, one value per state.
    Level {
        component: String,
        levels: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    PolledFast,
    PolledSlow,
    EventDriven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub mapping: PredictorMapping,
    pub update_rate_hz: f64,
    #[serde(default)]
    pub delay_s: f64,
    pub policy: Policy,
}

impl PredictorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.update_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "predictor `{}` needs a positive update rate",
                self.id
            )));
        }
        if !(self.delay_s >= 0.0) {
            return Err(Error::Config(format!(
                "predictor `{}` has a negative delay",
                self.id
            )));
        }
        Ok(())
    }
}

/// A predictor bound to a concrete system: which component it watches and
/// its value in each of that component's states.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPredictor {
    pub component: usize,
    pub value_per_state: Vec<f64>,
}

impl ResolvedPredictor {
    pub fn resolve(spec: &PredictorSpec, model: &ComponentStateModel) -> Result<Self> {
        spec.validate()?;
        let (component, pairs): (&str, Vec<(&str, f64)>) = match &spec.mapping {
            PredictorMapping::Residency { component, states } => (
                component,
                states.iter().map(|s| (s.as_str(), 1.0)).collect(),
            ),
            PredictorMapping::Counter {
                component,
                per_second: map,
            }
            | PredictorMapping::Level {
                component,
                levels: map,
            } => (
                component,
                map.iter().map(|(s, v)| (s.as_str(), *v)).collect(),
            ),
        };
        let c = model.component_index(component)?;
        let mut value_per_state = vec![0.0; model.components[c].states.len()];
        for (state, v) in pairs {
            value_per_state[model.state_index(c, state)?] = v;
        }
        Ok(ResolvedPredictor {
            component: c,
            value_per_state,
        })
    }

    pub fn value_at(&self, trace: &Trace, tick: usize) -> f64 {
        self.value_per_state[trace.states(self.component)[tick] as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    /// Samples are the visible running integral (value-seconds).
    Cumulative,
    /// Samples are change points of the instantaneous value.
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSample {
    pub tick: u64,
    pub value: f64,
}

/// What a reader of one predictor sees over a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedStream {
    pub id: String,
    pub policy: Policy,
    pub kind: StreamKind,
    pub tick_s: f64,
    /// Read period in ticks for polled streams; zero for event-driven ones.
    pub period_ticks: u64,
    /// Length of the observed trace in ticks.
    pub end_tick: u64,
    pub samples: Vec<StreamSample>,
}

impl ObservedStream {
    /// Visible integral at a polled read instant.
    pub fn cumulative_at(&self, tick: u64) -> Option<f64> {
        if self.kind != StreamKind::Cumulative || !tick.is_multiple_of(self.period_ticks) {
            return None;
        }
        self.samples
            .get((tick / self.period_ticks) as usize)
            .map(|s| s.value)
    }

    /// Time integral of an event-driven level over ticks `[a, b)`, in value-seconds.
    pub fn level_integral(&self, a: u64, b: u64) -> f64 {
        debug_assert_eq!(self.kind, StreamKind::Level);
        let first = match self.samples.partition_point(|s| s.tick <= a) {
            0 => 0,
            i => i - 1,
        };
        let mut total = 0.0;
        let mut cursor = a;
        for (i, s) in self.samples.iter().enumerate().skip(first) {
            if cursor >= b {
                break;
            }
            let seg_end = self.samples.get(i + 1).map_or(b, |n| n.tick.min(b));
            if seg_end > cursor {
                total += s.value * (seg_end - cursor) as f64;
                cursor = seg_end;
            }
        }
        total * self.tick_s
    }
}

fn cumulative_at_queries(trace: &Trace, pred: &ResolvedPredictor, queries: &[u64]) -> Vec<f64> {
    let states = trace.states(pred.component);
    let mut out = Vec::with_capacity(queries.len());
    let mut acc = 0.0f64;
    let mut pos = 0usize;
    for &q in queries {
        let q = (q as usize).min(states.len());
        while pos < q {
            acc += pred.value_per_state[states[pos] as usize];
            pos += 1;
        }
        out.push(acc * trace.tick_s());
    }
    out
}

/// Simulates reading every predictor: polled-fast ones at `read_rate_hz`,
/// polled-slow ones at their own update rate, event-driven ones on change.
pub fn observe_predictors(
    trace: &Trace,
    specs: &[PredictorSpec],
    read_rate_hz: f64,
) -> Result<Vec<ObservedStream>> {
    let tick_s = trace.tick_s();
    let end = trace.len() as u64;
    let fast_period = period_ticks(read_rate_hz, tick_s, "read rate")?;
    specs
        .iter()
        .map(|spec| {
            let pred = ResolvedPredictor::resolve(spec, trace.model())?;
            let delay = ticks_exact(spec.delay_s, tick_s, "predictor delay")?;
            match spec.policy {
                Policy::EventDriven => {
                    let states = trace.states(pred.component);
                    let mut samples = vec![StreamSample {
                        tick: 0,
                        value: pred.value_per_state[states[0] as usize],
                    }];
                    for t in 1..states.len() {
                        let (prev, cur) = (states[t - 1], states[t]);
                        let v = pred.value_per_state[cur as usize];
                        if pred.value_per_state[prev as usize] != v {
                            samples.push(StreamSample {
                                tick: t as u64 + delay,
                                value: v,
                            });
                        }
                    }
                    Ok(ObservedStream {
                        id: spec.id.clone(),
                        policy: spec.policy,
                        kind: StreamKind::Level,
                        tick_s,
                        period_ticks: 0,
                        end_tick: end,
                        samples,
                    })
                }
                Policy::PolledFast | Policy::PolledSlow => {
                    let update = period_ticks(spec.update_rate_hz, tick_s, "update rate")?;
                    let read = if spec.policy == Policy::PolledFast {
                        fast_period
                    } else {
                        update
                    };
                    let reads: Vec<u64> = (0..=end / read).map(|k| k * read).collect();
                    let queries: Vec<u64> = reads
                        .iter()
                        .map(|&r| r.checked_sub(delay).map_or(0, |s| s / update * update))
                        .collect();
                    let values = cumulative_at_queries(trace, &pred, &queries);
                    Ok(ObservedStream {
                        id: spec.id.clone(),
                        policy: spec.policy,
                        kind: StreamKind::Cumulative,
                        tick_s,
                        period_ticks: read,
                        end_tick: end,
                        samples: reads
                            .into_iter()
                            .zip(values)
                            .map(|(tick, value)| StreamSample { tick, value })
                            .collect(),
                    })
                }
            }
        })
        .collect()
}

/// Exact time-average of a predictor over consecutive `interval_s` intervals
/// (complete intervals only).
pub fn true_predictor_values(
    trace: &Trace,
    spec: &PredictorSpec,
    interval_s: f64,
) -> Result<Vec<f64>> {
    let pred = ResolvedPredictor::resolve(spec, trace.model())?;
    let step = ticks_exact(interval_s, trace.tick_s(), "interval")? as usize;
    if step == 0 {
        return Err(Error::Alignment("interval must be positive".into()));
    }
    Ok(trace
        .states(pred.component)
        .chunks_exact(step)
        .map(|c| {
            c.iter()
                .map(|&s| pred.value_per_state[s as usize])
                .sum::<f64>()
                / step as f64
        })
        .collect())
}
