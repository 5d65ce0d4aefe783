//! Synthetic workloads: named phases that drive each component's state with a
//! fixed state, a schedule, a duty cycle, or a seeded Markov chain.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::ComponentStateModel;
use crate::error::{Error, Result};
use crate::time::ticks_exact;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub at_s: f64,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateProcess {
    Fixed {
        state: String,
    },
    /// Piecewise-constant states at offsets from the phase start.
    Schedule {
        steps: Vec<ScheduleStep>,
    },
    DutyCycle {
        period_s: f64,
        duty: f64,
        on: String,
        off: String,
        #[serde(default)]
        offset_s: f64,
    },
    /// Discrete-time chain over `states`, advancing every `step_s`.
    Markov {
        step_s: f64,
        states: Vec<String>,
        transitions: Vec<Vec<f64>>,
        #[serde(default)]
        initial: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Keyed by component name; unlisted components stay in their first state.
    #[serde(default)]
    pub processes: BTreeMap<String, StateProcess>,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOrder {
    #[default]
    Cycle,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub order: PhaseOrder,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone)]
enum Resolved {
    Fixed(u8),
    Schedule(Vec<(u64, u8)>),
    Duty {
        period: u64,
        on_ticks: u64,
        offset: u64,
        on: u8,
        off: u8,
    },
    Markov {
        step: u64,
        states: Vec<u8>,
        cdf: Vec<Vec<f64>>,
        initial: usize,
    },
}

struct ResolvedPhase {
    ticks: u64,
    weight: f64,
    processes: Vec<Resolved>,
}

fn resolve_phase(phase: &Phase, model: &ComponentStateModel, tick_s: f64) -> Result<ResolvedPhase> {
    if !(phase.duration_s > 0.0) {
        return Err(Error::Config(format!(
            "phase `{}` needs a positive duration",
            phase.name
        )));
    }
    if !(phase.weight > 0.0) {
        return Err(Error::Config(format!(
            "phase `{}` needs a positive weight",
            phase.name
        )));
    }
    let ticks = ticks_exact(phase.duration_s, tick_s, "phase duration")?.max(1);
    for name in phase.processes.keys() {
        model.component_index(name)?;
    }
    let mut processes = Vec::with_capacity(model.components.len());
    for (ci, comp) in model.components.iter().enumerate() {
        let idx = |name: &str| model.state_index(ci, name).map(|s| s as u8);
        let resolved = match phase.processes.get(&comp.name) {
            None => Resolved::Fixed(0),
            Some(StateProcess::Fixed { state }) => Resolved::Fixed(idx(state)?),
            Some(StateProcess::Schedule { steps }) => {
                let mut out = Vec::with_capacity(steps.len());
                for s in steps {
                    out.push((
                        ticks_exact(s.at_s, tick_s, "schedule offset")?,
                        idx(&s.state)?,
                    ));
                }
                if out.windows(2).any(|w| w[0].0 > w[1].0) {
                    return Err(Error::Config(format!(
                        "schedule for `{}` in phase `{}` is not sorted",
                        comp.name, phase.name
                    )));
                }
                Resolved::Schedule(out)
            }
            Some(StateProcess::DutyCycle {
                period_s,
                duty,
                on,
                off,
                offset_s,
            }) => {
                if !(0.0..=1.0).contains(duty) {
                    return Err(Error::Config(format!("duty cycle {duty} outside [0, 1]")));
                }
                let period = ticks_exact(*period_s, tick_s, "duty-cycle period")?;
                if period == 0 {
                    return Err(Error::Config("duty-cycle period must be positive".into()));
                }
                Resolved::Duty {
                    period,
                    on_ticks: (duty * period as f64).round() as u64,
                    offset: ticks_exact(*offset_s, tick_s, "duty-cycle offset")? % period,
                    on: idx(on)?,
                    off: idx(off)?,
                }
            }
            Some(StateProcess::Markov {
                step_s,
                states,
                transitions,
                initial,
            }) => {
                let step = ticks_exact(*step_s, tick_s, "markov step")?;
                if step == 0 {
                    return Err(Error::Config("markov step must be positive".into()));
                }
                if states.is_empty() || transitions.len() != states.len() {
                    return Err(Error::Config(format!(
                        "markov chain for `{}` needs a {}x{} transition matrix",
                        comp.name,
                        states.len(),
                        states.len()
                    )));
                }
                let mut cdf = Vec::with_capacity(states.len());
                for (r, row) in transitions.iter().enumerate() {
                    if row.len() != states.len() || row.iter().any(|p| !(*p >= 0.0)) {
                        return Err(Error::Config(format!(
                            "markov row {r} for `{}` is malformed",
                            comp.name
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::Config(format!(
                            "markov row {r} for `{}` sums to {sum}, not 1",
                            comp.name
                        )));
                    }
                    let mut acc = 0.0;
                    cdf.push(
                        row.iter()
                            .map(|p| {
                                acc += p;
                                acc
                            })
                            .collect(),
                    );
                }
                let state_idx = states.iter().map(|s| idx(s)).collect::<Result<Vec<_>>>()?;
                let initial = match initial {
                    Some(name) => states.iter().position(|s| s == name).ok_or_else(|| {
                        Error::Config(format!("markov initial state `{name}` is not in the chain"))
                    })?,
                    None => 0,
                };
                Resolved::Markov {
                    step,
                    states: state_idx,
                    cdf,
                    initial,
                }
            }
        };
        processes.push(resolved);
    }
    Ok(ResolvedPhase {
        ticks,
        weight: phase.weight,
        processes,
    })
}

fn draw(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

/// Fills `states[c][start..end]` for every component, carrying each
/// component's last state across phase boundaries.
pub(super) fn generate_states(
    model: &ComponentStateModel,
    wl: &WorkloadSpec,
    total_ticks: u64,
    tick_s: f64,
) -> Result<Vec<Vec<u8>>> {
    if wl.phases.is_empty() {
        return Err(Error::Config("workload has no phases".into()));
    }
    let phases = wl
        .phases
        .iter()
        .map(|p| resolve_phase(p, model, tick_s))
        .collect::<Result<Vec<_>>>()?;

    let n = total_ticks as usize;
    let mut states: Vec<Vec<u8>> = vec![Vec::with_capacity(n); model.components.len()];
    let mut phase_rng = ChaCha8Rng::seed_from_u64(wl.seed);
    let mut comp_rngs: Vec<ChaCha8Rng> = (0..model.components.len())
        .map(|c| {
            let mut r = ChaCha8Rng::seed_from_u64(wl.seed);
            r.set_stream(c as u64 + 1);
            r
        })
        .collect();
    let total_weight: f64 = phases.iter().map(|p| p.weight).sum();

    let mut start = 0u64;
    let mut current = 0usize;
    while start < total_ticks {
        let phase = &phases[current];
        let end = (start + phase.ticks).min(total_ticks);
        let len = (end - start) as usize;
        for (c, process) in phase.processes.iter().enumerate() {
            let out = &mut states[c];
            let carried = out.last().copied();
            match process {
                Resolved::Fixed(s) => out.extend(std::iter::repeat_n(*s, len)),
                Resolved::Schedule(steps) => {
                    let mut s = carried.unwrap_or(0);
                    let mut next = 0;
                    for k in 0..len as u64 {
                        while next < steps.len() && steps[next].0 <= k {
                            s = steps[next].1;
                            next += 1;
                        }
                        out.push(s);
                    }
                }
                Resolved::Duty {
                    period,
                    on_ticks,
                    offset,
                    on,
                    off,
                } => {
                    for k in 0..len as u64 {
                        let pos = (k + offset) % period;
                        out.push(if pos < *on_ticks { *on } else { *off });
                    }
                }
                Resolved::Markov {
                    step,
                    states: chain,
                    cdf,
                    initial,
                } => {
                    let rng = &mut comp_rngs[c];
                    let mut pos = carried
                        .and_then(|s| chain.iter().position(|&x| x == s))
                        .unwrap_or(*initial);
                    let mut k = 0usize;
                    while k < len {
                        let run = (*step as usize).min(len - k);
                        out.extend(std::iter::repeat_n(chain[pos], run));
                        k += run;
                        pos = draw(&cdf[pos], rng);
                    }
                }
            }
        }
        start = end;
        current = match wl.order {
            PhaseOrder::Cycle => (current + 1) % phases.len(),
            PhaseOrder::Random => {
                let mut u = phase_rng.random::<f64>() * total_weight;
                let mut pick = phases.len() - 1;
                for (i, p) in phases.iter().enumerate() {
                    if u < p.weight {
                        pick = i;
                        break;
                    }
                    u -= p.weight;
                }
                pick
            }
        };
    }
    Ok(states)
}
