//! Ground-truth power traces and the OS-visible predictor streams derived
//! from them.

mod model;
mod predictor;
mod workload;

use std::io::Write;

pub use model::{Component, ComponentStateModel, PowerState};
pub use predictor::{
    observe_predictors, true_predictor_values, ObservedStream, Policy, PredictorMapping,
    PredictorSpec, ResolvedPredictor, StreamKind, StreamSample,
};
pub use workload::{Phase, PhaseOrder, ScheduleStep, StateProcess, WorkloadSpec};

use crate::error::{Error, Result};
use crate::time::ticks_exact;

/// One tick of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t_s: f64,
    /// Residency fraction of every `(component, state)` pair during the tick,
    /// flattened in [`ComponentStateModel::residency_labels`] order.
    pub x: Vec<f64>,
    pub power_w: f64,
}

/// A simulated run: the state of every component at every tick plus the
/// resulting power.
#[derive(Debug, Clone)]
pub struct Trace {
    model: ComponentStateModel,
    tick_s: f64,
    states: Vec<Vec<u8>>,
    power: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn tick_s(&self) -> f64 {
        self.tick_s
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 * self.tick_s
    }

    pub fn model(&self) -> &ComponentStateModel {
        &self.model
    }

    pub fn power_w(&self) -> &[f64] {
        &self.power
    }

    /// State index of `component` at every tick.
    pub fn states(&self, component: usize) -> &[u8] {
        &self.states[component]
    }

    pub fn sample(&self, tick: usize) -> TraceSample {
        let mut x = Vec::new();
        for (c, comp) in self.model.components.iter().enumerate() {
            let s = self.states[c][tick] as usize;
            x.extend((0..comp.states.len()).map(|j| if j == s { 1.0 } else { 0.0 }));
        }
        TraceSample {
            t_s: tick as f64 * self.tick_s,
            x,
            power_w: self.power[tick],
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = TraceSample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// Seconds spent by `component` in `state` over ticks `[from, to)`.
    pub fn residency_s(&self, component: usize, state: usize, from: usize, to: usize) -> f64 {
        let count = self.states[component][from..to]
            .iter()
            .filter(|&&s| s as usize == state)
            .count();
        count as f64 * self.tick_s
    }

    /// Appends `other`, which must come from the same system at the same tick.
    pub fn concat(mut self, other: Trace) -> Result<Trace> {
        if self.model != other.model || self.tick_s != other.tick_s {
            return Err(Error::Config(
                "cannot join traces of different systems".into(),
            ));
        }
        for (a, b) in self.states.iter_mut().zip(other.states) {
            a.extend(b);
        }
        self.power.extend(other.power);
        Ok(self)
    }

    /// Adds `extra_w` for one tick at every multiple of `period_ticks`,
    /// standing in for the energy cost of reading predictors.
    pub fn add_read_overhead(&mut self, period_ticks: usize, extra_w: f64) {
        if extra_w == 0.0 || period_ticks == 0 {
            return;
        }
        for p in self.power.iter_mut().step_by(period_ticks) {
            *p += extra_w;
        }
    }
}

/// Simulates `duration_s` of `wl` on `model` at a fixed tick.
pub fn gen_trace(
    model: &ComponentStateModel,
    wl: &WorkloadSpec,
    duration_s: f64,
    tick_s: f64,
) -> Result<Trace> {
    model.validate()?;
    if !(tick_s > 0.0) {
        return Err(Error::Config(format!(
            "tick must be positive, got {tick_s}"
        )));
    }
    if !(duration_s >= tick_s) {
        return Err(Error::Config(format!(
            "duration {duration_s} s is shorter than one {tick_s} s tick"
        )));
    }
    let total = (duration_s / tick_s - 1e-9).ceil() as u64;
    let states = workload::generate_states(model, wl, total, tick_s)?;
    let tick_powers: Vec<Vec<f64>> = model
        .components
        .iter()
        .map(|c| c.states.iter().map(|s| s.power_w).collect())
        .collect();
    let power = (0..total as usize)
        .map(|t| {
            model.base_power_w
                + states
                    .iter()
                    .zip(&tick_powers)
                    .map(|(s, p)| p[s[t] as usize])
                    .sum::<f64>()
        })
        .collect();
    Ok(Trace {
        model: model.clone(),
        tick_s,
        states,
        power,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEnergy {
    pub start_s: f64,
    pub end_s: f64,
    pub energy_j: f64,
}

/// Energy per consecutive interval. A trailing partial interval is kept so the
/// intervals partition the whole trace.
pub fn true_energy(trace: &Trace, interval_s: f64) -> Result<Vec<IntervalEnergy>> {
    let step = ticks_exact(interval_s, trace.tick_s, "energy interval")? as usize;
    if step == 0 {
        return Err(Error::Alignment("energy interval must be positive".into()));
    }
    Ok(trace
        .power
        .chunks(step)
        .enumerate()
        .map(|(i, chunk)| {
            let start = i * step;
            IntervalEnergy {
                start_s: start as f64 * trace.tick_s,
                end_s: (start + chunk.len()) as f64 * trace.tick_s,
                energy_j: chunk.iter().sum::<f64>() * trace.tick_s,
            }
        })
        .collect())
}

/// Energies of the complete `interval_s` intervals only.
pub fn complete_interval_energies(trace: &Trace, interval_s: f64) -> Result<Vec<f64>> {
    let step = ticks_exact(interval_s, trace.tick_s, "energy interval")? as usize;
    Ok(true_energy(trace, interval_s)?
        .into_iter()
        .take(trace.len() / step.max(1))
        .map(|e| e.energy_j)
        .collect())
}

/// Writes `t_s,power_w,<predictor ids...>` with the true instantaneous value
/// of every predictor at each tick.
pub fn write_trace_csv<W: Write>(trace: &Trace, specs: &[PredictorSpec], mut out: W) -> Result<()> {
    let resolved = specs
        .iter()
        .map(|s| ResolvedPredictor::resolve(s, trace.model()))
        .collect::<Result<Vec<_>>>()?;
    write!(out, "t_s,power_w")?;
    for s in specs {
        write!(out, ",{}", s.id)?;
    }
    writeln!(out)?;
    for t in 0..trace.len() {
        write!(out, "{},{}", t as f64 * trace.tick_s, trace.power[t])?;
        for r in &resolved {
            write!(out, ",{}", r.value_at(trace, t))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn single_state(power: f64) -> ComponentStateModel {
        ComponentStateModel {
            base_power_w: 0.0,
            components: vec![Component {
                name: "cpu".into(),
                states: vec![PowerState {
                    name: "on".into(),
                    power_w: power,
                }],
            }],
        }
    }

    fn one_phase(processes: BTreeMap<String, StateProcess>) -> WorkloadSpec {
        WorkloadSpec {
            phases: vec![Phase {
                name: "p".into(),
                duration_s: 1000.0,
                weight: 1.0,
                processes,
            }],
            order: PhaseOrder::Cycle,
            seed: 11,
        }
    }

    pub(crate) fn duty_system() -> (ComponentStateModel, WorkloadSpec) {
        let model = ComponentStateModel {
            base_power_w: 3.0,
            components: vec![
                Component {
                    name: "cpu".into(),
                    states: vec![
                        PowerState {
                            name: "idle".into(),
                            power_w: 1.0,
                        },
                        PowerState {
                            name: "busy".into(),
                            power_w: 9.0,
                        },
                    ],
                },
                Component {
                    name: "disk".into(),
                    states: vec![PowerState {
                        name: "on".into(),
                        power_w: 2.0,
                    }],
                },
            ],
        };
        let mut p = BTreeMap::new();
        p.insert(
            "cpu".to_string(),
            StateProcess::DutyCycle {
                period_s: 1.0,
                duty: 0.5,
                on: "busy".into(),
                off: "idle".into(),
                offset_s: 0.0,
            },
        );
        (model, one_phase(p))
    }

    fn markov_cpu() -> (ComponentStateModel, WorkloadSpec) {
        let model = ComponentStateModel {
            base_power_w: 1.0,
            components: vec![Component {
                name: "cpu".into(),
                states: vec![
                    PowerState {
                        name: "a".into(),
                        power_w: 0.5,
                    },
                    PowerState {
                        name: "b".into(),
                        power_w: 2.0,
                    },
                    PowerState {
                        name: "c".into(),
                        power_w: 6.0,
                    },
                ],
            }],
        };
        let mut p = BTreeMap::new();
        p.insert(
            "cpu".to_string(),
            StateProcess::Markov {
                step_s: 0.01,
                states: vec!["a".into(), "b".into(), "c".into()],
                transitions: vec![
                    vec![0.8, 0.15, 0.05],
                    vec![0.2, 0.6, 0.2],
                    vec![0.1, 0.3, 0.6],
                ],
                initial: None,
            },
        );
        (model, one_phase(p))
    }

    #[test]
    fn single_state_trace_is_constant() {
        let m = single_state(5.0);
        let wl = one_phase(BTreeMap::new());
        let tr = gen_trace(&m, &wl, 10.0, 0.01).unwrap();
        assert_eq!(tr.len(), 1000);
        assert!(tr.power_w().iter().all(|&p| p == 5.0));
    }

    #[test]
    fn sample_count_is_ceiling() {
        let m = single_state(1.0);
        let wl = one_phase(BTreeMap::new());
        assert_eq!(gen_trace(&m, &wl, 1.005, 0.01).unwrap().len(), 101);
    }

    #[test]
    fn duty_cycle_mean_power_matches_closed_form() {
        // 3 W base + 2 W disk + (1 + 9) / 2 W cpu
        let (m, wl) = duty_system();
        let tr = gen_trace(&m, &wl, 20.0, 0.001).unwrap();
        let per_period = 1000;
        for chunk in tr.power_w().chunks(per_period) {
            let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
            assert!((mean - 10.0).abs() < 1e-12, "{mean}");
        }
        for e in true_energy(&tr, 1.0).unwrap() {
            assert!((e.energy_j - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn markov_is_deterministic_under_seed() {
        let (m, wl) = markov_cpu();
        let a = gen_trace(&m, &wl, 50.0, 0.001).unwrap();
        let b = gen_trace(&m, &wl, 50.0, 0.001).unwrap();
        assert_eq!(a.power_w(), b.power_w());
        assert_eq!(a.states(0), b.states(0));
        let mut other = wl.clone();
        other.seed += 1;
        let c = gen_trace(&m, &other, 50.0, 0.001).unwrap();
        assert_ne!(a.states(0), c.states(0));
    }

    #[test]
    fn markov_rows_must_sum_to_one() {
        let (m, mut wl) = markov_cpu();
        if let Some(StateProcess::Markov { transitions, .. }) =
            wl.phases[0].processes.get_mut("cpu")
        {
            transitions[1][0] += 1e-6;
        }
        assert!(matches!(
            gen_trace(&m, &wl, 1.0, 0.001),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn true_energy_constant_and_alignment() {
        let m = single_state(5.0);
        let wl = one_phase(BTreeMap::new());
        let tr = gen_trace(&m, &wl, 300.0, 0.01).unwrap();
        let e = true_energy(&tr, 100.0).unwrap();
        assert_eq!(e.len(), 3);
        for x in &e {
            assert!((x.energy_j - 500.0).abs() < 1e-9);
        }
        let whole = true_energy(&tr, 300.0).unwrap();
        assert_eq!(whole.len(), 1);
        let direct: f64 = tr.power_w().iter().sum::<f64>() * 0.01;
        assert!((whole[0].energy_j - direct).abs() < 1e-9);
        assert!(matches!(true_energy(&tr, 0.015), Err(Error::Alignment(_))));
    }

    #[test]
    fn residency_closure_per_interval() {
        let (m, wl) = markov_cpu();
        let tr = gen_trace(&m, &wl, 10.0, 0.001).unwrap();
        for start in (0..tr.len()).step_by(1000) {
            let total: f64 = (0..3)
                .map(|s| tr.residency_s(0, s, start, start + 1000))
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_carry_one_hot_residencies() {
        let (m, wl) = duty_system();
        let tr = gen_trace(&m, &wl, 2.0, 0.001).unwrap();
        let powers = m.residency_powers();
        for s in tr.samples().step_by(97) {
            let dot: f64 = s.x.iter().zip(&powers).map(|(a, b)| a * b).sum();
            assert_eq!(s.power_w, m.base_power_w + dot);
            assert_eq!(s.x.iter().sum::<f64>(), 2.0);
        }
    }

    #[test]
    fn schedule_switches_at_offsets() {
        let (m, _) = duty_system();
        let mut p = BTreeMap::new();
        p.insert(
            "cpu".to_string(),
            StateProcess::Schedule {
                steps: vec![
                    ScheduleStep {
                        at_s: 0.0,
                        state: "idle".into(),
                    },
                    ScheduleStep {
                        at_s: 5.0,
                        state: "busy".into(),
                    },
                ],
            },
        );
        let tr = gen_trace(&m, &one_phase(p), 10.0, 0.01).unwrap();
        assert_eq!(tr.states(0)[499], 0);
        assert_eq!(tr.states(0)[500], 1);
    }

    #[test]
    fn trace_csv_header_and_rows() {
        let (m, wl) = duty_system();
        let tr = gen_trace(&m, &wl, 0.005, 0.001).unwrap();
        let spec = PredictorSpec {
            id: "cpu_busy".into(),
            name: String::new(),
            mapping: PredictorMapping::Residency {
                component: "cpu".into(),
                states: vec!["busy".into()],
            },
            update_rate_hz: 1000.0,
            delay_s: 0.0,
            policy: Policy::PolledFast,
        };
        let mut buf = Vec::new();
        write_trace_csv(&tr, &[spec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t_s,power_w,cpu_busy");
        assert_eq!(lines[1], "0,14,1");
        assert_eq!(lines.len(), 6);
    }
}
