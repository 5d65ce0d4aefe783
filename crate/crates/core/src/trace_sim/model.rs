use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerState {
    pub name: String,
    pub power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub states: Vec<PowerState>,
}

/// Ground-truth power generator: each component sits in exactly one state per
/// tick and draws that state's power on top of an always-on base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStateModel {
    #[serde(default)]
    pub base_power_w: f64,
    pub components: Vec<Component>,
}

impl ComponentStateModel {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("system needs at least one component".into()));
        }
        if !(self.base_power_w >= 0.0) {
            return Err(Error::Config("base power must be non-negative".into()));
        }
        for c in &self.components {
            if c.states.is_empty() {
                return Err(Error::Config(format!(
                    "component `{}` has no states",
                    c.name
                )));
            }
            if c.states.len() > u8::MAX as usize {
                return Err(Error::Config(format!(
                    "component `{}` has too many states",
                    c.name
                )));
            }
            for s in &c.states {
                if !(s.power_w >= 0.0) || !s.power_w.is_finite() {
                    return Err(Error::Config(format!(
                        "state `{}.{}` has invalid power {}",
                        c.name, s.name, s.power_w
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn component_index(&self, name: &str) -> Result<usize> {
        self.components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Config(format!("unknown component `{name}`")))
    }

    pub fn state_index(&self, component: usize, name: &str) -> Result<usize> {
        let c = &self.components[component];
        c.states
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("component `{}` has no state `{name}`", c.name)))
    }

    /// Instantaneous power for one state per component.
    pub fn power_of(&self, states: &[u8]) -> f64 {
        self.base_power_w
            + self
                .components
                .iter()
                .zip(states)
                .map(|(c, &s)| c.states[s as usize].power_w)
                .sum::<f64>()
    }

    /// `component.state` labels in the flattened residency order used by
    /// [`TraceSample::x`](super::TraceSample).
    pub fn residency_labels(&self) -> Vec<String> {
        self.components
            .iter()
            .flat_map(|c| {
                c.states
                    .iter()
                    .map(move |s| format!("{}.{}", c.name, s.name))
            })
            .collect()
    }

    /// Power coefficients aligned with [`residency_labels`](Self::residency_labels).
    pub fn residency_powers(&self) -> Vec<f64> {
        self.components
            .iter()
            .flat_map(|c| c.states.iter().map(|s| s.power_w))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_component() -> ComponentStateModel {
        ComponentStateModel {
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
        }
    }

    #[test]
    fn power_and_labels() {
        let m = two_component();
        m.validate().unwrap();
        assert_eq!(m.power_of(&[1, 0]), 14.0);
        assert_eq!(
            m.residency_labels(),
            vec!["cpu.idle", "cpu.busy", "disk.on"]
        );
        assert_eq!(m.state_index(0, "busy").unwrap(), 1);
        assert!(m.component_index("gpu").is_err());
    }

    #[test]
    fn rejects_negative_power_and_empty_components() {
        let mut m = two_component();
        m.components[0].states[0].power_w = -1.0;
        assert!(m.validate().is_err());
        let empty = ComponentStateModel {
            base_power_w: 0.0,
            components: vec![],
        };
        assert!(empty.validate().is_err());
    }
}
