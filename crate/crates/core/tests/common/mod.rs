//! Small seeded fixture shared by the integration tests.

#![allow(dead_code)]

use sesame::eval::{Run, Scenario};

/// A short three-component run with one stream of each policy and a
/// noiseless instant interface read at 10 Hz.
pub fn fixture(seed: u64, duration_s: f64) -> Run {
    let text = format!(
        r#"
name = "fixture"
experiment = "error_vs_rate"
seed = {seed}
train_s = 0.0
test_s = {duration_s}
rate_grid = [1.0]

[system]
base_power_w = 3.0

[[system.components]]
name = "cpu"
states = [
  {{ name = "idle", power_w = 0.5 }},
  {{ name = "busy", power_w = 6.0 }},
  {{ name = "turbo", power_w = 9.0 }},
]

[[system.components]]
name = "disk"
states = [
  {{ name = "idle", power_w = 0.0 }},
  {{ name = "active", power_w = 1.5 }},
]

[[system.components]]
name = "screen"
states = [
  {{ name = "dim", power_w = 0.4 }},
  {{ name = "bright", power_w = 1.1 }},
]

[workload]
order = "cycle"

[[workload.phases]]
name = "mixed"
duration_s = {duration_s}
[workload.phases.processes.cpu]
kind = "markov"
step_s = 0.013
states = ["idle", "busy", "turbo"]
transitions = [[0.7, 0.2, 0.1], [0.3, 0.5, 0.2], [0.2, 0.3, 0.5]]
[workload.phases.processes.disk]
kind = "markov"
step_s = 0.05
states = ["idle", "active"]
transitions = [[0.9, 0.1], [0.3, 0.7]]
[workload.phases.processes.screen]
kind = "markov"
step_s = 0.7
states = ["dim", "bright"]
transitions = [[0.8, 0.2], [0.2, 0.8]]

[[predictors]]
id = "busy_res"
mapping = {{ kind = "residency", component = "cpu", states = ["busy", "turbo"] }}
update_rate_hz = 250.0
policy = "polled_fast"

[[predictors]]
id = "disk_bytes"
mapping = {{ kind = "counter", component = "disk", per_second = {{ active = 2.0e7 }} }}
update_rate_hz = 2.0
delay_s = 0.3
policy = "polled_slow"

[[predictors]]
id = "brightness"
mapping = {{ kind = "level", component = "screen", levels = {{ dim = 1.0, bright = 5.0 }} }}
update_rate_hz = 1.0
policy = "event_driven"

[battery]
kind = "instant"
reading_rate_hz = 10.0
noise_sigma = 0.0
quantization = 0.0
supply_voltage_v = 5.0
"#
    );
    Run::simulate(&Scenario::parse(&text).expect("fixture parses")).expect("fixture simulates")
}
