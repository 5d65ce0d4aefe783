//! Smart-battery interface simulation.
//!
//! Three interface families are modelled: an *instant* interface reporting the
//! latest internally sampled discharge current, a *filtered* interface that
//! reports a trailing average of its internal samples, and a *capacity*
//! interface that only exposes remaining charge from a coulomb counter.
//! Internal samples carry multiplicative Gaussian noise; reported values are
//! floor-quantized to the interface LSB.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{integral_ratio, period_ticks, ticks_exact};
use crate::trace_sim::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    Instant,
    Filtered,
    Capacity,
}

impl InterfaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceKind::Instant => "instant",
            InterfaceKind::Filtered => "filtered",
            InterfaceKind::Capacity => "capacity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryInterfaceModel {
    pub kind: InterfaceKind,
    pub reading_rate_hz: f64,
    /// Relative standard deviation of the noise on each internal sample.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub filter_window_s: f64,
    #[serde(default)]
    pub filter_taps: usize,
    /// Amperes (current kinds) or coulombs (capacity) per LSB; zero disables.
    #[serde(default)]
    pub quantization: f64,
    pub supply_voltage_v: f64,
    /// Internal sampling rate. Defaults to the reading rate for the instant
    /// kind, `taps / window` for the filtered kind and 1 Hz for capacity.
    #[serde(default)]
    pub internal_rate_hz: Option<f64>,
    /// Age of the internal sample an instant reading reports.
    #[serde(default)]
    pub report_delay_s: f64,
    #[serde(default = "default_capacity")]
    pub initial_capacity_c: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_capacity() -> f64 {
    10_000.0
}

impl BatteryInterfaceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.reading_rate_hz > 0.0) {
            return Err(Error::Config(
                "battery reading rate must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(
                "battery noise sigma must be non-negative".into(),
            ));
        }
        if !(self.supply_voltage_v > 0.0) {
            return Err(Error::Config("supply voltage must be positive".into()));
        }
        if !(self.report_delay_s >= 0.0) {
            return Err(Error::Config("report delay must be non-negative".into()));
        }
        if !(self.quantization >= 0.0) {
            return Err(Error::Config(
                "quantization step must be non-negative".into(),
            ));
        }
        if self.kind == InterfaceKind::Filtered
            && (!(self.filter_window_s > 0.0) || self.filter_taps == 0)
        {
            return Err(Error::Config(
                "filtered interface needs a positive window and at least one tap".into(),
            ));
        }
        Ok(())
    }

    pub fn internal_rate(&self) -> f64 {
        self.internal_rate_hz.unwrap_or(match self.kind {
            InterfaceKind::Instant => self.reading_rate_hz,
            InterfaceKind::Filtered => self.filter_taps as f64 / self.filter_window_s,
            InterfaceKind::Capacity => 1.0,
        })
    }

    fn quantize(&self, v: f64) -> f64 {
        if self.quantization > 0.0 {
            (v / self.quantization + 1e-9).floor() * self.quantization
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Amperes averaged over the period ending at the timestamp.
    Current,
    /// Remaining charge in coulombs at the timestamp.
    Capacity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryReading {
    pub t_s: f64,
    pub value: f64,
}

/// Periodic readings from one interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadingStream {
    pub kind: InterfaceKind,
    pub quantity: Quantity,
    pub period_s: f64,
    pub readings: Vec<BatteryReading>,
}

impl ReadingStream {
    pub fn rate_hz(&self) -> f64 {
        1.0 / self.period_s
    }

    /// Readings that describe `[from_s, to_s)`, re-timed so `from_s` becomes 0.
    pub fn window(&self, from_s: f64, to_s: f64) -> ReadingStream {
        let eps = 1e-9 * self.period_s;
        let inside = |t: f64| match self.quantity {
            Quantity::Current => t > from_s + eps && t <= to_s + eps,
            Quantity::Capacity => t >= from_s - eps && t <= to_s + eps,
        };
        ReadingStream {
            readings: self
                .readings
                .iter()
                .filter(|r| inside(r.t_s))
                .map(|r| BatteryReading {
                    t_s: r.t_s - from_s,
                    value: r.value,
                })
                .collect(),
            ..self.clone()
        }
    }

    /// Mean current between consecutive capacity readings; current streams
    /// are returned unchanged.
    pub fn to_current(&self) -> ReadingStream {
        match self.quantity {
            Quantity::Current => self.clone(),
            Quantity::Capacity => ReadingStream {
                kind: self.kind,
                quantity: Quantity::Current,
                period_s: self.period_s,
                readings: self
                    .readings
                    .windows(2)
                    .map(|w| BatteryReading {
                        t_s: w[1].t_s,
                        value: (w[0].value - w[1].value) / self.period_s,
                    })
                    .collect(),
            },
        }
    }

    /// Writes `t_s,value,kind`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,value,kind")?;
        for r in &self.readings {
            writeln!(out, "{},{},{}", r.t_s, r.value, self.kind.as_str())?;
        }
        Ok(())
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl Sampler {
    fn new(model: &BatteryInterfaceModel) -> Result<Self> {
        let noise = if model.noise_sigma > 0.0 {
            Some(Normal::new(0.0, model.noise_sigma).map_err(|e| Error::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(Sampler {
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            noise,
        })
    }

    fn factor(&mut self) -> f64 {
        match &self.noise {
            Some(n) => 1.0 + n.sample(&mut self.rng),
            None => 1.0,
        }
    }
}

/// Noisy mean current of each internal sampling period, in order. Entry `j`
/// covers ticks `[j * period, (j + 1) * period)`.
fn internal_currents(
    trace: &Trace,
    model: &BatteryInterfaceModel,
    period: u64,
) -> Result<Vec<f64>> {
    let mut sampler = Sampler::new(model)?;
    let v = model.supply_voltage_v;
    Ok(trace
        .power_w()
        .chunks_exact(period as usize)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64 / v * sampler.factor())
        .collect())
}

fn check_kind(model: &BatteryInterfaceModel, kind: InterfaceKind) -> Result<()> {
    model.validate()?;
    if model.kind != kind {
        return Err(Error::Config(format!(
            "expected a {} interface, got {}",
            kind.as_str(),
            model.kind.as_str()
        )));
    }
    Ok(())
}

/// Instant interface: each reading is the latest internal sample completed
/// `report_delay_s` before the reading.
pub fn sample_instant(trace: &Trace, model: &BatteryInterfaceModel) -> Result<ReadingStream> {
    check_kind(model, InterfaceKind::Instant)?;
    let tick = trace.tick_s();
    let read = period_ticks(model.reading_rate_hz, tick, "battery reading rate")?;
    let internal = period_ticks(model.internal_rate(), tick, "battery internal rate")?;
    let delay = ticks_exact(model.report_delay_s, tick, "report delay")?;
    if internal > read {
        return Err(Error::Config(
            "instant interface samples slower than it reports".into(),
        ));
    }
    let samples = internal_currents(trace, model, internal)?;
    let n = trace.len() as u64 / read;
    let readings = (1..=n)
        .map(|k| {
            let j = ((k * read).saturating_sub(delay) / internal).max(1) as usize;
            BatteryReading {
                t_s: (k * read) as f64 * tick,
                value: model.quantize(samples[j - 1]),
            }
        })
        .collect();
    Ok(ReadingStream {
        kind: model.kind,
        quantity: Quantity::Current,
        period_s: read as f64 * tick,
        readings,
    })
}

/// Filtered interface: each reading averages the last `filter_taps` internal
/// samples, which together span `filter_window_s`.
pub fn sample_filtered(trace: &Trace, model: &BatteryInterfaceModel) -> Result<ReadingStream> {
    check_kind(model, InterfaceKind::Filtered)?;
    let tick = trace.tick_s();
    let read = period_ticks(model.reading_rate_hz, tick, "battery reading rate")?;
    let internal = period_ticks(model.internal_rate(), tick, "battery internal rate")?;
    let samples = internal_currents(trace, model, internal)?;
    let taps = model.filter_taps;
    let n = trace.len() as u64 / read;
    let readings = (1..=n)
        .map(|k| {
            let last = (k * read / internal) as usize;
            let first = last.saturating_sub(taps);
            let window = &samples[first..last];
            let mean = if window.is_empty() {
                0.0
            } else {
                window.iter().sum::<f64>() / window.len() as f64
            };
            BatteryReading {
                t_s: (k * read) as f64 * tick,
                value: model.quantize(mean),
            }
        })
        .collect();
    Ok(ReadingStream {
        kind: model.kind,
        quantity: Quantity::Current,
        period_s: read as f64 * tick,
        readings,
    })
}

/// Capacity interface: a coulomb counter integrates noisy internal current
/// samples; readings report the quantized remaining charge, starting at t = 0.
pub fn sample_capacity(trace: &Trace, model: &BatteryInterfaceModel) -> Result<ReadingStream> {
    check_kind(model, InterfaceKind::Capacity)?;
    let tick = trace.tick_s();
    let read = period_ticks(model.reading_rate_hz, tick, "battery reading rate")?;
    let internal = period_ticks(model.internal_rate(), tick, "battery internal rate")?;
    let samples = internal_currents(trace, model, internal)?;
    let dt = internal as f64 * tick;
    let mut capacity = Vec::with_capacity(samples.len() + 1);
    capacity.push(model.initial_capacity_c);
    for i in &samples {
        let last = *capacity.last().unwrap();
        capacity.push(last - i * dt);
    }
    let n = trace.len() as u64 / read;
    let readings = (0..=n)
        .map(|k| BatteryReading {
            t_s: (k * read) as f64 * tick,
            value: model.quantize(capacity[(k * read / internal) as usize]),
        })
        .collect();
    Ok(ReadingStream {
        kind: model.kind,
        quantity: Quantity::Capacity,
        period_s: read as f64 * tick,
        readings,
    })
}

/// Dispatches on the interface kind.
pub fn sample(trace: &Trace, model: &BatteryInterfaceModel) -> Result<ReadingStream> {
    match model.kind {
        InterfaceKind::Instant => sample_instant(trace, model),
        InterfaceKind::Filtered => sample_filtered(trace, model),
        InterfaceKind::Capacity => sample_capacity(trace, model),
    }
}

/// Averages groups of consecutive current readings down to `target_rate_hz`.
pub fn average_to_rate(stream: &ReadingStream, target_rate_hz: f64) -> Result<ReadingStream> {
    if stream.quantity != Quantity::Current {
        return Err(Error::Argument(
            "difference capacity readings into currents before averaging".into(),
        ));
    }
    if !(target_rate_hz > 0.0) || target_rate_hz > stream.rate_hz() * (1.0 + 1e-9) {
        return Err(Error::Alignment(format!(
            "cannot average a {} Hz stream up to {target_rate_hz} Hz",
            stream.rate_hz()
        )));
    }
    let k = integral_ratio(1.0 / target_rate_hz, stream.period_s, "decimation factor")? as usize;
    Ok(ReadingStream {
        kind: stream.kind,
        quantity: Quantity::Current,
        period_s: stream.period_s * k as f64,
        readings: stream
            .readings
            .chunks_exact(k)
            .map(|g| BatteryReading {
                t_s: g[k - 1].t_s,
                value: g.iter().map(|r| r.value).sum::<f64>() / k as f64,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsError {
    pub rms: f64,
    pub used: usize,
    /// Intervals skipped because their true value was not positive.
    pub excluded: usize,
}

impl RmsError {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.rms
    }
}

/// Root mean square of per-interval relative errors.
pub fn rms_relative_error(estimates: &[f64], truth: &[f64]) -> Result<RmsError> {
    if estimates.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} estimates against {} true values",
            estimates.len(),
            truth.len()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (e, t) in estimates.iter().zip(truth) {
        if *t > 0.0 {
            let r = (e - t) / t;
            sum += r * r;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Argument(
            "no interval with positive true energy".into(),
        ));
    }
    Ok(RmsError {
        rms: (sum / used as f64).sqrt(),
        used,
        excluded: truth.len() - used,
    })
}
