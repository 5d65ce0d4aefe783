//! Aligned predictor matrices and battery responses.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::battery_sim::{Quantity, ReadingStream};
use crate::error::{Error, Result};
use crate::time::{integral_ratio, ticks_exact};
use crate::trace_sim::{ObservedStream, StreamKind};

/// Predictor aggregates over consecutive equal intervals, optionally paired
/// with the energy of each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    interval_s: f64,
    ids: Vec<String>,
    t_start: Vec<f64>,
    values: Vec<f64>,
    y: Option<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(
        interval_s: f64,
        ids: Vec<String>,
        t_start: Vec<f64>,
        values: Vec<f64>,
        y: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = t_start.len();
        if m == 0 {
            return Err(Error::InsufficientData(
                "design matrix needs at least one row".into(),
            ));
        }
        if values.len() != m * ids.len() {
            return Err(Error::Schema(format!(
                "{} values do not fill {m} rows of {} predictors",
                values.len(),
                ids.len()
            )));
        }
        if let Some(y) = &y {
            if y.len() != m {
                return Err(Error::Schema(format!("{} responses for {m} rows", y.len())));
            }
        }
        if !(interval_s > 0.0) {
            return Err(Error::Schema("interval must be positive".into()));
        }
        Ok(DesignMatrix {
            interval_s,
            ids,
            t_start,
            values,
            y,
        })
    }

    pub fn interval_s(&self) -> f64 {
        self.interval_s
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> usize {
        self.t_start.len()
    }

    pub fn cols(&self) -> usize {
        self.ids.len()
    }

    pub fn t_start(&self) -> &[f64] {
        &self.t_start
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows()).map(|i| self.row(i)[j]).collect()
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn response(&self) -> Result<&[f64]> {
        self.y()
            .ok_or_else(|| Error::InsufficientData("design matrix has no response".into()))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows(), self.cols(), &self.values)
    }

    /// Pairs the rows with responses, dropping whichever side is longer.
    pub fn with_response(mut self, y: Vec<f64>) -> Result<Self> {
        let m = self.rows().min(y.len());
        if m == 0 {
            return Err(Error::InsufficientData(
                "no interval is covered by battery readings".into(),
            ));
        }
        self.truncate(m);
        let mut y = y;
        y.truncate(m);
        self.y = Some(y);
        Ok(self)
    }

    pub fn truncate(&mut self, m: usize) {
        let m = m.max(1).min(self.rows());
        self.values.truncate(m * self.cols());
        self.t_start.truncate(m);
        if let Some(y) = &mut self.y {
            y.truncate(m);
        }
    }

    /// Rows `[from, to)`.
    pub fn slice_rows(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.rows() {
            return Err(Error::Argument(format!(
                "row range {from}..{to} outside 0..{}",
                self.rows()
            )));
        }
        let n = self.cols();
        DesignMatrix::new(
            self.interval_s,
            self.ids.clone(),
            self.t_start[from..to].to_vec(),
            self.values[from * n..to * n].to_vec(),
            self.y.as_ref().map(|y| y[from..to].to_vec()),
        )
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let idx = ids
            .iter()
            .map(|id| {
                self.ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::UnknownPredictor(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = (0..self.rows())
            .flat_map(|i| idx.iter().map(move |&j| self.row(i)[j]))
            .collect();
        DesignMatrix::new(
            self.interval_s,
            ids.to_vec(),
            self.t_start.clone(),
            values,
            self.y.clone(),
        )
    }

    /// Merges `k` consecutive rows: predictor values average, responses add.
    /// A trailing partial group is dropped.
    pub fn downsample(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument(
                "downsampling factor must be positive".into(),
            ));
        }
        let m = self.rows() / k;
        if m == 0 {
            return Err(Error::InsufficientData(format!(
                "{} rows cannot form a group of {k}",
                self.rows()
            )));
        }
        let n = self.cols();
        let mut values = vec![0.0; m * n];
        for g in 0..m {
            for i in g * k..(g + 1) * k {
                for (acc, v) in values[g * n..(g + 1) * n].iter_mut().zip(self.row(i)) {
                    *acc += v;
                }
            }
        }
        values.iter_mut().for_each(|v| *v /= k as f64);
        let y = self
            .y
            .as_ref()
            .map(|y| y.chunks_exact(k).map(|c| c.iter().sum()).collect());
        let t_start = (0..m).map(|g| self.t_start[g * k]).collect();
        DesignMatrix::new(
            self.interval_s * k as f64,
            self.ids.clone(),
            t_start,
            values,
            y,
        )
    }

    /// Writes `t_start_s,<ids...>[,y_j]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t_start_s")?;
        for id in &self.ids {
            write!(out, ",{id}")?;
        }
        if self.y.is_some() {
            write!(out, ",y_j")?;
        }
        writeln!(out)?;
        for i in 0..self.rows() {
            write!(out, "{}", self.t_start[i])?;
            for v in self.row(i) {
                write!(out, ",{v}")?;
            }
            if let Some(y) = &self.y {
                write!(out, ",{}", y[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parses the format written by [`DesignMatrix::write_csv`]. The interval
    /// is taken from the row spacing, or from `interval_s` for a single row.
    pub fn read_csv<R: BufRead>(input: R, interval_s: Option<f64>) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: "empty file".into(),
                })
            }
        };
        let mut cols: Vec<String> = header.trim_end().split(',').map(str::to_string).collect();
        if cols.first().map(String::as_str) != Some("t_start_s") {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "header must start with t_start_s".into(),
            });
        }
        cols.remove(0);
        let has_y = cols.last().map(String::as_str) == Some("y_j");
        if has_y {
            cols.pop();
        }
        let n = cols.len();
        let (mut t_start, mut values, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            let expected = 1 + n + has_y as usize;
            if fields.len() != expected {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: line.len() + 1,
                    message: format!("expected {expected} fields, found {}", fields.len()),
                });
            }
            let mut column = 1;
            let mut parsed = Vec::with_capacity(expected);
            for f in &fields {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    column,
                    message: format!("`{f}` is not a number"),
                })?;
                parsed.push(v);
                column += f.len() + 1;
            }
            t_start.push(parsed[0]);
            values.extend_from_slice(&parsed[1..=n]);
            if has_y {
                y.push(parsed[n + 1]);
            }
        }
        let interval = match (t_start.len(), interval_s) {
            (_, Some(s)) => s,
            (m, None) if m >= 2 => t_start[1] - t_start[0],
            _ => {
                return Err(Error::Parse {
                    line: 2,
                    column: 1,
                    message: "cannot infer the interval".into(),
                })
            }
        };
        DesignMatrix::new(interval, cols, t_start, values, has_y.then_some(y))
    }
}

fn stream_value(stream: &ObservedStream, a: u64, b: u64) -> f64 {
    let tick_s = stream.tick_s;
    match stream.kind {
        StreamKind::Level => stream.level_integral(a, b) / ((b - a) as f64 * tick_s),
        StreamKind::Cumulative => {
            let p = stream.period_ticks;
            let step = b - a;
            let latest = b / p * p;
            if latest == 0 {
                return 0.0;
            }
            // The row whose end is the first at or after `latest`.
            let row_start = (latest.div_ceil(step) - 1) * step;
            let earliest = row_start / p * p;
            let (Some(c1), Some(c0)) =
                (stream.cumulative_at(latest), stream.cumulative_at(earliest))
            else {
                return 0.0;
            };
            (c1 - c0) / ((latest - earliest) as f64 * tick_s)
        }
    }
}

fn check_streams(streams: &[ObservedStream]) -> Result<f64> {
    let tick_s = streams
        .first()
        .map(|s| s.tick_s)
        .ok_or_else(|| Error::Argument("no predictor streams".into()))?;
    if streams.iter().any(|s| s.tick_s != tick_s) {
        return Err(Error::Alignment(
            "predictor streams use different ticks".into(),
        ));
    }
    Ok(tick_s)
}

/// One row per `1 / rate_hz` interval over `duration_s`: polled predictors as
/// the rate of their visible integral (held between updates), event-driven
/// ones as the time average of their level.
pub fn collect(streams: &[ObservedStream], rate_hz: f64, duration_s: f64) -> Result<DesignMatrix> {
    if !(rate_hz > 0.0) {
        return Err(Error::Rate(format!(
            "target rate must be positive, got {rate_hz}"
        )));
    }
    let tick_s = check_streams(streams)?;
    let step = ticks_exact(1.0 / rate_hz, tick_s, "collection interval")?;
    let end = ticks_exact(duration_s, tick_s, "collection duration")?;
    let m = (end / step) as usize;
    if m == 0 {
        return Err(Error::InsufficientData(format!(
            "{duration_s} s holds no {} s interval",
            1.0 / rate_hz
        )));
    }
    for s in streams {
        let covered = (s.end_tick / step) as usize;
        if covered < m {
            return Err(Error::Truncation {
                id: s.id.clone(),
                missing_rows: m - covered,
            });
        }
    }
    let mut values = Vec::with_capacity(m * streams.len());
    for r in 0..m as u64 {
        for s in streams {
            values.push(stream_value(s, r * step, (r + 1) * step));
        }
    }
    DesignMatrix::new(
        step as f64 * tick_s,
        streams.iter().map(|s| s.id.clone()).collect(),
        (0..m).map(|r| (r as u64 * step) as f64 * tick_s).collect(),
        values,
        None,
    )
}

/// A single coherent read of several predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleRead {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
    /// OS accesses charged for the read.
    pub accesses: usize,
}

/// Reads the masked predictors at `t_s`, yielding their values for the
/// `interval_s` interval ending at `t_s` (the row of [`collect`] ending there).
pub fn bundle_read(
    streams: &[ObservedStream],
    mask: &[String],
    t_s: f64,
    interval_s: f64,
) -> Result<BundleRead> {
    if mask.is_empty() {
        return Err(Error::Argument("empty predictor mask".into()));
    }
    let tick_s = check_streams(streams)?;
    for id in mask {
        if !streams.iter().any(|s| &s.id == id) {
            return Err(Error::UnknownPredictor(id.clone()));
        }
    }
    let b = ticks_exact(t_s, tick_s, "read instant")?;
    let step = ticks_exact(interval_s, tick_s, "read interval")?;
    if step == 0 || b < step || b % step != 0 {
        return Err(Error::Alignment(format!(
            "{t_s} s is not the end of an {interval_s} s interval"
        )));
    }
    let picked: Vec<&ObservedStream> = streams.iter().filter(|s| mask.contains(&s.id)).collect();
    Ok(BundleRead {
        ids: picked.iter().map(|s| s.id.clone()).collect(),
        values: picked
            .iter()
            .map(|s| stream_value(s, b - step, b))
            .collect(),
        accesses: 1,
    })
}

/// Energy per `interval_s` from battery readings, for each leading interval
/// the readings fully cover. A current reading stamped `t` covers the reading
/// period ending at `t`.
pub fn aggregate_response(
    readings: &ReadingStream,
    interval_s: f64,
    voltage_v: f64,
) -> Result<Vec<f64>> {
    let p = readings.period_s;
    if interval_s < p * (1.0 - 1e-9) {
        return Err(Error::Rate(format!(
            "a {interval_s} s response is shorter than the {p} s reading period"
        )));
    }
    let k = integral_ratio(interval_s, p, "response interval")? as usize;
    let index = |t: f64| (t / p).round() as i64;
    match readings.quantity {
        Quantity::Current => {
            let mut out = Vec::new();
            let mut acc = 0.0;
            for (expected, r) in (1i64..).zip(&readings.readings) {
                if index(r.t_s) != expected {
                    break;
                }
                acc += r.value * voltage_v * p;
                if (expected as usize).is_multiple_of(k) {
                    out.push(acc);
                    acc = 0.0;
                }
            }
            Ok(out)
        }
        Quantity::Capacity => {
            let caps: Vec<f64> = readings
                .readings
                .iter()
                .enumerate()
                .take_while(|(i, r)| index(r.t_s) == *i as i64)
                .map(|(_, r)| r.value)
                .collect();
            Ok(caps
                .iter()
                .step_by(k)
                .collect::<Vec<_>>()
                .windows(2)
                .map(|w| (w[0] - w[1]) * voltage_v)
                .collect())
        }
    }
}
