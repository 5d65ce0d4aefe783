//! Scenario runner for the evaluation experiments.

mod report;
mod scenario;

use std::path::Path;

pub use report::{write_adaptation_csv, AdaptationRow, ErrorReport, ReportRow};
pub use scenario::{
    ChangeEvent, ConstructorConfig, Experiment, ManagerConfig, Scenario, DEFAULT_RATE_GRID,
};

use crate::battery_sim::{self, ReadingStream};
use crate::collector::{aggregate_response, collect, DesignMatrix};
use crate::constructor::{
    affine, fit_model, fit_regressogram, fit_weighted, iterate_construction, stretch, EnergyModel,
    Transform,
};
use crate::error::{Error, Result};
use crate::manager::{Action, Category, ConfigurationKey, Lookup, ModelTable};
use crate::time::{period_ticks, ticks_exact};
use crate::trace_sim::{
    complete_interval_energies, gen_trace, observe_predictors, ObservedStream, Trace,
};

const BATTERY_SEED_SALT: u64 = 0x5EED_BA77_E12F_0001;
const CHANGE_SEED_SALT: u64 = 0xC4A6_6E00_0000_0001;

/// A simulated run: ground truth, what the OS shows, and the battery readings.
pub struct Run {
    pub scenario: Scenario,
    pub trace: Trace,
    pub streams: Vec<ObservedStream>,
    pub readings: ReadingStream,
}

impl Run {
    pub fn simulate(scenario: &Scenario) -> Result<Run> {
        scenario.validate()?;
        let s = scenario;
        let mut wl = s.workload.clone();
        wl.seed = wl.seed.wrapping_add(s.seed);
        let total = s.total_s();
        let mut trace = match &s.change {
            None => gen_trace(&s.system, &wl, total, s.tick_s)?,
            Some(ch) => {
                let mut after = ch.workload.clone();
                after.seed = after
                    .seed
                    .wrapping_add(s.seed)
                    .wrapping_add(CHANGE_SEED_SALT);
                let first = gen_trace(&s.system, &wl, ch.at_s, s.tick_s)?;
                first.concat(gen_trace(&s.system, &after, total - ch.at_s, s.tick_s)?)?
            }
        };
        if s.read_overhead_w != 0.0 {
            let p = period_ticks(s.read_rate_hz, s.tick_s, "read rate")? as usize;
            trace.add_read_overhead(p, s.read_overhead_w);
        }
        let streams = if s.predictors.is_empty() {
            Vec::new()
        } else {
            observe_predictors(&trace, &s.predictors, s.read_rate_hz)?
        };
        let mut battery = s.battery.clone();
        battery.seed = battery.seed.wrapping_add(s.seed ^ BATTERY_SEED_SALT);
        let readings = battery_sim::sample(&trace, &battery)?;
        Ok(Run {
            scenario: s.clone(),
            trace,
            streams,
            readings,
        })
    }

    fn voltage(&self) -> f64 {
        self.scenario.battery.supply_voltage_v
    }

    /// Interval index range `[first, first + count)` of the test span at `rate_hz`.
    fn test_rows(&self, rate_hz: f64) -> Result<(usize, usize)> {
        let s = &self.scenario;
        let interval = 1.0 / rate_hz;
        let first = ticks_exact(s.train_s, interval, "training span")? as usize;
        let count = ticks_exact(s.test_s, interval, "test span")? as usize;
        Ok((first, count))
    }

    /// True energy of each test interval at `rate_hz`.
    pub fn truth(&self, rate_hz: f64) -> Result<Vec<f64>> {
        let (first, count) = self.test_rows(rate_hz)?;
        let all = complete_interval_energies(&self.trace, 1.0 / rate_hz)?;
        slice(&all, first, count, "true energy")
    }

    /// Observed predictors of each test interval at `rate_hz`.
    pub fn predictors(&self, rate_hz: f64) -> Result<DesignMatrix> {
        let (first, count) = self.test_rows(rate_hz)?;
        collect(&self.streams, rate_hz, self.scenario.total_s())?.slice_rows(first, first + count)
    }

    /// Interface energy per test interval: aggregated readings when the rate
    /// is at most the reading rate, otherwise the covering reading held.
    pub fn interface_energy(&self, rate_hz: f64) -> Result<Vec<f64>> {
        let (first, count) = self.test_rows(rate_hz)?;
        let current = self.readings.to_current();
        let interval = 1.0 / rate_hz;
        let all = if interval >= current.period_s * (1.0 - 1e-9) {
            aggregate_response(&current, interval, self.voltage())?
        } else {
            held_energy(&current, interval, first + count, self.voltage())
        };
        slice(&all, first, count, "battery readings")
    }

    /// Stretched training set over `[from_s, to_s)`.
    pub fn stretched(&self, from_s: f64, to_s: f64) -> Result<DesignMatrix> {
        let c = &self.scenario.constructor;
        let base = collect(&self.streams, c.base_rate_hz, to_s)?;
        let first = ticks_exact(from_s, base.interval_s(), "training start")? as usize;
        let x = base.slice_rows(first, base.rows())?;
        stretch(
            &x,
            &self.readings.window(from_s, to_s),
            c.t_low_s,
            self.voltage(),
        )
    }
}

fn slice(all: &[f64], first: usize, count: usize, what: &str) -> Result<Vec<f64>> {
    if all.len() < first + count {
        return Err(Error::InsufficientData(format!(
            "{what} cover {} interval(s), {} needed",
            all.len(),
            first + count
        )));
    }
    Ok(all[first..first + count].to_vec())
}

fn held_energy(current: &ReadingStream, interval_s: f64, count: usize, voltage_v: f64) -> Vec<f64> {
    let p = current.period_s;
    (0..count)
        .map_while(|i| {
            let k = (i as f64 * interval_s / p + 1e-9).floor() as usize;
            current
                .readings
                .get(k)
                .map(|r| r.value * voltage_v * interval_s)
        })
        .collect()
}

fn error_of(pred: &[f64], truth: &[f64]) -> Result<f64> {
    Ok(battery_sim::rms_relative_error(pred, truth)?.rms)
}

fn molded_variants(scenario: &Scenario) -> Vec<(String, Transform)> {
    let l = scenario.constructor.l;
    let mut v = vec![
        ("molded_no_pca".to_string(), Transform::None),
        ("molded_all_pcs".to_string(), Transform::AllComponents),
        (format!("molded_l{l}"), Transform::Components(l)),
    ];
    if l != 1 {
        v.push(("molded_l1".to_string(), Transform::Components(1)));
    }
    v
}

/// Name of the estimator reported for the configured `l`.
pub fn primary_estimator(scenario: &Scenario) -> String {
    format!("molded_l{}", scenario.constructor.l)
}

/// Raw interface error at each grid rate; rates above the reading rate are
/// unsupported.
pub fn run_error_vs_rate(run: &Run) -> Result<ErrorReport> {
    let s = &run.scenario;
    let native = run.readings.rate_hz();
    let rows = s
        .rate_grid
        .iter()
        .map(|&r| {
            let err = if r > native * (1.0 + 1e-9) {
                None
            } else {
                Some(error_of(&run.interface_energy(r)?, &run.truth(r)?)?)
            };
            Ok(ReportRow {
                rate_hz: r,
                estimator: "interface".into(),
                rms_rel_error: err,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport {
        scenario: s.name.clone(),
        seed: s.seed,
        rows,
    })
}

/// Models trained on the stretched training span, one per molding variant.
pub fn train_variants(run: &Run) -> Result<Vec<(String, EnergyModel)>> {
    let s = &run.scenario;
    let data = run.stretched(0.0, s.train_s)?;
    molded_variants(s)
        .into_iter()
        .map(|(name, t)| Ok((name, fit_model(&data, t, s.constructor.method)?)))
        .collect()
}

/// Affine model fitted at the evaluation rate itself, minimising the RMS
/// relative error against true energy.
fn oracle_error(x: &DesignMatrix, truth: &[f64]) -> Result<f64> {
    let m = x.to_matrix();
    let w: Vec<f64> = truth
        .iter()
        .map(|y| if *y > 0.0 { 1.0 / (y * y) } else { 0.0 })
        .collect();
    let beta = fit_weighted(&m, truth, &w)?;
    let pred: Vec<f64> = (0..x.rows()).map(|i| affine(&beta, x.row(i))).collect();
    error_of(&pred, truth)
}

pub fn run_molding(run: &Run) -> Result<(ErrorReport, Vec<(String, EnergyModel)>)> {
    let s = &run.scenario;
    let models = train_variants(run)?;
    let mut rows = Vec::new();
    for &r in &s.rate_grid {
        let truth = run.truth(r)?;
        let x = run.predictors(r)?;
        rows.push(ReportRow {
            rate_hz: r,
            estimator: "interface".into(),
            rms_rel_error: Some(error_of(&run.interface_energy(r)?, &truth)?),
        });
        for (name, model) in &models {
            rows.push(ReportRow {
                rate_hz: r,
                estimator: name.clone(),
                rms_rel_error: Some(error_of(&model.predict(&x)?, &truth)?),
            });
        }
        rows.push(ReportRow {
            rate_hz: r,
            estimator: "oracle".into(),
            rms_rel_error: Some(oracle_error(&x, &truth)?),
        });
    }
    Ok((
        ErrorReport {
            scenario: s.name.clone(),
            seed: s.seed,
            rows,
        },
        models,
    ))
}

/// Linear molded model against a regressogram trained on true energy of the
/// training span at each rate; both are scored on the test span.
pub fn run_regressogram_compare(run: &Run) -> Result<ErrorReport> {
    let s = &run.scenario;
    let linear = fit_model(
        &run.stretched(0.0, s.train_s)?,
        Transform::Components(s.constructor.l),
        s.constructor.method,
    )?;
    let mut rows = Vec::new();
    for &r in &s.rate_grid {
        let truth = run.truth(r)?;
        let x = run.predictors(r)?;
        let train_rows = ticks_exact(s.train_s, 1.0 / r, "training span")? as usize;
        let train_x = collect(&run.streams, r, s.train_s)?;
        let train_y = complete_interval_energies(&run.trace, 1.0 / r)?;
        let train = train_x.with_response(slice(&train_y, 0, train_rows, "true energy")?)?;
        let rg = fit_regressogram(&train, s.constructor.regressogram_bins)?;
        rows.push(ReportRow {
            rate_hz: r,
            estimator: "linear".into(),
            rms_rel_error: Some(error_of(&linear.predict(&x)?, &truth)?),
        });
        rows.push(ReportRow {
            rate_hz: r,
            estimator: "regressogram".into(),
            rms_rel_error: Some(error_of(&rg.predict_matrix(&x)?, &truth)?),
        });
    }
    Ok(ErrorReport {
        scenario: s.name.clone(),
        seed: s.seed,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct AdaptationOutcome {
    pub rows: Vec<AdaptationRow>,
    pub rebuilds: usize,
    pub cold_starts: usize,
    /// End of the training span of every installed model, with the model.
    pub installs: Vec<(f64, EnergyModel)>,
    pub table: ModelTable,
}

impl AdaptationOutcome {
    pub fn final_model(&self) -> Option<&EnergyModel> {
        self.installs.last().map(|(_, m)| m)
    }
}

fn config_key(s: &Scenario, t_s: f64) -> ConfigurationKey {
    let mut entries = vec![(
        Category::Hardware,
        "device".to_string(),
        s.manager.device.clone(),
    )];
    if let (Some(ch), true) = (&s.change, s.manager.track_in_key) {
        let value = if t_s >= ch.at_s {
            &ch.after
        } else {
            &ch.before
        };
        entries.push((Category::Software, ch.setting.clone(), value.clone()));
    }
    ConfigurationKey::new(entries)
}

/// Monitors the active model window by window from the end of the training
/// span, rebuilding when the error exceeds the threshold. After every
/// construction, monitoring resumes once the fresh training span has elapsed.
pub fn run_adaptation(run: &Run) -> Result<AdaptationOutcome> {
    let s = &run.scenario;
    let m = &s.manager;
    let c = &s.constructor;
    let total = s.total_s();
    let windows = collect(&run.streams, 1.0 / m.window_s, total)?;
    let mut table = ModelTable::new(m.threshold, m.window_s);
    let mut out = AdaptationOutcome {
        rows: Vec::new(),
        rebuilds: 0,
        cold_starts: 0,
        installs: Vec::new(),
        table: ModelTable::default(),
    };

    let key = config_key(s, 0.0);
    if let Lookup::ColdStart = table.lookup_or_create(&key) {
        let model =
            iterate_construction(&run.stretched(0.0, s.train_s)?, c.accuracy_target, c.method)?;
        out.installs.push((s.train_s, model.clone()));
        table.install(model)?;
        table.note(s.train_s, None, Action::Cooldown);
        out.cold_starts += 1;
    }
    let mut resume_at = s.train_s;
    let current = run.readings.to_current();
    for w in 0..windows.rows() {
        let start = windows.t_start()[w];
        let end = start + m.window_s;
        if start + 1e-9 < resume_at {
            continue;
        }
        let key = config_key(s, start);
        if table.active_key() != Some(&key) {
            if let Lookup::ColdStart = table.lookup_or_create(&key) {
                let stop = start + m.training_span_s;
                if stop > total + 1e-9 {
                    table.note(end, None, Action::Skip);
                    break;
                }
                let model = iterate_construction(
                    &run.stretched(start, stop)?,
                    c.accuracy_target,
                    c.method,
                )?;
                out.installs.push((stop, model.clone()));
                table.install(model)?;
                table.note(start, None, Action::Cooldown);
                out.cold_starts += 1;
                resume_at = stop;
                continue;
            }
        }
        let row = windows.slice_rows(w, w + 1)?;
        let window_readings = current.window(start, end);
        let errs = table.monitor(&row, &window_readings, run.voltage())?;
        let Some(err) = errs.first().map(|e| e.error) else {
            continue;
        };
        let rebuild = table.should_rebuild(err);
        if rebuild {
            let stop = end + m.training_span_s;
            if stop > total + 1e-9 {
                table.note(end, Some(err), Action::Skip);
                out.rows.push(AdaptationRow {
                    t_s: end,
                    window_error: err,
                    rebuild: false,
                });
                continue;
            }
            let model = table
                .maybe_rebuild(
                    end,
                    err,
                    || run.stretched(end, stop),
                    c.accuracy_target,
                    c.method,
                )?
                .cloned()
                .expect("threshold exceeded");
            out.installs.push((stop, model));
            out.rebuilds += 1;
            resume_at = stop;
        } else {
            table.note(end, Some(err), Action::Keep);
        }
        out.rows.push(AdaptationRow {
            t_s: end,
            window_error: err,
            rebuild,
        });
    }
    out.table = table;
    Ok(out)
}

/// Runs the scenario's experiment and writes its artifacts to `out_dir`.
pub fn run_to_dir(scenario: &Scenario, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let run = Run::simulate(scenario)?;
    let meta = serde_json::json!({
        "scenario": scenario.name,
        "experiment": scenario.experiment,
        "seed": scenario.seed,
        "rate_grid": scenario.rate_grid,
        "t_low_s": scenario.constructor.t_low_s,
        "l": scenario.constructor.l,
        "threshold": scenario.manager.threshold,
    });
    std::fs::write(
        out_dir.join("run.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    let create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(
            out_dir.join(name),
        )?))
    };
    match scenario.experiment {
        Experiment::ErrorVsRate => run_error_vs_rate(&run)?.write_csv(create("report.csv")?)?,
        Experiment::Molding => {
            let (report, models) = run_molding(&run)?;
            report.write_csv(create("report.csv")?)?;
            for (name, model) in models {
                std::fs::write(out_dir.join(format!("{name}.json")), model.to_json()?)?;
            }
        }
        Experiment::RegressogramCompare => {
            run_regressogram_compare(&run)?.write_csv(create("report.csv")?)?
        }
        Experiment::Adaptation => {
            let outcome = run_adaptation(&run)?;
            write_adaptation_csv(&outcome.rows, create("adaptation.csv")?)?;
            outcome
                .table
                .write_decision_log(create("decision_log.csv")?)?;
            outcome.table.persist(&out_dir.join("model_table.json"))?;
        }
    }
    Ok(())
}
