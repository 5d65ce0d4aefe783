//! Energy models: fitting on stretched data and compression to short intervals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pca::{pca_transform, select_components, PcaBasis};
use super::regression::{affine, fit, FitMethod};
use crate::battery_sim::ReadingStream;
use crate::collector::{aggregate_response, DesignMatrix};
use crate::error::{Error, Result};
use crate::time::integral_ratio;

/// Loading above which an original predictor counts as used by a PCA model.
pub const SIGNIFICANCE_THRESHOLD: f64 = 0.1;

/// Aggregates a base-rate design matrix to `t_low_s` intervals and pairs it
/// with the battery energy of each interval.
pub fn stretch(
    x: &DesignMatrix,
    readings: &ReadingStream,
    t_low_s: f64,
    voltage_v: f64,
) -> Result<DesignMatrix> {
    let k = integral_ratio(t_low_s, x.interval_s(), "stretch interval")? as usize;
    let rows = x.rows() / k;
    let needed = x.cols() + 2;
    if rows < needed {
        return Err(Error::InsufficientData(format!(
            "{rows} stretched row(s) of {t_low_s} s; at least {needed} are needed"
        )));
    }
    let low = x.downsample(k)?;
    let y = aggregate_response(readings, t_low_s, voltage_v)?;
    let out = low.with_response(y)?;
    if out.rows() < needed {
        return Err(Error::InsufficientData(format!(
            "battery readings cover {} stretched row(s); at least {needed} are needed",
            out.rows()
        )));
    }
    Ok(out)
}

/// Which predictors a model is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// The original predictors.
    None,
    /// All principal components.
    AllComponents,
    /// The top `l` principal components.
    Components(usize),
}

/// Affine energy model over interval-averaged predictors. `beta` predicts
/// the energy of one training interval; shorter intervals scale it by
/// `t / T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub predictor_ids: Vec<String>,
    /// Indices into `predictor_ids` the coefficients apply to when no PCA
    /// basis is present.
    pub columns: Vec<usize>,
    pub pca: Option<PcaBasis>,
    pub beta: Vec<f64>,
    pub training_interval_s: f64,
    pub method: FitMethod,
    pub training_error: f64,
    #[serde(default)]
    pub below_target: bool,
    /// Original predictors the model depends on.
    pub significant: Vec<String>,
}

impl EnergyModel {
    /// Number of transformed predictors, `l` for PCA models.
    pub fn dimension(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn l(&self) -> Option<usize> {
        self.pca.as_ref().map(PcaBasis::l)
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        match &self.pca {
            Some(b) => b.transform(x),
            None => self.columns.iter().map(|&j| x[j]).collect(),
        }
    }

    /// Energy over one interval of `interval_s` with interval-averaged
    /// predictors `x`.
    pub fn compress(&self, x: &[f64], interval_s: f64) -> Result<f64> {
        if x.len() != self.predictor_ids.len() {
            return Err(Error::Schema(format!(
                "{} predictor values for a model over {}",
                x.len(),
                self.predictor_ids.len()
            )));
        }
        if interval_s > self.training_interval_s * (1.0 + 1e-9) {
            return Err(Error::Argument(format!(
                "interval {interval_s} s exceeds the {} s training interval",
                self.training_interval_s
            )));
        }
        Ok(self.energy(x, interval_s))
    }

    fn energy(&self, x: &[f64], interval_s: f64) -> f64 {
        interval_s / self.training_interval_s * affine(&self.beta, &self.features(x))
    }

    /// Energy per row of `x`, whose columns must be the model's predictors.
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        if x.ids() != self.predictor_ids.as_slice() {
            return Err(Error::Schema(format!(
                "predictors {:?} do not match the model's {:?}",
                x.ids(),
                self.predictor_ids
            )));
        }
        if x.interval_s() > self.training_interval_s * (1.0 + 1e-9) {
            return Err(Error::Argument(
                "prediction interval exceeds the training interval".into(),
            ));
        }
        Ok((0..x.rows())
            .map(|i| self.energy(x.row(i), x.interval_s()))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// RMS of per-row relative errors, skipping rows with non-positive truth.
fn rms_relative(pred: &[f64], truth: &[f64]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        if *t > 0.0 {
            sum += ((p - t) / t).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Fits a model to a design matrix carrying responses.
pub fn fit_model(
    data: &DesignMatrix,
    transform: Transform,
    method: FitMethod,
) -> Result<EnergyModel> {
    let y = data.response()?;
    let (pca, columns, features) = match transform {
        Transform::None => {
            let columns: Vec<usize> = (0..data.cols())
                .filter(|&j| {
                    let c = data.column(j);
                    let varies = c.iter().any(|v| *v != c[0]);
                    if !varies {
                        log::warn!(
                            "predictor `{}` is constant and left out of the fit",
                            data.ids()[j]
                        );
                    }
                    varies
                })
                .collect();
            let f = DMatrix::from_fn(data.rows(), columns.len(), |i, k| data.row(i)[columns[k]]);
            (None, columns, f)
        }
        Transform::AllComponents | Transform::Components(_) => {
            let (basis, z) = pca_transform(data)?;
            let l = match transform {
                Transform::Components(l) => l.min(basis.l()),
                _ => basis.l(),
            };
            let basis = select_components(&basis, l)?;
            let z = z.columns(0, l).into_owned();
            (Some(basis), Vec::new(), z)
        }
    };
    let (beta, method) = fit(&features, y, method)?;
    let significant = match &pca {
        Some(b) => b.significant_ids(SIGNIFICANCE_THRESHOLD),
        None => columns.iter().map(|&j| data.ids()[j].clone()).collect(),
    };
    let mut model = EnergyModel {
        predictor_ids: data.ids().to_vec(),
        columns,
        pca,
        beta,
        training_interval_s: data.interval_s(),
        method,
        training_error: 0.0,
        below_target: false,
        significant,
    };
    let pred = model.predict(data)?;
    model.training_error = rms_relative(&pred, y);
    Ok(model)
}

/// Fits with all components, then drops components while the training
/// accuracy stays at or above `target`. If even the full fit misses the
/// target it is returned flagged.
pub fn iterate_construction(
    data: &DesignMatrix,
    target: f64,
    method: FitMethod,
) -> Result<EnergyModel> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::Argument(format!(
            "accuracy target {target} outside [0, 1)"
        )));
    }
    let full = fit_model(data, Transform::AllComponents, method)?;
    let n = full.dimension();
    if 1.0 - full.training_error < target {
        let mut best = full;
        for l in (1..n).rev() {
            let m = fit_model(data, Transform::Components(l), method)?;
            if m.training_error < best.training_error {
                best = m;
            }
        }
        best.below_target = true;
        return Ok(best);
    }
    let mut accepted = full;
    for l in (1..n).rev() {
        let m = fit_model(data, Transform::Components(l), method)?;
        if 1.0 - m.training_error >= target {
            accepted = m;
        } else {
            break;
        }
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery_sim::{BatteryReading, InterfaceKind, Quantity};

    fn data(m: usize, beta: &[f64], interval: f64) -> DesignMatrix {
        let n = beta.len() - 1;
        let ids = (0..n).map(|j| format!("x{j}")).collect();
        let values: Vec<f64> = (0..m)
            .flat_map(|i| {
                (0..n).map(move |j| {
                    ((i * 7 + j * 3) % 11) as f64 / 10.0 + ((i * j) % 5) as f64 * 0.05
                })
            })
            .collect();
        let y = values.chunks(n).map(|r| affine(beta, r)).collect();
        DesignMatrix::new(
            interval,
            ids,
            (0..m).map(|i| i as f64 * interval).collect(),
            values,
            Some(y),
        )
        .unwrap()
    }

    #[test]
    fn compress_scales_whole_prediction() {
        let d = data(30, &[100.0, 50.0, 20.0], 100.0);
        let model = fit_model(&d, Transform::None, FitMethod::Tls).unwrap();
        assert!(model.training_error < 1e-12);
        let full = model.compress(&[0.3, 0.6], 100.0).unwrap();
        assert!((full - affine(&[100.0, 50.0, 20.0], &[0.3, 0.6])).abs() < 1e-9);
        let short = model.compress(&[0.3, 0.6], 0.01).unwrap();
        assert!((short - full * 1e-4).abs() < 1e-12);
        assert!(matches!(model.compress(&[0.3], 1.0), Err(Error::Schema(_))));
        assert!(model.compress(&[0.3, 0.6], 200.0).is_err());
    }

    #[test]
    fn predict_checks_schema() {
        let d = data(30, &[1.0, 2.0, 3.0], 100.0);
        let model = fit_model(&d, Transform::AllComponents, FitMethod::Ols).unwrap();
        let swapped = d.select(&["x1".to_string(), "x0".to_string()]).unwrap();
        assert!(matches!(model.predict(&swapped), Err(Error::Schema(_))));
    }

    #[test]
    fn model_json_is_small_and_round_trips() {
        let d = data(40, &[5.0, 1.0, 2.0, 3.0, 4.0, 5.0], 100.0);
        let model = fit_model(&d, Transform::Components(2), FitMethod::Tls).unwrap();
        let s = model.to_json().unwrap();
        assert!(s.len() < 4096, "{}", s.len());
        assert_eq!(EnergyModel::from_json(&s).unwrap(), model);
    }

    #[test]
    fn stretch_counts_rows() {
        let values: Vec<f64> = (0..100_000).map(|i| (i % 13) as f64 / 13.0).collect();
        let x = DesignMatrix::new(
            0.01,
            vec!["u".into()],
            (0..100_000).map(|i| i as f64 * 0.01).collect(),
            values,
            None,
        )
        .unwrap();
        let readings = ReadingStream {
            kind: InterfaceKind::Filtered,
            quantity: Quantity::Current,
            period_s: 2.0,
            readings: (1..=500)
                .map(|k| BatteryReading {
                    t_s: 2.0 * k as f64,
                    value: 1.0,
                })
                .collect(),
        };
        let s = stretch(&x, &readings, 100.0, 5.0).unwrap();
        assert_eq!(s.rows(), 10);
        assert!(s.y().unwrap().iter().all(|&y| (y - 500.0).abs() < 1e-9));
        let short = x.slice_rows(0, 20_000).unwrap();
        assert!(matches!(
            stretch(&short, &readings, 100.0, 5.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn iterate_targets() {
        let d = data(60, &[10.0, 4.0, -3.0, 2.0], 100.0);
        let any = iterate_construction(&d, 0.0, FitMethod::Ols).unwrap();
        assert_eq!(any.l(), Some(1));
        let exact = iterate_construction(&d, 0.999_999, FitMethod::Ols).unwrap();
        assert_eq!(exact.l(), Some(3));
        assert!(!exact.below_target);
        assert!(iterate_construction(&d, 1.5, FitMethod::Ols).is_err());
    }

    #[test]
    fn iterate_single_predictor() {
        let mut d = data(20, &[1.0, 2.0], 100.0);
        let y: Vec<f64> = d
            .y()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, v)| v * if i % 2 == 0 { 1.5 } else { 0.5 })
            .collect();
        d = d.with_response(y).unwrap();
        let m = iterate_construction(&d, 0.99, FitMethod::Tls).unwrap();
        assert_eq!(m.l(), Some(1));
        assert!(m.below_target);
    }
}
