//! Histogram regression over equal-width predictor bins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::collector::DesignMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub count: usize,
    pub sum: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressogramModel {
    pub k: usize,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Populated cells keyed by per-predictor bin index.
    pub cells: BTreeMap<Vec<usize>, Cell>,
    /// Mean of all training responses.
    pub fallback: f64,
}

impl RegressogramModel {
    /// Bin index of `v` for predictor `j`, or `None` outside the training range.
    fn bin(&self, j: usize, v: f64) -> Option<usize> {
        let (lo, hi) = (self.mins[j], self.maxs[j]);
        if !(v >= lo && v <= hi) {
            return None;
        }
        if hi == lo {
            return Some(0);
        }
        Some((((v - lo) / (hi - lo) * self.k as f64).floor() as usize).min(self.k - 1))
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        x.iter().enumerate().map(|(j, &v)| self.bin(j, v)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.cell_of(x)
            .and_then(|c| self.cells.get(&c))
            .map_or(self.fallback, |c| c.mean)
    }

    pub fn predict_matrix(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.mins.len() {
            return Err(Error::Schema(format!(
                "{} predictors for a {}-predictor regressogram",
                x.cols(),
                self.mins.len()
            )));
        }
        Ok((0..x.rows()).map(|i| self.predict(x.row(i))).collect())
    }
}

/// Fits `k` equal-width bins per predictor over its observed range.
pub fn fit_regressogram(x: &DesignMatrix, k: usize) -> Result<RegressogramModel> {
    let y = x.response()?;
    if k == 0 {
        return Err(Error::Argument(
            "regressogram needs at least one bin".into(),
        ));
    }
    let n = x.cols();
    let (mut mins, mut maxs) = (vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]);
    for i in 0..x.rows() {
        for (j, &v) in x.row(i).iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    let mut model = RegressogramModel {
        k,
        mins,
        maxs,
        cells: BTreeMap::new(),
        fallback: y.iter().sum::<f64>() / y.len() as f64,
    };
    for (i, &yi) in y.iter().enumerate() {
        let key = model
            .cell_of(x.row(i))
            .expect("training rows lie inside their own range");
        let cell = model.cells.entry(key).or_insert(Cell {
            count: 0,
            sum: 0.0,
            mean: 0.0,
        });
        cell.count += 1;
        cell.sum += yi;
    }
    for cell in model.cells.values_mut() {
        cell.mean = cell.sum / cell.count as f64;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(xs: &[[f64; 2]], y: &[f64]) -> DesignMatrix {
        DesignMatrix::new(
            1.0,
            vec!["a".into(), "b".into()],
            (0..xs.len()).map(|i| i as f64).collect(),
            xs.iter().flatten().copied().collect(),
            Some(y.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn single_bin_predicts_mean() {
        let d = dm(&[[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]], &[1.0, 2.0, 6.0]);
        let m = fit_regressogram(&d, 1).unwrap();
        assert_eq!(m.cells.len(), 1);
        assert_eq!(m.predict(&[0.2, 0.9]), 3.0);
    }

    #[test]
    fn aligned_piecewise_constant_is_exact() {
        // Value depends on which quarter each predictor falls in.
        let f = |a: f64, b: f64| (a * 4.0).floor().min(3.0) * 10.0 + (b * 4.0).floor().min(3.0);
        let mut xs = Vec::new();
        for i in 0..=40 {
            for j in 0..=40 {
                xs.push([i as f64 / 40.0, j as f64 / 40.0]);
            }
        }
        let y: Vec<f64> = xs.iter().map(|p| f(p[0], p[1])).collect();
        let d = dm(&xs, &y);
        let m = fit_regressogram(&d, 4).unwrap();
        let pred = m.predict_matrix(&d).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn outside_range_falls_back() {
        let d = dm(&[[0.0, 0.0], [1.0, 1.0]], &[2.0, 4.0]);
        let m = fit_regressogram(&d, 10).unwrap();
        assert_eq!(m.predict(&[2.0, 0.5]), 3.0);
        assert_eq!(m.predict(&[1.0, 1.0]), 4.0);
        assert_eq!(m.predict(&[0.5, 0.5]), 3.0);
    }

    #[test]
    fn requires_bins_and_response() {
        let d = dm(&[[0.0, 0.0]], &[1.0]);
        assert!(matches!(fit_regressogram(&d, 0), Err(Error::Argument(_))));
        let no_y = DesignMatrix::new(1.0, vec!["a".into()], vec![0.0], vec![1.0], None).unwrap();
        assert!(fit_regressogram(&no_y, 3).is_err());
    }
}
