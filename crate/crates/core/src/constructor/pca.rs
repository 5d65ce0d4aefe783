//! Predictor transformation by principal components.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::collector::DesignMatrix;
use crate::error::{Error, Result};

/// Orthonormal basis of the standardized predictor space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    /// Ids of the predictors the basis was built from, in input order.
    pub input_ids: Vec<String>,
    /// Indices into `input_ids` of the columns that had variance.
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Singular values of the standardized matrix, non-increasing.
    pub singular_values: Vec<f64>,
    /// The top `l` right singular vectors, one per row, over the kept columns.
    pub rows: Vec<Vec<f64>>,
}

impl PcaBasis {
    pub fn l(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns spanned by the basis.
    pub fn width(&self) -> usize {
        self.kept.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .enumerate()
            .map(|(k, &j)| (x[j] - self.means[k]) / self.scales[k])
            .collect()
    }

    /// Transformed predictors `z = U_l x̃` of one original predictor row.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let s = self.standardize(x);
        self.rows
            .iter()
            .map(|u| u.iter().zip(&s).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transform_matrix(&self, x: &DesignMatrix) -> Result<DMatrix<f64>> {
        if x.ids() != self.input_ids.as_slice() {
            return Err(Error::Schema(
                "predictor order differs from the PCA basis".into(),
            ));
        }
        let l = self.l();
        let mut z = DMatrix::zeros(x.rows(), l);
        for i in 0..x.rows() {
            for (j, v) in self.transform(x.row(i)).into_iter().enumerate() {
                z[(i, j)] = v;
            }
        }
        Ok(z)
    }

    /// Kept predictors rebuilt from their transform (exact only when `l = n`).
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        (0..self.width())
            .map(|k| {
                let s: f64 = self.rows.iter().zip(z).map(|(u, zi)| u[k] * zi).sum();
                s * self.scales[k] + self.means[k]
            })
            .collect()
    }

    /// Norm of each kept predictor's column in `U_l`, in `kept` order.
    pub fn loadings(&self) -> Vec<f64> {
        (0..self.width())
            .map(|k| self.rows.iter().map(|u| u[k] * u[k]).sum::<f64>().sqrt())
            .collect()
    }

    /// Ids of kept predictors whose loading exceeds `threshold`.
    pub fn significant_ids(&self, threshold: f64) -> Vec<String> {
        self.kept
            .iter()
            .zip(self.loadings())
            .filter(|(_, w)| *w > threshold)
            .map(|(&j, _)| self.input_ids[j].clone())
            .collect()
    }
}

/// Standardizes the columns (zero-variance ones are dropped) and takes the
/// SVD; returns the full basis and the transformed matrix.
pub fn pca_transform(x: &DesignMatrix) -> Result<(PcaBasis, DMatrix<f64>)> {
    let (m, n) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::InsufficientData("no predictors to transform".into()));
    }
    if m < n {
        return Err(Error::InsufficientData(format!(
            "{m} rows cannot span {n} predictors"
        )));
    }
    let mut kept = Vec::new();
    let (mut means, mut scales) = (Vec::new(), Vec::new());
    for j in 0..n {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / m as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64).sqrt();
        if sd > 0.0 && sd > 1e-12 * mean.abs() {
            kept.push(j);
            means.push(mean);
            scales.push(sd);
        } else {
            log::warn!(
                "predictor `{}` has no variance and is left out of the transform",
                x.ids()[j]
            );
        }
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(
            "every predictor is constant".into(),
        ));
    }
    let w = kept.len();
    let s = DMatrix::from_fn(m, w, |i, k| (x.row(i)[kept[k]] - means[k]) / scales[k]);
    let svd = s.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let rows: Vec<Vec<f64>> = order
        .iter()
        .map(|&r| {
            let mut u: Vec<f64> = v_t.row(r).iter().copied().collect();
            let pivot = u
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            if pivot < 0.0 {
                u.iter_mut().for_each(|v| *v = -*v);
            }
            u
        })
        .collect();
    let basis = PcaBasis {
        input_ids: x.ids().to_vec(),
        kept,
        means,
        scales,
        singular_values: order.iter().map(|&r| svd.singular_values[r]).collect(),
        rows,
    };
    let z = basis.transform_matrix(x)?;
    Ok((basis, z))
}

/// Keeps the top `l` components.
pub fn select_components(basis: &PcaBasis, l: usize) -> Result<PcaBasis> {
    if l == 0 || l > basis.rows.len() {
        return Err(Error::Argument(format!(
            "l = {l} outside 1..={}",
            basis.rows.len()
        )));
    }
    let mut b = basis.clone();
    b.rows.truncate(l);
    Ok(b)
}
