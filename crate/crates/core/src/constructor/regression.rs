//! Linear fits returning `β = (β0, β1, …, βn)` for `y ≈ β0 + Σ βj xj`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Tls,
    Ols,
}

const RANK_TOL: f64 = 1e-10;
const TLS_TOL: f64 = 1e-12;

fn mean_std(col: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = col.clone().count() as f64;
    let mean = col.clone().sum::<f64>() / n;
    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_shape(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Schema(format!(
            "{} rows of predictors for {} responses",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < x.ncols() + 1 {
        return Err(Error::InsufficientData(format!(
            "{} rows cannot determine {} coefficients",
            x.nrows(),
            x.ncols() + 1
        )));
    }
    Ok(())
}

/// Least squares on `[1 | X]` through an SVD of the column-equilibrated
/// system. Rank deficiency is an error.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    check_shape(x, y)?;
    let (m, n) = (x.nrows(), x.ncols());
    let mut a = DMatrix::from_element(m, n + 1, 1.0);
    a.view_mut((0, 1), (m, n)).copy_from(x);
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&s| s == 0.0) {
        return Err(Error::DegenerateFit(format!(
            "predictor column {} is identically zero",
            j - 1
        )));
    }
    for (mut c, s) in a.column_iter_mut().zip(&norms) {
        c /= *s;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::DegenerateFit(format!(
            "rank-deficient predictors (σmin/σmax = {:e})",
            smin / smax
        )));
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V");
    let uty = u.transpose() * DVector::from_column_slice(y);
    let scaled = uty.component_div(&svd.singular_values);
    let sol = v_t.transpose() * scaled;
    Ok(sol.iter().zip(&norms).map(|(b, s)| b / s).collect())
}

/// Total least squares: with every column (including `y`) centred and scaled
/// to unit deviation, the coefficients come from the right singular vector of
/// `[X | y]` belonging to the smallest singular value.
pub fn fit_tls(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    check_shape(x, y)?;
    let (m, n) = (x.nrows(), x.ncols());
    let x_stats: Vec<(f64, f64)> = (0..n)
        .map(|j| mean_std(x.column(j).iter().copied()))
        .collect();
    let (y_mean, y_std) = mean_std(y.iter().copied());
    if let Some(j) = x_stats.iter().position(|&(_, s)| s == 0.0) {
        return Err(Error::DegenerateFit(format!(
            "predictor column {j} has zero variance"
        )));
    }
    if y_std == 0.0 {
        let mut beta = vec![0.0; n + 1];
        beta[0] = y_mean;
        return Ok(beta);
    }
    let mut c = DMatrix::zeros(m, n + 1);
    for j in 0..n {
        let (mu, s) = x_stats[j];
        for i in 0..m {
            c[(i, j)] = (x[(i, j)] - mu) / s;
        }
    }
    for i in 0..m {
        c[(i, n)] = (y[i] - y_mean) / y_std;
    }
    let svd = c.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let k = svd.singular_values.imin();
    let v = v_t.row(k);
    let last = v[n];
    if last.abs() < TLS_TOL {
        return Err(Error::DegenerateFit(
            "TLS singular vector has no response component".into(),
        ));
    }
    let mut beta = Vec::with_capacity(n + 1);
    beta.push(0.0);
    for j in 0..n {
        beta.push(-v[j] / last * y_std / x_stats[j].1);
    }
    beta[0] = y_mean - (0..n).map(|j| beta[j + 1] * x_stats[j].0).sum::<f64>();
    Ok(beta)
}

/// TLS, falling back to OLS when TLS is degenerate.
pub fn fit(x: &DMatrix<f64>, y: &[f64], method: FitMethod) -> Result<(Vec<f64>, FitMethod)> {
    if method == FitMethod::Tls {
        match fit_tls(x, y) {
            Ok(b) => return Ok((b, FitMethod::Tls)),
            Err(Error::DegenerateFit(msg)) => log::warn!("falling back to OLS: {msg}"),
            Err(e) => return Err(e),
        }
    }
    fit_ols(x, y).map(|b| (b, FitMethod::Ols))
}

/// Minimum-norm weighted least squares on `[1 | X]`, minimising
/// `Σ wᵢ (yᵢ − ŷᵢ)²`. Tolerates collinear and constant columns.
pub fn fit_weighted(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if x.nrows() != y.len() || y.len() != w.len() {
        return Err(Error::Schema("weighted fit inputs differ in length".into()));
    }
    let (m, n) = (x.nrows(), x.ncols());
    if m == 0 {
        return Err(Error::InsufficientData(
            "weighted fit needs at least one row".into(),
        ));
    }
    let mut a = DMatrix::from_element(m, n + 1, 1.0);
    a.view_mut((0, 1), (m, n)).copy_from(x);
    let mut b = DVector::from_column_slice(y);
    for i in 0..m {
        let s = w[i].max(0.0).sqrt();
        a.row_mut(i).scale_mut(s);
        b[i] *= s;
    }
    let norms: Vec<f64> = a
        .column_iter()
        .map(|c| c.norm())
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect();
    for (mut c, s) in a.column_iter_mut().zip(&norms) {
        c /= *s;
    }
    let svd = a.svd(true, true);
    let tol = RANK_TOL * svd.singular_values.max();
    let sol = svd
        .solve(&b, tol)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    Ok(sol.iter().zip(&norms).map(|(v, s)| v / s).collect())
}

/// `β0 + Σ βj xj`.
pub fn affine(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}
