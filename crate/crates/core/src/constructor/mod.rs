//! Model construction: stretching, predictor transformation, regression and
//! compression, plus the regressogram baseline.

mod model;
mod pca;
mod regression;
mod regressogram;

pub use model::{
    fit_model, iterate_construction, stretch, EnergyModel, Transform, SIGNIFICANCE_THRESHOLD,
};
pub use pca::{pca_transform, select_components, PcaBasis};
pub use regression::{affine, fit, fit_ols, fit_tls, fit_weighted, FitMethod};
pub use regressogram::{fit_regressogram, Cell, RegressogramModel, DEFAULT_BINS};
