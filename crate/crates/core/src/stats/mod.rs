//! Estimators built on replicate records and solver output.

mod cluster;
mod laplace;
mod lawfit;
mod localisation;
mod martingale;
mod regression;

pub use cluster::{cluster_decomposition, Cluster, ClusterSummary};
pub use laplace::{laplace_functional, laplace_functional_pde, laplace_y_fit, LaplaceCurve, StepFunction};
pub use lawfit::{default_y_grid, lalley_sellke_fit, lalley_sellke_fit_on, sample_model_law, LawFit, ZMixture};
pub use localisation::{localisation_histogram, offset_in_window, LocalisationHistogram};
pub use martingale::{
    derivative_martingale, derivative_martingale_scaled, martingale_samples, mckean_martingale,
    order_free_sum, MartingaleSample,
};
pub use regression::{
    leading_term, log_coefficient_regression, log_coefficient_trend, moves_toward, LogFit, MIN_HORIZONS,
};
