//! Logistic calibration and agreement metrics against listener scores.

mod aggregate;
mod fit;
mod logistic;
mod metrics;

pub use aggregate::{evaluate, group_aggregate, EvalReport, GroupStats, Grouping, PredictionRecord};
pub use fit::{fit_logistic, fit_mse, FitResult, FIT_A_RANGE};
pub use logistic::{logistic, LogisticParams};
pub use metrics::{kendall_tau, kendall_tau_variant, ncc, order_free_sum, rmse, KendallVariant};
