//! Cross-validated links between EEG features and performance measures.

pub mod behavior;
pub mod dataset;
pub mod regression;
pub mod search;

pub use behavior::{behavioral_correlations, BehaviorCorrelations};
pub use dataset::{Dataset, Standardization};
pub use regression::{loocv_regress, ols_fit, permutation_pvalue, RegressionMetrics};
pub use search::{enumerate_subsets, mvpa_search, screen_features, MvpaConfig, MvpaReport};
