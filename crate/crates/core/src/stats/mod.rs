//! Hypothesis tests and regressions over scored headlines and returns.

pub mod capm;
pub mod classify;
pub mod marketcap;
pub mod panel;
pub mod report;
pub mod special;
pub mod ttest;

use serde::{Deserialize, Serialize};

pub use capm::{beta_difference_test, capm_regression, BetaDifference, CapmResult};
pub use classify::{
    categorize, classification_table, classify_observation, Category, ClassificationCell, ClassificationObservation,
    ClassificationTable,
};
pub use marketcap::{market_cap_comparison, CapCategory, CapObservation, CategoryStats, MarketCapComparison};
pub use panel::{panel_fe_regression, stacked_sur, PanelObservation, ScoreColumn, SurResult};
pub use ttest::{independent_t_test, paired_t_test, IndependentTTest, PairedTTest};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("series lengths differ: {0} vs {1}")]
    Alignment(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    SampleSize { needed: usize, got: usize },
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("no observations to tabulate")]
    EmptyTable,
    #[error("rank deficient: {0}")]
    Rank(String),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub clustering: String,
}

/// Significance marker: `***` below 0.01, `**` below 0.05, `*` below 0.10.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}
