use serde::{Deserialize, Serialize};

use super::special::{normal_sf, student_t_two_sided};
use super::ttest::mean;
use super::{RegressionResult, StatsError};

/// `r_p - r_f = alpha + beta (r_m - r_f) + e` by OLS, conventional errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapmResult {
    /// Per-period intercept, in the units of the inputs.
    pub alpha: f64,
    pub beta: f64,
    pub se_alpha: f64,
    pub se_beta: f64,
    pub cov_alpha_beta: f64,
    pub t_alpha: f64,
    pub t_beta: f64,
    pub p_alpha: f64,
    pub p_beta: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn capm_regression(portfolio_excess: &[f64], market_excess: &[f64]) -> Result<CapmResult, StatsError> {
    if portfolio_excess.len() != market_excess.len() {
        return Err(StatsError::Alignment(portfolio_excess.len(), market_excess.len()));
    }
    let n = portfolio_excess.len();
    if n < 3 {
        return Err(StatsError::SampleSize { needed: 3, got: n });
    }
    if portfolio_excess.iter().chain(market_excess).any(|v| !v.is_finite()) {
        return Err(StatsError::Input("non-finite return".into()));
    }
    let (my, mx) = (mean(portfolio_excess), mean(market_excess));
    let sxx: f64 = market_excess.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Rank("market excess return is constant".into()));
    }
    let sxy: f64 = market_excess
        .iter()
        .zip(portfolio_excess)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let ssr: f64 = market_excess
        .iter()
        .zip(portfolio_excess)
        .map(|(x, y)| (y - alpha - beta * x).powi(2))
        .sum();
    let sst: f64 = portfolio_excess.iter().map(|y| (y - my).powi(2)).sum();
    let df = (n - 2) as f64;
    let s2 = ssr / df;
    let se_beta = (s2 / sxx).sqrt();
    let se_alpha = (s2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt();
    let ratio = |b: f64, se: f64| if b == 0.0 { 0.0 } else { b / se };
    let (t_alpha, t_beta) = (ratio(alpha, se_alpha), ratio(beta, se_beta));
    Ok(CapmResult {
        alpha,
        beta,
        se_alpha,
        se_beta,
        cov_alpha_beta: -mx * s2 / sxx,
        t_alpha,
        t_beta,
        p_alpha: student_t_two_sided(t_alpha, df),
        p_beta: student_t_two_sided(t_beta, df),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 },
        n,
    })
}

impl CapmResult {
    pub fn to_regression(&self) -> RegressionResult {
        let c = |v: f64| v * v;
        RegressionResult {
            labels: vec!["const".into(), "rm_minus_rf".into()],
            coefficients: vec![self.alpha, self.beta],
            covariance: vec![
                vec![c(self.se_alpha), self.cov_alpha_beta],
                vec![self.cov_alpha_beta, c(self.se_beta)],
            ],
            std_errors: vec![self.se_alpha, self.se_beta],
            t_stats: vec![self.t_alpha, self.t_beta],
            p_values: vec![self.p_alpha, self.p_beta],
            r_squared: self.r_squared,
            n_obs: self.n,
            clustering: "none".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaDifference {
    pub diff: f64,
    pub se: f64,
    pub z: f64,
    /// One-sided `P(Z > z)`.
    pub p: f64,
}

/// Normal test on `|beta_1 - beta_2|` for independently estimated betas.
pub fn beta_difference_test(beta_1: f64, se_1: f64, beta_2: f64, se_2: f64) -> Result<BetaDifference, StatsError> {
    if !(se_1 > 0.0 && se_2 > 0.0) {
        return Err(StatsError::Input("standard errors must be positive".into()));
    }
    let se = (se_1 * se_1 + se_2 * se_2).sqrt();
    let diff = (beta_1 - beta_2).abs();
    let z = diff / se;
    Ok(BetaDifference {
        diff,
        se,
        z,
        p: normal_sf(z),
    })
}
