//! Two-way fixed-effects regressions with two-way clustered covariance, and the
//! stacked original-vs-replaced system with its Wald test.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::special::{chi_squared_sf, student_t_two_sided};
use super::{RegressionResult, StatsError};

/// Convergence tolerance of the alternating demeaning, relative to the
/// column's scale.
pub const DEMEAN_TOL: f64 = 1e-10;
const DEMEAN_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub firm: String,
    pub period: String,
    /// Return of the period the scores trade, in bp.
    pub return_bp: f64,
    pub x_orig: f64,
    pub x_rep: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreColumn {
    Original,
    Replaced,
}

impl ScoreColumn {
    fn pick(self, o: &PanelObservation) -> f64 {
        match self {
            ScoreColumn::Original => o.x_orig,
            ScoreColumn::Replaced => o.x_rep,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScoreColumn::Original => "orig_score",
            ScoreColumn::Replaced => "rep_score",
        }
    }
}

/// Dense firm and period indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelIndex {
    pub firm: Vec<usize>,
    pub time: Vec<usize>,
    pub n_firms: usize,
    pub n_times: usize,
}

impl PanelIndex {
    pub fn new(panel: &[PanelObservation]) -> Self {
        let remap = |keys: Vec<&str>| {
            let ids: BTreeMap<&str, usize> = keys.iter().map(|k| (*k, 0)).collect();
            let ids: BTreeMap<&str, usize> = ids.keys().enumerate().map(|(i, k)| (*k, i)).collect();
            let dense: Vec<usize> = keys.iter().map(|k| ids[k]).collect();
            (dense, ids.len())
        };
        let (firm, n_firms) = remap(panel.iter().map(|o| o.firm.as_str()).collect());
        let (time, n_times) = remap(panel.iter().map(|o| o.period.as_str()).collect());
        Self {
            firm,
            time,
            n_firms,
            n_times,
        }
    }
}

/// Subtracts group means alternately over two groupings until the largest
/// removed mean is below `tol` times the column scale.
pub fn demean_two_way(v: &mut [f64], g1: &[usize], n1: usize, g2: &[usize], n2: usize, tol: f64) -> usize {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut count1 = vec![0usize; n1];
    let mut count2 = vec![0usize; n2];
    for (&a, &b) in g1.iter().zip(g2) {
        count1[a] += 1;
        count2[b] += 1;
    }
    let mut sums1 = vec![0.0; n1];
    let mut sums2 = vec![0.0; n2];
    for sweep in 1..=DEMEAN_MAX_SWEEPS {
        let mut moved = 0.0f64;
        for (g, counts, sums) in [(g1, &count1, &mut sums1), (g2, &count2, &mut sums2)] {
            sums.iter_mut().for_each(|s| *s = 0.0);
            for (x, &k) in v.iter().zip(g) {
                sums[k] += x;
            }
            for (s, &c) in sums.iter_mut().zip(counts.iter()) {
                if c > 0 {
                    *s /= c as f64;
                    moved = moved.max(s.abs());
                }
            }
            for (x, &k) in v.iter_mut().zip(g) {
                *x -= sums[k];
            }
        }
        if moved <= tol * scale {
            return sweep;
        }
    }
    log::warn!("two-way demeaning did not converge in {DEMEAN_MAX_SWEEPS} sweeps");
    DEMEAN_MAX_SWEEPS
}

/// One-way cluster sandwiches and their inclusion-exclusion combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterComponents {
    pub firm: DMatrix<f64>,
    pub time: DMatrix<f64>,
    pub intersection: DMatrix<f64>,
    /// `firm + time - intersection` before flooring.
    pub combined: DMatrix<f64>,
    /// `combined` with negative eigenvalues set to 0.
    pub floored: DMatrix<f64>,
    pub n_firm_clusters: usize,
    pub n_time_clusters: usize,
}

/// `G/(G-1) * (N-1)/(N-K) * B (sum_g s_g s_g') B` with `s_g` the summed
/// score `x_i e_i` of cluster `g`.
pub fn cluster_sandwich(
    x: &DMatrix<f64>,
    e: &[f64],
    clusters: &[usize],
    bread: &DMatrix<f64>,
) -> (DMatrix<f64>, usize) {
    let (n, k) = x.shape();
    let mut scores: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for i in 0..n {
        let s = scores.entry(clusters[i]).or_insert_with(|| DVector::zeros(k));
        for j in 0..k {
            s[j] += x[(i, j)] * e[i];
        }
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in scores.values() {
        meat += s * s.transpose();
    }
    let g = scores.len();
    let c = if g > 1 && n > k {
        g as f64 / (g - 1) as f64 * (n - 1) as f64 / (n - k) as f64
    } else {
        1.0
    };
    (bread * meat * bread * c, g)
}

pub fn floor_eigenvalues(v: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (v + v.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

pub fn two_way_cluster(
    x: &DMatrix<f64>,
    e: &[f64],
    firm: &[usize],
    time: &[usize],
    n_times: usize,
    bread: &DMatrix<f64>,
) -> ClusterComponents {
    let pair: Vec<usize> = firm.iter().zip(time).map(|(f, t)| f * n_times + t).collect();
    let (vf, gf) = cluster_sandwich(x, e, firm, bread);
    let (vt, gt) = cluster_sandwich(x, e, time, bread);
    let (vi, _) = cluster_sandwich(x, e, &pair, bread);
    let combined = &vf + &vt - &vi;
    ClusterComponents {
        floored: floor_eigenvalues(&combined),
        firm: vf,
        time: vt,
        intersection: vi,
        combined,
        n_firm_clusters: gf,
        n_time_clusters: gt,
    }
}

/// Everything a fixed-effects fit produced, for reporting and for checks.
#[derive(Debug, Clone)]
pub struct FeFit {
    pub beta: Vec<f64>,
    /// Demeaned regressors, one column per coefficient.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub residuals: Vec<f64>,
    pub clusters: ClusterComponents,
    pub r_squared_within: f64,
}

/// Least squares of `y` on the columns of `x` with fixed effects for the
/// groupings `fe1` and `fe2`, clustered by `firm` and `time`.
#[allow(clippy::too_many_arguments)]
fn fe_fit(
    y: &[f64],
    columns: &[Vec<f64>],
    fe1: &[usize],
    n1: usize,
    fe2: &[usize],
    n2: usize,
    firm: &[usize],
    time: &[usize],
    n_times: usize,
) -> Result<FeFit, StatsError> {
    let n = y.len();
    let k = columns.len();
    let mut yt = y.to_vec();
    demean_two_way(&mut yt, fe1, n1, fe2, n2, DEMEAN_TOL);
    let mut x = DMatrix::zeros(n, k);
    for (j, col) in columns.iter().enumerate() {
        let raw_ss: f64 = col.iter().map(|v| v * v).sum();
        let mut c = col.clone();
        demean_two_way(&mut c, fe1, n1, fe2, n2, DEMEAN_TOL);
        let ss: f64 = c.iter().map(|v| v * v).sum();
        if raw_ss == 0.0 || ss <= 1e-12 * raw_ss {
            return Err(StatsError::Rank(format!(
                "regressor {j} has no variation after absorbing fixed effects"
            )));
        }
        for i in 0..n {
            x[(i, j)] = c[i];
        }
    }
    let xtx = x.transpose() * &x;
    let bread = xtx
        .clone()
        .try_inverse()
        .ok_or_else(|| StatsError::Rank("regressors are collinear after absorbing fixed effects".into()))?;
    let beta = &bread * (x.transpose() * DVector::from_column_slice(&yt));
    let fitted = &x * &beta;
    let residuals: Vec<f64> = yt.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let sst: f64 = yt.iter().map(|v| v * v).sum();
    let clusters = two_way_cluster(&x, &residuals, firm, time, n_times, &bread);
    Ok(FeFit {
        beta: beta.iter().copied().collect(),
        x,
        y: yt,
        residuals,
        clusters,
        r_squared_within: if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 },
    })
}

fn check_panel(panel: &[PanelObservation], idx: &PanelIndex) -> Result<(), StatsError> {
    if idx.n_firms < 2 || idx.n_times < 2 {
        return Err(StatsError::SampleSize {
            needed: 2,
            got: idx.n_firms.min(idx.n_times),
        });
    }
    if panel
        .iter()
        .any(|o| !o.return_bp.is_finite() || !o.x_orig.is_finite() || !o.x_rep.is_finite())
    {
        return Err(StatsError::Input("panel contains a non-finite value".into()));
    }
    Ok(())
}

fn result_from(fit: &FeFit, labels: Vec<String>, n_obs: usize) -> RegressionResult {
    let v = &fit.clusters.floored;
    let k = fit.beta.len();
    let df = (fit.clusters.n_firm_clusters.min(fit.clusters.n_time_clusters) as f64 - 1.0).max(1.0);
    let se: Vec<f64> = (0..k).map(|j| v[(j, j)].max(0.0).sqrt()).collect();
    let t: Vec<f64> = fit.beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    RegressionResult {
        labels,
        coefficients: fit.beta.clone(),
        covariance: (0..k).map(|i| (0..k).map(|j| v[(i, j)]).collect()).collect(),
        p_values: t.iter().map(|t| student_t_two_sided(*t, df)).collect(),
        std_errors: se,
        t_stats: t,
        r_squared: fit.r_squared_within,
        n_obs,
        clustering: format!(
            "two-way: firm ({}) x time ({})",
            fit.clusters.n_firm_clusters, fit.clusters.n_time_clusters
        ),
    }
}

/// `r = a_firm + b_time + beta * x + e` with two-way clustered covariance.
pub fn panel_fe_fit(panel: &[PanelObservation], column: ScoreColumn) -> Result<FeFit, StatsError> {
    let idx = PanelIndex::new(panel);
    check_panel(panel, &idx)?;
    let y: Vec<f64> = panel.iter().map(|o| o.return_bp).collect();
    let x: Vec<f64> = panel.iter().map(|o| column.pick(o)).collect();
    fe_fit(
        &y,
        &[x],
        &idx.firm,
        idx.n_firms,
        &idx.time,
        idx.n_times,
        &idx.firm,
        &idx.time,
        idx.n_times,
    )
}

pub fn panel_fe_regression(panel: &[PanelObservation], column: ScoreColumn) -> Result<RegressionResult, StatsError> {
    let fit = panel_fe_fit(panel, column)?;
    Ok(result_from(&fit, vec![column.label().to_string()], panel.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurResult {
    /// Coefficients `[orig_score, rep_score]` with their joint covariance.
    pub regression: RegressionResult,
    pub wald: f64,
    pub p: f64,
}

impl SurResult {
    pub fn beta_orig(&self) -> f64 {
        self.regression.coefficients[0]
    }

    pub fn beta_rep(&self) -> f64 {
        self.regression.coefficients[1]
    }
}

/// The return stacked on itself with block-diagonal scores and
/// equation-specific firm and time effects. Clusters span both copies of an
/// observation, so the covariance of the two coefficients is estimated.
pub fn stacked_sur_fit(panel: &[PanelObservation]) -> Result<FeFit, StatsError> {
    let idx = PanelIndex::new(panel);
    check_panel(panel, &idx)?;
    let n = panel.len();
    let mut y = Vec::with_capacity(2 * n);
    let mut x1 = vec![0.0; 2 * n];
    let mut x2 = vec![0.0; 2 * n];
    let (mut fe_firm, mut fe_time, mut firm, mut time) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for eq in 0..2 {
        for (i, o) in panel.iter().enumerate() {
            y.push(o.return_bp);
            if eq == 0 {
                x1[i] = o.x_orig;
            } else {
                x2[n + i] = o.x_rep;
            }
            fe_firm.push(eq * idx.n_firms + idx.firm[i]);
            fe_time.push(eq * idx.n_times + idx.time[i]);
            firm.push(idx.firm[i]);
            time.push(idx.time[i]);
        }
    }
    fe_fit(
        &y,
        &[x1, x2],
        &fe_firm,
        2 * idx.n_firms,
        &fe_time,
        2 * idx.n_times,
        &firm,
        &time,
        idx.n_times,
    )
}

/// Wald statistic for `beta_1 = beta_2` from a 2x2 covariance.
pub fn wald_equal(b1: f64, b2: f64, v: [[f64; 2]; 2]) -> Result<(f64, f64), StatsError> {
    let d = b1 - b2;
    if d == 0.0 {
        return Ok((0.0, 1.0));
    }
    let var = v[0][0] + v[1][1] - 2.0 * v[0][1];
    if var <= 0.0 || !var.is_finite() {
        return Err(StatsError::Rank(
            "variance of the coefficient difference is not positive".into(),
        ));
    }
    let w = d * d / var;
    Ok((w, chi_squared_sf(w, 1.0)))
}

pub fn stacked_sur(panel: &[PanelObservation]) -> Result<SurResult, StatsError> {
    let fit = stacked_sur_fit(panel)?;
    let regression = result_from(
        &fit,
        vec![
            ScoreColumn::Original.label().into(),
            ScoreColumn::Replaced.label().into(),
        ],
        2 * panel.len(),
    );
    let c = &regression.covariance;
    let (wald, p) = wald_equal(
        regression.coefficients[0],
        regression.coefficients[1],
        [[c[0][0], c[0][1]], [c[1][0], c[1][1]]],
    )?;
    Ok(SurResult { regression, wald, p })
}
