use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided;
use super::StatsError;

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub(crate) fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub n: usize,
}

/// Paired t-test on `a - b`; two-sided p with `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Alignment(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::SampleSize { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let md = mean(&d);
    let sd = sample_sd(&d);
    let t = if md == 0.0 {
        0.0
    } else if sd == 0.0 {
        return Err(StatsError::ZeroVariance(
            "paired differences are a nonzero constant".into(),
        ));
    } else {
        md / (sd / (n as f64).sqrt())
    };
    Ok(PairedTTest {
        t,
        p: student_t_two_sided(t, (n - 1) as f64),
        mean_a: mean(a),
        mean_b: mean(b),
        sd_a: sample_sd(a),
        sd_b: sample_sd(b),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependentTTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    /// `mean(a) - mean(b)`.
    pub diff: f64,
}

/// Two-sample t-test of `mean(a) - mean(b)`: Welch with Welch-Satterthwaite
/// degrees of freedom, or the pooled-variance test when `welch` is false.
pub fn independent_t_test(a: &[f64], b: &[f64], welch: bool) -> Result<IndependentTTest, StatsError> {
    for v in [a, b] {
        if v.len() < 2 {
            return Err(StatsError::SampleSize {
                needed: 2,
                got: v.len(),
            });
        }
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (v1, v2) = (sample_sd(a).powi(2), sample_sd(b).powi(2));
    let diff = mean(a) - mean(b);
    let (se, df) = if welch {
        let (q1, q2) = (v1 / n1, v2 / n2);
        let se2 = q1 + q2;
        let df = if se2 == 0.0 {
            n1 + n2 - 2.0
        } else {
            se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0))
        };
        (se2.sqrt(), df)
    } else {
        let df = n1 + n2 - 2.0;
        let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / df;
        ((pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), df)
    };
    let t = if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        return Err(StatsError::ZeroVariance(
            "both samples are constant with different means".into(),
        ));
    } else {
        diff / se
    };
    Ok(IndependentTTest {
        t,
        p: student_t_two_sided(t, df),
        df,
        diff,
    })
}
