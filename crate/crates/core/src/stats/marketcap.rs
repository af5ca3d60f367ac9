use serde::{Deserialize, Serialize};

use super::ttest::{independent_t_test, mean, sample_sd, IndependentTTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapCategory {
    Long,
    Short,
    Other,
}

impl CapCategory {
    pub const ALL: [CapCategory; 3] = [CapCategory::Long, CapCategory::Short, CapCategory::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            CapCategory::Long => "long",
            CapCategory::Short => "short",
            CapCategory::Other => "other",
        }
    }

    /// Category implied by a signal value.
    pub fn from_signal(value: f64) -> Self {
        if value > 0.0 {
            CapCategory::Long
        } else if value < 0.0 {
            CapCategory::Short
        } else {
            CapCategory::Other
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapObservation {
    pub category: CapCategory,
    /// Billions of USD.
    pub cap_busd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: CapCategory,
    /// `None` for an empty category.
    pub mean: Option<f64>,
    /// `None` below two observations.
    pub sd: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketCapComparison {
    pub categories: Vec<CategoryStats>,
    /// `long - other`, Welch.
    pub long_vs_other: Option<IndependentTTest>,
    pub short_vs_other: Option<IndependentTTest>,
    /// Why a test was skipped.
    pub notices: Vec<String>,
}

impl MarketCapComparison {
    pub fn stats(&self, c: CapCategory) -> &CategoryStats {
        self.categories
            .iter()
            .find(|s| s.category == c)
            .expect("all categories present")
    }
}

pub fn market_cap_comparison(observations: &[CapObservation]) -> MarketCapComparison {
    let group = |c: CapCategory| -> Vec<f64> {
        observations
            .iter()
            .filter(|o| o.category == c)
            .map(|o| o.cap_busd)
            .collect()
    };
    let groups: Vec<(CapCategory, Vec<f64>)> = CapCategory::ALL.iter().map(|c| (*c, group(*c))).collect();
    let categories = groups
        .iter()
        .map(|(c, v)| CategoryStats {
            category: *c,
            mean: (!v.is_empty()).then(|| mean(v)),
            sd: (v.len() >= 2).then(|| sample_sd(v)),
            n: v.len(),
        })
        .collect();
    let mut notices = Vec::new();
    let other = &groups[2].1;
    let mut test = |c: CapCategory, v: &[f64]| match independent_t_test(v, other, true) {
        Ok(t) => Some(t),
        Err(e) => {
            notices.push(format!("{} - other skipped: {e}", c.as_str()));
            None
        }
    };
    let long_vs_other = test(CapCategory::Long, &groups[0].1);
    let short_vs_other = test(CapCategory::Short, &groups[1].1);
    MarketCapComparison {
        categories,
        long_vs_other,
        short_vs_other,
        notices,
    }
}
