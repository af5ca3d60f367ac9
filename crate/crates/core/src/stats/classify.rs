use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::scorer::Score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Correct,
    Zero,
    Incorrect,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Correct, Category::Zero, Category::Incorrect];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Correct => "correct",
            Category::Zero => "zero",
            Category::Incorrect => "incorrect",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// A nonzero score is correct when its sign matches the return's sign; a
/// zero return matches neither.
pub fn categorize(score: Score, realized_return_bp: f64) -> Category {
    match score {
        Score::Neutral => Category::Zero,
        s if s.as_f64() * realized_return_bp > 0.0 => Category::Correct,
        _ => Category::Incorrect,
    }
}

pub fn classify_observation(orig: Score, rep: Score, realized_return_bp: f64) -> (Category, Category) {
    (
        categorize(orig, realized_return_bp),
        categorize(rep, realized_return_bp),
    )
}

/// One headline with both scores and the return of the period it trades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationObservation {
    pub orig: Score,
    pub rep: Score,
    pub return_bp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationCell {
    pub orig_category: Category,
    pub rep_category: Category,
    pub count: usize,
    /// Mean of `orig_score * return` over the cell.
    pub orig_ret_bp: f64,
    pub rep_ret_bp: f64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTable {
    /// Row-major over (orig, rep) in `Category::ALL` order.
    pub cells: Vec<ClassificationCell>,
    pub n: usize,
}

impl ClassificationTable {
    pub fn cell(&self, orig: Category, rep: Category) -> &ClassificationCell {
        &self.cells[orig.index() * 3 + rep.index()]
    }
}

pub fn classification_table(observations: &[ClassificationObservation]) -> Result<ClassificationTable, StatsError> {
    if observations.is_empty() {
        return Err(StatsError::EmptyTable);
    }
    let mut count = [0usize; 9];
    let mut orig_sum = [0.0f64; 9];
    let mut rep_sum = [0.0f64; 9];
    for o in observations {
        let (a, b) = classify_observation(o.orig, o.rep, o.return_bp);
        let k = a.index() * 3 + b.index();
        count[k] += 1;
        orig_sum[k] += o.orig.as_f64() * o.return_bp;
        rep_sum[k] += o.rep.as_f64() * o.return_bp;
    }
    let n = observations.len();
    let mut cells = Vec::with_capacity(9);
    for a in Category::ALL {
        for b in Category::ALL {
            let k = a.index() * 3 + b.index();
            let mean = |s: f64| if count[k] == 0 { 0.0 } else { s / count[k] as f64 };
            cells.push(ClassificationCell {
                orig_category: a,
                rep_category: b,
                count: count[k],
                // A zero score never trades, so its return is exactly 0.
                orig_ret_bp: if a == Category::Zero { 0.0 } else { mean(orig_sum[k]) },
                rep_ret_bp: if b == Category::Zero { 0.0 } else { mean(rep_sum[k]) },
                proportion: count[k] as f64 / n as f64,
            });
        }
    }
    Ok(ClassificationTable { cells, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn rule_examples() {
        use Score::*;
        assert_eq!(
            classify_observation(Positive, Neutral, 50.0),
            (Category::Correct, Category::Zero)
        );
        assert_eq!(
            classify_observation(Negative, Negative, 10.0),
            (Category::Incorrect, Category::Incorrect)
        );
        assert_eq!(
            classify_observation(Neutral, Neutral, -3.0),
            (Category::Zero, Category::Zero)
        );
        assert_eq!(
            classify_observation(Positive, Negative, 0.0),
            (Category::Incorrect, Category::Incorrect)
        );
        assert_eq!(
            classify_observation(Negative, Positive, -7.0),
            (Category::Correct, Category::Incorrect)
        );
    }

    #[test]
    fn single_cell_and_empty() {
        let obs = vec![
            ClassificationObservation {
                orig: Score::Positive,
                rep: Score::Positive,
                return_bp: 12.0,
            };
            5
        ];
        let t = classification_table(&obs).unwrap();
        assert_eq!(t.cell(Category::Correct, Category::Correct).proportion, 1.0);
        assert_eq!(t.cells.iter().filter(|c| c.proportion == 0.0).count(), 8);
        assert!(matches!(classification_table(&[]), Err(StatsError::EmptyTable)));
    }

    #[test]
    fn groupby_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let scores = [Score::Negative, Score::Neutral, Score::Positive];
        let obs: Vec<ClassificationObservation> = (0..1000)
            .map(|_| ClassificationObservation {
                orig: scores[rng.random_range(0..3)],
                rep: scores[rng.random_range(0..3)],
                return_bp: if rng.random_bool(0.05) {
                    0.0
                } else {
                    rng.random_range(-300.0..300.0)
                },
            })
            .collect();
        let t = classification_table(&obs).unwrap();
        let mut groups: HashMap<(String, String), Vec<&ClassificationObservation>> = HashMap::new();
        for o in &obs {
            let cat = |s: Score| match (s.as_i8(), o.return_bp) {
                (0, _) => "zero",
                (1, r) if r > 0.0 => "correct",
                (-1, r) if r < 0.0 => "correct",
                _ => "incorrect",
            };
            groups
                .entry((cat(o.orig).into(), cat(o.rep).into()))
                .or_default()
                .push(o);
        }
        let total: f64 = t.cells.iter().map(|c| c.proportion).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for c in &t.cells {
            let g = groups
                .get(&(
                    c.orig_category.as_str().to_string(),
                    c.rep_category.as_str().to_string(),
                ))
                .cloned()
                .unwrap_or_default();
            assert_eq!(c.count, g.len());
            if !g.is_empty() {
                let m = g.iter().map(|o| o.orig.as_i8() as f64 * o.return_bp).sum::<f64>() / g.len() as f64;
                let r = g.iter().map(|o| o.rep.as_i8() as f64 * o.return_bp).sum::<f64>() / g.len() as f64;
                assert!((c.orig_ret_bp - m).abs() < 1e-9);
                assert!((c.rep_ret_bp - r).abs() < 1e-9);
            }
            if c.orig_category == Category::Zero {
                assert_eq!(c.orig_ret_bp.to_bits(), 0.0f64.to_bits());
            }
        }
    }
}
