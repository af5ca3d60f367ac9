//! Synthetic markets and headlines with an oracle scorer whose look-ahead and
//! distraction strengths are known.
//!
//! Random stream order, all from one `ChaCha8Rng` seeded with `seed`:
//! 1. per firm: name syllables, name style, famous flag, prior sign, start
//!    price, market cap;
//! 2. per trading day, per firm in order: news draw, then for a news day the
//!    sentiment, return magnitude, direction draw, template, short-name draw,
//!    look-ahead draw and distraction draw, and for a quiet day the return;
//!    then the overnight gap.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{Datelike, NaiveDate, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::anonymizer::MatchConfig;
use crate::backtest::{EmptyDayConvention, Strategy};
use crate::corpus::{CompanyId, CompanyIdentity, Headline, ReturnPanel, StockDay, TradingCalendar};
use crate::pipeline::stages::{anonymize_headlines, backtest_window, build_signals, score_headlines};
use crate::pipeline::PipelineError;
use crate::scorer::{BackendError, RetryPolicy, Score, ScoringBackend};
use crate::stats::{paired_t_test, PairedTTest, StatsError};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// What distraction replaces a famous firm's score with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirmPrior {
    /// A fixed +1 or -1 per firm, unrelated to its returns.
    #[default]
    Misleading,
    /// Always 0.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_firms: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Chance the original-prompt score is the sign of the realized return.
    pub lookahead_strength: f64,
    /// Chance a famous firm's original-prompt score is its prior.
    pub distraction_strength: f64,
    pub famous_fraction: f64,
    /// Chance a nonzero latent sentiment gets the next return's sign right.
    pub base_signal_accuracy: f64,
    pub return_vol_bp: f64,
    /// Chance a firm has a headline on a given day.
    pub news_rate: f64,
    pub neutral_fraction: f64,
    pub firm_prior: FirmPrior,
    /// First trading day; weekends are skipped.
    pub start_date: NaiveDate,
    /// Look-ahead only reaches headlines dated on or before this day; `None`
    /// means every headline.
    pub knowledge_cutoff: Option<NaiveDate>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_firms: 50,
            n_days: 60,
            seed: 7,
            lookahead_strength: 0.0,
            distraction_strength: 0.0,
            famous_fraction: 0.2,
            base_signal_accuracy: 0.6,
            return_vol_bp: 200.0,
            news_rate: 0.2,
            neutral_fraction: 0.2,
            firm_prior: FirmPrior::Misleading,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            knowledge_cutoff: None,
        }
    }
}

impl SynthConfig {
    /// Backend id of the oracle scorer for worlds built from this config.
    pub fn oracle_id(&self) -> String {
        let mut id = format!(
            "oracle:seed={}:lookahead={}:distraction={}:famous={}",
            self.seed, self.lookahead_strength, self.distraction_strength, self.famous_fraction
        );
        if let Some(cut) = self.knowledge_cutoff {
            id.push_str(&format!(":cutoff={cut}"));
        }
        id
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SynthError::Config(format!("{name} = {v} not in [0, 1]")))
            }
        };
        unit("lookahead_strength", self.lookahead_strength)?;
        unit("distraction_strength", self.distraction_strength)?;
        unit("famous_fraction", self.famous_fraction)?;
        unit("news_rate", self.news_rate)?;
        unit("neutral_fraction", self.neutral_fraction)?;
        if !(0.5..=1.0).contains(&self.base_signal_accuracy) {
            return Err(SynthError::Config(format!(
                "base_signal_accuracy = {} not in [0.5, 1]",
                self.base_signal_accuracy
            )));
        }
        if !(self.return_vol_bp > 0.0 && self.return_vol_bp.is_finite()) {
            return Err(SynthError::Config("return_vol_bp must be positive".into()));
        }
        if self.n_firms < 2 || self.n_days < 2 {
            return Err(SynthError::Config("n_firms and n_days must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFirm {
    pub identity: CompanyIdentity,
    pub famous: bool,
    pub prior: Score,
}

/// Hidden facts about one headline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineTruth {
    pub headline_id: String,
    pub date: NaiveDate,
    pub firm: usize,
    pub sentiment: Score,
    /// Open-to-close return of the session the headline trades.
    pub return_bp: f64,
    pub u_lookahead: f64,
    pub u_distraction: f64,
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub config: SynthConfig,
    pub calendar: TradingCalendar,
    pub firms: Vec<SynthFirm>,
    pub prices: Vec<StockDay>,
    pub headlines: Vec<Headline>,
    pub truth: Vec<HeadlineTruth>,
}

const ONSETS: [&str; 16] = [
    "b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "qu",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const ENDINGS: [&str; 8] = ["x", "n", "r", "l", "s", "m", "th", "ck"];
const SECOND_WORDS: [&str; 12] = [
    "Dynamics",
    "Systems",
    "Therapeutics",
    "Motors",
    "Foods",
    "Energy",
    "Networks",
    "Robotics",
    "Logistics",
    "Pharma",
    "Semiconductor",
    "Media",
];
const SUFFIXES: [&str; 4] = ["Inc.", "Corp.", "Holdings", "Ltd."];

const POSITIVE: [&str; 6] = [
    "{} shares surge after earnings beat",
    "{} raises full-year outlook",
    "{} wins approval for new product line",
    "Analysts upgrade {} on strong growth",
    "{} posts record quarterly profit",
    "{} expands buyback program",
];
const NEGATIVE: [&str; 6] = [
    "{} shares slump after revenue miss",
    "{} cuts guidance amid weak demand",
    "{} hit with lawsuit over product recall",
    "Analysts downgrade {} citing losses",
    "{} warns of delayed shipments",
    "{} plunges as regulators open probe",
];
const NEUTRAL: [&str; 6] = [
    "{} to present at industry conference",
    "{} names new chief financial officer",
    "{} schedules quarterly results call",
    "{} files annual report",
    "{} relocates regional office",
    "{} announces board meeting date",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
    }
    w.push_str(ENDINGS[rng.random_range(0..ENDINGS.len())]);
    let mut c = w.chars();
    let first = c.next().expect("nonempty").to_ascii_uppercase();
    std::iter::once(first).chain(c).collect()
}

fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

fn sign(x: f64) -> Score {
    if x > 0.0 {
        Score::Positive
    } else if x < 0.0 {
        Score::Negative
    } else {
        Score::Neutral
    }
}

/// Deterministic in `config`.
pub fn generate_world(config: &SynthConfig) -> Result<SynthWorld, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let suffixes = MatchConfig::default().suffix_list;
    let mut firms = Vec::with_capacity(config.n_firms);
    let mut used = HashSet::new();
    let mut price = Vec::with_capacity(config.n_firms);
    let mut shares_bn = Vec::with_capacity(config.n_firms);
    for i in 0..config.n_firms {
        let mut word = pseudo_word(&mut rng);
        while !used.insert(word.to_lowercase()) {
            word = pseudo_word(&mut rng);
        }
        let style = rng.random_range(0..SECOND_WORDS.len() + 1);
        let suffix = SUFFIXES[rng.random_range(0..SUFFIXES.len())];
        let official = if style == SECOND_WORDS.len() {
            format!("{word} {suffix}")
        } else {
            format!("{word} {} {suffix}", SECOND_WORDS[style])
        };
        let famous = rng.random_bool(config.famous_fraction);
        let prior = match config.firm_prior {
            FirmPrior::Misleading if rng.random_bool(0.5) => Score::Positive,
            FirmPrior::Misleading => Score::Negative,
            FirmPrior::Neutral => {
                rng.random_bool(0.5);
                Score::Neutral
            }
        };
        let p0: f64 = rng.random_range(20.0..200.0);
        let cap: f64 = if famous {
            rng.random_range(50.0..500.0)
        } else {
            rng.random_range(0.5..20.0)
        };
        price.push(p0);
        shares_bn.push(cap / p0);
        let identity = CompanyIdentity::new(format!("C{i:04}"), &official, Vec::new(), &suffixes)
            .map_err(|e| SynthError::Config(e.to_string()))?;
        firms.push(SynthFirm {
            identity,
            famous,
            prior,
        });
    }

    let dates = trading_days(config.start_date, config.n_days);
    let vol = Normal::new(0.0, config.return_vol_bp).expect("positive sd");
    let gap = Normal::new(0.0, config.return_vol_bp / 4.0).expect("positive sd");
    let max_move = 5_000.0;
    let premarket = NaiveTime::from_hms_opt(5, 30, 0).expect("valid time");
    let mut prices = Vec::with_capacity(config.n_firms * config.n_days);
    let mut headlines = Vec::new();
    let mut truth = Vec::new();
    let mut close = price.clone();
    for &d in &dates {
        for (i, firm) in firms.iter().enumerate() {
            let r = if rng.random_bool(config.news_rate) {
                let u: f64 = rng.random();
                let sentiment = if u < config.neutral_fraction {
                    Score::Neutral
                } else if rng.random_bool(0.5) {
                    Score::Positive
                } else {
                    Score::Negative
                };
                let magnitude = vol.sample(&mut rng).abs().min(max_move).max(1.0);
                let hit = rng.random_bool(config.base_signal_accuracy);
                let direction = match sentiment {
                    Score::Neutral => {
                        if hit {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    s => s.as_f64() * if hit { 1.0 } else { -1.0 },
                };
                let r = direction * magnitude;
                let templates = match sentiment {
                    Score::Positive => &POSITIVE,
                    Score::Negative => &NEGATIVE,
                    Score::Neutral => &NEUTRAL,
                };
                let template = templates[rng.random_range(0..templates.len())];
                let name = &firm.identity.cleaned_name;
                let short = rng.random_bool(0.3);
                let shown = if short {
                    name.split_whitespace().next().unwrap_or(name)
                } else {
                    name.as_str()
                };
                let id = format!("S{:07}", headlines.len());
                let text = format!("{} (ref {id})", template.replace("{}", shown));
                let u_lookahead: f64 = rng.random();
                let u_distraction: f64 = rng.random();
                headlines.push(Headline {
                    headline_id: id.clone(),
                    company_id: firm.identity.company_id.clone(),
                    text,
                    timestamp: d.and_time(premarket),
                });
                truth.push(HeadlineTruth {
                    headline_id: id,
                    date: d,
                    firm: i,
                    sentiment,
                    return_bp: r,
                    u_lookahead,
                    u_distraction,
                });
                r
            } else {
                vol.sample(&mut rng).clamp(-max_move, max_move)
            };
            let g = gap.sample(&mut rng).clamp(-max_move, max_move);
            let open = close[i] * (1.0 + g / 10_000.0);
            let c = open * (1.0 + r / 10_000.0);
            close[i] = c;
            prices.push(StockDay {
                company_id: firm.identity.company_id.clone(),
                date: d,
                open_price: open,
                close_price: c,
                market_cap: shares_bn[i] * c,
            });
        }
    }
    Ok(SynthWorld {
        config: config.clone(),
        calendar: TradingCalendar::new(dates),
        firms,
        prices,
        headlines,
        truth,
    })
}

impl SynthWorld {
    pub fn identities(&self) -> BTreeMap<CompanyId, CompanyIdentity> {
        self.firms
            .iter()
            .map(|f| (f.identity.company_id.clone(), f.identity.clone()))
            .collect()
    }

    pub fn panel(&self) -> ReturnPanel {
        ReturnPanel::from_stock_days(&self.prices, &self.calendar)
    }

    /// Score the oracle gives a headline; `names_company` selects the original view.
    pub fn oracle_score(&self, t: &HeadlineTruth, names_company: bool) -> Score {
        if !names_company {
            return t.sentiment;
        }
        let c = &self.config;
        let firm = &self.firms[t.firm];
        let mut s = t.sentiment;
        if firm.famous && t.u_distraction < c.distraction_strength {
            s = firm.prior;
        }
        let knows_outcome = c.knowledge_cutoff.is_none_or(|cut| t.date <= cut);
        if knows_outcome && t.u_lookahead < c.lookahead_strength {
            s = sign(t.return_bp);
        }
        s
    }
}

/// Scoring backend that knows every headline's latent sentiment and, when
/// the prompt names the company, its realized return and the firm prior.
pub struct OracleBackend<'w> {
    world: &'w SynthWorld,
    id: String,
    by_ref: HashMap<String, usize>,
    replacement_token: String,
}

impl<'w> OracleBackend<'w> {
    pub fn new(world: &'w SynthWorld, replacement_token: &str) -> Self {
        Self {
            id: world.config.oracle_id(),
            by_ref: world
                .truth
                .iter()
                .enumerate()
                .map(|(i, t)| (t.headline_id.clone(), i))
                .collect(),
            world,
            replacement_token: replacement_token.to_string(),
        }
    }
}

fn contains_word(haystack: &str, needle: &str) -> bool {
    haystack.match_indices(needle).any(|(i, _)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + needle.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

impl ScoringBackend for OracleBackend<'_> {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let reference = prompt
            .split("(ref ")
            .nth(1)
            .and_then(|s| s.split(')').next())
            .ok_or_else(|| BackendError::Fatal("prompt carries no headline reference".into()))?;
        let t = self
            .by_ref
            .get(reference)
            .map(|&i| &self.world.truth[i])
            .ok_or_else(|| BackendError::Fatal(format!("unknown headline reference {reference}")))?;
        let identity = &self.world.firms[t.firm].identity;
        let lower = prompt.to_lowercase();
        let first = identity
            .cleaned_name
            .split_whitespace()
            .next()
            .unwrap_or("")
            .to_lowercase();
        let names_company =
            contains_word(&lower, &identity.cleaned_name.to_lowercase()) || contains_word(&lower, &first);
        if !names_company && !prompt.contains(&self.replacement_token) {
            return Err(BackendError::Fatal(format!(
                "prompt for {reference} names neither the company nor the replacement token"
            )));
        }
        Ok(match self.world.oracle_score(t, names_company) {
            Score::Positive => "YES\nThe headline points to higher prices.".into(),
            Score::Negative => "NO\nThe headline points to lower prices.".into(),
            Score::Neutral => "UNKNOWN\nNot enough information.".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasLabResult {
    pub long_short: PairedTTest,
    /// `mean(original) - mean(replaced)` of the daily long-short return, bp.
    pub gap_bp: f64,
    pub n_headlines: usize,
    pub modified_fraction: f64,
}

impl BiasLabResult {
    /// One-sided p for `original > replaced`.
    pub fn p_original_higher(&self) -> f64 {
        one_sided(self.long_short.t, self.long_short.p)
    }

    /// One-sided p for `replaced > original`.
    pub fn p_replaced_higher(&self) -> f64 {
        one_sided(-self.long_short.t, self.long_short.p)
    }
}

fn one_sided(t: f64, two_sided: f64) -> f64 {
    if t > 0.0 {
        two_sided / 2.0
    } else {
        1.0 - two_sided / 2.0
    }
}

/// Generates a world and runs anonymize, score, signal and backtest on it,
/// then compares original and replaced daily long-short returns.
pub fn run_bias_lab(config: &SynthConfig, match_config: &MatchConfig) -> Result<BiasLabResult, SynthError> {
    let world = generate_world(config)?;
    let identities = world.identities();
    let anonymized = anonymize_headlines(&world.headlines, &identities, &world.calendar, match_config)?;
    let backend = OracleBackend::new(&world, &match_config.replacement_token);
    let scores = score_headlines(
        &anonymized,
        &identities,
        &match_config.replacement_token,
        &backend,
        None,
        &RetryPolicy::immediate(1),
        1,
    )?;
    let signals = build_signals(&anonymized, &scores)?;
    let panel = world.panel();
    let (start, end) = world.calendar.bounds().expect("non-empty calendar");
    let bt = backtest_window(&world.calendar, start, end, &signals, &anonymized, &panel);
    let (_, a, b) = bt.paired(Strategy::LongShort, EmptyDayConvention::Zero);
    let long_short = paired_t_test(&a, &b)?;
    let modified = anonymized.iter().filter(|a| a.modified()).count();
    Ok(BiasLabResult {
        gap_bp: long_short.mean_a - long_short.mean_b,
        long_short,
        n_headlines: anonymized.len(),
        modified_fraction: modified as f64 / anonymized.len().max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_firms: 30,
            n_days: 40,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_world() {
        let a = generate_world(&small(3)).unwrap();
        let b = generate_world(&small(3)).unwrap();
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.headlines, b.headlines);
        let c = generate_world(&small(4)).unwrap();
        assert_ne!(a.headlines, c.headlines);
    }

    #[test]
    fn realized_returns_follow_truth() {
        let w = generate_world(&small(5)).unwrap();
        let panel = w.panel();
        for (h, t) in w.headlines.iter().zip(&w.truth) {
            let r = panel.open_to_close(&h.company_id, h.timestamp.date()).unwrap();
            assert!((r - t.return_bp).abs() < 1e-6 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn no_bias_means_identical_views() {
        let w = generate_world(&small(6)).unwrap();
        for t in &w.truth {
            assert_eq!(w.oracle_score(t, true), w.oracle_score(t, false));
        }
    }

    #[test]
    fn full_lookahead_matches_sign() {
        let cfg = SynthConfig {
            lookahead_strength: 1.0,
            ..small(8)
        };
        let w = generate_world(&cfg).unwrap();
        for t in &w.truth {
            assert_eq!(w.oracle_score(t, true), sign(t.return_bp));
        }
    }

    #[test]
    fn replaced_view_ignores_returns() {
        let cfg = SynthConfig {
            lookahead_strength: 0.7,
            distraction_strength: 0.5,
            ..small(9)
        };
        let mut w = generate_world(&cfg).unwrap();
        let before: Vec<(Score, Score)> = w
            .truth
            .iter()
            .map(|t| (w.oracle_score(t, false), w.oracle_score(t, true)))
            .collect();
        // Permute realized returns across headlines.
        let n = w.truth.len();
        let returns: Vec<f64> = (0..n).map(|i| w.truth[(i * 7 + 3) % n].return_bp).collect();
        for (t, r) in w.truth.iter_mut().zip(returns) {
            t.return_bp = r;
        }
        let after: Vec<(Score, Score)> = w
            .truth
            .iter()
            .map(|t| (w.oracle_score(t, false), w.oracle_score(t, true)))
            .collect();
        assert!(before.iter().zip(&after).all(|(a, b)| a.0 == b.0));
        assert!(before.iter().zip(&after).any(|(a, b)| a.1 != b.1));
    }

    #[test]
    fn oracle_reads_prompts() {
        let w = generate_world(&small(10)).unwrap();
        let b = OracleBackend::new(&w, "Blahblahblah");
        let h = &w.headlines[0];
        let p = crate::scorer::build_prompt(&crate::scorer::PromptSpec::new(
            "Blahblahblah",
            "Blahblahblah files annual report (ref S0000000)",
        ))
        .unwrap();
        assert!(b.complete(&p).is_ok());
        let p = crate::scorer::build_prompt(&crate::scorer::PromptSpec::new("Someone", "Quiet day (ref S0000000)"))
            .unwrap();
        assert!(matches!(b.complete(&p), Err(BackendError::Fatal(_))));
        let p = crate::scorer::build_prompt(&crate::scorer::PromptSpec::new("x", "no reference")).unwrap();
        assert!(b.complete(&p).is_err());
        assert_eq!(h.headline_id, "S0000000");
    }

    #[test]
    fn accurate_signal_earns_money() {
        let cfg = SynthConfig {
            base_signal_accuracy: 1.0,
            ..small(11)
        };
        let r = run_bias_lab(&cfg, &MatchConfig::default()).unwrap();
        assert!(r.long_short.mean_a > 0.0);
        assert_eq!(r.gap_bp, 0.0);
        assert!(r.modified_fraction > 0.99, "{}", r.modified_fraction);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SynthConfig {
            base_signal_accuracy: 0.4,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_world(&bad), Err(SynthError::Config(_))));
    }
}
