//! In-memory stage functions. The file-based runner and the synthetic bias lab
//! both go through these.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::thread;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::anonymizer::{anonymize, MatchConfig};
use crate::backtest::{run_backtest, BacktestResult, CompanyPeriodSignal, Variant};
use crate::corpus::{
    aggregate_scores, assign_market_period, CompanyId, CompanyIdentity, Headline, MarketPeriod, TradingCalendar,
};
use crate::scorer::{score_batch, ResponseCache, RetryPolicy, ScoreRequest, ScoredHeadline, ScoringBackend};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizedHeadline {
    pub headline_id: String,
    pub company_id: CompanyId,
    pub timestamp: NaiveDateTime,
    pub period: MarketPeriod,
    pub original_text: String,
    pub replaced_text: String,
    pub n_spans: usize,
}

impl AnonymizedHeadline {
    pub fn modified(&self) -> bool {
        self.n_spans > 0
    }
}

fn anonymize_one(
    h: &Headline,
    identities: &BTreeMap<CompanyId, CompanyIdentity>,
    calendar: &TradingCalendar,
    config: &MatchConfig,
) -> Result<AnonymizedHeadline, PipelineError> {
    let identity = identities.get(&h.company_id).ok_or_else(|| {
        PipelineError::data(format!(
            "headline {} names unknown company {}",
            h.headline_id,
            h.company_id.as_str()
        ))
    })?;
    let period = assign_market_period(h.timestamp, calendar)
        .map_err(|e| PipelineError::data(format!("headline {}: {e}", h.headline_id)))?;
    let r = anonymize(&h.text, identity, config).map_err(|e| PipelineError::data(e.to_string()))?;
    Ok(AnonymizedHeadline {
        headline_id: h.headline_id.clone(),
        company_id: h.company_id.clone(),
        timestamp: h.timestamp,
        period,
        original_text: h.text.clone(),
        replaced_text: r.replaced_text,
        n_spans: r.spans.len(),
    })
}

/// Anonymizes every headline and assigns its market period. Output order
/// follows the input.
pub fn anonymize_headlines(
    headlines: &[Headline],
    identities: &BTreeMap<CompanyId, CompanyIdentity>,
    calendar: &TradingCalendar,
    config: &MatchConfig,
) -> Result<Vec<AnonymizedHeadline>, PipelineError> {
    config.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let workers = thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(16);
    if workers <= 1 || headlines.len() < 256 {
        return headlines
            .iter()
            .map(|h| anonymize_one(h, identities, calendar, config))
            .collect();
    }
    let chunk = headlines.len().div_ceil(workers);
    let parts: Vec<Result<Vec<AnonymizedHeadline>, PipelineError>> = thread::scope(|s| {
        let handles: Vec<_> = headlines
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|h| anonymize_one(h, identities, calendar, config))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("anonymizer worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(headlines.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Name shown to the model for the original variant.
pub fn display_name(identity: &CompanyIdentity) -> &str {
    &identity.cleaned_name
}

/// Scores both variants of every headline; the result holds the original
/// score then the replaced score for each headline in input order.
#[allow(clippy::too_many_arguments)]
pub fn score_headlines(
    anonymized: &[AnonymizedHeadline],
    identities: &BTreeMap<CompanyId, CompanyIdentity>,
    replacement_token: &str,
    backend: &dyn ScoringBackend,
    cache: Option<&ResponseCache>,
    retry: &RetryPolicy,
    max_in_flight: usize,
) -> Result<Vec<ScoredHeadline>, PipelineError> {
    let mut requests = Vec::with_capacity(2 * anonymized.len());
    for a in anonymized {
        let identity = identities
            .get(&a.company_id)
            .ok_or_else(|| PipelineError::data(format!("unknown company {}", a.company_id.as_str())))?;
        requests.push(ScoreRequest {
            headline_id: a.headline_id.clone(),
            variant: Variant::Original,
            company_display_name: display_name(identity).to_string(),
            text: a.original_text.clone(),
        });
        requests.push(ScoreRequest {
            headline_id: a.headline_id.clone(),
            variant: Variant::Replaced,
            company_display_name: replacement_token.to_string(),
            text: a.replaced_text.clone(),
        });
    }
    score_batch(&requests, backend, cache, retry, max_in_flight)
        .into_iter()
        .map(|r| r.map_err(PipelineError::from))
        .collect()
}

/// Mean score per (company, period, variant), in key order.
pub fn build_signals(
    anonymized: &[AnonymizedHeadline],
    scores: &[ScoredHeadline],
) -> Result<Vec<CompanyPeriodSignal>, PipelineError> {
    let by_id: HashMap<&str, &AnonymizedHeadline> = anonymized.iter().map(|a| (a.headline_id.as_str(), a)).collect();
    let mut groups: BTreeMap<(CompanyId, MarketPeriod, Variant), Vec<crate::scorer::Score>> = BTreeMap::new();
    for s in scores {
        let a = by_id
            .get(s.headline_id.as_str())
            .ok_or_else(|| PipelineError::data(format!("score for unknown headline {}", s.headline_id)))?;
        groups
            .entry((a.company_id.clone(), a.period, s.variant))
            .or_default()
            .push(s.score);
    }
    groups
        .iter()
        .map(|((c, p, v), scores)| aggregate_scores(c, *p, *v, scores).map_err(|e| PipelineError::data(e.to_string())))
        .collect()
}

/// Distinct (company, period) pairs with at least one headline.
pub fn news_periods(anonymized: &[AnonymizedHeadline]) -> Vec<(CompanyId, MarketPeriod)> {
    let set: BTreeSet<(CompanyId, MarketPeriod)> =
        anonymized.iter().map(|a| (a.company_id.clone(), a.period)).collect();
    set.into_iter().collect()
}

/// Backtest over the calendar dates in `[start, end]`.
pub fn backtest_window(
    calendar: &TradingCalendar,
    start: NaiveDate,
    end: NaiveDate,
    signals: &[CompanyPeriodSignal],
    anonymized: &[AnonymizedHeadline],
    panel: &crate::corpus::ReturnPanel,
) -> BacktestResult {
    let dates = calendar.range(start, end);
    run_backtest(dates, signals, &news_periods(anonymized), panel)
}
