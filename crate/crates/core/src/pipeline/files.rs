//! Flat-file forms of the corpus and of every intermediate.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{CompanyPeriodSignal, Variant};
use crate::corpus::{
    format_et_timestamp, parse_et_timestamp, CompanyId, Headline, MarketPeriod, Session, StockDay, TradingCalendar,
};
use crate::scorer::{ParseStatus, Score, ScoredHeadline};

use super::stages::AnonymizedHeadline;
use super::PipelineError;

pub const ANONYMIZED: &str = "anonymized.csv";
pub const REPLACED_HEADLINES: &str = "replaced_headlines.csv";
pub const SCORES: &str = "scores.csv";
pub const SIGNALS: &str = "signals.csv";
pub const DAILY_RETURNS: &str = "daily_returns.csv";
pub const CUMULATIVE_RETURNS: &str = "cumulative_returns.csv";
pub const STATS: &str = "stats.json";
pub const REPORT: &str = "report.txt";
pub const MANIFEST: &str = "manifest.json";
pub const FAILED: &str = "FAILED";

pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, PipelineError> {
    Ok(sha256_hex(&fs::read(path).map_err(io(path))?))
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

fn from_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let f = fs::File::open(path).map_err(io(path))?;
    let mut rdr = csv::Reader::from_reader(f);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| PipelineError::data(format!("{}: row {}: {e}", path.display(), i + 2))))
        .collect()
}

fn parse_date(s: &str) -> Result<chrono::NaiveDate, PipelineError> {
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| PipelineError::data(format!("bad date {s:?}: {e}")))
}

fn parse_session(s: &str) -> Result<Session, PipelineError> {
    Session::parse(s).ok_or_else(|| PipelineError::data(format!("bad session {s:?}")))
}

fn parse_variant(s: &str) -> Result<Variant, PipelineError> {
    Variant::parse(s).ok_or_else(|| PipelineError::data(format!("bad variant {s:?}")))
}

#[derive(Serialize, Deserialize)]
struct AnonymizedRow {
    headline_id: String,
    company_id: String,
    timestamp_et: String,
    trade_date: String,
    session: String,
    n_spans: usize,
    original_text: String,
    replaced_text: String,
}

pub fn write_anonymized(path: &Path, rows: &[AnonymizedHeadline]) -> Result<(), PipelineError> {
    write_atomic(
        path,
        &to_csv(rows.iter().map(|a| AnonymizedRow {
            headline_id: a.headline_id.clone(),
            company_id: a.company_id.0.clone(),
            timestamp_et: format_et_timestamp(&a.timestamp),
            trade_date: a.period.trade_date.to_string(),
            session: a.period.session.as_str().into(),
            n_spans: a.n_spans,
            original_text: a.original_text.clone(),
            replaced_text: a.replaced_text.clone(),
        })),
    )
}

pub fn read_anonymized(path: &Path) -> Result<Vec<AnonymizedHeadline>, PipelineError> {
    from_csv::<AnonymizedRow>(path)?
        .into_iter()
        .map(|r| {
            Ok(AnonymizedHeadline {
                timestamp: parse_et_timestamp(&r.timestamp_et)
                    .ok_or_else(|| PipelineError::data(format!("bad timestamp {:?}", r.timestamp_et)))?,
                period: MarketPeriod {
                    trade_date: parse_date(&r.trade_date)?,
                    session: parse_session(&r.session)?,
                },
                headline_id: r.headline_id,
                company_id: CompanyId(r.company_id),
                n_spans: r.n_spans,
                original_text: r.original_text,
                replaced_text: r.replaced_text,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct HeadlineRow<'a> {
    headline_id: &'a str,
    company_id: &'a str,
    timestamp_et: String,
    text: &'a str,
}

/// Headlines in the corpus schema.
pub fn write_headlines<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (&'a Headline, &'a str)>,
) -> Result<(), PipelineError> {
    write_atomic(
        path,
        &to_csv(rows.into_iter().map(|(h, text)| HeadlineRow {
            headline_id: &h.headline_id,
            company_id: &h.company_id.0,
            timestamp_et: format_et_timestamp(&h.timestamp),
            text,
        })),
    )
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    headline_id: String,
    variant: String,
    score: i8,
    parse_status: String,
    backend_id: String,
    raw_first_line: String,
    rationale: String,
}

pub fn write_scores(path: &Path, rows: &[ScoredHeadline]) -> Result<(), PipelineError> {
    write_atomic(
        path,
        &to_csv(rows.iter().map(|s| ScoreRow {
            headline_id: s.headline_id.clone(),
            variant: s.variant.as_str().into(),
            score: s.score.as_i8(),
            parse_status: s.parse_status.as_str().into(),
            backend_id: s.backend_id.clone(),
            raw_first_line: s.raw_first_line.clone(),
            rationale: s.rationale.clone(),
        })),
    )
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoredHeadline>, PipelineError> {
    from_csv::<ScoreRow>(path)?
        .into_iter()
        .map(|r| {
            Ok(ScoredHeadline {
                variant: parse_variant(&r.variant)?,
                score: Score::from_i8(r.score).ok_or_else(|| PipelineError::data(format!("bad score {}", r.score)))?,
                parse_status: match r.parse_status.as_str() {
                    "ok" => ParseStatus::Ok,
                    "fallback_zero" => ParseStatus::FallbackZero,
                    other => return Err(PipelineError::data(format!("bad parse status {other:?}"))),
                },
                headline_id: r.headline_id,
                raw_first_line: r.raw_first_line,
                rationale: r.rationale,
                backend_id: r.backend_id,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SignalRow {
    company_id: String,
    trade_date: String,
    session: String,
    variant: String,
    value: f64,
    headline_count: usize,
}

pub fn write_signals(path: &Path, rows: &[CompanyPeriodSignal]) -> Result<(), PipelineError> {
    write_atomic(
        path,
        &to_csv(rows.iter().map(|s| SignalRow {
            company_id: s.company_id.0.clone(),
            trade_date: s.period.trade_date.to_string(),
            session: s.period.session.as_str().into(),
            variant: s.variant.as_str().into(),
            value: s.value,
            headline_count: s.headline_count,
        })),
    )
}

pub fn read_signals(path: &Path) -> Result<Vec<CompanyPeriodSignal>, PipelineError> {
    from_csv::<SignalRow>(path)?
        .into_iter()
        .map(|r| {
            Ok(CompanyPeriodSignal {
                company_id: CompanyId(r.company_id),
                period: MarketPeriod {
                    trade_date: parse_date(&r.trade_date)?,
                    session: parse_session(&r.session)?,
                },
                variant: parse_variant(&r.variant)?,
                value: r.value,
                headline_count: r.headline_count,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct PriceRow<'a> {
    company_id: &'a str,
    date: String,
    open: f64,
    close: f64,
    market_cap_busd: f64,
}

pub fn write_prices(path: &Path, rows: &[StockDay]) -> Result<(), PipelineError> {
    write_atomic(
        path,
        &to_csv(rows.iter().map(|d| PriceRow {
            company_id: &d.company_id.0,
            date: d.date.to_string(),
            open: d.open_price,
            close: d.close_price,
            market_cap_busd: d.market_cap,
        })),
    )
}

pub fn write_companies<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (&'a CompanyId, &'a str)>,
) -> Result<(), PipelineError> {
    #[derive(Serialize)]
    struct Row<'a> {
        company_id: &'a str,
        official_name: &'a str,
    }
    write_atomic(
        path,
        &to_csv(rows.into_iter().map(|(c, n)| Row {
            company_id: &c.0,
            official_name: n,
        })),
    )
}

pub fn write_calendar(path: &Path, calendar: &TradingCalendar) -> Result<(), PipelineError> {
    write_atomic(path, calendar.render().as_bytes())
}
