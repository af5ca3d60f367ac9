//! Headline, price and calendar ingestion.
//!
//! Headlines are mapped onto the market period whose return their signal trades:
//! daytime stamps in `[06:00, 16:00)` trade close-to-next-close from that day,
//! everything else trades the next session's open-to-close.

mod calendar;
mod prices;

use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::anonymizer::{self, AnonymizeError};
use crate::backtest::{CompanyPeriodSignal, Variant};
use crate::scorer::Score;

pub use calendar::TradingCalendar;
pub use prices::{load_market_series, load_prices, read_prices, ReturnPanel, StockDay};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{file}: row {row}: {message}")]
    Parse { file: String, row: usize, message: String },
    #[error("{file}: duplicate record for company {company_id} on {date} (row {row})")]
    DuplicateKey {
        file: String,
        company_id: String,
        date: NaiveDate,
        row: usize,
    },
    #[error("{file}: non-positive prices on rows {rows:?}")]
    NonPositivePrice { file: String, rows: Vec<usize> },
    #[error("timestamp {0} falls outside the trading calendar")]
    CalendarRange(NaiveDateTime),
    #[error("trading calendar is empty")]
    EmptyCalendar,
    #[error("cannot aggregate an empty score list")]
    EmptyInput,
    #[error("company {company_id}: {source}")]
    Identity {
        company_id: String,
        #[source]
        source: AnonymizeError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Opaque company identifier as it appears in the input files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompanyId(pub String);

impl CompanyId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CompanyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CompanyId {
    fn from(s: &str) -> Self {
        CompanyId(s.to_string())
    }
}

/// Company name forms used by the anonymizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyIdentity {
    pub company_id: CompanyId,
    pub official_name: String,
    pub cleaned_name: String,
    pub acronym: Option<String>,
    pub aliases: Vec<String>,
}

impl CompanyIdentity {
    /// Maximum number of product/service aliases kept per company.
    pub const MAX_ALIASES: usize = 20;

    pub fn new(
        company_id: impl Into<CompanyId>,
        official_name: &str,
        aliases: Vec<String>,
        suffixes: &[String],
    ) -> Result<Self, AnonymizeError> {
        let cleaned_name = anonymizer::clean_company_name(official_name, suffixes)?;
        let acronym = anonymizer::derive_acronym(&cleaned_name);
        let mut kept: Vec<String> = Vec::new();
        for alias in aliases {
            let alias = alias.trim().to_string();
            if !alias.is_empty() && !kept.contains(&alias) {
                kept.push(alias);
            }
        }
        kept.truncate(Self::MAX_ALIASES);
        Ok(Self {
            company_id: company_id.into(),
            official_name: official_name.to_string(),
            cleaned_name,
            acronym,
            aliases: kept,
        })
    }
}

impl From<String> for CompanyId {
    fn from(s: String) -> Self {
        CompanyId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub headline_id: String,
    pub company_id: CompanyId,
    pub text: String,
    /// Eastern-Time wall clock.
    pub timestamp: NaiveDateTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Session {
    /// Buy at the open, sell at the same day's close.
    OpenToClose,
    /// Buy at the close, sell at the next trading day's close.
    CloseToClose,
}

impl Session {
    pub fn as_str(self) -> &'static str {
        match self {
            Session::OpenToClose => "open_to_close",
            Session::CloseToClose => "close_to_close",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "open_to_close" => Some(Session::OpenToClose),
            "close_to_close" => Some(Session::CloseToClose),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MarketPeriod {
    pub trade_date: NaiveDate,
    pub session: Session,
}

impl fmt::Display for MarketPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.trade_date, self.session.as_str())
    }
}

fn daytime_start() -> NaiveTime {
    NaiveTime::from_hms_opt(6, 0, 0).unwrap()
}

fn daytime_end() -> NaiveTime {
    NaiveTime::from_hms_opt(16, 0, 0).unwrap()
}

/// Maps an Eastern-Time timestamp to the market period its signal trades.
///
/// `[06:00, 16:00)` trades close-to-close from that day (rolled forward to the
/// next trading day when the date is not one). `[16:00, 24:00)` trades the
/// following trading day's open-to-close session, `[00:00, 06:00)` the first
/// trading day on or after the date.
pub fn assign_market_period(timestamp: NaiveDateTime, calendar: &TradingCalendar) -> Result<MarketPeriod, CorpusError> {
    let date = timestamp.date();
    let time = timestamp.time();
    let out_of_range = || CorpusError::CalendarRange(timestamp);
    let (first, last) = calendar.bounds().ok_or(CorpusError::EmptyCalendar)?;
    if date < first || date > last {
        return Err(out_of_range());
    }
    let period = if time >= daytime_start() && time < daytime_end() {
        MarketPeriod {
            trade_date: calendar.on_or_after(date).ok_or_else(out_of_range)?,
            session: Session::CloseToClose,
        }
    } else if time >= daytime_end() {
        MarketPeriod {
            trade_date: calendar.after(date).ok_or_else(out_of_range)?,
            session: Session::OpenToClose,
        }
    } else {
        MarketPeriod {
            trade_date: calendar.on_or_after(date).ok_or_else(out_of_range)?,
            session: Session::OpenToClose,
        }
    };
    Ok(period)
}

/// Averages the headline scores of one company in one period for one variant.
pub fn aggregate_scores(
    company_id: &CompanyId,
    period: MarketPeriod,
    variant: Variant,
    scores: &[Score],
) -> Result<CompanyPeriodSignal, CorpusError> {
    if scores.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let sum: f64 = scores.iter().map(|s| s.as_f64()).sum();
    Ok(CompanyPeriodSignal {
        company_id: company_id.clone(),
        period,
        variant,
        value: sum / scores.len() as f64,
        headline_count: scores.len(),
    })
}

/// Parses an RFC-3339 timestamp (or a bare `YYYY-MM-DDTHH:MM:SS`) and keeps
/// its wall-clock part, which is taken to be Eastern Time.
pub fn parse_et_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .ok()
}

pub fn format_et_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn check_header(file: &str, rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), CorpusError> {
    let header = rdr.headers().map_err(|e| CorpusError::Parse {
        file: file.to_string(),
        row: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(CorpusError::Parse {
            file: file.to_string(),
            row: 1,
            message: format!("expected header {:?}, found {:?}", expected, got),
        });
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct HeadlineRow {
    headline_id: String,
    company_id: String,
    timestamp_et: String,
    text: String,
}

/// Reads the headline CSV (`headline_id,company_id,timestamp_et,text`).
pub fn read_headlines<R: Read>(file: &str, reader: R) -> Result<Vec<Headline>, CorpusError> {
    let mut rdr = csv_reader(reader);
    check_header(file, &mut rdr, &["headline_id", "company_id", "timestamp_et", "text"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<HeadlineRow>().enumerate() {
        let row = i + 2;
        let parse = |message: String| CorpusError::Parse {
            file: file.to_string(),
            row,
            message,
        };
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let timestamp = parse_et_timestamp(&rec.timestamp_et)
            .ok_or_else(|| parse(format!("bad timestamp {:?}", rec.timestamp_et)))?;
        if rec.text.trim().is_empty() {
            return Err(parse("empty headline text".into()));
        }
        out.push(Headline {
            headline_id: rec.headline_id,
            company_id: CompanyId(rec.company_id),
            text: rec.text,
            timestamp,
        });
    }
    Ok(out)
}

pub fn load_headlines(path: &Path) -> Result<Vec<Headline>, CorpusError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    read_headlines(&path.display().to_string(), f)
}

/// Reads the company file (`company_id,official_name`).
pub fn read_companies<R: Read>(file: &str, reader: R) -> Result<Vec<(CompanyId, String)>, CorpusError> {
    let mut rdr = csv_reader(reader);
    check_header(file, &mut rdr, &["company_id", "official_name"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CorpusError::Parse {
            file: file.to_string(),
            row: i + 2,
            message: e.to_string(),
        })?;
        out.push((CompanyId(rec[0].to_string()), rec[1].to_string()));
    }
    Ok(out)
}

pub fn load_companies(path: &Path) -> Result<Vec<(CompanyId, String)>, CorpusError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    read_companies(&path.display().to_string(), f)
}

pub fn load_calendar(path: &Path) -> Result<TradingCalendar, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    TradingCalendar::parse(&path.display().to_string(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> TradingCalendar {
        // Mon 2021-03-01 .. Fri 2021-03-12, weekends excluded.
        let days = [1, 2, 3, 4, 5, 8, 9, 10, 11, 12];
        TradingCalendar::new(
            days.iter()
                .map(|d| NaiveDate::from_ymd_opt(2021, 3, *d).unwrap())
                .collect(),
        )
    }

    fn ts(d: u32, h: u32, m: u32, s: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, 3, d)
            .unwrap()
            .and_hms_opt(h, m, s)
            .unwrap()
    }

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
    }

    #[test]
    fn tuesday_morning_trades_close_to_close() {
        let p = assign_market_period(ts(2, 10, 0, 0), &cal()).unwrap();
        assert_eq!(
            p,
            MarketPeriod {
                trade_date: date(2),
                session: Session::CloseToClose
            }
        );
    }

    #[test]
    fn tuesday_evening_trades_wednesday_open() {
        let p = assign_market_period(ts(2, 17, 30, 0), &cal()).unwrap();
        assert_eq!(
            p,
            MarketPeriod {
                trade_date: date(3),
                session: Session::OpenToClose
            }
        );
    }

    #[test]
    fn friday_evening_skips_weekend() {
        let p = assign_market_period(ts(5, 17, 0, 0), &cal()).unwrap();
        assert_eq!(
            p,
            MarketPeriod {
                trade_date: date(8),
                session: Session::OpenToClose
            }
        );
    }

    #[test]
    fn boundary_instants() {
        let c = cal();
        assert_eq!(
            assign_market_period(ts(2, 6, 0, 0), &c).unwrap().session,
            Session::CloseToClose
        );
        let p = assign_market_period(ts(2, 16, 0, 0), &c).unwrap();
        assert_eq!(
            p,
            MarketPeriod {
                trade_date: date(3),
                session: Session::OpenToClose
            }
        );
        let p = assign_market_period(ts(2, 5, 59, 59), &c).unwrap();
        assert_eq!(
            p,
            MarketPeriod {
                trade_date: date(2),
                session: Session::OpenToClose
            }
        );
    }

    #[test]
    fn weekend_stamps_roll_forward() {
        let c = cal();
        // Saturday daytime and Sunday early morning.
        let p = assign_market_period(ts(6, 11, 0, 0), &c).unwrap();
        assert_eq!(
            p,
            MarketPeriod {
                trade_date: date(8),
                session: Session::CloseToClose
            }
        );
        let p = assign_market_period(ts(7, 3, 0, 0), &c).unwrap();
        assert_eq!(
            p,
            MarketPeriod {
                trade_date: date(8),
                session: Session::OpenToClose
            }
        );
    }

    #[test]
    fn outside_calendar_is_an_error() {
        let c = cal();
        assert!(matches!(
            assign_market_period(ts(12, 17, 0, 0), &c),
            Err(CorpusError::CalendarRange(_))
        ));
        let early = NaiveDate::from_ymd_opt(2021, 2, 26)
            .unwrap()
            .and_hms_opt(9, 0, 0)
            .unwrap();
        assert!(assign_market_period(early, &c).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let id = CompanyId::from("X");
        let p = MarketPeriod {
            trade_date: date(2),
            session: Session::OpenToClose,
        };
        let s = aggregate_scores(
            &id,
            p,
            Variant::Original,
            &[Score::Positive, Score::Neutral, Score::Negative],
        )
        .unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.headline_count, 3);
        let s = aggregate_scores(
            &id,
            p,
            Variant::Original,
            &[Score::Positive, Score::Positive, Score::Neutral],
        )
        .unwrap();
        assert!((s.value - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            aggregate_scores(&id, p, Variant::Original, &[]),
            Err(CorpusError::EmptyInput)
        ));
    }

    #[test]
    fn timestamp_parsing() {
        assert_eq!(parse_et_timestamp("2021-03-02T10:00:00-05:00"), Some(ts(2, 10, 0, 0)));
        assert_eq!(parse_et_timestamp("2021-03-02T17:30:00"), Some(ts(2, 17, 30, 0)));
        assert_eq!(parse_et_timestamp("yesterday"), None);
    }

    #[test]
    fn headline_csv_errors_name_the_row() {
        let data = "headline_id,company_id,timestamp_et,text\nh1,A,2021-03-02T10:00:00,ok\nh2,A,notatime,bad\n";
        match read_headlines("h.csv", data.as_bytes()) {
            Err(CorpusError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_derivation() {
        let suffixes: Vec<String> = anonymizer::DEFAULT_SUFFIXES.iter().map(|s| s.to_string()).collect();
        let id = CompanyIdentity::new("AMD", "Advanced Micro Devices Inc.", vec![], &suffixes).unwrap();
        assert_eq!(id.cleaned_name, "Advanced Micro Devices");
        assert_eq!(id.acronym.as_deref(), Some("AMD"));
        let aliases: Vec<String> = (0..30).map(|i| format!("Product {i}")).collect();
        let id = CompanyIdentity::new("X", "Xilinx Inc.", aliases, &suffixes).unwrap();
        assert_eq!(id.acronym, None);
        assert_eq!(id.aliases.len(), 20);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn every_instant_maps_to_one_period(day in 1u32..12, secs in 0u32..86_400) {
                let c = cal();
                let t = ts(day, secs / 3600, (secs / 60) % 60, secs % 60);
                let p = assign_market_period(t, &c);
                // Only evening stamps on the final calendar day fall off the end.
                if day == 12 && secs >= 16 * 3600 {
                    prop_assert!(p.is_err());
                } else {
                    let p = p.unwrap();
                    prop_assert!(c.contains(p.trade_date));
                    prop_assert!(p.trade_date >= t.date());
                    let daytime = (6 * 3600..16 * 3600).contains(&secs);
                    prop_assert_eq!(daytime, p.session == Session::CloseToClose);
                }
            }

            #[test]
            fn aggregate_is_bounded_mean(raw in proptest::collection::vec(-1i8..=1, 1..40)) {
                let scores: Vec<Score> = raw.iter().map(|v| Score::from_i8(*v).unwrap()).collect();
                let id = CompanyId::from("Z");
                let p = MarketPeriod { trade_date: date(2), session: Session::OpenToClose };
                let s = aggregate_scores(&id, p, Variant::Replaced, &scores).unwrap();
                let brute = raw.iter().map(|v| *v as f64).sum::<f64>() / raw.len() as f64;
                prop_assert!((s.value - brute).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&s.value));
            }
        }
    }
}
