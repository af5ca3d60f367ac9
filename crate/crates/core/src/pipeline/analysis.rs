//! Statistics over one run, split into samples, and their rendering.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{cumulative_returns, BacktestResult, CompanyPeriodSignal, EmptyDayConvention, Strategy, Variant};
use crate::corpus::{CompanyId, MarketPeriod, ReturnPanel};
use crate::scorer::{Score, ScoredHeadline};
use crate::stats::report::{self, Table};
use crate::stats::{
    beta_difference_test, capm_regression, classification_table, market_cap_comparison, paired_t_test, stacked_sur,
    BetaDifference, CapCategory, CapObservation, CapmResult, ClassificationObservation, ClassificationTable,
    MarketCapComparison, PairedTTest, PanelObservation, StatsError, SurResult,
};

use super::stages::AnonymizedHeadline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl SampleWindow {
    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }
}

/// A result, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok { value: T },
    Unavailable { reason: String },
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok { value } => Some(value),
            Outcome::Unavailable { .. } => None,
        }
    }
}

impl<T> From<Result<T, StatsError>> for Outcome<T> {
    fn from(r: Result<T, StatsError>) -> Self {
        match r {
            Ok(value) => Outcome::Ok { value },
            Err(e) => Outcome::Unavailable { reason: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeled<T> {
    pub label: String,
    pub result: Outcome<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub window: SampleWindow,
    pub paired: Vec<Labeled<PairedTTest>>,
    pub classification: Outcome<ClassificationTable>,
    pub market_cap: Outcome<MarketCapComparison>,
    pub sur: Outcome<SurResult>,
    pub capm: Vec<Labeled<CapmResult>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBundle {
    /// Regressor of the CAPM tables.
    pub market_proxy: String,
    pub empty_day: EmptyDayConvention,
    pub samples: Vec<SampleStats>,
    /// First sample's beta against the second's.
    pub beta_differences: Vec<Labeled<BetaDifference>>,
}

pub struct AnalysisInput<'a> {
    pub anonymized: &'a [AnonymizedHeadline],
    pub scores: &'a [ScoredHeadline],
    pub signals: &'a [CompanyPeriodSignal],
    pub backtest: &'a BacktestResult,
    pub panel: &'a ReturnPanel,
    pub strategies: &'a [Strategy],
    pub empty_day: EmptyDayConvention,
}

fn strategy_label(s: Strategy, v: Variant) -> String {
    format!("{} {}", s.as_str(), v.as_str())
}

/// Market regressor per date: `rm_minus_rf` when supplied, otherwise the
/// value-weighted market return.
fn market_series(input: &AnalysisInput) -> (String, BTreeMap<NaiveDate, f64>) {
    if !input.panel.market_series().is_empty() {
        return ("rm_minus_rf".into(), input.panel.market_series().clone());
    }
    let vw = input
        .backtest
        .benchmarks
        .iter()
        .map(|(d, b)| (*d, b.value_weighted_bp))
        .collect();
    ("value_weighted_market".into(), vw)
}

/// Original and replaced signal values of one company-period.
type SignalPair = (Option<f64>, Option<f64>);

fn sample_stats(input: &AnalysisInput, window: &SampleWindow, market: &BTreeMap<NaiveDate, f64>) -> SampleStats {
    let in_window = |d: NaiveDate| window.contains(d);

    let mut paired = Vec::new();
    for &s in input.strategies {
        let (dates, a, b) = input.backtest.paired(s, input.empty_day);
        let (a, b): (Vec<f64>, Vec<f64>) = dates
            .iter()
            .zip(a.iter().zip(&b))
            .filter(|(d, _)| in_window(**d))
            .map(|(_, (x, y))| (*x, *y))
            .unzip();
        paired.push(Labeled {
            label: s.as_str().to_string(),
            result: paired_t_test(&a, &b).into(),
        });
    }

    let mut by_headline: HashMap<&str, (Option<Score>, Option<Score>)> = HashMap::new();
    for s in input.scores {
        let e = by_headline.entry(s.headline_id.as_str()).or_default();
        match s.variant {
            Variant::Original => e.0 = Some(s.score),
            Variant::Replaced => e.1 = Some(s.score),
        }
    }
    let mut obs = Vec::new();
    for a in input.anonymized.iter().filter(|a| in_window(a.period.trade_date)) {
        let (Some((Some(orig), Some(rep))), Some(ret)) = (
            by_headline.get(a.headline_id.as_str()),
            input.panel.period_return(&a.company_id, a.period),
        ) else {
            continue;
        };
        obs.push(ClassificationObservation {
            orig: *orig,
            rep: *rep,
            return_bp: ret,
        });
    }
    let classification = classification_table(&obs).into();

    let mut signal_pairs: BTreeMap<(&CompanyId, MarketPeriod), SignalPair> = BTreeMap::new();
    for s in input.signals.iter().filter(|s| in_window(s.period.trade_date)) {
        let e = signal_pairs.entry((&s.company_id, s.period)).or_default();
        match s.variant {
            Variant::Original => e.0 = Some(s.value),
            Variant::Replaced => e.1 = Some(s.value),
        }
    }

    let calendar = input.panel.calendar();
    let caps: Vec<CapObservation> = signal_pairs
        .iter()
        .filter_map(|((c, p), (orig, _))| {
            let value = (*orig)?;
            let cap = calendar
                .before(p.trade_date)
                .and_then(|d| input.panel.market_cap(c, d))
                .or_else(|| input.panel.market_cap(c, p.trade_date))?;
            Some(CapObservation {
                category: CapCategory::from_signal(value),
                cap_busd: cap,
            })
        })
        .collect();
    let market_cap = if caps.is_empty() {
        Outcome::Unavailable {
            reason: "no company-periods with market caps".into(),
        }
    } else {
        Outcome::Ok {
            value: market_cap_comparison(&caps),
        }
    };

    let panel_obs: Vec<PanelObservation> = signal_pairs
        .iter()
        .filter_map(|((c, p), (o, r))| {
            Some(PanelObservation {
                firm: c.as_str().to_string(),
                period: p.to_string(),
                return_bp: input.panel.period_return(c, *p)?,
                x_orig: (*o)?,
                x_rep: (*r)?,
            })
        })
        .collect();
    let sur = stacked_sur(&panel_obs).into();

    let mut capm = Vec::new();
    for &s in input.strategies {
        for v in Variant::BOTH {
            let (y, x): (Vec<f64>, Vec<f64>) = input
                .backtest
                .series(s, v, input.empty_day)
                .into_iter()
                .filter(|(d, _)| in_window(*d))
                .filter_map(|(d, r)| Some((r, *market.get(&d)?)))
                .unzip();
            capm.push(Labeled {
                label: strategy_label(s, v),
                result: capm_regression(&y, &x).into(),
            });
        }
    }

    SampleStats {
        window: window.clone(),
        paired,
        classification,
        market_cap,
        sur,
        capm,
    }
}

pub fn analyze(input: &AnalysisInput, windows: &[SampleWindow]) -> StatsBundle {
    let (market_proxy, market) = market_series(input);
    let samples: Vec<SampleStats> = windows.iter().map(|w| sample_stats(input, w, &market)).collect();
    let mut beta_differences = Vec::new();
    if let [a, b, ..] = samples.as_slice() {
        for (x, y) in a.capm.iter().zip(&b.capm) {
            let result = match (x.result.ok(), y.result.ok()) {
                (Some(p), Some(q)) => beta_difference_test(p.beta, p.se_beta, q.beta, q.se_beta).into(),
                _ => Outcome::Unavailable {
                    reason: "CAPM unavailable in one of the samples".into(),
                },
            };
            beta_differences.push(Labeled {
                label: x.label.clone(),
                result,
            });
        }
    }
    StatsBundle {
        market_proxy,
        empty_day: input.empty_day,
        samples,
        beta_differences,
    }
}

/// One report file: a text block and a CSV with a leading `sample` column.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub stem: &'static str,
    pub text: String,
    pub csv: String,
}

fn unavailable(title: &str, reason: &str) -> Table {
    let mut t = Table::new(title, &["status"]);
    t.push(vec![report::Cell::text("unavailable")]);
    t.notes.push(format!("Not computed: {reason}."));
    t
}

fn outcome_table<T>(title: &str, o: &Outcome<T>, f: impl Fn(&str, &T) -> Table) -> Table {
    match o {
        Outcome::Ok { value } => f(title, value),
        Outcome::Unavailable { reason } => unavailable(title, reason),
    }
}

fn combine(stem: &'static str, parts: Vec<(String, Table)>) -> RenderedTable {
    let mut text = String::new();
    let mut csv = String::new();
    let mut header_done: Option<String> = None;
    for (sample, t) in &parts {
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&t.to_text());
        let body = t.to_csv();
        let mut lines = body.lines();
        let header = format!("sample,{}", lines.next().unwrap_or(""));
        // Samples whose table could not be computed have a different header;
        // their rows still go to the CSV under their own header line.
        if header_done.as_deref() != Some(&header) {
            csv.push_str(&header);
            csv.push('\n');
            header_done = Some(header);
        }
        for l in lines {
            csv.push_str(&format!("{sample},{l}\n"));
        }
    }
    RenderedTable { stem, text, csv }
}

fn labeled_ok<T: Clone>(rows: &[Labeled<T>]) -> (Vec<(String, T)>, Vec<String>) {
    let mut ok = Vec::new();
    let mut notes = Vec::new();
    for r in rows {
        match &r.result {
            Outcome::Ok { value } => ok.push((r.label.clone(), value.clone())),
            Outcome::Unavailable { reason } => notes.push(format!("{}: not computed: {reason}.", r.label)),
        }
    }
    (ok, notes)
}

/// Every report table, in a fixed order.
pub fn render_bundle(bundle: &StatsBundle) -> Vec<RenderedTable> {
    let title = |what: &str, w: &SampleWindow| format!("{what}, {} ({} to {})", w.name, w.start, w.end);
    let mut out = Vec::new();

    let parts = bundle
        .samples
        .iter()
        .map(|s| {
            let (rows, notes) = labeled_ok(&s.paired);
            let mut t = report::paired_table(&title("Daily returns, original vs replaced (bp)", &s.window), &rows);
            t.notes.extend(notes);
            (s.window.name.clone(), t)
        })
        .collect();
    out.push(combine("paired_comparison", parts));

    let parts = bundle
        .samples
        .iter()
        .map(|s| {
            let t = outcome_table(
                &title("Classification of headlines", &s.window),
                &s.classification,
                report::classification_report,
            );
            (s.window.name.clone(), t)
        })
        .collect();
    out.push(combine("classification", parts));

    let parts = bundle
        .samples
        .iter()
        .map(|s| {
            let t = outcome_table(
                &title("Market cap by original recommendation (billion USD)", &s.window),
                &s.market_cap,
                report::market_cap_table,
            );
            (s.window.name.clone(), t)
        })
        .collect();
    out.push(combine("market_cap", parts));

    let parts = bundle
        .samples
        .iter()
        .map(|s| {
            let t = outcome_table(&title("Return on score, stacked system", &s.window), &s.sur, |t, v| {
                report::sur_table(t, v)
            });
            (s.window.name.clone(), t)
        })
        .collect();
    out.push(combine("sur", parts));

    let parts = bundle
        .samples
        .iter()
        .map(|s| {
            let (rows, notes) = labeled_ok(&s.capm);
            let mut t = report::capm_table(&title(&format!("CAPM on {}", bundle.market_proxy), &s.window), &rows);
            t.notes.extend(notes);
            (s.window.name.clone(), t)
        })
        .collect();
    out.push(combine("capm", parts));

    let (rows, notes) = labeled_ok(&bundle.beta_differences);
    let name = match bundle.samples.as_slice() {
        [a, b, ..] => format!("{} vs {}", a.window.name, b.window.name),
        _ => "unavailable".into(),
    };
    let mut t = report::beta_difference_table(&format!("Market beta difference, {name}"), &rows);
    t.notes.extend(notes);
    out.push(combine("beta_difference", vec![(name.replace(' ', "_"), t)]));
    out
}

/// `date,series,variant,cumulative` over every strategy/variant and the two
/// market benchmarks.
pub fn cumulative_csv(backtest: &BacktestResult, strategies: &[Strategy], convention: EmptyDayConvention) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "series", "variant", "cumulative"])
        .expect("in-memory write");
    for &s in strategies {
        for v in Variant::BOTH {
            let series = backtest.series(s, v, convention);
            let r: Vec<f64> = series.iter().map(|(_, r)| *r).collect();
            for ((d, _), c) in series.iter().zip(cumulative_returns(&r)) {
                w.write_record([d.to_string(), s.as_str().into(), v.as_str().into(), c.to_string()])
                    .expect("in-memory write");
            }
        }
    }
    for (name, pick) in [("market_equal_weighted", 0usize), ("market_value_weighted", 1usize)] {
        let r: Vec<f64> = backtest
            .benchmarks
            .values()
            .map(|b| {
                if pick == 0 {
                    b.equal_weighted_bp
                } else {
                    b.value_weighted_bp
                }
            })
            .collect();
        for (d, c) in backtest.benchmarks.keys().zip(cumulative_returns(&r)) {
            w.write_record([d.to_string(), name.into(), "none".into(), c.to_string()])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// `date,strategy,variant,return_bp,n_open,n_close,empty_day`.
pub fn daily_csv(backtest: &BacktestResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "date",
        "strategy",
        "variant",
        "return_bp",
        "n_open",
        "n_close",
        "empty_day",
    ])
    .expect("in-memory write");
    for d in &backtest.days {
        w.write_record([
            d.trade_date.to_string(),
            d.strategy.as_str().into(),
            d.variant.as_str().into(),
            d.return_bp.to_string(),
            d.n_open_positions.to_string(),
            d.n_close_positions.to_string(),
            d.empty_day.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
