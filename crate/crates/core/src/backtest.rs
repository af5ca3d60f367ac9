//! Daily equal-weighted sentiment portfolios and market benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{CompanyId, MarketPeriod, ReturnPanel, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Replaced,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Original, Variant::Replaced];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Replaced => "replaced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "original" => Some(Variant::Original),
            "replaced" => Some(Variant::Replaced),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    LongOnly,
    ShortOnly,
    LongShort,
    AllNews,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::LongOnly,
        Strategy::ShortOnly,
        Strategy::LongShort,
        Strategy::AllNews,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::LongOnly => "long_only",
            Strategy::ShortOnly => "short_only",
            Strategy::LongShort => "long_short",
            Strategy::AllNews => "all_news",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Strategy::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

/// Mean headline score of one company in one market period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyPeriodSignal {
    pub company_id: CompanyId,
    pub period: MarketPeriod,
    pub variant: Variant,
    pub value: f64,
    pub headline_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioDayReturn {
    pub trade_date: NaiveDate,
    pub strategy: Strategy,
    pub variant: Variant,
    pub return_bp: f64,
    pub n_open_positions: usize,
    pub n_close_positions: usize,
    pub empty_day: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BacktestError {
    #[error("no close-to-close returns on {0}: benchmark unavailable")]
    BenchmarkUnavailable(NaiveDate),
}

/// What a day without positions contributes to a strategy's series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyDayConvention {
    /// Keep the day with a 0 bp return.
    #[default]
    Zero,
    /// Drop the day.
    Skip,
}

/// Position sign for a signal under a strategy, or `None` when not held.
fn position_sign(strategy: Strategy, value: f64) -> Option<f64> {
    match strategy {
        Strategy::LongOnly => (value > 0.0).then_some(1.0),
        Strategy::ShortOnly => (value < 0.0).then_some(-1.0),
        Strategy::LongShort => {
            if value > 0.0 {
                Some(1.0)
            } else if value < 0.0 {
                Some(-1.0)
            } else {
                None
            }
        }
        Strategy::AllNews => Some(1.0),
    }
}

/// Session-count-weighted mean of position returns:
/// `(n_open * mean_open + n_close * mean_close) / (n_open + n_close)`.
fn combine(
    trade_date: NaiveDate,
    strategy: Strategy,
    variant: Variant,
    open: &[f64],
    close: &[f64],
) -> PortfolioDayReturn {
    let n = open.len() + close.len();
    let return_bp = if n == 0 {
        0.0
    } else {
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        (open.len() as f64 * mean(open) + close.len() as f64 * mean(close)) / n as f64
    };
    PortfolioDayReturn {
        trade_date,
        strategy,
        variant,
        return_bp,
        n_open_positions: open.len(),
        n_close_positions: close.len(),
        empty_day: n == 0,
    }
}

/// Portfolio return on `trade_date` from the signals whose period trades on
/// that date. Members without a return are skipped with a warning.
pub fn daily_strategy_return(
    trade_date: NaiveDate,
    signals: &[CompanyPeriodSignal],
    returns: &ReturnPanel,
    strategy: Strategy,
    variant: Variant,
) -> PortfolioDayReturn {
    let mut open = Vec::new();
    let mut close = Vec::new();
    for s in signals
        .iter()
        .filter(|s| s.period.trade_date == trade_date && s.variant == variant)
    {
        let Some(sign) = position_sign(strategy, s.value) else {
            continue;
        };
        let Some(r) = returns.period_return(&s.company_id, s.period) else {
            log::warn!("no return for {} in {}; position skipped", s.company_id, s.period);
            continue;
        };
        match s.period.session {
            Session::OpenToClose => open.push(sign * r),
            Session::CloseToClose => close.push(sign * r),
        }
    }
    combine(trade_date, strategy, variant, &open, &close)
}

/// Equal-weighted long position in every company with news in a period that
/// trades on `trade_date`.
pub fn all_news_portfolio(
    trade_date: NaiveDate,
    news: &[(CompanyId, MarketPeriod)],
    returns: &ReturnPanel,
    variant: Variant,
) -> PortfolioDayReturn {
    let members: BTreeSet<(&CompanyId, MarketPeriod)> = news
        .iter()
        .filter(|(_, p)| p.trade_date == trade_date)
        .map(|(c, p)| (c, *p))
        .collect();
    let signals: Vec<CompanyPeriodSignal> = members
        .into_iter()
        .map(|(c, p)| CompanyPeriodSignal {
            company_id: c.clone(),
            period: p,
            variant,
            value: 1.0,
            headline_count: 1,
        })
        .collect();
    daily_strategy_return(trade_date, &signals, returns, Strategy::AllNews, variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Benchmarks {
    pub equal_weighted_bp: f64,
    pub value_weighted_bp: f64,
}

/// Market returns on `date` over every company with a close-to-close return;
/// value weights use the previous trading day's market cap.
pub fn market_benchmarks(date: NaiveDate, returns: &ReturnPanel) -> Result<Benchmarks, BacktestError> {
    let universe = returns.close_to_close_universe(date);
    if universe.is_empty() {
        return Err(BacktestError::BenchmarkUnavailable(date));
    }
    let ew = universe.iter().map(|(_, r)| r).sum::<f64>() / universe.len() as f64;
    let prev = returns.calendar().before(date);
    let (mut wsum, mut csum) = (0.0, 0.0);
    for (c, r) in &universe {
        if let Some(cap) = prev.and_then(|d| returns.market_cap(c, d)) {
            wsum += cap * r;
            csum += cap;
        }
    }
    if csum <= 0.0 {
        return Err(BacktestError::BenchmarkUnavailable(date));
    }
    Ok(Benchmarks {
        equal_weighted_bp: ew,
        value_weighted_bp: wsum / csum,
    })
}

/// Growth of one unit: `c_t = c_{t-1} * (1 + r_t / 10000)` from `c_0 = 1`;
/// element `t` is the value after day `t`.
pub fn cumulative_returns(daily_bp: &[f64]) -> Vec<f64> {
    daily_bp
        .iter()
        .scan(1.0, |c, r| {
            *c *= 1.0 + r / 10_000.0;
            Some(*c)
        })
        .collect()
}

/// Every strategy and variant on every trading date in `[start, end]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub days: Vec<PortfolioDayReturn>,
    pub benchmarks: BTreeMap<NaiveDate, Benchmarks>,
}

impl BacktestResult {
    /// Daily series of one strategy/variant in date order.
    pub fn series(
        &self,
        strategy: Strategy,
        variant: Variant,
        convention: EmptyDayConvention,
    ) -> Vec<(NaiveDate, f64)> {
        self.days
            .iter()
            .filter(|d| d.strategy == strategy && d.variant == variant)
            .filter(|d| convention == EmptyDayConvention::Zero || !d.empty_day)
            .map(|d| (d.trade_date, d.return_bp))
            .collect()
    }

    /// Original and replaced returns on the dates both series keep.
    pub fn paired(&self, strategy: Strategy, convention: EmptyDayConvention) -> (Vec<NaiveDate>, Vec<f64>, Vec<f64>) {
        let orig: BTreeMap<NaiveDate, f64> = self
            .series(strategy, Variant::Original, convention)
            .into_iter()
            .collect();
        let rep: BTreeMap<NaiveDate, f64> = self
            .series(strategy, Variant::Replaced, convention)
            .into_iter()
            .collect();
        let mut dates = Vec::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (d, x) in &orig {
            if let Some(y) = rep.get(d) {
                dates.push(*d);
                a.push(*x);
                b.push(*y);
            }
        }
        (dates, a, b)
    }
}

pub fn run_backtest(
    dates: &[NaiveDate],
    signals: &[CompanyPeriodSignal],
    news: &[(CompanyId, MarketPeriod)],
    returns: &ReturnPanel,
) -> BacktestResult {
    let mut by_date: BTreeMap<NaiveDate, Vec<CompanyPeriodSignal>> = BTreeMap::new();
    for s in signals {
        by_date.entry(s.period.trade_date).or_default().push(s.clone());
    }
    let mut news_by_date: BTreeMap<NaiveDate, Vec<(CompanyId, MarketPeriod)>> = BTreeMap::new();
    for n in news {
        news_by_date.entry(n.1.trade_date).or_default().push(n.clone());
    }
    let mut out = BacktestResult::default();
    for &d in dates {
        let day_signals = by_date.get(&d).map(Vec::as_slice).unwrap_or(&[]);
        let day_news = news_by_date.get(&d).map(Vec::as_slice).unwrap_or(&[]);
        for strategy in [Strategy::LongOnly, Strategy::ShortOnly, Strategy::LongShort] {
            for variant in Variant::BOTH {
                out.days
                    .push(daily_strategy_return(d, day_signals, returns, strategy, variant));
            }
        }
        for variant in Variant::BOTH {
            out.days.push(all_news_portfolio(d, day_news, returns, variant));
        }
        match market_benchmarks(d, returns) {
            Ok(b) => {
                out.benchmarks.insert(d, b);
            }
            Err(e) => log::debug!("{e}"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{StockDay, TradingCalendar};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, 3, day).unwrap()
    }

    /// Panel whose open-to-close return on `d(8)` and close-to-close return
    /// from `d(8)` to `d(9)` are given per company, in bp.
    fn panel(rows: &[(&str, f64, f64)]) -> ReturnPanel {
        let cal = TradingCalendar::new(vec![d(7), d(8), d(9)]);
        let mut days = Vec::new();
        for (c, oc, cc) in rows {
            let close8 = 100.0;
            let open8 = close8 / (1.0 + oc / 10_000.0);
            let close9 = close8 * (1.0 + cc / 10_000.0);
            for (date, open, close) in [(d(7), 100.0, 100.0), (d(8), open8, close8), (d(9), close9, close9)] {
                days.push(StockDay {
                    company_id: CompanyId::from(*c),
                    date,
                    open_price: open,
                    close_price: close,
                    market_cap: 1.0,
                });
            }
        }
        ReturnPanel::from_stock_days(&days, &cal)
    }

    fn sig(c: &str, session: Session, value: f64) -> CompanyPeriodSignal {
        CompanyPeriodSignal {
            company_id: CompanyId::from(c),
            period: MarketPeriod {
                trade_date: d(8),
                session,
            },
            variant: Variant::Original,
            value,
            headline_count: 1,
        }
    }

    #[test]
    fn session_weighting() {
        let p = panel(&[("a", 100.0, 0.0), ("b", -50.0, 0.0), ("c", 0.0, 30.0)]);
        let s = vec![
            sig("a", Session::OpenToClose, 1.0),
            sig("b", Session::OpenToClose, 0.5),
            sig("c", Session::CloseToClose, 1.0),
        ];
        let r = daily_strategy_return(d(8), &s, &p, Strategy::LongOnly, Variant::Original);
        assert!((r.return_bp - 80.0 / 3.0).abs() < 1e-9);
        assert_eq!((r.n_open_positions, r.n_close_positions, r.empty_day), (2, 1, false));
    }

    #[test]
    fn signed_long_short() {
        let p = panel(&[("a", 100.0, 0.0), ("b", -200.0, 0.0)]);
        let s = vec![
            sig("a", Session::OpenToClose, 1.0),
            sig("b", Session::OpenToClose, -1.0),
        ];
        let r = daily_strategy_return(d(8), &s, &p, Strategy::LongShort, Variant::Original);
        assert!((r.return_bp - 150.0).abs() < 1e-9);
        let r = daily_strategy_return(d(8), &s, &p, Strategy::ShortOnly, Variant::Original);
        assert!((r.return_bp - 200.0).abs() < 1e-9);
    }

    #[test]
    fn empty_day_and_wrong_variant() {
        let p = panel(&[("a", 100.0, 0.0)]);
        let r = daily_strategy_return(d(8), &[], &p, Strategy::LongShort, Variant::Original);
        assert!(r.empty_day);
        assert_eq!(r.return_bp, 0.0);
        let s = vec![sig("a", Session::OpenToClose, 1.0)];
        assert!(daily_strategy_return(d(8), &s, &p, Strategy::LongOnly, Variant::Replaced).empty_day);
        assert!(
            daily_strategy_return(
                d(8),
                &[sig("a", Session::OpenToClose, 0.0)],
                &p,
                Strategy::LongShort,
                Variant::Original
            )
            .empty_day
        );
    }

    #[test]
    fn missing_member_is_skipped() {
        let p = panel(&[("a", 100.0, 0.0)]);
        let s = vec![
            sig("a", Session::OpenToClose, 1.0),
            sig("zzz", Session::OpenToClose, 1.0),
        ];
        let r = daily_strategy_return(d(8), &s, &p, Strategy::LongOnly, Variant::Original);
        assert_eq!(r.n_open_positions, 1);
        assert!((r.return_bp - 100.0).abs() < 1e-9);
    }

    #[test]
    fn all_news_examples() {
        let p = panel(&[("a", 40.0, 0.0), ("b", 10.0, -20.0)]);
        let period = |s| MarketPeriod {
            trade_date: d(8),
            session: s,
        };
        let one = vec![(CompanyId::from("a"), period(Session::OpenToClose))];
        assert!((all_news_portfolio(d(8), &one, &p, Variant::Original).return_bp - 40.0).abs() < 1e-9);
        assert!(all_news_portfolio(d(8), &[], &p, Variant::Original).empty_day);
        // Duplicate news in one period is one position.
        let mixed = vec![
            (CompanyId::from("a"), period(Session::OpenToClose)),
            (CompanyId::from("a"), period(Session::OpenToClose)),
            (CompanyId::from("b"), period(Session::CloseToClose)),
        ];
        let r = all_news_portfolio(d(8), &mixed, &p, Variant::Original);
        let forced = vec![
            sig("a", Session::OpenToClose, 1.0),
            sig("b", Session::CloseToClose, 1.0),
        ];
        let s = daily_strategy_return(d(8), &forced, &p, Strategy::AllNews, Variant::Original);
        assert!((r.return_bp - s.return_bp).abs() < 1e-12);
        assert!((r.return_bp - 10.0).abs() < 1e-9);
    }

    #[test]
    fn benchmarks() {
        let cal = TradingCalendar::new(vec![d(7), d(8)]);
        let mk = |c: &str, cap: f64, c7: f64, c8: f64| {
            vec![
                StockDay {
                    company_id: c.into(),
                    date: d(7),
                    open_price: c7,
                    close_price: c7,
                    market_cap: cap,
                },
                StockDay {
                    company_id: c.into(),
                    date: d(8),
                    open_price: c8,
                    close_price: c8,
                    market_cap: cap * 9.0,
                },
            ]
        };
        let mut days = mk("a", 1.0, 100.0, 100.0);
        days.extend(mk("b", 3.0, 100.0, 101.0));
        let p = ReturnPanel::from_stock_days(&days, &cal);
        let b = market_benchmarks(d(8), &p).unwrap();
        assert!((b.equal_weighted_bp - 50.0).abs() < 1e-9);
        assert!((b.value_weighted_bp - 75.0).abs() < 1e-9);
        assert_eq!(
            market_benchmarks(d(7), &p),
            Err(BacktestError::BenchmarkUnavailable(d(7)))
        );
    }

    #[test]
    fn compounding() {
        assert_eq!(cumulative_returns(&[0.0, 0.0, 0.0]), vec![1.0; 3]);
        let c = cumulative_returns(&[100.0, 100.0]);
        assert!((c[1] - 1.0201).abs() < 1e-12);
        let r: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 - 50.0) * 3.1).collect();
        let fold = r.iter().fold(1.0, |acc, x| acc * (1.0 + x / 10_000.0));
        assert!((cumulative_returns(&r).last().unwrap() - fold).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn membership_depends_on_sign_only(
            rows in proptest::collection::vec((-300.0f64..300.0, -300.0f64..300.0, -1.0f64..1.0, any::<bool>()), 1..12),
            seed in any::<u64>(),
        ) {
            let names: Vec<String> = (0..rows.len()).map(|i| format!("c{i}")).collect();
            let p = panel(&rows.iter().zip(&names).map(|((oc, cc, _, _), n)| (n.as_str(), *oc, *cc)).collect::<Vec<_>>());
            let signals: Vec<CompanyPeriodSignal> = rows.iter().zip(&names).map(|((_, _, v, open), n)| {
                sig(n, if *open { Session::OpenToClose } else { Session::CloseToClose }, *v)
            }).collect();
            let mut shuffled = signals.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let doubled: Vec<CompanyPeriodSignal> = signals.iter().map(|s| CompanyPeriodSignal { value: (2.0 * s.value).clamp(-1.0, 1.0), ..s.clone() }).collect();
            for st in Strategy::ALL {
                let base = daily_strategy_return(d(8), &signals, &p, st, Variant::Original);
                let perm = daily_strategy_return(d(8), &shuffled, &p, st, Variant::Original);
                let dbl = daily_strategy_return(d(8), &doubled, &p, st, Variant::Original);
                prop_assert!((base.return_bp - perm.return_bp).abs() < 1e-9);
                prop_assert!((base.return_bp - dbl.return_bp).abs() < 1e-12);
                prop_assert_eq!(base.empty_day, base.n_open_positions + base.n_close_positions == 0);
            }
            let longs: Vec<_> = signals.iter().filter(|s| s.value >= 0.0).cloned().collect();
            let ls = daily_strategy_return(d(8), &longs, &p, Strategy::LongShort, Variant::Original);
            let lo = daily_strategy_return(d(8), &longs, &p, Strategy::LongOnly, Variant::Original);
            prop_assert!((ls.return_bp - lo.return_bp).abs() < 1e-12);
            let opens: Vec<_> = signals.iter().filter(|s| s.period.session == Session::OpenToClose && s.value > 0.0).cloned().collect();
            if !opens.is_empty() {
                let r = daily_strategy_return(d(8), &opens, &p, Strategy::LongOnly, Variant::Original);
                let mean = opens.iter().map(|s| p.period_return(&s.company_id, s.period).unwrap()).sum::<f64>() / opens.len() as f64;
                prop_assert!((r.return_bp - mean).abs() < 1e-9);
            }
        }
    }
}
