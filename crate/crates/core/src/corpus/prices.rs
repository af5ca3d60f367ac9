use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, io_err, CompanyId, CorpusError, MarketPeriod, Session, TradingCalendar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockDay {
    pub company_id: CompanyId,
    pub date: NaiveDate,
    pub open_price: f64,
    pub close_price: f64,
    /// Billions of USD.
    pub market_cap: f64,
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    company_id: String,
    date: String,
    open: f64,
    close: f64,
    market_cap_busd: f64,
}

/// Reads the price CSV (`company_id,date,open,close,market_cap_busd`).
pub fn read_prices<R: Read>(file: &str, reader: R) -> Result<Vec<StockDay>, CorpusError> {
    let mut rdr = csv_reader(reader);
    check_header(
        file,
        &mut rdr,
        &["company_id", "date", "open", "close", "market_cap_busd"],
    )?;
    let mut seen = HashSet::new();
    let mut bad_rows = Vec::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<PriceRow>().enumerate() {
        let row = i + 2;
        let parse = |message: String| CorpusError::Parse {
            file: file.to_string(),
            row,
            message,
        };
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let date = NaiveDate::parse_from_str(&rec.date, "%Y-%m-%d")
            .map_err(|e| parse(format!("bad date {:?}: {e}", rec.date)))?;
        if !rec.market_cap_busd.is_finite() || rec.market_cap_busd < 0.0 {
            return Err(parse(format!("market cap must be >= 0, got {}", rec.market_cap_busd)));
        }
        if !seen.insert((rec.company_id.clone(), date)) {
            return Err(CorpusError::DuplicateKey {
                file: file.to_string(),
                company_id: rec.company_id,
                date,
                row,
            });
        }
        if !(rec.open > 0.0 && rec.close > 0.0) || !rec.open.is_finite() || !rec.close.is_finite() {
            bad_rows.push(row);
            continue;
        }
        out.push(StockDay {
            company_id: CompanyId(rec.company_id),
            date,
            open_price: rec.open,
            close_price: rec.close,
            market_cap: rec.market_cap_busd,
        });
    }
    if !bad_rows.is_empty() {
        return Err(CorpusError::NonPositivePrice {
            file: file.to_string(),
            rows: bad_rows,
        });
    }
    Ok(out)
}

pub fn load_prices(path: &Path) -> Result<Vec<StockDay>, CorpusError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    read_prices(&path.display().to_string(), f)
}

/// Reads an optional market excess-return file (`date,rm_minus_rf_bp`).
pub fn load_market_series(path: &Path) -> Result<BTreeMap<NaiveDate, f64>, CorpusError> {
    let file = path.display().to_string();
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv_reader(f);
    check_header(&file, &mut rdr, &["date", "rm_minus_rf_bp"])?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let parse = |message: String| CorpusError::Parse {
            file: file.clone(),
            row: i + 2,
            message,
        };
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| parse(e.to_string()))?;
        let v: f64 = rec[1]
            .parse()
            .map_err(|e: std::num::ParseFloatError| parse(e.to_string()))?;
        out.insert(date, v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DayRecord {
    close: f64,
    market_cap: f64,
    open_to_close: f64,
    close_to_close: Option<f64>,
}

/// Per-company daily returns in basis points plus the market excess-return
/// series.
#[derive(Debug, Clone, Default)]
pub struct ReturnPanel {
    calendar: TradingCalendar,
    days: BTreeMap<CompanyId, BTreeMap<NaiveDate, DayRecord>>,
    rm_minus_rf: BTreeMap<NaiveDate, f64>,
}

impl ReturnPanel {
    pub fn from_stock_days(days: &[StockDay], calendar: &TradingCalendar) -> Self {
        let mut by_company: BTreeMap<CompanyId, BTreeMap<NaiveDate, &StockDay>> = BTreeMap::new();
        for d in days {
            by_company.entry(d.company_id.clone()).or_default().insert(d.date, d);
        }
        let mut out: BTreeMap<CompanyId, BTreeMap<NaiveDate, DayRecord>> = BTreeMap::new();
        for (company, series) in by_company {
            let mut recs = BTreeMap::new();
            for (date, day) in &series {
                let close_to_close = calendar
                    .before(*date)
                    .and_then(|prev| series.get(&prev))
                    .map(|prev| 10_000.0 * (day.close_price / prev.close_price - 1.0));
                recs.insert(
                    *date,
                    DayRecord {
                        close: day.close_price,
                        market_cap: day.market_cap,
                        open_to_close: 10_000.0 * (day.close_price / day.open_price - 1.0),
                        close_to_close,
                    },
                );
            }
            out.insert(company, recs);
        }
        Self {
            calendar: calendar.clone(),
            days: out,
            rm_minus_rf: BTreeMap::new(),
        }
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn companies(&self) -> impl Iterator<Item = &CompanyId> {
        self.days.keys()
    }

    fn record(&self, company: &CompanyId, date: NaiveDate) -> Option<&DayRecord> {
        self.days.get(company)?.get(&date)
    }

    pub fn open_to_close(&self, company: &CompanyId, date: NaiveDate) -> Option<f64> {
        self.record(company, date).map(|r| r.open_to_close)
    }

    pub fn close_to_close(&self, company: &CompanyId, date: NaiveDate) -> Option<f64> {
        self.record(company, date)?.close_to_close
    }

    pub fn close(&self, company: &CompanyId, date: NaiveDate) -> Option<f64> {
        self.record(company, date).map(|r| r.close)
    }

    pub fn market_cap(&self, company: &CompanyId, date: NaiveDate) -> Option<f64> {
        self.record(company, date).map(|r| r.market_cap)
    }

    /// Return realized by a position opened in `period`: the same day's
    /// open-to-close, or the close-to-close return ending on the next trading day.
    pub fn period_return(&self, company: &CompanyId, period: MarketPeriod) -> Option<f64> {
        match period.session {
            Session::OpenToClose => self.open_to_close(company, period.trade_date),
            Session::CloseToClose => {
                let next = self.calendar.after(period.trade_date)?;
                self.close_to_close(company, next)
            }
        }
    }

    /// Companies with a close-to-close return on `date`, with that return.
    pub fn close_to_close_universe(&self, date: NaiveDate) -> Vec<(&CompanyId, f64)> {
        self.days
            .iter()
            .filter_map(|(c, recs)| recs.get(&date)?.close_to_close.map(|r| (c, r)))
            .collect()
    }

    pub fn set_market_series(&mut self, series: BTreeMap<NaiveDate, f64>) {
        self.rm_minus_rf = series;
    }

    pub fn market_series(&self) -> &BTreeMap<NaiveDate, f64> {
        &self.rm_minus_rf
    }

    pub fn rm_minus_rf(&self, date: NaiveDate) -> Option<f64> {
        self.rm_minus_rf.get(&date).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 6, day).unwrap()
    }

    fn day(c: &str, date: NaiveDate, open: f64, close: f64) -> StockDay {
        StockDay {
            company_id: CompanyId::from(c),
            date,
            open_price: open,
            close_price: close,
            market_cap: 1.0,
        }
    }

    #[test]
    fn basic_returns() {
        let cal = TradingCalendar::new(vec![d(1), d(2), d(3)]);
        let panel = ReturnPanel::from_stock_days(
            &[
                day("A", d(1), 190.0, 200.0),
                day("A", d(2), 100.0, 101.0),
                day("B", d(1), 1.0, 200.0),
                day("B", d(2), 1.0, 200.0),
            ],
            &cal,
        );
        let a = CompanyId::from("A");
        let b = CompanyId::from("B");
        assert!((panel.open_to_close(&a, d(2)).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(panel.close_to_close(&b, d(2)), Some(0.0));
        assert_eq!(panel.close_to_close(&a, d(1)), None);
        // Close-to-close period opened on d(1) realizes the d(2) return.
        let p = MarketPeriod {
            trade_date: d(1),
            session: Session::CloseToClose,
        };
        assert_eq!(panel.period_return(&b, p), Some(0.0));
        // No next-day price: absent.
        let p = MarketPeriod {
            trade_date: d(2),
            session: Session::CloseToClose,
        };
        assert_eq!(panel.period_return(&b, p), None);
    }

    #[test]
    fn gaps_make_returns_absent() {
        let cal = TradingCalendar::new(vec![d(1), d(2), d(3)]);
        let panel = ReturnPanel::from_stock_days(&[day("A", d(1), 10.0, 10.0), day("A", d(3), 10.0, 11.0)], &cal);
        assert_eq!(panel.close_to_close(&CompanyId::from("A"), d(3)), None);
        assert!(panel.open_to_close(&CompanyId::from("A"), d(3)).is_some());
    }

    #[test]
    fn csv_validation() {
        let dup = "company_id,date,open,close,market_cap_busd\nA,2021-06-01,1,2,3\nA,2021-06-01,1,2,3\n";
        assert!(matches!(
            read_prices("p", dup.as_bytes()),
            Err(CorpusError::DuplicateKey { row: 3, .. })
        ));
        let neg =
            "company_id,date,open,close,market_cap_busd\nA,2021-06-01,1,2,3\nA,2021-06-02,0,2,3\nB,2021-06-02,1,-2,3\n";
        match read_prices("p", neg.as_bytes()) {
            Err(CorpusError::NonPositivePrice { rows, .. }) => assert_eq!(rows, vec![3, 4]),
            other => panic!("{other:?}"),
        }
        let bad = "company_id,date,open,close,market_cap_busd\nA,2021-06-01,x,2,3\n";
        assert!(matches!(
            read_prices("p", bad.as_bytes()),
            Err(CorpusError::Parse { row: 2, .. })
        ));
        let header = "id,date,open,close,cap\n";
        assert!(matches!(
            read_prices("p", header.as_bytes()),
            Err(CorpusError::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn random_paths_match_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dates: Vec<NaiveDate> = (0..20).map(|i| d(1) + chrono::Days::new(i)).collect();
        let cal = TradingCalendar::new(dates.clone());
        let mut rows = Vec::new();
        for path in 0..1000 {
            let id = format!("C{path}");
            for date in &dates {
                let open: f64 = rng.random_range(1.0..500.0);
                let close: f64 = open * rng.random_range(0.8..1.2);
                rows.push(day(&id, *date, open, close));
            }
        }
        let panel = ReturnPanel::from_stock_days(&rows, &cal);
        for chunk in rows.chunks(dates.len()) {
            let id = chunk[0].company_id.clone();
            for (i, r) in chunk.iter().enumerate() {
                let oc = (r.close_price - r.open_price) / r.open_price * 1e4;
                let got = panel.open_to_close(&id, r.date).unwrap();
                assert!((got - oc).abs() <= 1e-9 * oc.abs().max(1.0));
                if i > 0 {
                    let cc = (r.close_price - chunk[i - 1].close_price) / chunk[i - 1].close_price * 1e4;
                    let got = panel.close_to_close(&id, r.date).unwrap();
                    assert!((got - cc).abs() <= 1e-9 * cc.abs().max(1.0));
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn returns_are_scale_invariant(
                prices in proptest::collection::vec((1.0f64..1000.0, 1.0f64..1000.0), 2..15),
                scale in 0.001f64..1000.0,
            ) {
                let dates: Vec<NaiveDate> = (0..prices.len() as u64).map(|i| d(1) + chrono::Days::new(i)).collect();
                let cal = TradingCalendar::new(dates.clone());
                let base: Vec<StockDay> = prices.iter().zip(&dates).map(|((o, c), dt)| day("A", *dt, *o, *c)).collect();
                let scaled: Vec<StockDay> = prices.iter().zip(&dates).map(|((o, c), dt)| day("A", *dt, o * scale, c * scale)).collect();
                let p1 = ReturnPanel::from_stock_days(&base, &cal);
                let p2 = ReturnPanel::from_stock_days(&scaled, &cal);
                let a = CompanyId::from("A");
                for dt in &dates {
                    let (x, y) = (p1.open_to_close(&a, *dt).unwrap(), p2.open_to_close(&a, *dt).unwrap());
                    prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
                    match (p1.close_to_close(&a, *dt), p2.close_to_close(&a, *dt)) {
                        (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0)),
                        (None, None) => {}
                        _ => prop_assert!(false),
                    }
                }
            }
        }
    }
}
