use chrono::NaiveDate;

use super::CorpusError;

/// Sorted set of trading dates, loaded from a file rather than derived from
/// exchange rules.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(mut dates: Vec<NaiveDate>) -> Self {
        dates.sort_unstable();
        dates.dedup();
        Self { dates }
    }

    /// One ISO date per line; blank lines and `#` comments are ignored.
    pub fn parse(file: &str, text: &str) -> Result<Self, CorpusError> {
        let mut dates = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let d = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| CorpusError::Parse {
                file: file.to_string(),
                row: i + 1,
                message: format!("bad date {line:?}: {e}"),
            })?;
            dates.push(d);
        }
        if dates.is_empty() {
            return Err(CorpusError::EmptyCalendar);
        }
        Ok(Self::new(dates))
    }

    pub fn render(&self) -> String {
        let mut s = String::with_capacity(self.dates.len() * 11);
        for d in &self.dates {
            s.push_str(&d.format("%Y-%m-%d").to_string());
            s.push('\n');
        }
        s
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn bounds(&self) -> Option<(NaiveDate, NaiveDate)> {
        Some((*self.dates.first()?, *self.dates.last()?))
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.dates.binary_search(&d).is_ok()
    }

    pub fn on_or_after(&self, d: NaiveDate) -> Option<NaiveDate> {
        let i = self.dates.partition_point(|x| *x < d);
        self.dates.get(i).copied()
    }

    pub fn after(&self, d: NaiveDate) -> Option<NaiveDate> {
        let i = self.dates.partition_point(|x| *x <= d);
        self.dates.get(i).copied()
    }

    pub fn before(&self, d: NaiveDate) -> Option<NaiveDate> {
        let i = self.dates.partition_point(|x| *x < d);
        i.checked_sub(1).map(|j| self.dates[j])
    }

    /// Trading dates in `[start, end]`.
    pub fn range(&self, start: NaiveDate, end: NaiveDate) -> &[NaiveDate] {
        let lo = self.dates.partition_point(|x| *x < start);
        let hi = self.dates.partition_point(|x| *x <= end);
        if lo >= hi {
            &[]
        } else {
            &self.dates[lo..hi]
        }
    }
}
