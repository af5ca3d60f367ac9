//! Aligned-text and CSV renderings of the result tables.

use super::capm::{BetaDifference, CapmResult};
use super::classify::ClassificationTable;
use super::marketcap::{CapCategory, MarketCapComparison};
use super::panel::SurResult;
use super::stars;
use super::ttest::PairedTTest;

/// A rendered value and its full-precision CSV form.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub text: String,
    pub raw: String,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        let s = s.into();
        Self {
            raw: s.clone(),
            text: s,
        }
    }

    pub fn num(x: f64, text: String) -> Self {
        Self { text, raw: raw(x) }
    }

    pub fn count(n: usize) -> Self {
        Self::text(n.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, header: &[&str]) -> Self {
        Self {
            title: title.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// First column left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let ncol = self.header.len();
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (j, c) in r.iter().enumerate() {
                width[j] = width[j].max(c.text.chars().count());
            }
        }
        let line = |cells: Vec<&str>| -> String {
            let mut s = String::new();
            for (j, c) in cells.iter().enumerate() {
                if j == 0 {
                    s.push_str(&format!("{c:<w$}", w = width[0]));
                } else {
                    s.push_str(&format!("  {c:>w$}", w = width[j]));
                }
            }
            s.trim_end().to_string()
        };
        let total: usize = width.iter().sum::<usize>() + 2 * (ncol - 1);
        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        out.push_str(&"=".repeat(total));
        out.push('\n');
        out.push_str(&line(self.header.iter().map(String::as_str).collect()));
        out.push('\n');
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r.iter().map(|c| c.text.as_str()).collect()));
            out.push('\n');
        }
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for n in &self.notes {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.raw.as_str()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

/// Shortest round-trip form; empty for NaN.
pub fn raw(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fixed(x: f64, decimals: usize) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    let s = format!("{x:.decimals$}");
    // No "-0.00".
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Three significant digits, keeping trailing zeros.
pub fn sig3(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x == 0.0 || !x.is_finite() {
        return fixed(x, 2);
    }
    let decimals = |v: f64| (2 - v.abs().log10().floor() as i32).max(0) as usize;
    let d = decimals(x);
    let rounded: f64 = format!("{x:.d$}").parse().unwrap_or(x);
    let d = if rounded == 0.0 { d } else { decimals(rounded).min(d) };
    fixed(x, d)
}

fn opt_cell(x: Option<f64>, decimals: usize) -> Cell {
    match x {
        Some(v) => Cell::num(v, fixed(v, decimals)),
        None => Cell {
            text: "NA".into(),
            raw: String::new(),
        },
    }
}

pub fn t_paren(t: f64) -> String {
    format!("({})", fixed(t, 3))
}

fn p4(p: f64) -> String {
    fixed(p, 4)
}

/// Paired comparison of original vs replaced daily returns per portfolio.
pub fn paired_table(title: &str, rows: &[(String, PairedTTest)]) -> Table {
    let mut t = Table::new(
        title,
        &[
            "portfolio",
            "original_mean_bp",
            "replaced_mean_bp",
            "original_sd_bp",
            "replaced_sd_bp",
            "t",
            "p",
            "n",
        ],
    );
    for (label, r) in rows {
        t.push(vec![
            Cell::text(label.as_str()),
            Cell::num(r.mean_a, fixed(r.mean_a, 2)),
            Cell::num(r.mean_b, fixed(r.mean_b, 2)),
            Cell::num(r.sd_a, fixed(r.sd_a, 2)),
            Cell::num(r.sd_b, fixed(r.sd_b, 2)),
            Cell::num(r.t, fixed(r.t, 3)),
            Cell::num(r.p, format!("{}{}", p4(r.p), stars(r.p))),
            Cell::count(r.n),
        ]);
    }
    t.notes
        .push("Paired t-tests on same-day returns; * p<0.10, ** p<0.05, *** p<0.01.".into());
    t
}

pub fn classification_report(title: &str, table: &ClassificationTable) -> Table {
    let mut t = Table::new(
        title,
        &[
            "original",
            "replaced",
            "count",
            "proportion",
            "original_ret_bp",
            "replaced_ret_bp",
        ],
    );
    for c in &table.cells {
        t.push(vec![
            Cell::text(c.orig_category.as_str()),
            Cell::text(c.rep_category.as_str()),
            Cell::count(c.count),
            Cell::num(c.proportion, fixed(c.proportion, 4)),
            Cell::num(c.orig_ret_bp, fixed(c.orig_ret_bp, 2)),
            Cell::num(c.rep_ret_bp, fixed(c.rep_ret_bp, 2)),
        ]);
    }
    t.notes.push(format!("Headlines: {}.", table.n));
    t
}

pub fn market_cap_table(title: &str, m: &MarketCapComparison) -> Table {
    let mut t = Table::new(title, &["category", "mean_cap_busd", "sd_cap_busd", "n", "t", "p"]);
    for c in CapCategory::ALL {
        let s = m.stats(c);
        t.push(vec![
            Cell::text(c.as_str()),
            opt_cell(s.mean, 2),
            opt_cell(s.sd, 2),
            Cell::count(s.n),
            Cell::text(""),
            Cell::text(""),
        ]);
    }
    for (label, test) in [("long - other", &m.long_vs_other), ("short - other", &m.short_vs_other)] {
        match test {
            Some(r) => t.push(vec![
                Cell::text(label),
                Cell::num(r.diff, format!("{}{}", fixed(r.diff, 2), stars(r.p))),
                Cell::text(""),
                Cell::text(""),
                Cell::num(r.t, fixed(r.t, 3)),
                Cell::num(r.p, p4(r.p)),
            ]),
            None => t.push(vec![
                Cell::text(label),
                Cell::text("NA"),
                Cell::text(""),
                Cell::text(""),
                Cell::text("NA"),
                Cell::text("NA"),
            ]),
        }
    }
    t.notes.push("Welch t-tests; * p<0.10, ** p<0.05, *** p<0.01.".into());
    t.notes.extend(m.notices.iter().cloned());
    t
}

pub fn sur_table(title: &str, s: &SurResult) -> Table {
    let r = &s.regression;
    let mut t = Table::new(title, &["", "original", "replaced"]);
    t.push(vec![
        Cell::text("score"),
        Cell::num(
            r.coefficients[0],
            format!("{}{}", sig3(r.coefficients[0]), stars(r.p_values[0])),
        ),
        Cell::num(
            r.coefficients[1],
            format!("{}{}", sig3(r.coefficients[1]), stars(r.p_values[1])),
        ),
    ]);
    t.push(vec![
        Cell::text("t"),
        Cell::num(r.t_stats[0], t_paren(r.t_stats[0])),
        Cell::num(r.t_stats[1], t_paren(r.t_stats[1])),
    ]);
    t.push(vec![
        Cell::text("se"),
        Cell::num(r.std_errors[0], sig3(r.std_errors[0])),
        Cell::num(r.std_errors[1], sig3(r.std_errors[1])),
    ]);
    t.push(vec![Cell::text("firm FE"), Cell::text("yes"), Cell::text("yes")]);
    t.push(vec![Cell::text("time FE"), Cell::text("yes"), Cell::text("yes")]);
    t.push(vec![
        Cell::text("obs"),
        Cell::count(r.n_obs / 2),
        Cell::count(r.n_obs / 2),
    ]);
    t.push(vec![
        Cell::text("wald chi2(1)"),
        Cell::num(s.wald, fixed(s.wald, 3)),
        Cell::text(""),
    ]);
    t.push(vec![Cell::text("p"), Cell::num(s.p, p4(s.p)), Cell::text("")]);
    t.notes.push(format!(
        "Stacked system, H0: original = replaced. Standard errors {}.",
        r.clustering
    ));
    t.notes.push("* p<0.10, ** p<0.05, *** p<0.01.".into());
    t
}

pub fn capm_table(title: &str, rows: &[(String, CapmResult)]) -> Table {
    let mut t = Table::new(
        title,
        &[
            "portfolio",
            "alpha_bp",
            "t_alpha",
            "beta",
            "se_beta",
            "t_beta",
            "r2",
            "n",
        ],
    );
    for (label, r) in rows {
        t.push(vec![
            Cell::text(label.as_str()),
            Cell::num(r.alpha, format!("{}{}", sig3(r.alpha), stars(r.p_alpha))),
            Cell::num(r.t_alpha, t_paren(r.t_alpha)),
            Cell::num(r.beta, format!("{}{}", sig3(r.beta), stars(r.p_beta))),
            Cell::num(r.se_beta, sig3(r.se_beta)),
            Cell::num(r.t_beta, t_paren(r.t_beta)),
            Cell::num(r.r_squared, fixed(r.r_squared, 3)),
            Cell::count(r.n),
        ]);
    }
    t.notes
        .push("OLS with conventional standard errors; * p<0.10, ** p<0.05, *** p<0.01.".into());
    t
}

pub fn beta_difference_table(title: &str, rows: &[(String, BetaDifference)]) -> Table {
    let mut t = Table::new(title, &["portfolio", "abs_diff", "se_diff", "t", "p_one_sided"]);
    for (label, d) in rows {
        t.push(vec![
            Cell::text(label.as_str()),
            Cell::num(d.diff, sig3(d.diff)),
            Cell::num(d.se, sig3(d.se)),
            Cell::num(d.z, fixed(d.z, 2)),
            Cell::num(d.p, p4(d.p)),
        ]);
    }
    t.notes
        .push("In-sample vs out-of-sample market beta, normal approximation.".into());
    t
}
