//! Small bundled corpus for demos and determinism checks: 200 headlines on
//! 20 made-up companies around a 2021-09-30 sample boundary.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::{files, PipelineError};
use crate::anonymizer::MatchConfig;
use crate::corpus::CompanyIdentity;
use crate::synthlab::{generate_world, SynthConfig};

pub const TOY_HEADLINES: usize = 200;

pub const TOY_CONFIG: &str = r#"# Toy corpus run with the offline lexicon scorer.
[paths]
prices = "prices.csv"
headlines = "headlines.csv"
companies = "companies.csv"
calendar = "calendar.txt"
cache_dir = "cache"
output_dir = "out"

[backend]
kind = "lexicon"
max_in_flight = 4

[samples]
in_sample_start = "2021-08-01"
in_sample_end = "2021-09-30"
out_of_sample_end = "2021-12-31"

[backtest]
strategies = ["long_only", "short_only", "long_short", "all_news"]
empty_day = "zero"
"#;

/// Firms renamed so that their names carry lexicon words; anonymizing their
/// headlines changes what the lexicon scorer sees.
const RENAMES: [(usize, &str); 3] = [
    (2, "Growth Point Systems Inc."),
    (7, "Record Harbor Foods Corp."),
    (13, "Probe Dynamics Ltd."),
];

fn replace_word(text: &str, old: &str, new: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some(i) = rest.find(old) {
        let before = rest[..i].chars().next_back();
        let after = rest[i + old.len()..].chars().next();
        out.push_str(&rest[..i]);
        if before.is_some_and(char::is_alphanumeric) || after.is_some_and(char::is_alphanumeric) {
            out.push_str(old);
        } else {
            out.push_str(new);
        }
        rest = &rest[i + old.len()..];
    }
    out.push_str(rest);
    out
}

pub fn toy_world_config() -> SynthConfig {
    SynthConfig {
        n_firms: 20,
        n_days: 65,
        seed: 20210930,
        lookahead_strength: 0.0,
        distraction_strength: 0.0,
        famous_fraction: 0.3,
        base_signal_accuracy: 0.65,
        return_vol_bp: 150.0,
        news_rate: 0.2,
        neutral_fraction: 0.25,
        start_date: NaiveDate::from_ymd_opt(2021, 8, 16).expect("valid date"),
        ..SynthConfig::default()
    }
}

/// Writes the toy corpus and `newsbias.toml` into `dir`; returns the config
/// path.
pub fn write_toy_corpus(dir: &Path) -> Result<PathBuf, PipelineError> {
    let mut world = generate_world(&toy_world_config())?;
    let suffixes = MatchConfig::default().suffix_list;
    for (i, name) in RENAMES {
        let old = world.firms[i].identity.clone();
        let new = CompanyIdentity::new(old.company_id.clone(), name, Vec::new(), &suffixes)
            .map_err(|e| PipelineError::data(e.to_string()))?;
        let first = |c: &str| c.split_whitespace().next().unwrap_or("").to_string();
        for h in world.headlines.iter_mut().filter(|h| h.company_id == old.company_id) {
            h.text = if h.text.contains(&old.cleaned_name) {
                h.text.replace(&old.cleaned_name, &new.cleaned_name)
            } else {
                replace_word(&h.text, &first(&old.cleaned_name), &first(&new.cleaned_name))
            };
        }
        world.firms[i].identity = new;
    }
    if world.headlines.len() < TOY_HEADLINES {
        return Err(PipelineError::data(format!(
            "toy world has only {} headlines",
            world.headlines.len()
        )));
    }
    let texts: Vec<String> = world
        .headlines
        .iter()
        .map(|h| match h.text.rfind(" (ref ") {
            Some(i) => h.text[..i].to_string(),
            None => h.text.clone(),
        })
        .collect();
    files::write_headlines(
        &dir.join("headlines.csv"),
        world
            .headlines
            .iter()
            .zip(&texts)
            .take(TOY_HEADLINES)
            .map(|(h, t)| (h, t.as_str())),
    )?;
    files::write_prices(&dir.join("prices.csv"), &world.prices)?;
    files::write_companies(
        &dir.join("companies.csv"),
        world
            .firms
            .iter()
            .map(|f| (&f.identity.company_id, f.identity.official_name.as_str())),
    )?;
    files::write_calendar(&dir.join("calendar.txt"), &world.calendar)?;
    let config = dir.join("newsbias.toml");
    files::write_atomic(&config, TOY_CONFIG.as_bytes())?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{RunConfig, RunOptions, Runner};

    #[test]
    fn toy_config_parses() {
        let c = RunConfig::parse(TOY_CONFIG).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn toy_corpus_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_toy_corpus(dir.path()).unwrap();
        let headlines = std::fs::read_to_string(dir.path().join("headlines.csv")).unwrap();
        assert_eq!(headlines.lines().count(), TOY_HEADLINES + 1);
        assert!(!headlines.contains("(ref "));
        Runner::from_path(&cfg, RunOptions::default())
            .unwrap()
            .run(None)
            .unwrap();
        assert!(dir.path().join("out/report.txt").is_file());
    }
}
