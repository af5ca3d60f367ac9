//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p newsbias --test acceptance`.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{brute_sandwich, panel};
use newsbias::anonymizer::{anonymize, indel_distance, token_sort_indel_similarity, window_similarity, MatchConfig};
use newsbias::corpus::CompanyIdentity;
use newsbias::pipeline::toy::write_toy_corpus;
use newsbias::pipeline::{RunOptions, Runner, Stage};
use newsbias::scorer::Score;
use newsbias::stats::panel::{panel_fe_fit, PanelIndex};
use newsbias::stats::{
    beta_difference_test, capm_regression, classification_table, independent_t_test, paired_t_test,
    panel_fe_regression, stacked_sur, ClassificationObservation, ClassificationTable, ScoreColumn,
};
use newsbias::synthlab::{run_bias_lab, FirmPrior, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Check = Result<String, String>;

type Snapshot = Vec<(String, Vec<u8>)>;

type Criterion = fn() -> Check;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, took: Duration) -> Result<(), String> {
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/anonymization"))
}

fn copy_files(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        if e.path().is_file() {
            fs::copy(e.path(), to.join(e.file_name())).unwrap();
        }
    }
}

fn column(path: &Path, name: &str) -> Vec<(String, String)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[i].to_string())
        })
        .collect()
}

fn snapshot(dir: &Path) -> Snapshot {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_file())
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn anonymization_fixtures() -> Check {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    copy_files(fixture_dir(), dir.path());
    Runner::from_path(&dir.path().join("newsbias.toml"), RunOptions::default())
        .map_err(|e| e.to_string())?
        .run(Some(Stage::Anonymize))
        .map_err(|e| e.to_string())?;
    let took = t.elapsed();
    let got = column(&dir.path().join("out/replaced_headlines.csv"), "text");
    let want = column(&fixture_dir().join("expected_replaced.csv"), "replaced_text");
    ensure(got.len() == 5, || format!("{} rows", got.len()))?;
    for ((gid, g), (wid, w)) in got.iter().zip(&want) {
        ensure(gid == wid && g.as_bytes() == w.as_bytes(), || {
            format!("{gid}: {g:?} != {w:?}")
        })?;
    }
    within(Duration::from_secs(1), took)?;
    Ok(format!("5/5 rows byte-exact in {took:.2?}"))
}

fn lcs_brute(a: &[u8], b: &[u8]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            dp[i][j] = if a[i - 1] == b[j - 1] {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    dp[a.len()][b.len()]
}

fn string_distance_oracle() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let word = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.random_range(0..=12);
        (0..n).map(|_| b"abcd"[rng.random_range(0..4)] as char).collect()
    };
    for _ in 0..1000 {
        let (a, b) = (word(&mut rng), word(&mut rng));
        let want = a.len() + b.len() - 2 * lcs_brute(a.as_bytes(), b.as_bytes());
        ensure(indel_distance(&a, &b) == want, || format!("indel({a:?}, {b:?})"))?;
    }
    let vocab = [
        "acme", "corp", "holdings", "north", "star", "bank", "of", "america", "a", "b",
    ];
    for _ in 0..500 {
        let n = rng.random_range(1..6);
        let mut toks: Vec<&str> = (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect();
        let other: Vec<&str> = (0..rng.random_range(1..6))
            .map(|_| vocab[rng.random_range(0..vocab.len())])
            .collect();
        let (a, o) = (toks.join(" "), other.join(" "));
        let (x, y) = (token_sort_indel_similarity(&a, &o), token_sort_indel_similarity(&o, &a));
        ensure(x == y, || format!("asymmetric on {a:?} / {o:?}: {x} vs {y}"))?;
        for i in (1..toks.len()).rev() {
            toks.swap(i, rng.random_range(0..=i));
        }
        let s = token_sort_indel_similarity(&a, &toks.join(" "));
        ensure(s == 100.0, || format!("permutation of {a:?} scored {s}"))?;
    }
    let took = t.elapsed();
    within(Duration::from_secs(5), took)?;
    Ok(format!(
        "1000 indel pairs, 500 symmetry/permutation cases in {took:.2?}"
    ))
}

fn costco_threshold() -> Check {
    let config = MatchConfig::default();
    let id = CompanyIdentity::new("COST", "Costco Wholesale Corporation", Vec::new(), &config.suffix_list)
        .map_err(|e| e.to_string())?;
    let score = window_similarity("Costco", &id.cleaned_name, &config);
    ensure(score > config.similarity_threshold, || format!("score {score}"))?;
    let r = anonymize("Costco raises membership fees as sales climb", &id, &config).map_err(|e| e.to_string())?;
    ensure(!r.replaced_text.contains("Costco"), || r.replaced_text.clone())?;
    Ok(format!(
        "\"Costco\" vs {:?} scores {score:.1}: {:?}",
        id.cleaned_name, r.replaced_text
    ))
}

fn textbook_p(t: f64, df: f64) -> f64 {
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn statistical_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_p = 0.0f64;
    for k in 0..100 {
        let n = rng.random_range(3..80);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-120.0..120.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..140.0)).collect();
        let nf = n as f64;
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let md = d.iter().sum::<f64>() / nf;
        let sd = (d.iter().map(|v| (v - md).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        let t = md / (sd / nf.sqrt());
        let r = paired_t_test(&a, &b).map_err(|e| e.to_string())?;
        ensure(close(r.t, t, 1e-9), || format!("paired t, dataset {k}: {} vs {t}", r.t))?;
        let p = textbook_p(t, nf - 1.0);
        ensure((r.p - p).abs() < 1e-6, || {
            format!("paired p, dataset {k}: {} vs {p}", r.p)
        })?;
        worst_p = worst_p.max((r.p - p).abs());

        let m = rng.random_range(3..80);
        let c: Vec<f64> = (0..m).map(|_| rng.random_range(-60.0..160.0)).collect();
        let moments = |v: &[f64]| {
            let mu = v.iter().sum::<f64>() / v.len() as f64;
            (
                mu,
                v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0),
            )
        };
        let ((ma, va), (mc, vc)) = (moments(&a), moments(&c));
        let (qa, qc) = (va / nf, vc / m as f64);
        let t = (ma - mc) / (qa + qc).sqrt();
        let df = (qa + qc).powi(2) / (qa * qa / (nf - 1.0) + qc * qc / (m as f64 - 1.0));
        let w = independent_t_test(&a, &c, true).map_err(|e| e.to_string())?;
        ensure(close(w.t, t, 1e-9) && close(w.df, df, 1e-9), || {
            format!("welch, dataset {k}")
        })?;
        let p = textbook_p(t, df);
        ensure((w.p - p).abs() < 1e-6, || {
            format!("welch p, dataset {k}: {} vs {p}", w.p)
        })?;
        worst_p = worst_p.max((w.p - p).abs());

        // Simple OLS from raw sums.
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-300.0..300.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 5.0 + 0.8 * v + rng.random_range(-200.0..200.0))
            .collect();
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(u, v)| u * v).sum();
        let beta = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
        let alpha = (sy - beta * sx) / nf;
        let ssr: f64 = x.iter().zip(&y).map(|(u, v)| (v - alpha - beta * u).powi(2)).sum();
        let s2 = ssr / (nf - 2.0);
        let se_beta = (nf * s2 / (nf * sxx - sx * sx)).sqrt();
        let se_alpha = (s2 * sxx / (nf * sxx - sx * sx)).sqrt();
        let cr = capm_regression(&y, &x).map_err(|e| e.to_string())?;
        ensure(
            close(cr.alpha, alpha, 1e-10)
                && close(cr.beta, beta, 1e-10)
                && close(cr.se_alpha, se_alpha, 1e-10)
                && close(cr.se_beta, se_beta, 1e-10),
            || format!("capm, dataset {k}: {cr:?}"),
        )?;
    }
    Ok(format!("100 datasets, max p-value gap {worst_p:.1e}"))
}

fn sur_equivalence() -> Check {
    for seed in 0..20u64 {
        let p = panel(10 + seed as usize, 7 + seed as usize % 4, 0.2, 500 + seed);
        let s = stacked_sur(&p).map_err(|e| e.to_string())?;
        let a = panel_fe_regression(&p, ScoreColumn::Original).map_err(|e| e.to_string())?;
        let b = panel_fe_regression(&p, ScoreColumn::Replaced).map_err(|e| e.to_string())?;
        ensure(
            (s.beta_orig() - a.coefficients[0]).abs() < 1e-8 && (s.beta_rep() - b.coefficients[0]).abs() < 1e-8,
            || {
                format!(
                    "panel {seed}: stacked ({}, {}) vs separate ({}, {})",
                    s.beta_orig(),
                    s.beta_rep(),
                    a.coefficients[0],
                    b.coefficients[0]
                )
            },
        )?;
    }
    let mut same = panel(20, 10, 0.1, 9);
    for o in &mut same {
        o.x_rep = o.x_orig;
    }
    let s = stacked_sur(&same).map_err(|e| e.to_string())?;
    ensure(s.wald.abs() < 1e-9 && (s.p - 1.0).abs() < 1e-9, || {
        format!("identical columns: wald {} p {}", s.wald, s.p)
    })?;
    Ok("20 panels within 1e-8; identical columns give Wald 0, p 1".into())
}

fn clustered_covariance() -> Check {
    let p = panel(50, 40, 0.0, 6);
    let idx = PanelIndex::new(&p);
    let fit = panel_fe_fit(&p, ScoreColumn::Original).map_err(|e| e.to_string())?;
    let pair: Vec<usize> = idx
        .firm
        .iter()
        .zip(&idx.time)
        .map(|(f, t)| f * idx.n_times + t)
        .collect();
    let want = brute_sandwich(&fit.x, &fit.residuals, &idx.firm) + brute_sandwich(&fit.x, &fit.residuals, &idx.time)
        - brute_sandwich(&fit.x, &fit.residuals, &pair);
    let got = &fit.clusters.combined;
    let gap = got
        .iter()
        .zip(want.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(gap < 1e-8, || format!("max gap {gap:e}"))?;
    Ok(format!("50 x 40 panel, max gap {gap:.1e}"))
}

fn beta_difference() -> Check {
    let d = beta_difference_test(0.429, 0.0420, 0.273, 0.0532).map_err(|e| e.to_string())?;
    ensure((d.se - 0.0678).abs() <= 0.0005 && (d.z - 2.30).abs() <= 0.01, || {
        format!("se {} t {}", d.se, d.z)
    })?;
    Ok(format!("se_diff {:.4}, t {:.3}", d.se, d.z))
}

fn lab_config(seed: u64, lookahead: f64, distraction: f64) -> SynthConfig {
    SynthConfig {
        n_firms: 500,
        n_days: 250,
        seed,
        lookahead_strength: lookahead,
        distraction_strength: distraction,
        famous_fraction: 0.3,
        news_rate: 0.1,
        firm_prior: FirmPrior::Misleading,
        ..SynthConfig::default()
    }
}

fn bias_lab() -> Check {
    let t = Instant::now();
    let mc = MatchConfig::default();
    let look = run_bias_lab(&lab_config(0, 0.3, 0.0), &mc).map_err(|e| e.to_string())?;
    ensure(look.gap_bp > 0.0 && look.long_short.p < 0.01, || {
        format!("look-ahead: gap {} p {}", look.gap_bp, look.long_short.p)
    })?;
    let mut false_positives = 0;
    for seed in 0..20 {
        let null = run_bias_lab(&lab_config(seed, 0.0, 0.0), &mc).map_err(|e| e.to_string())?;
        if null.long_short.p < 0.05 {
            false_positives += 1;
        }
    }
    ensure(false_positives <= 2, || {
        format!("{false_positives} false positives in 20 seeds")
    })?;
    let distract = run_bias_lab(&lab_config(0, 0.0, 0.5), &mc).map_err(|e| e.to_string())?;
    ensure(distract.gap_bp <= 0.0 && distract.long_short.p < 0.05, || {
        format!("distraction: gap {} p {}", distract.gap_bp, distract.long_short.p)
    })?;
    let took = t.elapsed();
    within(Duration::from_secs(60), took)?;
    Ok(format!(
        "look-ahead gap {:+.2} bp (t {:.1}); null {false_positives}/20 rejections; distraction gap {:+.2} bp (t {:.1}); {took:.1?}",
        look.gap_bp, look.long_short.t, distract.gap_bp, distract.long_short.t
    ))
}

fn toy_run(dir: &Path, offline: bool) -> Result<Snapshot, String> {
    let cfg = dir.join("newsbias.toml");
    if !cfg.exists() {
        write_toy_corpus(dir).map_err(|e| e.to_string())?;
    }
    let options = RunOptions { offline, seed: None };
    Runner::from_path(&cfg, options)
        .and_then(|r| r.run(None))
        .map_err(|e| e.to_string())?;
    Ok(snapshot(&dir.join("out")))
}

fn toy_determinism() -> Check {
    let t = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = toy_run(a.path(), false)?;
    let second = toy_run(b.path(), false)?;
    let replay = toy_run(a.path(), true)?;
    for (name, other) in [("second run", &second), ("offline replay", &replay)] {
        ensure(first.len() == other.len(), || format!("{name}: file count differs"))?;
        for ((fa, ba), (fb, bb)) in first.iter().zip(other) {
            ensure(fa == fb && ba == bb, || format!("{name}: {fa} differs"))?;
        }
    }
    ensure(first.iter().any(|(f, _)| f == "cumulative_returns.csv"), || {
        "no cumulative returns".into()
    })?;
    let took = t.elapsed();
    within(Duration::from_secs(30), took)?;
    Ok(format!(
        "{} files identical over 2 runs and an offline replay in {took:.2?}",
        first.len()
    ))
}

fn check_table(table: &ClassificationTable, what: &str) -> Result<(), String> {
    let total: f64 = table.cells.iter().map(|c| c.proportion).sum();
    ensure((total - 1.0).abs() <= 1e-12, || {
        format!("{what}: proportions sum to {total}")
    })?;
    for c in &table.cells {
        let zero_orig = c.orig_category.as_str() == "zero" && c.orig_ret_bp != 0.0;
        let zero_rep = c.rep_category.as_str() == "zero" && c.rep_ret_bp != 0.0;
        ensure(!zero_orig && !zero_rep, || {
            format!("{what}: zero cell with nonzero return {c:?}")
        })?;
    }
    Ok(())
}

fn stats_tables(dir: &Path) -> Result<Vec<ClassificationTable>, String> {
    let text = fs::read_to_string(dir.join("stats.json")).map_err(|e| e.to_string())?;
    let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let samples = v["samples"].as_array().ok_or("stats.json has no samples")?;
    samples
        .iter()
        .filter(|s| s["classification"]["status"] == "ok")
        .map(|s| serde_json::from_value(s["classification"]["value"].clone()).map_err(|e| e.to_string()))
        .collect()
}

fn classification_integrity() -> Check {
    let mut checked = 0;
    let toy = tempfile::tempdir().unwrap();
    toy_run(toy.path(), false)?;
    let synth = tempfile::tempdir().unwrap();
    let cfg = synth.path().join("newsbias.toml");
    fs::copy(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/synthetic.toml"),
        &cfg,
    )
    .unwrap();
    Runner::from_path(&cfg, RunOptions::default())
        .and_then(|r| r.run(None))
        .map_err(|e| e.to_string())?;
    for (what, out) in [
        ("toy", toy.path().join("out")),
        ("synthetic", synth.path().join("synthetic/out")),
    ] {
        for table in stats_tables(&out)? {
            check_table(&table, what)?;
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let scores = [Score::Negative, Score::Neutral, Score::Positive];
    for k in 0..200 {
        let obs: Vec<ClassificationObservation> = (0..rng.random_range(1..300))
            .map(|_| ClassificationObservation {
                orig: scores[rng.random_range(0..3)],
                rep: scores[rng.random_range(0..3)],
                return_bp: rng.random_range(-500.0..500.0),
            })
            .collect();
        check_table(
            &classification_table(&obs).map_err(|e| e.to_string())?,
            &format!("random set {k}"),
        )?;
        checked += 1;
    }
    ensure(checked > 200, || "no pipeline tables checked".into())?;
    Ok(format!("{checked} tables"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("anonymization fixtures", anonymization_fixtures),
        ("string-distance oracle", string_distance_oracle),
        ("threshold behavior", costco_threshold),
        ("statistical oracles", statistical_oracles),
        ("SUR equivalence", sur_equivalence),
        ("clustered covariance", clustered_covariance),
        ("beta-difference arithmetic", beta_difference),
        ("bias-lab sensitivity", bias_lab),
        ("end-to-end determinism", toy_determinism),
        ("classification integrity", classification_integrity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
