//! End-to-end runner: config file in, flat-file intermediates and report
//! tables out.
//!
//! Each stage reads the previous stage's files from the output directory, so
//! any stage can be rerun on its own.

pub mod analysis;
pub mod files;
pub mod stages;
pub mod toy;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::aliasstore::{AliasError, AliasStore, DEFAULT_KG_ENDPOINT};
use crate::anonymizer::MatchConfig;
use crate::backtest::{EmptyDayConvention, Strategy};
use crate::corpus::{
    load_calendar, load_companies, load_headlines, load_market_series, load_prices, CompanyId, CompanyIdentity,
    CorpusError, ReturnPanel, TradingCalendar,
};
use crate::scorer::{
    ChatCompletionConfig, LexiconBackend, ReplayBackend, ResponseCache, RetryPolicy, ScorerError, ScoringBackend,
};
use crate::synthlab::{generate_world, OracleBackend, SynthConfig, SynthError, SynthWorld};

use analysis::{analyze, cumulative_csv, daily_csv, render_bundle, AnalysisInput, SampleWindow, StatsBundle};
use files::io;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Alias(#[from] AliasError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    pub fn data(message: impl Into<String>) -> Self {
        PipelineError::Data(message.into())
    }

    /// 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}

impl From<SynthError> for PipelineError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Config(m) => PipelineError::Config(m),
            SynthError::Pipeline(p) => p,
            SynthError::Stats(s) => PipelineError::Data(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Synth,
    Anonymize,
    Score,
    Backtest,
    Stats,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Synth,
        Stage::Anonymize,
        Stage::Score,
        Stage::Backtest,
        Stage::Stats,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Anonymize => "anonymize",
            Stage::Score => "score",
            Stage::Backtest => "backtest",
            Stage::Stats => "stats",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub prices: PathBuf,
    pub headlines: PathBuf,
    pub companies: PathBuf,
    pub calendar: PathBuf,
    /// Optional `date,rm_minus_rf_bp` series for the CAPM regressions.
    pub market: Option<PathBuf>,
    pub alias_store: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            prices: "prices.csv".into(),
            headlines: "headlines.csv".into(),
            companies: "companies.csv".into(),
            calendar: "calendar.txt".into(),
            market: None,
            alias_store: None,
            cache_dir: "cache".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Lexicon,
    Chat,
    /// The synthetic-world oracle; needs a `[synthetic]` section.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub max_in_flight: usize,
    pub retry_attempts: usize,
    pub retry_base_delay_ms: u64,
    pub chat: ChatCompletionConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Lexicon,
            max_in_flight: 8,
            retry_attempts: 3,
            retry_base_delay_ms: 500,
            chat: ChatCompletionConfig::default(),
        }
    }
}

impl BackendConfig {
    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.retry_attempts,
            base_delay: Duration::from_millis(self.retry_base_delay_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AliasConfig {
    /// Query the knowledge graph for companies missing from the alias store.
    pub fetch: bool,
    pub endpoint: String,
    pub api_key_env: String,
    pub limit: usize,
    pub parallelism: usize,
}

impl Default for AliasConfig {
    fn default() -> Self {
        Self {
            fetch: false,
            endpoint: DEFAULT_KG_ENDPOINT.into(),
            api_key_env: "KG_API_KEY".into(),
            limit: 20,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub in_sample_start: NaiveDate,
    pub in_sample_end: NaiveDate,
    pub out_of_sample_end: NaiveDate,
}

impl Default for SampleConfig {
    fn default() -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self {
            in_sample_start: d(2015, 1, 1),
            in_sample_end: d(2021, 9, 30),
            out_of_sample_end: d(2022, 12, 31),
        }
    }
}

impl SampleConfig {
    pub fn windows(&self) -> Vec<SampleWindow> {
        vec![
            SampleWindow {
                name: "in_sample".into(),
                start: self.in_sample_start,
                end: self.in_sample_end,
            },
            SampleWindow {
                name: "out_of_sample".into(),
                start: self.in_sample_end.succ_opt().expect("date in range"),
                end: self.out_of_sample_end,
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub strategies: Vec<Strategy>,
    pub empty_day: EmptyDayConvention,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            empty_day: EmptyDayConvention::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub backend: BackendConfig,
    pub aliases: AliasConfig,
    pub matching: MatchConfig,
    pub samples: SampleConfig,
    pub backtest: BacktestConfig,
    /// When present, the `synth` stage writes a generated world to the
    /// corpus paths.
    pub synthetic: Option<SynthConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let s = &self.samples;
        if !(s.in_sample_start <= s.in_sample_end && s.in_sample_end < s.out_of_sample_end) {
            return Err(PipelineError::Config(format!(
                "sample boundaries out of order: {} / {} / {}",
                s.in_sample_start, s.in_sample_end, s.out_of_sample_end
            )));
        }
        if self.backend.max_in_flight == 0 || self.backend.retry_attempts == 0 {
            return Err(PipelineError::Config(
                "backend.max_in_flight and backend.retry_attempts must be at least 1".into(),
            ));
        }
        if self.backtest.strategies.is_empty() {
            return Err(PipelineError::Config("backtest.strategies is empty".into()));
        }
        self.matching
            .validate()
            .map_err(|e| PipelineError::Config(format!("matching: {e}")))?;
        if let Some(sc) = &self.synthetic {
            sc.validate()?;
        }
        if self.backend.kind == BackendKind::Oracle && self.synthetic.is_none() {
            return Err(PipelineError::Config(
                "the oracle backend needs a [synthetic] section".into(),
            ));
        }
        Ok(())
    }

    /// Backend id recorded in caches and manifests.
    pub fn backend_id(&self) -> String {
        match self.backend.kind {
            BackendKind::Lexicon => LexiconBackend::ID.to_string(),
            BackendKind::Chat => self.backend.chat.backend_id(),
            BackendKind::Oracle => self.synthetic.as_ref().map(|s| s.oracle_id()).unwrap_or_default(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        files::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Score only from the response cache; never call the network.
    pub offline: bool,
    /// Replaces `synthetic.seed`.
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_digest: String,
    backend_id: String,
    inputs: BTreeMap<&'a str, String>,
    outputs: BTreeMap<String, String>,
}

pub struct Runner {
    config: RunConfig,
    base_dir: PathBuf,
    options: RunOptions,
}

impl Runner {
    pub fn new(
        mut config: RunConfig,
        base_dir: impl Into<PathBuf>,
        options: RunOptions,
    ) -> Result<Self, PipelineError> {
        if let (Some(seed), Some(sc)) = (options.seed, config.synthetic.as_mut()) {
            sc.seed = seed;
        }
        config.validate()?;
        Ok(Self {
            config,
            base_dir: base_dir.into(),
            options,
        })
    }

    /// Reads a TOML config; paths resolve against its directory.
    pub fn from_path(path: &Path, options: RunOptions) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = RunConfig::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(config, base, options)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.output_dir)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }

    /// Runs one stage, or with `None` every stage in order (`synth` only when
    /// the config has a `[synthetic]` section). A failure leaves a `FAILED`
    /// marker next to whatever outputs were already written.
    pub fn run(&self, only: Option<Stage>) -> Result<(), PipelineError> {
        let out = self.output_dir();
        fs::create_dir_all(&out).map_err(io(&out))?;
        let marker = out.join(files::FAILED);
        if marker.exists() {
            fs::remove_file(&marker).map_err(io(&marker))?;
        }
        let stages: Vec<Stage> = match only {
            Some(s) => vec![s],
            None => Stage::ALL
                .into_iter()
                .filter(|s| *s != Stage::Synth || self.config.synthetic.is_some())
                .collect(),
        };
        for stage in stages {
            if let Err(e) = self
                .check_inputs(stage, only.is_none())
                .and_then(|_| self.run_stage(stage))
            {
                let note = format!("stage: {stage}\nerror: {}\n", err_chain(&e));
                files::write_atomic(&marker, note.as_bytes())?;
                return Err(PipelineError::Stage {
                    stage,
                    source: Box::new(e),
                });
            }
            self.write_manifest()?;
        }
        Ok(())
    }

    fn corpus_paths(&self) -> Vec<(&'static str, PathBuf)> {
        let p = &self.config.paths;
        let mut v = vec![
            ("prices", self.resolve(&p.prices)),
            ("headlines", self.resolve(&p.headlines)),
            ("companies", self.resolve(&p.companies)),
            ("calendar", self.resolve(&p.calendar)),
        ];
        if let Some(m) = &p.market {
            v.push(("market", self.resolve(m)));
        }
        v
    }

    /// Missing inputs are config errors and are reported before any work.
    fn check_inputs(&self, stage: Stage, full_run: bool) -> Result<(), PipelineError> {
        let require = |label: &str, path: &Path| {
            if path.is_file() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!(
                    "{label} file {} not found",
                    path.display()
                )))
            }
        };
        match stage {
            Stage::Synth => {
                if self.config.synthetic.is_none() {
                    return Err(PipelineError::Config(
                        "the synth stage needs a [synthetic] section".into(),
                    ));
                }
                return Ok(());
            }
            Stage::Report => return require("stats", &self.out(files::STATS)),
            _ => {}
        }
        if full_run {
            for (label, path) in self.corpus_paths() {
                require(label, &path)?;
            }
        } else if stage == Stage::Anonymize {
            for (label, path) in self.corpus_paths() {
                if matches!(label, "headlines" | "companies" | "calendar") {
                    require(label, &path)?;
                }
            }
        }
        if self.options.offline && matches!(stage, Stage::Score) {
            let dir = self.resolve(&self.config.paths.cache_dir);
            if !dir.is_dir() {
                return Err(PipelineError::Config(format!(
                    "offline scoring needs the response cache at {}",
                    dir.display()
                )));
            }
        }
        if full_run {
            return Ok(());
        }
        let needs: &[&str] = match stage {
            Stage::Score => &[files::ANONYMIZED],
            Stage::Backtest => &[files::ANONYMIZED, files::SCORES],
            Stage::Stats => &[files::ANONYMIZED, files::SCORES, files::SIGNALS],
            _ => &[],
        };
        for n in needs {
            require("intermediate", &self.out(n))?;
        }
        if matches!(stage, Stage::Score | Stage::Backtest | Stage::Stats) {
            let p = &self.config.paths;
            require("companies", &self.resolve(&p.companies))?;
            require("calendar", &self.resolve(&p.calendar))?;
            if stage != Stage::Score {
                require("prices", &self.resolve(&p.prices))?;
            }
        }
        Ok(())
    }

    pub fn run_stage(&self, stage: Stage) -> Result<(), PipelineError> {
        match stage {
            Stage::Synth => self.synth(),
            Stage::Anonymize => self.anonymize(),
            Stage::Score => self.score(),
            Stage::Backtest => self.backtest(),
            Stage::Stats => self.stats(),
            Stage::Report => self.report(),
        }
    }

    fn world(&self) -> Result<SynthWorld, PipelineError> {
        let sc = self
            .config
            .synthetic
            .as_ref()
            .ok_or_else(|| PipelineError::Config("no [synthetic] section".into()))?;
        Ok(generate_world(sc)?)
    }

    fn synth(&self) -> Result<(), PipelineError> {
        let world = self.world()?;
        let p = &self.config.paths;
        let texts: Vec<(&crate::corpus::Headline, &str)> =
            world.headlines.iter().map(|h| (h, h.text.as_str())).collect();
        files::write_headlines(&self.resolve(&p.headlines), texts)?;
        files::write_prices(&self.resolve(&p.prices), &world.prices)?;
        files::write_companies(
            &self.resolve(&p.companies),
            world
                .firms
                .iter()
                .map(|f| (&f.identity.company_id, f.identity.official_name.as_str())),
        )?;
        files::write_calendar(&self.resolve(&p.calendar), &world.calendar)?;
        let mut digests = BTreeMap::new();
        for (label, path) in self.corpus_paths().into_iter().filter(|(l, _)| *l != "market") {
            digests.insert(label, files::file_digest(&path)?);
        }
        let body = serde_json::json!({
            "synthetic": world.config,
            "files": digests,
        });
        let mut text = serde_json::to_string_pretty(&body).expect("json");
        text.push('\n');
        files::write_atomic(&self.out("synth_manifest.json"), text.as_bytes())
    }

    fn calendar(&self) -> Result<TradingCalendar, PipelineError> {
        Ok(load_calendar(&self.resolve(&self.config.paths.calendar))?)
    }

    /// Identities with the stored aliases; fetches missing ones first when
    /// configured and online.
    fn identities(&self, fetch: bool) -> Result<BTreeMap<CompanyId, CompanyIdentity>, PipelineError> {
        let companies = load_companies(&self.resolve(&self.config.paths.companies))?;
        let store = self
            .config
            .paths
            .alias_store
            .as_ref()
            .map(|p| AliasStore::new(self.resolve(p)));
        if fetch && self.config.aliases.fetch && !self.options.offline {
            let store = store
                .as_ref()
                .ok_or_else(|| PipelineError::Config("aliases.fetch needs paths.alias_store".into()))?;
            self.fetch_aliases(store, &companies)?;
        }
        let stored: BTreeMap<CompanyId, Vec<String>> = match &store {
            Some(s) => s.load()?.into_iter().map(|r| (r.company_id, r.aliases)).collect(),
            None => BTreeMap::new(),
        };
        companies
            .into_iter()
            .map(|(id, name)| {
                let aliases = stored.get(&id).cloned().unwrap_or_default();
                let identity = CompanyIdentity::new(id.clone(), &name, aliases, &self.config.matching.suffix_list)
                    .map_err(|e| PipelineError::data(format!("company {}: {e}", id.as_str())))?;
                Ok((id, identity))
            })
            .collect()
    }

    #[cfg(feature = "remote")]
    fn fetch_aliases(&self, store: &AliasStore, companies: &[(CompanyId, String)]) -> Result<(), PipelineError> {
        use crate::aliasstore::{fetch_all, KnowledgeGraphClient};
        let have: std::collections::BTreeSet<CompanyId> = store.load()?.into_iter().map(|r| r.company_id).collect();
        let missing: Vec<(CompanyId, String)> = companies.iter().filter(|(c, _)| !have.contains(c)).cloned().collect();
        if missing.is_empty() {
            return Ok(());
        }
        let a = &self.config.aliases;
        let client = KnowledgeGraphClient::from_env(a.endpoint.clone(), &a.api_key_env)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut records = store.load()?;
        for r in fetch_all(&client, &missing, a.limit, &self.config.backend.retry(), a.parallelism) {
            records.push(r?);
        }
        store.save(&records)?;
        Ok(())
    }

    #[cfg(not(feature = "remote"))]
    fn fetch_aliases(&self, _store: &AliasStore, _companies: &[(CompanyId, String)]) -> Result<(), PipelineError> {
        Err(PipelineError::Config(
            "aliases.fetch needs a build with the `remote` feature".into(),
        ))
    }

    fn anonymize(&self) -> Result<(), PipelineError> {
        let identities = self.identities(true)?;
        let calendar = self.calendar()?;
        let headlines = load_headlines(&self.resolve(&self.config.paths.headlines))?;
        let anonymized = stages::anonymize_headlines(&headlines, &identities, &calendar, &self.config.matching)?;
        files::write_anonymized(&self.out(files::ANONYMIZED), &anonymized)?;
        let replaced: Vec<(&crate::corpus::Headline, &str)> = headlines
            .iter()
            .zip(&anonymized)
            .map(|(h, a)| (h, a.replaced_text.as_str()))
            .collect();
        files::write_headlines(&self.out(files::REPLACED_HEADLINES), replaced)
    }

    fn score(&self) -> Result<(), PipelineError> {
        let identities = self.identities(false)?;
        let anonymized = files::read_anonymized(&self.out(files::ANONYMIZED))?;
        let cache = ResponseCache::open(self.resolve(&self.config.paths.cache_dir))?;
        let world;
        let backend: Box<dyn ScoringBackend + '_> = if self.options.offline {
            Box::new(ReplayBackend::new(self.config.backend_id()))
        } else {
            match self.config.backend.kind {
                BackendKind::Lexicon => Box::new(LexiconBackend::bundled()),
                BackendKind::Chat => chat_backend(&self.config.backend.chat)?,
                BackendKind::Oracle => {
                    world = self.world()?;
                    Box::new(OracleBackend::new(&world, &self.config.matching.replacement_token))
                }
            }
        };
        let scores = stages::score_headlines(
            &anonymized,
            &identities,
            &self.config.matching.replacement_token,
            backend.as_ref(),
            Some(&cache),
            &self.config.backend.retry(),
            self.config.backend.max_in_flight,
        )?;
        files::write_scores(&self.out(files::SCORES), &scores)
    }

    fn panel(&self) -> Result<ReturnPanel, PipelineError> {
        let calendar = self.calendar()?;
        let prices = load_prices(&self.resolve(&self.config.paths.prices))?;
        let mut panel = ReturnPanel::from_stock_days(&prices, &calendar);
        if let Some(m) = &self.config.paths.market {
            panel.set_market_series(load_market_series(&self.resolve(m))?);
        }
        Ok(panel)
    }

    fn backtest_result(
        &self,
        panel: &ReturnPanel,
        signals: &[crate::backtest::CompanyPeriodSignal],
        anonymized: &[stages::AnonymizedHeadline],
    ) -> crate::backtest::BacktestResult {
        let s = &self.config.samples;
        stages::backtest_window(
            panel.calendar(),
            s.in_sample_start,
            s.out_of_sample_end,
            signals,
            anonymized,
            panel,
        )
    }

    fn backtest(&self) -> Result<(), PipelineError> {
        let anonymized = files::read_anonymized(&self.out(files::ANONYMIZED))?;
        let scores = files::read_scores(&self.out(files::SCORES))?;
        let signals = stages::build_signals(&anonymized, &scores)?;
        files::write_signals(&self.out(files::SIGNALS), &signals)?;
        let panel = self.panel()?;
        let bt = self.backtest_result(&panel, &signals, &anonymized);
        files::write_atomic(&self.out(files::DAILY_RETURNS), daily_csv(&bt).as_bytes())?;
        let cum = cumulative_csv(&bt, &self.config.backtest.strategies, self.config.backtest.empty_day);
        files::write_atomic(&self.out(files::CUMULATIVE_RETURNS), cum.as_bytes())
    }

    fn stats(&self) -> Result<(), PipelineError> {
        let anonymized = files::read_anonymized(&self.out(files::ANONYMIZED))?;
        let scores = files::read_scores(&self.out(files::SCORES))?;
        let signals = files::read_signals(&self.out(files::SIGNALS))?;
        let panel = self.panel()?;
        let bt = self.backtest_result(&panel, &signals, &anonymized);
        let bundle = analyze(
            &AnalysisInput {
                anonymized: &anonymized,
                scores: &scores,
                signals: &signals,
                backtest: &bt,
                panel: &panel,
                strategies: &self.config.backtest.strategies,
                empty_day: self.config.backtest.empty_day,
            },
            &self.config.samples.windows(),
        );
        let mut text = serde_json::to_string_pretty(&bundle).expect("stats serialize");
        text.push('\n');
        files::write_atomic(&self.out(files::STATS), text.as_bytes())
    }

    fn report(&self) -> Result<(), PipelineError> {
        let path = self.out(files::STATS);
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let bundle: StatsBundle =
            serde_json::from_str(&text).map_err(|e| PipelineError::data(format!("{}: {e}", path.display())))?;
        let mut all = String::new();
        for t in render_bundle(&bundle) {
            files::write_atomic(&self.out(&format!("{}.txt", t.stem)), t.text.as_bytes())?;
            files::write_atomic(&self.out(&format!("{}.csv", t.stem)), t.csv.as_bytes())?;
            if !all.is_empty() {
                all.push('\n');
            }
            all.push_str(&t.text);
        }
        files::write_atomic(&self.out(files::REPORT), all.as_bytes())
    }

    /// Digests of the config, the corpus files that exist and every file in
    /// the output directory.
    fn write_manifest(&self) -> Result<(), PipelineError> {
        let mut inputs = BTreeMap::new();
        for (label, path) in self.corpus_paths() {
            if path.is_file() {
                inputs.insert(label, files::file_digest(&path)?);
            }
        }
        let out = self.output_dir();
        let mut outputs = BTreeMap::new();
        for entry in fs::read_dir(&out).map_err(io(&out))? {
            let entry = entry.map_err(io(&out))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !entry.path().is_file() || name == files::MANIFEST || name == files::FAILED || name.ends_with(".tmp") {
                continue;
            }
            outputs.insert(name, files::file_digest(&entry.path())?);
        }
        let m = Manifest {
            config_digest: self.config.digest(),
            backend_id: self.config.backend_id(),
            inputs,
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        text.push('\n');
        files::write_atomic(&self.out(files::MANIFEST), text.as_bytes())
    }
}

#[cfg(feature = "remote")]
fn chat_backend(cfg: &ChatCompletionConfig) -> Result<Box<dyn ScoringBackend>, PipelineError> {
    let b = crate::scorer::ChatCompletionBackend::new(cfg.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(Box::new(b))
}

#[cfg(not(feature = "remote"))]
fn chat_backend(_cfg: &ChatCompletionConfig) -> Result<Box<dyn ScoringBackend>, PipelineError> {
    Err(PipelineError::Config(
        "the chat backend needs a build with the `remote` feature".into(),
    ))
}

/// Error message followed by its sources.
pub fn err_chain(e: &dyn std::error::Error) -> String {
    let mut s = e.to_string();
    let mut cur = e.source();
    while let Some(c) = cur {
        let m = c.to_string();
        if !s.contains(&m) {
            s.push_str(": ");
            s.push_str(&m);
        }
        cur = c.source();
    }
    s
}
