//! Product and service aliases per company, fetched from a knowledge-graph
//! search service and kept in a hand-editable JSON-lines file.

#[cfg(feature = "remote")]
mod remote;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::CompanyId;
use crate::scorer::{BackendError, RetryPolicy};

#[cfg(feature = "remote")]
pub use remote::KnowledgeGraphClient;

pub const DEFAULT_KG_ENDPOINT: &str = "https://kgsearch.googleapis.com/v1/entities:search";

pub const MAX_ALIASES: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum AliasError {
    #[error("knowledge graph credential: {0}")]
    Credential(String),
    #[error("knowledge graph unavailable for {query:?} after {attempts} attempt(s): {message}")]
    RemoteUnavailable {
        query: String,
        attempts: usize,
        message: String,
    },
    #[error("alias store {path}, record {index}: {message}")]
    StoreFormat {
        path: String,
        index: usize,
        message: String,
    },
    #[error("alias store {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AliasSource {
    Remote,
    Manual,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasRecord {
    pub company_id: CompanyId,
    pub query: String,
    pub aliases: Vec<String>,
    pub fetched_at: DateTime<Utc>,
    pub source: AliasSource,
}

/// Trims, drops empties and duplicates, keeps the first `MAX_ALIASES`.
pub fn normalize_aliases<I, S>(aliases: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out: Vec<String> = Vec::new();
    for a in aliases {
        let a = a.as_ref().trim();
        if !a.is_empty() && !out.iter().any(|x| x == a) {
            out.push(a.to_string());
            if out.len() == MAX_ALIASES {
                break;
            }
        }
    }
    out
}

pub fn now_utc() -> DateTime<Utc> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    DateTime::from_timestamp(secs as i64, 0).unwrap_or_default()
}

impl AliasRecord {
    pub fn new(
        company_id: CompanyId,
        query: impl Into<String>,
        aliases: impl IntoIterator<Item = String>,
        fetched_at: DateTime<Utc>,
        source: AliasSource,
    ) -> Self {
        Self {
            company_id,
            query: query.into(),
            aliases: normalize_aliases(aliases),
            fetched_at,
            source,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.aliases.len() > MAX_ALIASES {
            return Err(format!("{} aliases, at most {MAX_ALIASES} allowed", self.aliases.len()));
        }
        for (i, a) in self.aliases.iter().enumerate() {
            if a.trim().is_empty() {
                return Err(format!("alias {i} is empty"));
            }
            if self.aliases[..i].contains(a) {
                return Err(format!("duplicate alias {a:?}"));
            }
        }
        Ok(())
    }
}

/// JSON-lines file, one record per line. Writes go through one lock and
/// replace the file atomically.
#[derive(Debug)]
pub struct AliasStore {
    path: PathBuf,
    writer: Mutex<()>,
}

impl AliasStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            writer: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: std::io::Error) -> AliasError {
        AliasError::Io {
            path: self.path.display().to_string(),
            source,
        }
    }

    /// Missing file reads as empty. Blank lines and `#` lines are skipped;
    /// record indices count records, starting at 0.
    pub fn load(&self) -> Result<Vec<AliasRecord>, AliasError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io(e)),
        };
        let mut out: Vec<AliasRecord> = Vec::new();
        let lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        for (index, line) in lines.enumerate() {
            let bad = |message: String| AliasError::StoreFormat {
                path: self.path.display().to_string(),
                index,
                message,
            };
            let rec: AliasRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            rec.check().map_err(bad)?;
            match out.iter_mut().find(|r| r.company_id == rec.company_id) {
                Some(slot) => *slot = rec,
                None => out.push(rec),
            }
        }
        Ok(out)
    }

    /// Duplicate company ids keep the first position and the last content.
    pub fn save(&self, records: &[AliasRecord]) -> Result<(), AliasError> {
        let mut merged: Vec<&AliasRecord> = Vec::new();
        for r in records {
            match merged.iter_mut().find(|m| m.company_id == r.company_id) {
                Some(slot) => *slot = r,
                None => merged.push(r),
            }
        }
        let mut body = String::new();
        for r in merged {
            body.push_str(&serde_json::to_string(r).expect("alias record serializes"));
            body.push('\n');
        }
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| self.io(e))?;
        }
        let tmp = self.path.with_extension(format!("tmp{}", std::process::id()));
        let mut f = fs::File::create(&tmp).map_err(|e| self.io(e))?;
        f.write_all(body.as_bytes())
            .and_then(|_| f.sync_all())
            .map_err(|e| self.io(e))?;
        fs::rename(&tmp, &self.path).map_err(|e| self.io(e))
    }

    pub fn upsert(&self, record: AliasRecord) -> Result<(), AliasError> {
        let mut all = self.load()?;
        all.push(record);
        self.save(&all)
    }

    pub fn get(&self, company_id: &CompanyId) -> Result<Option<AliasRecord>, AliasError> {
        Ok(self.load()?.into_iter().find(|r| &r.company_id == company_id))
    }
}

/// A search service returning entity names in relevance order.
pub trait KnowledgeGraph: Send + Sync {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError>;
}

pub fn fetch_aliases(
    graph: &dyn KnowledgeGraph,
    company_id: &CompanyId,
    query: &str,
    limit: usize,
    retry: &RetryPolicy,
) -> Result<AliasRecord, AliasError> {
    let limit = limit.min(MAX_ALIASES);
    let names = if limit == 0 {
        Vec::new()
    } else {
        let (result, attempts) = retry.run(|| graph.search(query, limit));
        match result {
            Ok(n) => n,
            Err(BackendError::Credential(m)) => return Err(AliasError::Credential(m)),
            Err(e) => {
                return Err(AliasError::RemoteUnavailable {
                    query: query.to_string(),
                    attempts,
                    message: e.to_string(),
                })
            }
        }
    };
    let mut rec = AliasRecord::new(company_id.clone(), query, names, now_utc(), AliasSource::Remote);
    rec.aliases.truncate(limit);
    Ok(rec)
}

/// Fetches every `(company, query)` with at most `parallelism` requests in
/// flight. Results follow input order.
pub fn fetch_all(
    graph: &dyn KnowledgeGraph,
    queries: &[(CompanyId, String)],
    limit: usize,
    retry: &RetryPolicy,
    parallelism: usize,
) -> Vec<Result<AliasRecord, AliasError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<AliasRecord, AliasError>>>> = queries.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..parallelism.max(1).min(queries.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((c, q)) = queries.get(i) else {
                    break;
                };
                *slots[i].lock().unwrap() = Some(fetch_aliases(graph, c, q, limit, retry));
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("slot filled"))
        .collect()
}
