use std::time::Duration;

use serde::Deserialize;

use super::KnowledgeGraph;
use crate::scorer::BackendError;

/// HTTP client for an entity search endpoint taking `query`, `limit` and
/// `key` parameters and answering `{"itemListElement": [{"result": {"name"}}]}`.
pub struct KnowledgeGraphClient {
    endpoint: String,
    key: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct SearchResponse {
    #[serde(rename = "itemListElement", default)]
    items: Vec<Item>,
}

#[derive(Deserialize)]
struct Item {
    result: ItemResult,
}

#[derive(Deserialize)]
struct ItemResult {
    name: Option<String>,
}

impl KnowledgeGraphClient {
    pub fn new(endpoint: impl Into<String>, key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            key: key.into(),
            agent,
        }
    }

    pub fn from_env(endpoint: impl Into<String>, key_env: &str) -> Result<Self, BackendError> {
        let key = std::env::var(key_env)
            .map_err(|_| BackendError::Credential(format!("environment variable {key_env} is not set")))?;
        Ok(Self::new(endpoint, key))
    }
}

impl KnowledgeGraph for KnowledgeGraphClient {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        let mut resp = self
            .agent
            .get(&self.endpoint)
            .query("query", query)
            .query("limit", limit.to_string())
            .query("key", &self.key)
            .call()
            .map_err(crate::scorer::classify_http_error)?;
        let parsed: SearchResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Fatal(format!("malformed search response: {e}")))?;
        Ok(parsed.items.into_iter().filter_map(|i| i.result.name).collect())
    }
}
