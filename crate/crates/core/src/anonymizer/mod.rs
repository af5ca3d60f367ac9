//! Company-identifier detection and replacement in headlines.
//!
//! The official name is cleaned of punctuation and corporate suffixes, then
//! every character window of the headline (from the cleaned name's length down
//! to a minimum) is scored against it with a token-based InDel similarity.
//! Windows above the threshold, exact case-sensitive acronym hits, and
//! whole-token alias hits are replaced by a fixed token.

mod distance;
mod spans;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::CompanyIdentity;

pub use distance::{
    indel_distance, lcs_len, normalized_indel_similarity, token_set_indel_similarity, token_sort_indel_similarity,
    token_split, TokenSplit,
};
pub use spans::{find_company_spans, window_similarity};

pub const DEFAULT_REPLACEMENT: &str = "Blahblahblah";

pub const DEFAULT_SUFFIXES: [&str; 12] = [
    "Inc",
    "Incorporated",
    "LLC",
    "Ltd",
    "Limited",
    "Corp",
    "Corporation",
    "Co",
    "Company",
    "PLC",
    "Holdings",
    "Group",
];

const GENERIC_TOKENS: &str = include_str!("../../data/generic_tokens.txt");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnonymizeError {
    #[error("company name {0:?} is empty after cleaning")]
    DegenerateName(String),
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
}

pub fn default_generic_tokens() -> BTreeSet<String> {
    GENERIC_TOKENS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Windows must score strictly above this (0..=100).
    pub similarity_threshold: f64,
    pub replacement_token: String,
    pub suffix_list: Vec<String>,
    /// Shortest window length tried by the partial-match pass, in characters.
    pub min_window: usize,
    /// Lowercase tokens that never justify a partial match on their own.
    pub generic_tokens: BTreeSet<String>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: 80.0,
            replacement_token: DEFAULT_REPLACEMENT.to_string(),
            suffix_list: DEFAULT_SUFFIXES.iter().map(|s| s.to_string()).collect(),
            min_window: 3,
            generic_tokens: default_generic_tokens(),
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), AnonymizeError> {
        if !(0.0..=100.0).contains(&self.similarity_threshold) {
            return Err(AnonymizeError::InvalidConfig(format!(
                "similarity_threshold {} not in [0, 100]",
                self.similarity_threshold
            )));
        }
        if self.replacement_token.trim().is_empty() {
            return Err(AnonymizeError::InvalidConfig("replacement_token is empty".into()));
        }
        if self.min_window == 0 {
            return Err(AnonymizeError::InvalidConfig("min_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    /// Window as long as the cleaned name.
    Name,
    /// Shorter window.
    Partial,
    Acronym,
    Alias,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::Name => "name",
            MatchKind::Partial => "partial",
            MatchKind::Acronym => "acronym",
            MatchKind::Alias => "alias",
        }
    }
}

/// Byte range of the original text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: MatchKind,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizationResult {
    pub original_text: String,
    pub replaced_text: String,
    pub spans: Vec<Span>,
    pub modified: bool,
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Strips punctuation and trailing corporate suffixes, collapsing whitespace.
pub fn clean_company_name(official_name: &str, suffix_list: &[String]) -> Result<String, AnonymizeError> {
    let stripped: String = official_name.chars().filter(|c| !is_punctuation(*c)).collect();
    let mut words: Vec<&str> = stripped.split_whitespace().collect();
    while let Some(last) = words.last() {
        if suffix_list.iter().any(|s| s.eq_ignore_ascii_case(last)) {
            words.pop();
        } else {
            break;
        }
    }
    if words.is_empty() {
        return Err(AnonymizeError::DegenerateName(official_name.to_string()));
    }
    Ok(words.join(" "))
}

/// Uppercase word initials for names of two or more words.
pub fn derive_acronym(cleaned_name: &str) -> Option<String> {
    let words: Vec<&str> = cleaned_name.split_whitespace().collect();
    if words.len() < 2 {
        return None;
    }
    Some(
        words
            .iter()
            .filter_map(|w| w.chars().next())
            .flat_map(char::to_uppercase)
            .collect(),
    )
}

/// Replaces every name, acronym and alias occurrence with the replacement token.
pub fn anonymize(
    headline_text: &str,
    identity: &CompanyIdentity,
    config: &MatchConfig,
) -> Result<AnonymizationResult, AnonymizeError> {
    if identity.cleaned_name.trim().is_empty() {
        return Err(AnonymizeError::DegenerateName(identity.official_name.clone()));
    }
    // Longer spans win overlaps, so "Microsoft Word" beats "Microsoft".
    let mut candidates = find_company_spans(headline_text, identity, config);
    candidates.extend(spans::alias_spans(headline_text, &identity.aliases));
    candidates.sort_by_key(|s| (std::cmp::Reverse(s.end - s.start), s.start));
    let mut spans: Vec<Span> = Vec::with_capacity(candidates.len());
    for span in candidates {
        if !spans.iter().any(|s| s.overlaps(&span)) {
            spans.push(span);
        }
    }
    spans.sort_by_key(|s| s.start);

    let mut replaced = String::with_capacity(headline_text.len());
    let mut cursor = 0;
    for s in &spans {
        replaced.push_str(&headline_text[cursor..s.start]);
        replaced.push_str(&config.replacement_token);
        cursor = s.end;
    }
    replaced.push_str(&headline_text[cursor..]);
    Ok(AnonymizationResult {
        original_text: headline_text.to_string(),
        replaced_text: replaced,
        modified: !spans.is_empty(),
        spans,
    })
}
