use std::cmp::Ordering;

use super::distance::{similarity_chars, similarity_from_lcs};
use super::{MatchConfig, MatchKind, Span};
use crate::corpus::CompanyIdentity;

const BUCKETS: usize = 64;

/// A run of alphanumeric characters, in char indices. A lone `s` after an
/// apostrophe ("AMD's") is not a word, so possessives survive replacement.
#[derive(Debug, Clone, Copy)]
struct Word {
    start: usize,
    end: usize,
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

fn words(chars: &[char]) -> Vec<Word> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].is_alphanumeric() {
            i += 1;
        }
        let possessive = i - start == 1
            && matches!(chars[start], 's' | 'S')
            && start >= 2
            && is_apostrophe(chars[start - 1])
            && chars[start - 2].is_alphanumeric();
        if !possessive {
            out.push(Word { start, end: i });
        }
    }
    out
}

/// Lowercased text with punctuation dropped and whitespace collapsed, plus the
/// normalized offset of every raw char boundary.
struct Normalized {
    chars: Vec<char>,
    offsets: Vec<usize>,
}

fn normalize(raw: &[char]) -> Normalized {
    let mut chars = Vec::with_capacity(raw.len());
    let mut offsets = Vec::with_capacity(raw.len() + 1);
    for &c in raw {
        offsets.push(chars.len());
        if c.is_whitespace() {
            if chars.last() != Some(&' ') {
                chars.push(' ');
            }
        } else if c.is_alphanumeric() {
            chars.extend(c.to_lowercase());
        }
    }
    offsets.push(chars.len());
    Normalized { chars, offsets }
}

fn bucket(c: char) -> usize {
    c as usize % BUCKETS
}

struct NameModel {
    chars: Vec<char>,
    tokens: Vec<Vec<char>>,
    hist: [u16; BUCKETS],
}

fn is_generic(token: &[char], config: &MatchConfig) -> bool {
    let t: String = token.iter().collect();
    config.generic_tokens.contains(&t)
}

impl NameModel {
    fn new(cleaned_name: &str) -> Self {
        let raw: Vec<char> = cleaned_name.chars().collect();
        let norm = normalize(&raw);
        let text: String = norm.chars.iter().collect();
        let text = text.trim().to_string();
        let mut toks: Vec<&str> = text.split(' ').filter(|t| !t.is_empty()).collect();
        toks.sort_unstable();
        let chars: Vec<char> = text.chars().collect();
        let mut hist = [0u16; BUCKETS];
        for c in &chars {
            hist[bucket(*c)] += 1;
        }
        Self {
            tokens: toks.iter().map(|t| t.chars().collect()).collect(),
            chars,
            hist,
        }
    }
}

struct Candidate {
    score: f64,
    window_len: usize,
    window_start: usize,
    span: (usize, usize),
}

/// Score of one normalized window against the name, or `None` when no route
/// clears the threshold. A route through shared tokens only counts when a
/// shared token is distinctive or the whole name is shared.
///
/// Same result as running the token split on the window and the name: the
/// common tokens prefix both rebuilt sides, so the common routes need only
/// lengths, and the pair route is skipped when its histogram bound cannot win.
fn score_window(
    window: &[char],
    shared: usize,
    name: &NameModel,
    generic: &[bool],
    config: &MatchConfig,
) -> Option<f64> {
    let mut toks: Vec<&[char]> = window.split(|c| *c == ' ').filter(|t| !t.is_empty()).collect();
    toks.sort_unstable();
    let (mut common, mut rest_a, mut rest_b) = (Vec::new(), Vec::new(), Vec::new());
    let mut distinctive = false;
    let (mut i, mut j) = (0, 0);
    while i < toks.len() && j < name.tokens.len() {
        match toks[i].cmp(&name.tokens[j][..]) {
            Ordering::Equal => {
                common.push(toks[i]);
                distinctive |= !generic[j];
                i += 1;
                j += 1;
            }
            Ordering::Less => {
                rest_a.push(toks[i]);
                i += 1;
            }
            Ordering::Greater => {
                rest_b.push(&name.tokens[j][..]);
                j += 1;
            }
        }
    }
    rest_a.extend_from_slice(&toks[i..]);
    rest_b.extend(name.tokens[j..].iter().map(|t| &t[..]));
    let joined_len = |parts: &[&[char]]| parts.iter().map(|t| t.len()).sum::<usize>() + parts.len().saturating_sub(1);
    let lc = joined_len(&common);
    let side = |rest: &[&[char]]| match (lc, joined_len(rest)) {
        (0, r) => r,
        (c, 0) => c,
        (c, r) => c + 1 + r,
    };
    let (ll, lr) = (side(&rest_a), side(&rest_b));

    let mut best = f64::NEG_INFINITY;
    if !common.is_empty() && (distinctive || rest_b.is_empty()) {
        best = similarity_from_lcs(lc, ll, lc).max(similarity_from_lcs(lc, lr, lc));
    }
    let bound = similarity_from_lcs(ll, lr, shared.min(ll).min(lr));
    if bound > best.max(config.similarity_threshold) {
        let join = |rest: &[&[char]]| {
            let mut out: Vec<char> = Vec::with_capacity(ll.max(lr));
            for t in common.iter().chain(rest) {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.extend_from_slice(t);
            }
            out
        };
        best = best.max(similarity_chars(&join(&rest_a), &join(&rest_b)));
    }
    (best > config.similarity_threshold).then_some(best)
}

/// Similarity used for headline windows; exposed for diagnostics and the demo.
pub fn window_similarity(window: &str, cleaned_name: &str, config: &MatchConfig) -> f64 {
    let name = NameModel::new(cleaned_name);
    let raw: Vec<char> = window.chars().collect();
    let norm: String = normalize(&raw).chars.iter().collect();
    let norm: Vec<char> = norm.trim().chars().collect();
    let relaxed = MatchConfig {
        similarity_threshold: -1.0,
        ..config.clone()
    };
    let generic: Vec<bool> = name.tokens.iter().map(|t| is_generic(t, config)).collect();
    score_window(&norm, norm.len(), &name, &generic, &relaxed).unwrap_or(0.0)
}

fn contains_at(hay: &[char], needle: &[char], at: usize) -> bool {
    hay.len() >= at + needle.len() && &hay[at..at + needle.len()] == needle
}

/// Name, partial-name and acronym spans of `identity` in `headline_text`.
pub fn find_company_spans(headline_text: &str, identity: &CompanyIdentity, config: &MatchConfig) -> Vec<Span> {
    let raw: Vec<char> = headline_text.chars().collect();
    let byte_at: Vec<usize> = headline_text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(headline_text.len()))
        .collect();
    let words = words(&raw);
    let norm = normalize(&raw);
    let name = NameModel::new(&identity.cleaned_name);
    let name_len = identity.cleaned_name.chars().count();
    let lb = name.chars.len();
    let threshold = config.similarity_threshold;

    // Where each name token occurs verbatim in the normalized text; a window
    // can only share a token with the name if it covers one of these.
    let mut occurrences: Vec<(usize, usize)> = Vec::new();
    for tok in &name.tokens {
        for at in 0..norm.chars.len() {
            if contains_at(&norm.chars, tok, at) {
                occurrences.push((at, at + tok.len()));
            }
        }
    }

    // overlap[a * (width + 1) + k]: shared histogram mass of norm[a..a + k]
    // with the name, for k up to width.
    let width = name_len + 2;
    let mut overlap = vec![0u16; norm.chars.len() * (width + 1)];
    for a in 0..norm.chars.len() {
        let row = &mut overlap[a * (width + 1)..(a + 1) * (width + 1)];
        let mut hist = [0u16; BUCKETS];
        let mut shared = 0u16;
        for (k, c) in norm.chars[a..].iter().take(width).enumerate() {
            let bk = bucket(*c);
            if hist[bk] < name.hist[bk] {
                shared += 1;
            }
            hist[bk] += 1;
            row[k + 1] = shared;
        }
    }

    let generic: Vec<bool> = name.tokens.iter().map(|t| is_generic(t, config)).collect();
    let mut candidates = Vec::new();
    let shortest = config.min_window.min(name_len).max(1);
    if name_len > 0 && !raw.is_empty() {
        for len in (shortest..=name_len.min(raw.len())).rev() {
            for start in 0..=raw.len() - len {
                let (mut a, mut b) = (norm.offsets[start], norm.offsets[start + len]);
                while a < b && norm.chars[a] == ' ' {
                    a += 1;
                }
                while b > a && norm.chars[b - 1] == ' ' {
                    b -= 1;
                }
                if a == b {
                    continue;
                }
                let la = b - a;
                // LCS is bounded by the shared character histogram.
                let shared = match la <= width {
                    true => overlap[a * (width + 1) + la] as usize,
                    false => {
                        let mut hist = [0u16; BUCKETS];
                        for c in &norm.chars[a..b] {
                            hist[bucket(*c)] += 1;
                        }
                        hist.iter().zip(&name.hist).map(|(x, y)| (*x).min(*y) as usize).sum()
                    }
                };
                let may_share = occurrences.iter().any(|&(s, e)| s >= a && e <= b);
                if !may_share && 200.0 * shared.min(la).min(lb) as f64 / (la + lb) as f64 <= threshold {
                    continue;
                }
                let Some(score) = score_window(&norm.chars[a..b], shared, &name, &generic, config) else {
                    continue;
                };
                if let Some(span) = snap(&words, start, start + len) {
                    candidates.push(Candidate {
                        score,
                        window_len: len,
                        window_start: start,
                        span,
                    });
                }
            }
        }
    }

    candidates.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(Ordering::Equal)
            .then(y.window_len.cmp(&x.window_len))
            .then(x.window_start.cmp(&y.window_start))
    });
    let mut chosen: Vec<Span> = Vec::new();
    for c in candidates {
        let span = Span {
            start: byte_at[c.span.0],
            end: byte_at[c.span.1],
            kind: if c.window_len == name_len {
                MatchKind::Name
            } else {
                MatchKind::Partial
            },
        };
        if !chosen.iter().any(|s| s.overlaps(&span)) {
            chosen.push(span);
        }
    }

    if let Some(acronym) = &identity.acronym {
        let acr: Vec<char> = acronym.chars().collect();
        for w in &words {
            if raw[w.start..w.end] == acr[..] {
                let span = Span {
                    start: byte_at[w.start],
                    end: byte_at[w.end],
                    kind: MatchKind::Acronym,
                };
                if !chosen.iter().any(|s| s.overlaps(&span)) {
                    chosen.push(span);
                }
            }
        }
    }
    chosen.sort_by_key(|s| s.start);
    chosen
}

/// Expands or shrinks a char window to whole words: a word is kept when the
/// window covers at least half of it.
fn snap(words: &[Word], start: usize, end: usize) -> Option<(usize, usize)> {
    let mut first = None;
    let mut last = None;
    for w in words {
        if w.end <= start {
            continue;
        }
        if w.start >= end {
            break;
        }
        let covered = end.min(w.end) - start.max(w.start);
        if 2 * covered >= w.end - w.start {
            first.get_or_insert(w.start);
            last = Some(w.end);
        }
    }
    Some((first?, last?))
}

/// Whole-word, case-insensitive alias occurrences, longest alias first.
pub(crate) fn alias_spans(headline_text: &str, aliases: &[String]) -> Vec<Span> {
    let raw: Vec<char> = headline_text.chars().collect();
    let byte_at: Vec<usize> = headline_text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(headline_text.len()))
        .collect();
    let text_words = words(&raw);
    let lowered: Vec<String> = text_words
        .iter()
        .map(|w| raw[w.start..w.end].iter().flat_map(|c| c.to_lowercase()).collect())
        .collect();

    let mut patterns: Vec<Vec<String>> = aliases
        .iter()
        .map(|a| {
            let chars: Vec<char> = a.chars().collect();
            words(&chars)
                .iter()
                .map(|w| chars[w.start..w.end].iter().flat_map(|c| c.to_lowercase()).collect())
                .collect::<Vec<String>>()
        })
        .filter(|p: &Vec<String>| !p.is_empty())
        .collect();
    patterns.sort_by(|x, y| {
        let lx: usize = x.iter().map(|t| t.chars().count()).sum();
        let ly: usize = y.iter().map(|t| t.chars().count()).sum();
        y.len().cmp(&x.len()).then(ly.cmp(&lx)).then(x.cmp(y))
    });
    patterns.dedup();

    let mut out: Vec<Span> = Vec::new();
    for p in &patterns {
        if p.len() > lowered.len() {
            continue;
        }
        for i in 0..=lowered.len() - p.len() {
            if lowered[i..i + p.len()] == p[..] {
                let span = Span {
                    start: byte_at[text_words[i].start],
                    end: byte_at[text_words[i + p.len() - 1].end],
                    kind: MatchKind::Alias,
                };
                if !out.iter().any(|s| s.overlaps(&span)) {
                    out.push(span);
                }
            }
        }
    }
    out.sort_by_key(|s| s.start);
    out
}
