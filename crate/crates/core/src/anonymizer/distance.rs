//! InDel distance and the token-based similarity scores built on it.

use std::collections::HashMap;

/// Longest common subsequence length over characters.
///
/// Bit-parallel row update (one machine word per 64 pattern characters):
/// `V' = (V + (V & M)) | (V & !M)`, where `M` is the match mask of the text
/// character. Zero bits of the final `V` count the LCS.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    let (pattern, text) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = pattern.len();
    if m == 0 {
        return 0;
    }
    if m <= 64 && pattern.iter().all(char::is_ascii) && text.iter().all(char::is_ascii) {
        return lcs_ascii_word(pattern, text);
    }
    lcs_blocks(pattern, text)
}

fn lcs_ascii_word(pattern: &[char], text: &[char]) -> usize {
    let mut masks = [0u64; 128];
    for (i, c) in pattern.iter().enumerate() {
        masks[*c as usize] |= 1u64 << i;
    }
    let m = pattern.len();
    let full = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let mut v = full;
    for c in text {
        let u = v & masks[*c as usize];
        v = (v.wrapping_add(u) | (v & !u)) & full;
    }
    m - v.count_ones() as usize
}

fn lcs_blocks(pattern: &[char], text: &[char]) -> usize {
    let m = pattern.len();
    let words = m.div_ceil(64);
    let mut masks: HashMap<char, Vec<u64>> = HashMap::new();
    for (i, c) in pattern.iter().enumerate() {
        masks.entry(*c).or_insert_with(|| vec![0; words])[i / 64] |= 1u64 << (i % 64);
    }
    let tail = m % 64;
    let last_mask = if tail == 0 { u64::MAX } else { (1u64 << tail) - 1 };
    let mut v = vec![u64::MAX; words];
    v[words - 1] = last_mask;
    let empty = vec![0u64; words];
    for c in text {
        let mk = masks.get(c).unwrap_or(&empty);
        let mut carry = 0u64;
        for w in 0..words {
            let u = v[w] & mk[w];
            let (s1, c1) = v[w].overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = (c1 || c2) as u64;
            v[w] = s2 | (v[w] & !u);
        }
        v[words - 1] &= last_mask;
    }
    m - v.iter().map(|w| w.count_ones() as usize).sum::<usize>()
}

/// Number of single-character insertions and deletions turning `a` into `b`.
pub fn indel_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    indel_chars(&a, &b)
}

pub(crate) fn indel_chars(a: &[char], b: &[char]) -> usize {
    a.len() + b.len() - 2 * lcs_len(a, b)
}

/// `100 * (1 - indel / (|a| + |b|))`; two empty strings are identical.
pub fn normalized_indel_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    similarity_chars(&a, &b)
}

pub(crate) fn similarity_chars(a: &[char], b: &[char]) -> f64 {
    similarity_from_lcs(a.len(), b.len(), lcs_len(a, b))
}

pub(crate) fn similarity_from_lcs(la: usize, lb: usize, lcs: usize) -> f64 {
    let total = la + lb;
    if total == 0 {
        return 100.0;
    }
    100.0 * (1.0 - (total - 2 * lcs) as f64 / total as f64)
}

/// Token decomposition shared by the token-sort and token-set scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSplit {
    /// Sorted multiset intersection, space-joined.
    pub common: String,
    /// Common tokens followed by the sorted remainder of the first input.
    pub left: String,
    /// Common tokens followed by the sorted remainder of the second input.
    pub right: String,
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(|t| t.to_lowercase()).collect()
}

pub fn token_split(a: &str, b: &str) -> TokenSplit {
    let mut ta = tokens(a);
    let mut tb = tokens(b);
    ta.sort_unstable();
    tb.sort_unstable();
    let (mut common, mut rest_a, mut rest_b) = (Vec::new(), Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < ta.len() && j < tb.len() {
        match ta[i].cmp(&tb[j]) {
            std::cmp::Ordering::Equal => {
                common.push(ta[i].as_str());
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                rest_a.push(ta[i].as_str());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                rest_b.push(tb[j].as_str());
                j += 1;
            }
        }
    }
    rest_a.extend(ta[i..].iter().map(String::as_str));
    rest_b.extend(tb[j..].iter().map(String::as_str));
    let join = |head: &[&str], tail: &[&str]| head.iter().chain(tail.iter()).copied().collect::<Vec<_>>().join(" ");
    TokenSplit {
        common: common.join(" "),
        left: join(&common, &rest_a),
        right: join(&common, &rest_b),
    }
}

/// Order-insensitive similarity in `[0, 100]`: both strings are rebuilt as
/// sorted common tokens followed by their own sorted leftovers, then compared
/// with the normalized InDel similarity.
pub fn token_sort_indel_similarity(a: &str, b: &str) -> f64 {
    let split = token_split(a, b);
    normalized_indel_similarity(&split.left, &split.right)
}

/// Like [`token_sort_indel_similarity`], but also compares the isolated common
/// tokens against each rebuilt side and keeps the best of the three scores.
/// A string whose tokens all occur in the other scores 100.
pub fn token_set_indel_similarity(a: &str, b: &str) -> f64 {
    let split = token_split(a, b);
    let pair = normalized_indel_similarity(&split.left, &split.right);
    if split.common.is_empty() {
        return pair;
    }
    pair.max(normalized_indel_similarity(&split.common, &split.left))
        .max(normalized_indel_similarity(&split.common, &split.right))
}
