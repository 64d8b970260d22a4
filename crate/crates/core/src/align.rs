//! One-to-one mention alignment between a key and a response annotation of
//! the same text.
//!
//! Exact span matches are taken first. A remaining key mention may then pair
//! with a response mention whose span contains the key's `MIN` head and lies
//! inside the key's full span. Mentions without `MIN` use their whole span
//! as the head, so for them only exact matches apply.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::AlignError;
use crate::sgml::{AnnotatedDocument, Mention, Span};
use crate::text::{first_difference, rfind_chars, CharIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchKind {
    Exact,
    /// Paired through `MIN` tolerance; spans differ.
    Min,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub key: String,
    pub response: String,
    pub kind: MatchKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionAlignment {
    pub pairs: Vec<AlignedPair>,
    pub unmatched_key: Vec<String>,
    pub unmatched_response: Vec<String>,
}

impl MentionAlignment {
    pub fn key_to_response(&self) -> HashMap<&str, &str> {
        self.pairs.iter().map(|p| (p.key.as_str(), p.response.as_str())).collect()
    }

    pub fn response_to_key(&self) -> HashMap<&str, &str> {
        self.pairs.iter().map(|p| (p.response.as_str(), p.key.as_str())).collect()
    }

    /// Same alignment with key and response roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| AlignedPair {
                    key: p.response.clone(),
                    response: p.key.clone(),
                    kind: p.kind,
                })
                .collect(),
            unmatched_key: self.unmatched_response.clone(),
            unmatched_response: self.unmatched_key.clone(),
        }
    }
}

/// Offsets of the mention's head: the last occurrence of `MIN` inside the
/// span, or the whole span when there is no `MIN`.
pub fn resolve_min(doc: &AnnotatedDocument, mention: &Mention) -> Result<Span, AlignError> {
    head_span(mention, doc.span_text(mention.span))
}

/// [`resolve_min`] given the mention's already-sliced text.
pub(crate) fn head_span(mention: &Mention, text: &str) -> Result<Span, AlignError> {
    let Some(min) = &mention.min_head else {
        return Ok(mention.span);
    };
    let at = rfind_chars(text, min)
        .filter(|_| !min.is_empty())
        .ok_or_else(|| AlignError::AmbiguousMin {
            id: mention.id.clone(),
            min: min.clone(),
        })?;
    let start = mention.span.start + at;
    Ok(Span::new(start, start + min.chars().count()))
}

fn check_text(a: &AnnotatedDocument, b: &AnnotatedDocument) -> Result<(), AlignError> {
    match first_difference(&a.base_text, &b.base_text) {
        Some(at) => Err(AlignError::TextMismatch { at }),
        None => Ok(()),
    }
}

fn heads(doc: &AnnotatedDocument) -> Result<Vec<Span>, AlignError> {
    let text = CharIndex::new(&doc.base_text);
    doc.mentions
        .iter()
        .map(|m| head_span(m, text.slice(m.span.start, m.span.end)))
        .collect()
}

/// `outer`'s MIN rule admits `inner`: `head ⊆ inner ⊆ outer`.
fn min_compatible(outer: Span, outer_head: Span, inner: Span) -> bool {
    inner.contains(&outer_head) && outer.contains(&inner)
}

struct Matcher<'a> {
    key: &'a AnnotatedDocument,
    response: &'a AnnotatedDocument,
    key_used: Vec<bool>,
    resp_used: Vec<bool>,
    pairs: Vec<(usize, usize, MatchKind)>,
}

impl<'a> Matcher<'a> {
    fn new(key: &'a AnnotatedDocument, response: &'a AnnotatedDocument) -> Self {
        Self {
            key,
            response,
            key_used: vec![false; key.mentions.len()],
            resp_used: vec![false; response.mentions.len()],
            pairs: Vec::new(),
        }
    }

    fn take(&mut self, k: usize, r: usize, kind: MatchKind) {
        self.key_used[k] = true;
        self.resp_used[r] = true;
        self.pairs.push((k, r, kind));
    }

    fn exact_pass(&mut self) {
        let mut by_span: HashMap<Span, Vec<usize>> = HashMap::new();
        for (j, m) in self.response.mentions.iter().enumerate() {
            by_span.entry(m.span).or_default().push(j);
        }
        for k in 0..self.key.mentions.len() {
            let span = self.key.mentions[k].span;
            let hit = by_span
                .get(&span)
                .and_then(|c| c.iter().copied().find(|&j| !self.resp_used[j]));
            if let Some(j) = hit {
                self.take(k, j, MatchKind::Exact);
            }
        }
    }

    fn finish(mut self) -> MentionAlignment {
        self.pairs.sort_by_key(|&(k, _, _)| k);
        MentionAlignment {
            pairs: self
                .pairs
                .iter()
                .map(|&(k, r, kind)| AlignedPair {
                    key: self.key.mentions[k].id.clone(),
                    response: self.response.mentions[r].id.clone(),
                    kind,
                })
                .collect(),
            unmatched_key: unused_ids(self.key, &self.key_used),
            unmatched_response: unused_ids(self.response, &self.resp_used),
        }
    }
}

fn unused_ids(doc: &AnnotatedDocument, used: &[bool]) -> Vec<String> {
    doc.mentions
        .iter()
        .zip(used)
        .filter(|(_, u)| !**u)
        .map(|(m, _)| m.id.clone())
        .collect()
}

/// Aligns response mentions to key mentions; key `MIN` heads drive tolerance.
///
/// Key mentions are visited in document order. Among several admissible
/// response mentions the shortest wins, then the leftmost.
pub fn align(key: &AnnotatedDocument, response: &AnnotatedDocument) -> Result<MentionAlignment, AlignError> {
    check_text(key, response)?;
    let key_heads = heads(key)?;
    let mut m = Matcher::new(key, response);
    m.exact_pass();
    for k in 0..key.mentions.len() {
        if m.key_used[k] {
            continue;
        }
        let kspan = key.mentions[k].span;
        let best = response
            .mentions
            .iter()
            .enumerate()
            .filter(|(j, r)| !m.resp_used[*j] && min_compatible(kspan, key_heads[k], r.span))
            .min_by_key(|(_, r)| (r.span.len(), r.span.start, r.id.as_str()))
            .map(|(j, _)| j);
        if let Some(j) = best {
            m.take(k, j, MatchKind::Min);
        }
    }
    Ok(m.finish())
}

/// Role-symmetric alignment for comparing two peer annotations: a pair is
/// admissible when either side's `MIN` rule admits the other, and candidate
/// pairs are taken greedily in an order that does not depend on which
/// document is passed first. `align_symmetric(b, a)` is `align_symmetric(a, b).swapped()`.
pub fn align_symmetric(a: &AnnotatedDocument, b: &AnnotatedDocument) -> Result<MentionAlignment, AlignError> {
    check_text(a, b)?;
    let a_heads = heads(a)?;
    let b_heads = heads(b)?;
    let mut m = Matcher::new(a, b);
    m.exact_pass();

    let mut candidates = Vec::new();
    for (i, am) in a.mentions.iter().enumerate() {
        if m.key_used[i] {
            continue;
        }
        for (j, bm) in b.mentions.iter().enumerate() {
            if m.resp_used[j] {
                continue;
            }
            if min_compatible(am.span, a_heads[i], bm.span) || min_compatible(bm.span, b_heads[j], am.span) {
                let (lo, hi) = if am.span <= bm.span {
                    (am.span, bm.span)
                } else {
                    (bm.span, am.span)
                };
                candidates.push((am.span.len() + bm.span.len(), lo, hi, i, j));
            }
        }
    }
    candidates.sort();
    for (_, _, _, i, j) in candidates {
        if !m.key_used[i] && !m.resp_used[j] {
            m.take(i, j, MatchKind::Min);
        }
    }
    Ok(m.finish())
}
