//! MUC-style `COREF` SGML: parsing, validation, canonical serialization and
//! zone segmentation.
//!
//! A parsed document keeps every character of the input except the `COREF`
//! tags themselves. Other markup (`<DOC>`, `<HL>`, `<P>`, ...) stays in the
//! base text verbatim and is only consulted when segmenting zones. Mention
//! offsets count Unicode scalar values of the decoded text.
//!
//! Attribute values are taken verbatim: no entity expansion is applied to
//! either text or attributes, so a `MIN` value is always a literal substring
//! of the raw span text.

use std::cmp::Reverse;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::SgmlError;
use crate::text::{byte_at, char_len, slice_chars, CharIndex};

/// Half-open `[start, end)` character range into a base text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub const fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub const fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// `self ⊇ other`.
    pub const fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub const fn contains_offset(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    pub const fn is_disjoint(&self, other: &Span) -> bool {
        self.end <= other.start || other.end <= self.start
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorefType {
    #[default]
    #[serde(rename = "IDENT")]
    Ident,
}

impl CorefType {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorefType::Ident => "IDENT",
        }
    }
}

/// One `COREF` element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub span: Span,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub ref_id: Option<String>,
    #[serde(rename = "type", default)]
    pub coref_type: CorefType,
    #[serde(rename = "min", default, skip_serializing_if = "Option::is_none")]
    pub min_head: Option<String>,
    /// Attributes other than ID/TYPE/REF/MIN (e.g. `STATUS`), upper-cased
    /// names in input order. Carried through serialization, otherwise ignored.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<(String, String)>,
}

impl Mention {
    pub fn new(id: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            id: id.into(),
            span: Span::new(start, end),
            ref_id: None,
            coref_type: CorefType::Ident,
            min_head: None,
            extra: Vec::new(),
        }
    }

    pub fn with_ref(mut self, ref_id: impl Into<String>) -> Self {
        self.ref_id = Some(ref_id.into());
        self
    }

    pub fn with_min(mut self, min: impl Into<String>) -> Self {
        self.min_head = Some(min.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZoneKind {
    Title,
    Paragraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub kind: ZoneKind,
    pub span: Span,
    /// Column index: the title is 0, paragraphs count up from 1.
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub base_text: String,
    pub zones: Vec<Zone>,
    pub mentions: Vec<Mention>,
}

impl AnnotatedDocument {
    /// Builds a document, computing zones and putting mentions in document
    /// order (start ascending, enclosing spans before enclosed ones).
    pub fn new(doc_id: impl Into<String>, base_text: impl Into<String>, mut mentions: Vec<Mention>) -> Self {
        let base_text = base_text.into();
        sort_document_order(&mut mentions);
        Self {
            doc_id: doc_id.into(),
            zones: segment_zones(&base_text),
            base_text,
            mentions,
        }
    }

    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.id == id)
    }

    pub fn text_len(&self) -> usize {
        char_len(&self.base_text)
    }

    pub fn span_text(&self, span: Span) -> &str {
        slice_chars(&self.base_text, span.start, span.end)
    }

    /// Zone holding character `offset`; offsets between zones belong to the
    /// preceding zone, offsets before the first zone to the first zone.
    pub fn zone_at(&self, offset: usize) -> Option<&Zone> {
        let n = self.zones.partition_point(|z| z.span.start <= offset);
        self.zones.get(n.saturating_sub(1))
    }

    /// Checks every document invariant.
    pub fn validate(&self) -> Result<(), SgmlError> {
        let text = CharIndex::new(&self.base_text);
        let len = self.text_len();
        let mut ids = HashSet::with_capacity(self.mentions.len());
        for m in &self.mentions {
            if m.id.is_empty() || m.id.contains('"') {
                return Err(SgmlError::BadAttribute {
                    offset: m.span.start,
                    reason: format!("invalid mention id {:?}", m.id),
                });
            }
            if !ids.insert(m.id.as_str()) {
                return Err(SgmlError::DuplicateId(m.id.clone()));
            }
            if m.span.is_empty() {
                return Err(SgmlError::EmptySpan(m.id.clone()));
            }
            if m.span.end > len {
                return Err(SgmlError::OutOfBounds {
                    id: m.id.clone(),
                    start: m.span.start,
                    end: m.span.end,
                    len,
                });
            }
        }
        for m in &self.mentions {
            if let Some(r) = &m.ref_id {
                if r == &m.id {
                    return Err(SgmlError::SelfRef(m.id.clone()));
                }
                if !ids.contains(r.as_str()) {
                    return Err(SgmlError::DanglingRef(r.clone()));
                }
            }
            if let Some(min) = &m.min_head {
                if min.is_empty() || min.contains('"') || !text.slice(m.span.start, m.span.end).contains(min.as_str()) {
                    return Err(SgmlError::MinNotInSpan {
                        id: m.id.clone(),
                        min: min.clone(),
                    });
                }
            }
            for (name, value) in &m.extra {
                if value.contains('"') || name.is_empty() || !name.chars().all(is_attr_name_char) {
                    return Err(SgmlError::BadAttribute {
                        offset: m.span.start,
                        reason: format!("unserializable attribute {name}={value:?}"),
                    });
                }
            }
        }
        check_nesting(&self.mentions)
    }
}

/// Orders mentions by start, with enclosing spans first.
pub(crate) fn sort_document_order(mentions: &mut [Mention]) {
    mentions.sort_by(|a, b| {
        a.span
            .start
            .cmp(&b.span.start)
            .then(b.span.end.cmp(&a.span.end))
            .then_with(|| a.id.cmp(&b.id))
    });
}

/// Spans must be pairwise disjoint or strictly nested.
pub(crate) fn check_nesting(mentions: &[Mention]) -> Result<(), SgmlError> {
    let mut order: Vec<&Mention> = mentions.iter().collect();
    order.sort_by(|a, b| a.span.start.cmp(&b.span.start).then(b.span.end.cmp(&a.span.end)));
    let mut stack: Vec<&Mention> = Vec::new();
    for m in order {
        while stack.last().is_some_and(|top| top.span.end <= m.span.start) {
            stack.pop();
        }
        if let Some(top) = stack.last() {
            if top.span == m.span {
                return Err(SgmlError::DuplicateSpan(top.id.clone(), m.id.clone()));
            }
            if m.span.end > top.span.end {
                return Err(SgmlError::CrossingSpans(top.id.clone(), m.id.clone()));
            }
        }
        stack.push(m);
    }
    Ok(())
}

/// Decodes raw bytes as UTF-8, falling back to Windows-1252 (the printable
/// superset of Latin-1 that also maps the 0x93/0x94 curly quotes).
pub fn decode(raw: &[u8]) -> String {
    match std::str::from_utf8(raw) {
        Ok(s) => s.to_owned(),
        Err(_) => encoding_rs::WINDOWS_1252.decode_without_bom_handling(raw).0.into_owned(),
    }
}

/// Parses a COREF-annotated document from raw bytes.
///
/// `doc_id` is taken from a `<DOCNO>` element when one is present and is
/// empty otherwise.
pub fn parse_muc_sgml(raw: &[u8]) -> Result<AnnotatedDocument, SgmlError> {
    parse_str(&decode(raw))
}

pub fn parse_str(input: &str) -> Result<AnnotatedDocument, SgmlError> {
    struct Open {
        seq: usize,
        start: usize,
        input_offset: usize,
        attrs: Attrs,
    }

    let mut base = String::with_capacity(input.len());
    let mut base_chars = 0usize;
    let mut stack: Vec<Open> = Vec::new();
    let mut done: Vec<(usize, Mention)> = Vec::new();
    let mut seq = 0usize;
    let mut pos = 0usize;
    // char offset of `pos` in `input`
    let mut input_chars = 0usize;

    while let Some(rel) = input[pos..].find('<') {
        let lt = pos + rel;
        let chunk = &input[pos..lt];
        base.push_str(chunk);
        let chunk_chars = char_len(chunk);
        base_chars += chunk_chars;
        let lt_chars = input_chars + chunk_chars;
        let rest = &input[lt..];
        if let Some(body_len) = coref_open_len(rest) {
            let close = find_tag_end(rest).ok_or_else(|| SgmlError::MalformedTag {
                offset: lt_chars,
                reason: "unterminated COREF tag".into(),
            })?;
            let body = normalize_quotes(&rest[body_len..close]);
            let attrs = parse_attrs(&body, lt_chars)?;
            stack.push(Open {
                seq,
                start: base_chars,
                input_offset: lt_chars,
                attrs,
            });
            seq += 1;
            pos = lt + close + 1;
            input_chars = lt_chars + char_len(&rest[..=close]);
        } else if let Some(len) = coref_close_len(rest) {
            let open = stack.pop().ok_or(SgmlError::UnmatchedClose { offset: lt_chars })?;
            if open.start == base_chars {
                return Err(SgmlError::EmptySpan(open.attrs.id));
            }
            let Attrs {
                id,
                coref_type,
                ref_id,
                min_head,
                extra,
            } = open.attrs;
            done.push((
                open.seq,
                Mention {
                    id,
                    span: Span::new(open.start, base_chars),
                    ref_id,
                    coref_type,
                    min_head,
                    extra,
                },
            ));
            pos = lt + len;
            input_chars = lt_chars + char_len(&rest[..len]);
        } else {
            base.push('<');
            base_chars += 1;
            pos = lt + 1;
            input_chars = lt_chars + 1;
        }
    }
    base.push_str(&input[pos..]);

    if let Some(open) = stack.pop() {
        return Err(SgmlError::UnclosedTag {
            id: open.attrs.id,
            offset: open.input_offset,
        });
    }

    done.sort_by_key(|(s, _)| *s);
    let mentions: Vec<Mention> = done.into_iter().map(|(_, m)| m).collect();
    let doc = AnnotatedDocument {
        doc_id: extract_docno(&base).unwrap_or_default(),
        zones: segment_zones(&base),
        base_text: base,
        mentions,
    };
    doc.validate()?;
    Ok(doc)
}

/// Emits canonical COREF SGML: upper-case attribute names in the order
/// ID, TYPE, REF, MIN, then any extra attributes, all double-quoted.
pub fn serialize_muc_sgml(doc: &AnnotatedDocument) -> Result<String, SgmlError> {
    doc.validate()
        .map_err(|e| SgmlError::InvariantViolation(Box::new(e)))?;

    let mut out = String::with_capacity(doc.base_text.len() + doc.mentions.len() * 48);
    let mut events: Vec<(usize, bool, Reverse<usize>, usize)> = Vec::with_capacity(doc.mentions.len() * 2);
    for (i, m) in doc.mentions.iter().enumerate() {
        // Opens at one offset: outermost (largest end) first.
        events.push((m.span.start, true, Reverse(m.span.end), i));
        // Closes at one offset: innermost (largest start) first.
        events.push((m.span.end, false, Reverse(m.span.start), i));
    }
    // Closes sort before opens at the same offset.
    events.sort();

    let text = &doc.base_text;
    let mut last_char = 0usize;
    let mut last_byte = 0usize;
    for (offset, is_open, _, idx) in events {
        if offset > last_char {
            let b = last_byte + byte_at(&text[last_byte..], offset - last_char);
            out.push_str(&text[last_byte..b]);
            last_byte = b;
            last_char = offset;
        }
        if is_open {
            write_open_tag(&mut out, &doc.mentions[idx]);
        } else {
            out.push_str("</COREF>");
        }
    }
    out.push_str(&text[last_byte..]);
    Ok(out)
}

fn write_open_tag(out: &mut String, m: &Mention) {
    use std::fmt::Write;
    let _ = write!(out, "<COREF ID=\"{}\" TYPE=\"{}\"", m.id, m.coref_type.as_str());
    if let Some(r) = &m.ref_id {
        let _ = write!(out, " REF=\"{r}\"");
    }
    if let Some(min) = &m.min_head {
        let _ = write!(out, " MIN=\"{min}\"");
    }
    for (k, v) in &m.extra {
        let _ = write!(out, " {k}=\"{v}\"");
    }
    out.push('>');
}

/// Text of a mention, looked up by id.
pub fn mention_text<'a>(doc: &'a AnnotatedDocument, mention_id: &str) -> Result<&'a str, SgmlError> {
    doc.mention(mention_id)
        .map(|m| doc.span_text(m.span))
        .ok_or_else(|| SgmlError::UnknownMention(mention_id.to_owned()))
}

struct Attrs {
    id: String,
    coref_type: CorefType,
    ref_id: Option<String>,
    min_head: Option<String>,
    extra: Vec<(String, String)>,
}

fn is_attr_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':')
}

/// Length of `<COREF` when `s` starts with a COREF open tag.
fn coref_open_len(s: &str) -> Option<usize> {
    let head = s.get(..6)?;
    if !head.eq_ignore_ascii_case("<coref") {
        return None;
    }
    match s[6..].chars().next() {
        Some(c) if c.is_whitespace() || c == '>' => Some(6),
        _ => None,
    }
}

/// Length of a `</COREF >` close tag at the start of `s`.
fn coref_close_len(s: &str) -> Option<usize> {
    let head = s.get(..7)?;
    if !head.eq_ignore_ascii_case("</coref") {
        return None;
    }
    let rest = &s[7..];
    let trimmed = rest.trim_start();
    trimmed
        .starts_with('>')
        .then(|| 7 + (rest.len() - trimmed.len()) + 1)
}

/// Byte index of the `>` ending the tag at the start of `s`, skipping quoted values.
fn find_tag_end(s: &str) -> Option<usize> {
    let mut in_quote = false;
    for (i, c) in s.char_indices().skip(1) {
        match c {
            '"' | '\u{201C}' | '\u{201D}' => in_quote = !in_quote,
            '>' if !in_quote => return Some(i),
            '<' if !in_quote => return None,
            _ => {}
        }
    }
    None
}

fn normalize_quotes(s: &str) -> String {
    s.replace(['\u{201C}', '\u{201D}'], "\"")
}

fn parse_attrs(body: &str, offset: usize) -> Result<Attrs, SgmlError> {
    let bad = |reason: String| SgmlError::BadAttribute { offset, reason };
    let mut id = None;
    let mut coref_type = CorefType::Ident;
    let mut ref_id = None;
    let mut min_head = None;
    let mut extra = Vec::new();
    let mut seen = HashSet::new();

    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let name_len = rest.find(|c: char| !is_attr_name_char(c)).unwrap_or(rest.len());
        if name_len == 0 {
            return Err(bad(format!("expected attribute name at {:?}", truncate(rest))));
        }
        let name = rest[..name_len].to_ascii_uppercase();
        rest = rest[name_len..].trim_start();
        rest = rest
            .strip_prefix('=')
            .ok_or_else(|| bad(format!("attribute {name} has no value")))?
            .trim_start();
        rest = rest
            .strip_prefix('"')
            .ok_or_else(|| bad(format!("value of {name} is not double-quoted")))?;
        let close = rest
            .find('"')
            .ok_or_else(|| bad(format!("value of {name} is unterminated")))?;
        let value = rest[..close].to_owned();
        rest = rest[close + 1..].trim_start();

        if !seen.insert(name.clone()) {
            return Err(bad(format!("attribute {name} repeated")));
        }
        match name.as_str() {
            "ID" => id = Some(value),
            "TYPE" => {
                if !value.eq_ignore_ascii_case("IDENT") {
                    return Err(bad(format!("unknown TYPE {value:?}")));
                }
                coref_type = CorefType::Ident;
            }
            "REF" => ref_id = Some(value),
            "MIN" => min_head = Some(value),
            _ => extra.push((name, value)),
        }
    }
    let id = id
        .filter(|s| !s.is_empty())
        .ok_or_else(|| bad("COREF element has no ID".into()))?;
    Ok(Attrs {
        id,
        coref_type,
        ref_id,
        min_head,
        extra,
    })
}

fn truncate(s: &str) -> &str {
    &s[..byte_at(s, 16)]
}

fn find_ci(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let n = needle.len();
    let bytes = hay.as_bytes();
    (from..=hay.len().checked_sub(n)?).find(|&i| bytes[i..i + n].eq_ignore_ascii_case(needle.as_bytes()))
}

fn extract_docno(text: &str) -> Option<String> {
    let open = find_ci(text, "<DOCNO>", 0)?;
    let start = open + "<DOCNO>".len();
    let close = find_ci(text, "</DOCNO>", start)?;
    let id = text[start..close].trim();
    (!id.is_empty()).then(|| id.to_owned())
}

/// Splits a base text into an optional title zone and paragraph zones.
///
/// The headline is the content of an `<HL>`/`<HEADLINE>` element, or else a
/// first block underlined by a line of three or more `=`. Paragraphs are
/// `<P>` elements when the body has any, blank-line separated blocks
/// otherwise. Non-COREF tags at paragraph edges are trimmed off; blocks with
/// no text outside tags are dropped.
pub fn segment_zones(base_text: &str) -> Vec<Zone> {
    let mut byte_zones: Vec<(ZoneKind, usize, usize)> = Vec::new();
    let mut body_start = 0usize;

    if let Some((title, after)) = tagged_headline(base_text).or_else(|| underlined_headline(base_text)) {
        byte_zones.push((ZoneKind::Title, title.0, title.1));
        body_start = after;
    }

    let body = &base_text[body_start..];
    let blocks = if find_p_tag(body, 0).is_some() {
        p_blocks(body)
    } else {
        blank_line_blocks(body)
    };
    for (s, e) in blocks {
        let (s, e) = trim_block(base_text, body_start + s, body_start + e);
        if s < e {
            byte_zones.push((ZoneKind::Paragraph, s, e));
        }
    }

    let ix = CharIndex::new(base_text);
    let mut zones = Vec::with_capacity(byte_zones.len());
    let mut para = 0usize;
    for (kind, s, e) in byte_zones {
        let ordinal = match kind {
            ZoneKind::Title => 0,
            ZoneKind::Paragraph => {
                para += 1;
                para
            }
        };
        zones.push(Zone {
            kind,
            span: Span::new(ix.char_at(s), ix.char_at(e)),
            ordinal,
        });
    }
    zones
}

/// Title byte range and the byte offset where the body begins.
fn tagged_headline(text: &str) -> Option<((usize, usize), usize)> {
    for (open, close) in [("<HL>", "</HL>"), ("<HEADLINE>", "</HEADLINE>")] {
        if let Some(o) = find_ci(text, open, 0) {
            let start = o + open.len();
            if let Some(c) = find_ci(text, close, start) {
                let (s, e) = trim_ws(text, start, c);
                return Some(((s, e), c + close.len()));
            }
        }
    }
    None
}

fn underlined_headline(text: &str) -> Option<((usize, usize), usize)> {
    let lines = line_ranges(text);
    let first = lines.iter().position(|&(s, e)| !text[s..e].trim().is_empty())?;
    let mut i = first;
    while i < lines.len() && !text[lines[i].0..lines[i].1].trim().is_empty() {
        let line = text[lines[i].0..lines[i].1].trim();
        if i > first && line.len() >= 3 && line.chars().all(|c| c == '=') {
            let (s, e) = trim_ws(text, lines[first].0, lines[i - 1].1);
            let after = lines.get(i + 1).map_or(text.len(), |l| l.0);
            return Some(((s, e), after));
        }
        i += 1;
    }
    None
}

/// Byte ranges of lines, excluding the terminating `\n` (and a preceding `\r`).
fn line_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == '\n' {
            out.push((start, i));
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push((start, text.len()));
    }
    out
}

fn blank_line_blocks(text: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut cur: Option<(usize, usize)> = None;
    for (s, e) in line_ranges(text) {
        if text[s..e].trim().is_empty() {
            if let Some(b) = cur.take() {
                blocks.push(b);
            }
        } else {
            cur = Some(cur.map_or((s, e), |(bs, _)| (bs, e)));
        }
    }
    blocks.extend(cur);
    blocks
}

fn find_p_tag(text: &str, from: usize) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut i = from;
    while let Some(o) = find_ci(text, "<P", i) {
        match bytes.get(o + 2) {
            Some(b'>') => return Some((o, o + 3)),
            Some(c) if c.is_ascii_whitespace() => {
                let end = text[o..].find('>')?;
                return Some((o, o + end + 1));
            }
            _ => i = o + 2,
        }
    }
    None
}

fn p_blocks(text: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut next = find_p_tag(text, 0);
    while let Some((_, content_start)) = next {
        next = find_p_tag(text, content_start);
        let limit = next.map_or(text.len(), |(o, _)| o);
        let end = find_ci(&text[..limit], "</P>", content_start).unwrap_or(limit);
        blocks.push((content_start, end));
    }
    blocks
}

fn trim_ws(text: &str, mut s: usize, mut e: usize) -> (usize, usize) {
    let slice = &text[s..e];
    let lead = slice.len() - slice.trim_start().len();
    s += lead;
    let slice = &text[s..e];
    e = s + slice.trim_end().len();
    (s, e)
}

/// Trims whitespace and non-COREF tags from both ends of a block.
fn trim_block(text: &str, s: usize, e: usize) -> (usize, usize) {
    let (mut s, mut e) = trim_ws(text, s, e);
    loop {
        let slice = &text[s..e];
        if let Some(n) = leading_tag_len(slice) {
            (s, e) = trim_ws(text, s + n, e);
        } else if let Some(n) = trailing_tag_len(slice) {
            (s, e) = trim_ws(text, s, e - n);
        } else {
            return (s, e);
        }
        if s >= e {
            return (s, s);
        }
    }
}

fn is_tag(s: &str) -> bool {
    let Some(inner) = s.strip_prefix('<').and_then(|r| r.strip_suffix('>')) else {
        return false;
    };
    let inner = inner.strip_prefix('/').unwrap_or(inner);
    inner.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && !inner.contains(['<', '>', '\n'])
}

fn leading_tag_len(s: &str) -> Option<usize> {
    let end = s.find('>')? + 1;
    is_tag(&s[..end]).then_some(end)
}

fn trailing_tag_len(s: &str) -> Option<usize> {
    let start = s.rfind('<')?;
    is_tag(&s[start..]).then(|| s.len() - start)
}

/// Maps mention id to its index in `doc.mentions`.
pub(crate) fn id_index(doc: &AnnotatedDocument) -> HashMap<&str, usize> {
    doc.mentions.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect()
}
