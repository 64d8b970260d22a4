//! Character-offset helpers. Offsets everywhere count Unicode scalar values.

pub(crate) fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte index of character offset `idx`, or `s.len()` when `idx` is at or past the end.
pub(crate) fn byte_at(s: &str, idx: usize) -> usize {
    s.char_indices().nth(idx).map_or(s.len(), |(b, _)| b)
}

pub(crate) fn slice_chars(s: &str, start: usize, end: usize) -> &str {
    let b0 = byte_at(s, start);
    let b1 = b0 + byte_at(&s[b0..], end.saturating_sub(start));
    &s[b0..b1]
}

/// Precomputed char-to-byte map for repeated slicing of one text.
pub(crate) struct CharIndex<'a> {
    text: &'a str,
    /// Byte start of each char plus a final `text.len()`; `None` for ASCII.
    bytes: Option<Vec<usize>>,
}

impl<'a> CharIndex<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let bytes = (!text.is_ascii()).then(|| {
            let mut v: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
            v.push(text.len());
            v
        });
        Self { text, bytes }
    }

    fn byte(&self, idx: usize) -> usize {
        match &self.bytes {
            None => idx.min(self.text.len()),
            Some(v) => v.get(idx).copied().unwrap_or(self.text.len()),
        }
    }

    /// Same result as [`slice_chars`].
    pub(crate) fn slice(&self, start: usize, end: usize) -> &'a str {
        let b0 = self.byte(start);
        let b1 = self.byte(end.max(start));
        &self.text[b0..b1]
    }

    /// Character offset of byte index `b`, which must lie on a char boundary.
    pub(crate) fn char_at(&self, b: usize) -> usize {
        match &self.bytes {
            None => b,
            Some(v) => v.partition_point(|&x| x < b),
        }
    }
}

/// Character offset of the last occurrence of `needle` in `hay`.
pub(crate) fn rfind_chars(hay: &str, needle: &str) -> Option<usize> {
    hay.rfind(needle).map(|b| char_len(&hay[..b]))
}

/// First character offset at which `a` and `b` differ.
pub(crate) fn first_difference(a: &str, b: &str) -> Option<usize> {
    let mut ai = a.chars();
    let mut bi = b.chars();
    let mut i = 0;
    loop {
        match (ai.next(), bi.next()) {
            (None, None) => return None,
            (x, y) if x != y => return Some(i),
            _ => i += 1,
        }
    }
}
