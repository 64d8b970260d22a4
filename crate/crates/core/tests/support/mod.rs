//! Test-only reference implementations and fixture helpers.
//!
//! The oracles here work on plain index partitions and relation matrices and
//! share no code with the library's chain, alignment or scoring paths.

#![allow(dead_code)]

use std::path::PathBuf;

use coref_core::{AnnotatedDocument, Mention};

/// The core crate's fixture directory, from any crate in the workspace.
pub fn fixture_dir() -> PathBuf {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let own = manifest.join("tests/fixtures");
    if own.join("fig1.sgml").is_file() {
        own
    } else {
        manifest.join("../core/tests/fixtures")
    }
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture_dir().join(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Strips `<COREF ...>` and `</COREF>` tags with a character state machine,
/// independently of the parser.
pub fn strip_coref_tags(raw: &str) -> String {
    let lower = raw.to_ascii_lowercase();
    let mut out = String::new();
    let mut i = 0;
    while i < raw.len() {
        let rest = &lower[i..];
        let is_open = rest.starts_with("<coref") && rest[6..].starts_with(|c: char| c == '>' || c.is_whitespace());
        let is_close = rest.starts_with("</coref") && rest[7..].trim_start().starts_with('>');
        if is_open || is_close {
            let mut quoted = false;
            let mut j = i + 1;
            loop {
                let c = raw[j..].chars().next().unwrap();
                if c == '"' || c == '\u{201C}' || c == '\u{201D}' {
                    quoted = !quoted;
                } else if c == '>' && !quoted {
                    break;
                }
                j += c.len_utf8();
            }
            i = j + 1;
        } else {
            let c = raw[i..].chars().next().unwrap();
            out.push(c);
            i += c.len_utf8();
        }
    }
    out
}

/// All set partitions of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            rec(i + 1, n, max.max(b), cur, out);
            cur.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut cur = vec![0];
    rec(1, n, 0, &mut cur, &mut out);
    out
}

/// A key and a response annotation over `tokens` positions. `None` means the
/// token is not marked on that side; `Some(b)` places it in block `b`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub tokens: usize,
    pub key: Vec<Option<usize>>,
    pub response: Vec<Option<usize>>,
}

impl Instance {
    pub fn fully_marked(key: &[usize], response: &[usize]) -> Self {
        Self {
            tokens: key.len(),
            key: key.iter().map(|&b| Some(b)).collect(),
            response: response.iter().map(|&b| Some(b)).collect(),
        }
    }

    /// Document whose mention `{prefix}{i}` covers token `i`; every block
    /// member refers to the block's first member.
    pub fn document(&self, prefix: &str, side: &[Option<usize>]) -> AnnotatedDocument {
        let text = "w ".repeat(self.tokens);
        let mut first_of_block = std::collections::HashMap::new();
        let mut mentions = Vec::new();
        for (i, b) in side.iter().enumerate() {
            let Some(b) = b else { continue };
            let mut m = Mention::new(format!("{prefix}{i}"), 2 * i, 2 * i + 1);
            match first_of_block.get(b) {
                Some(&first) => m.ref_id = Some(format!("{prefix}{first}")),
                None => {
                    first_of_block.insert(*b, i);
                }
            }
            mentions.push(m);
        }
        AnnotatedDocument::new("inst", text, mentions)
    }

    pub fn key_doc(&self) -> AnnotatedDocument {
        self.document("k", &self.key)
    }

    pub fn response_doc(&self) -> AnnotatedDocument {
        self.document("r", &self.response)
    }

    pub fn swapped(&self) -> Self {
        Self {
            tokens: self.tokens,
            key: self.response.clone(),
            response: self.key.clone(),
        }
    }
}

/// Counts, for one side's blocks of size ≥ 2, the minimal links (`|S| - 1`)
/// and how many of them the other side recovers. A member's link is
/// recovered when some earlier member of the same block is equivalent to it
/// on the other side; unmarked tokens are equivalent to nothing.
fn link_counts(from: &[Option<usize>], to: &[Option<usize>]) -> (u64, u64) {
    let n = from.len();
    // same[i][j]: tokens i and j are in one block on the `to` side
    let same = |i: usize, j: usize| matches!((to[i], to[j]), (Some(a), Some(b)) if a == b);
    let mut blocks: Vec<usize> = from.iter().flatten().copied().collect();
    blocks.sort_unstable();
    blocks.dedup();
    let (mut correct, mut minimal) = (0u64, 0u64);
    for b in blocks {
        let members: Vec<usize> = (0..n).filter(|&i| from[i] == Some(b)).collect();
        if members.len() < 2 {
            continue;
        }
        minimal += members.len() as u64 - 1;
        for (pos, &i) in members.iter().enumerate() {
            if members[..pos].iter().any(|&j| same(i, j)) {
                correct += 1;
            }
        }
    }
    (correct, minimal)
}

/// `(recall_num, recall_den, precision_num, precision_den)` by link counting.
pub fn oracle_link_score(inst: &Instance) -> Result<(u64, u64, u64, u64), &'static str> {
    let total = inst.key.iter().flatten().count() + inst.response.iter().flatten().count();
    if total > 40 || inst.tokens > 20 {
        return Err("TooLarge");
    }
    let (rn, rd) = link_counts(&inst.key, &inst.response);
    let (pn, pd) = link_counts(&inst.response, &inst.key);
    Ok((rn, rd, pn, pd))
}

/// Reflexive-symmetric-transitive closure of `edges` over `n` nodes via
/// Warshall's algorithm, returned as sorted classes of size ≥ 2.
pub fn closure_classes(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut r = vec![vec![false; n]; n];
    for i in 0..n {
        r[i][i] = true;
    }
    for &(a, b) in edges {
        r[a][b] = true;
        r[b][a] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let class: Vec<usize> = (0..n).filter(|&j| r[i][j]).collect();
        if class.len() >= 2 && class[0] == i {
            classes.push(class);
        }
    }
    classes
}

/// Random instance over at most `max_tokens` tokens with partial marking.
pub fn random_instance(rng: &mut impl rand::Rng, max_tokens: usize) -> Instance {
    let tokens = rng.gen_range(1..=max_tokens);
    let mut side = |mark_p: f64| -> Vec<Option<usize>> {
        let blocks = rng.gen_range(1..=tokens);
        (0..tokens)
            .map(|_| rng.gen_bool(mark_p).then(|| rng.gen_range(0..blocks)))
            .collect()
    };
    let key = side(0.9);
    let response = side(0.8);
    Instance { tokens, key, response }
}
