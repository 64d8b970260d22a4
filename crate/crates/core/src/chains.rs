//! Coreference chains: the equivalence classes obtained by closing `REF`
//! links under symmetry and transitivity.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::ChainError;
use crate::sgml::{id_index, AnnotatedDocument, Mention};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    /// Derived from the representative's mention id, so it survives
    /// reordering and edits elsewhere in the document.
    pub chain_id: String,
    /// Member ids in document order.
    pub member_ids: Vec<String>,
    /// Member with the smallest start (then smallest end, then id).
    pub representative: String,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.member_ids.iter().any(|m| m == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSet {
    pub doc_id: String,
    /// Ordered by representative position.
    pub chains: Vec<Chain>,
    /// Mentions taking part in no link, in document order.
    pub singletons: Vec<String>,
}

impl ChainSet {
    /// Chain containing `mention_id`; `Ok(None)` for a singleton.
    pub fn chain_of(&self, mention_id: &str) -> Result<Option<&Chain>, ChainError> {
        if let Some(c) = self.chains.iter().find(|c| c.contains(mention_id)) {
            return Ok(Some(c));
        }
        if self.singletons.iter().any(|s| s == mention_id) {
            return Ok(None);
        }
        Err(ChainError::UnknownMention(mention_id.to_owned()))
    }

    /// Map from mention id to the index of its chain in `chains`.
    pub fn membership(&self) -> HashMap<&str, usize> {
        self.chains
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.member_ids.iter().map(move |m| (m.as_str(), i)))
            .collect()
    }

    pub fn mention_count(&self) -> usize {
        self.singletons.len() + self.chains.iter().map(Chain::len).sum::<usize>()
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

fn position_key(m: &Mention) -> (usize, usize, &str) {
    (m.span.start, m.span.end, m.id.as_str())
}

/// Closes the document's `REF` links into chains.
///
/// Link direction is irrelevant: forward references are accepted and a
/// repeated edge is a no-op.
pub fn build_chains(doc: &AnnotatedDocument) -> Result<ChainSet, ChainError> {
    let index = id_index(doc);
    let n = doc.mentions.len();
    let mut uf = UnionFind::new(n);
    let mut linked = vec![false; n];
    for (i, m) in doc.mentions.iter().enumerate() {
        if let Some(r) = &m.ref_id {
            let j = *index.get(r.as_str()).ok_or_else(|| ChainError::DanglingRef(r.clone()))?;
            uf.union(i, j);
            linked[i] = true;
            linked[j] = true;
        }
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut singletons: Vec<usize> = Vec::new();
    for i in 0..n {
        if linked[i] {
            let root = uf.find(i);
            groups.entry(root).or_default().push(i);
        } else {
            singletons.push(i);
        }
    }

    let mut chains: Vec<(usize, usize, String, Vec<usize>)> = groups
        .into_values()
        .map(|mut members| {
            members.sort_by(|&a, &b| position_key(&doc.mentions[a]).cmp(&position_key(&doc.mentions[b])));
            let rep = &doc.mentions[members[0]];
            (rep.span.start, rep.span.end, rep.id.clone(), members)
        })
        .collect();
    chains.sort_by(|a, b| (a.0, a.1, &a.2).cmp(&(b.0, b.1, &b.2)));
    singletons.sort_by(|&a, &b| position_key(&doc.mentions[a]).cmp(&position_key(&doc.mentions[b])));

    Ok(ChainSet {
        doc_id: doc.doc_id.clone(),
        chains: chains
            .into_iter()
            .map(|(_, _, rep, members)| Chain {
                chain_id: format!("C{rep}"),
                member_ids: members.into_iter().map(|i| doc.mentions[i].id.clone()).collect(),
                representative: rep,
            })
            .collect(),
        singletons: singletons.into_iter().map(|i| doc.mentions[i].id.clone()).collect(),
    })
}
