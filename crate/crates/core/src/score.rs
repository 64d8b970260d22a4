//! Model-theoretic coreference scoring.
//!
//! Recall asks how many of the links needed to build each key chain the
//! response recovers. A key chain `S` needs `|S| - 1` links; if the response
//! partition cuts it into `p(S)` blocks, `|S| - p(S)` of those links survive.
//! Precision is the same computation with key and response exchanged.
//!
//! Everything is exact integer/rational arithmetic; floats only appear when
//! formatting.

use std::collections::{HashMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::align::MentionAlignment;
use crate::chains::ChainSet;
use crate::error::ScoreError;

pub type Fraction = Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub recall_num: u64,
    pub recall_den: u64,
    pub precision_num: u64,
    pub precision_den: u64,
    /// `None` when the key has no links.
    pub recall: Option<Fraction>,
    /// `None` when the response has no links.
    pub precision: Option<Fraction>,
    pub f_measure: Option<Fraction>,
    /// `(key chain id, number of response blocks it is cut into)`.
    pub per_chain: Vec<(String, usize)>,
}

impl ScoreReport {
    pub fn from_counts(recall_num: u64, recall_den: u64, precision_num: u64, precision_den: u64) -> Self {
        let recall = ratio(recall_num, recall_den);
        let precision = ratio(precision_num, precision_den);
        let f = match (precision, recall) {
            (Some(p), Some(r)) => f_measure(p, r),
            _ => None,
        };
        Self {
            recall_num,
            recall_den,
            precision_num,
            precision_den,
            recall,
            precision,
            f_measure: f,
            per_chain: Vec::new(),
        }
    }

    /// Micro-average: numerators and denominators summed across reports.
    pub fn sum<'a>(reports: impl IntoIterator<Item = &'a ScoreReport>) -> Self {
        let (mut rn, mut rd, mut pn, mut pd) = (0, 0, 0, 0);
        for r in reports {
            rn += r.recall_num;
            rd += r.recall_den;
            pn += r.precision_num;
            pd += r.precision_den;
        }
        Self::from_counts(rn, rd, pn, pd)
    }
}

fn ratio(num: u64, den: u64) -> Option<Fraction> {
    (den > 0).then(|| Ratio::new(num, den))
}

/// Balanced F: `2PR / (P + R)`; `None` when `P + R = 0`.
pub fn f_measure(p: Fraction, r: Fraction) -> Option<Fraction> {
    let sum = p + r;
    (sum != Ratio::from_integer(0)).then(|| Ratio::from_integer(2) * p * r / sum)
}

pub fn to_f64(x: Fraction) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Partition block label of a mention on the other side.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Block {
    Chain(usize),
    /// Unmatched mention or singleton: a block of its own.
    Own(usize),
}

/// For each chain on the `from` side with at least two members, counts the
/// blocks it is cut into on the `to` side. Returns (num, den, per-chain counts).
fn cut_counts(
    from: &ChainSet,
    to: &ChainSet,
    counterpart: &HashMap<&str, &str>,
) -> (u64, u64, Vec<(String, usize)>) {
    let to_chain = to.membership();
    let mut num = 0u64;
    let mut den = 0u64;
    let mut per_chain = Vec::with_capacity(from.chains.len());
    let mut fresh = 0usize;
    for chain in &from.chains {
        if chain.len() < 2 {
            continue;
        }
        let mut blocks = HashSet::new();
        for m in &chain.member_ids {
            let block = counterpart
                .get(m.as_str())
                .and_then(|other| to_chain.get(other))
                .map(|&c| Block::Chain(c))
                .unwrap_or_else(|| {
                    fresh += 1;
                    Block::Own(fresh)
                });
            blocks.insert(block);
        }
        let size = chain.len() as u64;
        let parts = blocks.len();
        num += size - parts as u64;
        den += size - 1;
        per_chain.push((chain.chain_id.clone(), parts));
    }
    (num, den, per_chain)
}

fn known_ids(cs: &ChainSet) -> HashSet<&str> {
    cs.chains
        .iter()
        .flat_map(|c| c.member_ids.iter())
        .chain(cs.singletons.iter())
        .map(String::as_str)
        .collect()
}

/// Scores a response against a key over a mention alignment.
pub fn score(
    key: &ChainSet,
    response: &ChainSet,
    alignment: &MentionAlignment,
) -> Result<ScoreReport, ScoreError> {
    let key_ids = known_ids(key);
    let resp_ids = known_ids(response);
    for p in &alignment.pairs {
        if !key_ids.contains(p.key.as_str()) {
            return Err(ScoreError::AlignmentMismatch(p.key.clone()));
        }
        if !resp_ids.contains(p.response.as_str()) {
            return Err(ScoreError::AlignmentMismatch(p.response.clone()));
        }
    }
    if let Some(id) = alignment.unmatched_key.iter().find(|id| !key_ids.contains(id.as_str())) {
        return Err(ScoreError::AlignmentMismatch(id.clone()));
    }
    if let Some(id) = alignment
        .unmatched_response
        .iter()
        .find(|id| !resp_ids.contains(id.as_str()))
    {
        return Err(ScoreError::AlignmentMismatch(id.clone()));
    }

    let k2r = alignment.key_to_response();
    let r2k = alignment.response_to_key();
    let (rn, rd, per_chain) = cut_counts(key, response, &k2r);
    let (pn, pd, _) = cut_counts(response, key, &r2k);
    let mut report = ScoreReport::from_counts(rn, rd, pn, pd);
    report.per_chain = per_chain;
    Ok(report)
}
