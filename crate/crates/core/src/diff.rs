//! Interannotator difference analysis.
//!
//! Two annotations of one text are compared chain by chain. Each
//! disagreement becomes a [`Discrepancy`] that is auto-classified where a
//! mechanical rule applies; the rest wait for a human label. Tallies follow
//! the Easy (Pron, Bugs, Zone, Pred) / Missing / Hard breakdown.
//!
//! "Bugs" is interpreted here as span mismatches that pair only through
//! `MIN` tolerance while agreeing on the head: the benign minimal-NP markup
//! differences an older scorer used to penalize.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::align::{align_symmetric, head_span, MatchKind, MentionAlignment};
use crate::chains::{build_chains, ChainSet, UnionFind};
use crate::error::DiffError;
use crate::sgml::{id_index, AnnotatedDocument, Mention, Span, ZoneKind};
use crate::text::CharIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiscrepancyKind {
    ChainMissingInA,
    ChainMissingInB,
    MentionUnlinked,
    SpanMismatch,
    LinkDisagreement,
}

impl DiscrepancyKind {
    fn swapped(self) -> Self {
        match self {
            Self::ChainMissingInA => Self::ChainMissingInB,
            Self::ChainMissingInB => Self::ChainMissingInA,
            k => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "Easy_Pron", alias = "Pron")]
    EasyPron,
    #[serde(rename = "Easy_Bugs", alias = "Bugs")]
    EasyBugs,
    #[serde(rename = "Easy_Zone", alias = "Zone")]
    EasyZone,
    #[serde(rename = "Easy_Pred", alias = "Pred")]
    EasyPred,
    Missing,
    Hard,
    Unclassified,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::EasyPron,
        Category::EasyBugs,
        Category::EasyZone,
        Category::EasyPred,
        Category::Missing,
        Category::Hard,
        Category::Unclassified,
    ];

    pub fn is_easy(self) -> bool {
        matches!(self, Self::EasyPron | Self::EasyBugs | Self::EasyZone | Self::EasyPred)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EasyPron => "Easy_Pron",
            Self::EasyBugs => "Easy_Bugs",
            Self::EasyZone => "Easy_Zone",
            Self::EasyPred => "Easy_Pred",
            Self::Missing => "Missing",
            Self::Hard => "Hard",
            Self::Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let norm = norm.strip_prefix("easy_").unwrap_or(&norm);
        Ok(match norm {
            "pron" => Self::EasyPron,
            "bugs" => Self::EasyBugs,
            "zone" => Self::EasyZone,
            "pred" => Self::EasyPred,
            "missing" => Self::Missing,
            "hard" | "interp" => Self::Hard,
            "unclassified" => Self::Unclassified,
            _ => return Err(format!("unknown category {s:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub kind: DiscrepancyKind,
    pub mentions_a: Vec<String>,
    pub mentions_b: Vec<String>,
    pub auto_category: Category,
    #[serde(default)]
    pub manual_category: Option<Category>,
    #[serde(default)]
    pub note: String,
}

impl Discrepancy {
    /// Manual label if set, automatic category otherwise.
    pub fn category(&self) -> Category {
        self.manual_category.unwrap_or(self.auto_category)
    }

    /// Stable identifier used to attach manual labels across recomputations.
    pub fn key(&self) -> String {
        format!(
            "{:?}:{}|{}",
            self.kind,
            self.mentions_a.join(","),
            self.mentions_b.join(",")
        )
    }

    /// The same discrepancy seen from the other annotator's side.
    pub fn swapped(&self) -> Self {
        Self {
            kind: self.kind.swapped(),
            mentions_a: self.mentions_b.clone(),
            mentions_b: self.mentions_a.clone(),
            ..self.clone()
        }
    }
}

/// Closed-class pronoun list used for the `Pron` rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronounLexicon {
    words: HashSet<String>,
}

const DEFAULT_PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its",
    "itself", "they", "them", "their", "theirs", "themselves", "this", "that", "these", "those", "who",
    "whom", "whose", "which",
];

impl Default for PronounLexicon {
    fn default() -> Self {
        Self::new(DEFAULT_PRONOUNS.iter().copied())
    }
}

impl PronounLexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| w.as_ref().trim().to_lowercase()).collect(),
        }
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(config: &str) -> Self {
        Self::new(
            config
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn contains(&self, text: &str) -> bool {
        self.words.contains(&text.trim().to_lowercase())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub doc_id: String,
    pub pron: u64,
    pub bugs: u64,
    pub zone: u64,
    pub pred: u64,
    pub missing: u64,
    pub hard: u64,
    #[serde(default)]
    pub unclassified: u64,
}

impl CategoryRow {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            ..Self::default()
        }
    }

    pub fn add(&mut self, category: Category, n: u64) {
        match category {
            Category::EasyPron => self.pron += n,
            Category::EasyBugs => self.bugs += n,
            Category::EasyZone => self.zone += n,
            Category::EasyPred => self.pred += n,
            Category::Missing => self.missing += n,
            Category::Hard => self.hard += n,
            Category::Unclassified => self.unclassified += n,
        }
    }

    pub fn get(&self, category: Category) -> u64 {
        match category {
            Category::EasyPron => self.pron,
            Category::EasyBugs => self.bugs,
            Category::EasyZone => self.zone,
            Category::EasyPred => self.pred,
            Category::Missing => self.missing,
            Category::Hard => self.hard,
            Category::Unclassified => self.unclassified,
        }
    }

    pub fn easy_total(&self) -> u64 {
        self.pron + self.bugs + self.zone + self.pred
    }

    pub fn grand_total(&self) -> u64 {
        self.easy_total() + self.missing + self.hard + self.unclassified
    }

    fn accumulate(&mut self, other: &CategoryRow) {
        for c in Category::ALL {
            self.add(c, other.get(c));
        }
    }
}

/// Whole-percent shares of the grand total; `None` when the total is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Percentages {
    pub easy: Option<u64>,
    pub missing: Option<u64>,
    pub hard: Option<u64>,
    pub unclassified: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTally {
    pub rows: Vec<CategoryRow>,
    pub sum: CategoryRow,
    pub grand_total: u64,
    pub percentages: Percentages,
}

/// `round(100 * part / total)`, halves rounded up, in integer arithmetic.
fn whole_percent(part: u64, total: u64) -> Option<u64> {
    (total > 0).then(|| (200 * part + total) / (2 * total))
}

impl CategoryTally {
    pub fn from_rows(rows: Vec<CategoryRow>) -> Self {
        let mut sum = CategoryRow::new("SUM");
        for r in &rows {
            sum.accumulate(r);
        }
        let total = sum.grand_total();
        let percentages = Percentages {
            easy: whole_percent(sum.easy_total(), total),
            missing: whole_percent(sum.missing, total),
            hard: whole_percent(sum.hard, total),
            unclassified: whole_percent(sum.unclassified, total),
        };
        Self {
            rows,
            grand_total: total,
            sum,
            percentages,
        }
    }

    /// Fixed-width table with per-document rows, a SUM row and a percentage row.
    pub fn render_table(&self) -> String {
        let uncl = self.sum.unclassified > 0;
        let width = self
            .rows
            .iter()
            .map(|r| r.doc_id.chars().count())
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = String::new();
        let _ = write!(
            out,
            "{:<width$} {:>5} {:>5} {:>5} {:>5} {:>6} {:>8} {:>6}",
            "Doc", "Pron", "Bugs", "Zone", "Pred", "TOTAL", "MISSING", "HARD"
        );
        if uncl {
            let _ = write!(out, " {:>6}", "UNCL");
        }
        out.push('\n');
        for r in self.rows.iter().chain(std::iter::once(&self.sum)) {
            let _ = write!(
                out,
                "{:<width$} {:>5} {:>5} {:>5} {:>5} {:>6} {:>8} {:>6}",
                r.doc_id,
                r.pron,
                r.bugs,
                r.zone,
                r.pred,
                r.easy_total(),
                r.missing,
                r.hard
            );
            if uncl {
                let _ = write!(out, " {:>6}", r.unclassified);
            }
            out.push('\n');
        }
        let pct = |p: Option<u64>| p.map_or_else(|| "-".to_owned(), |v| format!("{v}%"));
        let _ = write!(
            out,
            "{:<width$} {:>5} {:>5} {:>5} {:>5} {:>6} {:>8} {:>6}",
            "%",
            "",
            "",
            "",
            "",
            pct(self.percentages.easy),
            pct(self.percentages.missing),
            pct(self.percentages.hard)
        );
        if uncl {
            let _ = write!(out, " {:>6}", pct(self.percentages.unclassified));
        }
        out.push('\n');
        let _ = writeln!(out, "grand total {}", self.grand_total);
        out
    }
}

/// Two chains (one per annotation) sharing aligned members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainPair {
    pub chain_a: String,
    pub chain_b: String,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub doc_id: String,
    /// Every pair of overlapping chains, largest overlap first.
    pub chain_pairs: Vec<ChainPair>,
    pub discrepancies: Vec<Discrepancy>,
    pub tally: CategoryTally,
}

impl DiffReport {
    /// Applies manual labels keyed by [`Discrepancy::key`]; unknown keys are ignored.
    /// Returns how many labels matched.
    pub fn apply_labels(&mut self, labels: &BTreeMap<String, Category>) -> usize {
        let mut hit = 0;
        for d in &mut self.discrepancies {
            if let Some(c) = labels.get(&d.key()) {
                d.manual_category = Some(*c);
                hit += 1;
            }
        }
        self.tally = CategoryTally::from_rows(vec![self.row()]);
        hit
    }

    pub fn row(&self) -> CategoryRow {
        let mut row = CategoryRow::new(self.doc_id.clone());
        for d in &self.discrepancies {
            row.add(d.category(), 1);
        }
        row
    }
}

/// Automatic category for one discrepancy, by precedence
/// Zone > Pron > Bugs > Missing > Unclassified.
pub fn auto_classify(
    d: &Discrepancy,
    a: &AnnotatedDocument,
    b: &AnnotatedDocument,
    lexicon: &PronounLexicon,
) -> Category {
    classify(d, &Lookup::new(a), &Lookup::new(b), lexicon)
}

fn classify(d: &Discrepancy, a: &Lookup<'_>, b: &Lookup<'_>, lexicon: &PronounLexicon) -> Category {
    let spans: Vec<Span> = d
        .mentions_a
        .iter()
        .filter_map(|id| a.mention(id))
        .chain(d.mentions_b.iter().filter_map(|id| b.mention(id)))
        .map(|m| m.span)
        .collect();

    let in_title = |s: &Span| a.doc.zone_at(s.start).is_some_and(|z| z.kind == ZoneKind::Title);
    if !spans.is_empty() && spans.iter().all(in_title) {
        return Category::EasyZone;
    }

    let distinct: HashSet<Span> = spans.iter().copied().collect();
    if distinct.len() == 1 {
        let span = *distinct.iter().next().expect("one span");
        if lexicon.contains(a.text(span)) {
            return Category::EasyPron;
        }
    }

    if d.kind == DiscrepancyKind::SpanMismatch {
        let head = |side: &Lookup<'_>, id: &String| {
            side.mention(id)
                .and_then(|m| head_span(m, side.text(m.span)).ok())
                .map(|s| side.text(s).to_owned())
        };
        let ha: Vec<_> = d.mentions_a.iter().map(|id| head(a, id)).collect();
        let hb: Vec<_> = d.mentions_b.iter().map(|id| head(b, id)).collect();
        if !ha.is_empty() && ha == hb && ha.iter().all(Option::is_some) {
            return Category::EasyBugs;
        }
    }

    match d.kind {
        DiscrepancyKind::ChainMissingInA | DiscrepancyKind::ChainMissingInB => Category::Missing,
        _ => Category::Unclassified,
    }
}

/// Id and text lookups over one document.
struct Lookup<'a> {
    doc: &'a AnnotatedDocument,
    /// mention id -> position in document order
    order: HashMap<&'a str, usize>,
    chars: CharIndex<'a>,
}

impl<'a> Lookup<'a> {
    fn new(doc: &'a AnnotatedDocument) -> Self {
        Self {
            doc,
            order: id_index(doc),
            chars: CharIndex::new(&doc.base_text),
        }
    }

    fn mention(&self, id: &str) -> Option<&'a Mention> {
        self.order.get(id).map(|&i| &self.doc.mentions[i])
    }

    fn text(&self, span: Span) -> &'a str {
        self.chars.slice(span.start, span.end)
    }
}

struct Side<'a> {
    at: Lookup<'a>,
    chains: ChainSet,
    /// mention id -> chain index
    chain_of: HashMap<String, usize>,
}

impl<'a> Side<'a> {
    fn new(doc: &'a AnnotatedDocument) -> Result<Self, DiffError> {
        let chains = build_chains(doc)?;
        let chain_of = chains
            .membership()
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect();
        Ok(Self {
            at: Lookup::new(doc),
            chains,
            chain_of,
        })
    }

    fn sorted(&self, mut ids: Vec<String>) -> Vec<String> {
        ids.sort_by_key(|id| self.at.order.get(id.as_str()).copied().unwrap_or(usize::MAX));
        ids.dedup();
        ids
    }
}

/// Compares two annotations of the same text.
pub fn diff(
    a: &AnnotatedDocument,
    b: &AnnotatedDocument,
    lexicon: &PronounLexicon,
) -> Result<DiffReport, DiffError> {
    let alignment = align_symmetric(a, b)?;
    let sa = Side::new(a)?;
    let sb = Side::new(b)?;
    let discrepancies = detect(&sa, &sb, &alignment);

    let mut discrepancies: Vec<Discrepancy> = discrepancies
        .into_iter()
        .map(|mut d| {
            d.auto_category = classify(&d, &sa.at, &sb.at, lexicon);
            d
        })
        .collect();
    discrepancies.sort_by_cached_key(|d| (d.kind, d.key()));

    let chain_pairs = overlaps(&sa, &sb, &alignment)
        .into_iter()
        .map(|((i, j), n)| ChainPair {
            chain_a: sa.chains.chains[i].chain_id.clone(),
            chain_b: sb.chains.chains[j].chain_id.clone(),
            overlap: n,
        })
        .collect();

    let mut report = DiffReport {
        doc_id: a.doc_id.clone(),
        chain_pairs,
        discrepancies,
        tally: CategoryTally::default(),
    };
    report.tally = CategoryTally::from_rows(vec![report.row()]);
    Ok(report)
}

/// Overlap counts between chains, sorted by descending overlap then chain order.
fn overlaps(sa: &Side<'_>, sb: &Side<'_>, alignment: &MentionAlignment) -> Vec<((usize, usize), usize)> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for p in &alignment.pairs {
        if let (Some(&i), Some(&j)) = (sa.chain_of.get(&p.key), sb.chain_of.get(&p.response)) {
            *counts.entry((i, j)).or_default() += 1;
        }
    }
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    v
}

fn detect(sa: &Side<'_>, sb: &Side<'_>, alignment: &MentionAlignment) -> Vec<Discrepancy> {
    let a2b = alignment.key_to_response();
    let b2a = alignment.response_to_key();
    let na = sa.chains.chains.len();
    let nb = sb.chains.chains.len();

    let edges = overlaps(sa, sb, alignment);
    let mut uf = UnionFind::new(na + nb);
    let mut touched = vec![false; na + nb];
    for &((i, j), _) in &edges {
        uf.union(i, na + j);
        touched[i] = true;
        touched[na + j] = true;
    }

    let mut out = Vec::new();
    let blank = |kind| Discrepancy {
        kind,
        mentions_a: Vec::new(),
        mentions_b: Vec::new(),
        auto_category: Category::Unclassified,
        manual_category: None,
        note: String::new(),
    };

    // Whole chains without any counterpart.
    for (i, c) in sa.chains.chains.iter().enumerate() {
        if !touched[i] {
            let mut d = blank(DiscrepancyKind::ChainMissingInB);
            d.mentions_a = c.member_ids.clone();
            d.mentions_b = sb.sorted(c.member_ids.iter().filter_map(|m| a2b.get(m.as_str())).map(|s| s.to_string()).collect());
            d.note = format!("chain {} of A has no counterpart in B", c.chain_id);
            out.push(d);
        }
    }
    for (j, c) in sb.chains.chains.iter().enumerate() {
        if !touched[na + j] {
            let mut d = blank(DiscrepancyKind::ChainMissingInA);
            d.mentions_b = c.member_ids.clone();
            d.mentions_a = sa.sorted(c.member_ids.iter().filter_map(|m| b2a.get(m.as_str())).map(|s| s.to_string()).collect());
            d.note = format!("chain {} of B has no counterpart in A", c.chain_id);
            out.push(d);
        }
    }

    // Connected groups of overlapping chains.
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for i in (0..na).filter(|&i| touched[i]) {
        groups.entry(uf.find(i)).or_default().0.push(i);
    }
    for j in (0..nb).filter(|&j| touched[na + j]) {
        groups.entry(uf.find(na + j)).or_default().1.push(j);
    }
    for (ga, gb) in groups.values() {
        if ga.len() > 1 || gb.len() > 1 {
            let mut d = blank(DiscrepancyKind::LinkDisagreement);
            d.mentions_a = sa.sorted(ga.iter().flat_map(|&i| sa.chains.chains[i].member_ids.clone()).collect());
            d.mentions_b = sb.sorted(gb.iter().flat_map(|&j| sb.chains.chains[j].member_ids.clone()).collect());
            let ids = |side: &Side<'_>, g: &[usize]| {
                g.iter().map(|&i| side.chains.chains[i].chain_id.as_str()).collect::<Vec<_>>().join(",")
            };
            d.note = format!("A chains [{}] vs B chains [{}]", ids(sa, ga), ids(sb, gb));
            out.push(d);
        }
        for &i in ga {
            for m in &sa.chains.chains[i].member_ids {
                let other = a2b.get(m.as_str()).copied();
                if other.is_none_or(|o| !sb.chain_of.contains_key(o)) {
                    let mut d = blank(DiscrepancyKind::MentionUnlinked);
                    d.mentions_a = vec![m.clone()];
                    d.mentions_b = other.map(str::to_owned).into_iter().collect();
                    d.note = format!("{m} is linked in A but not in B");
                    out.push(d);
                }
            }
        }
        for &j in gb {
            for m in &sb.chains.chains[j].member_ids {
                let other = b2a.get(m.as_str()).copied();
                if other.is_none_or(|o| !sa.chain_of.contains_key(o)) {
                    let mut d = blank(DiscrepancyKind::MentionUnlinked);
                    d.mentions_b = vec![m.clone()];
                    d.mentions_a = other.map(str::to_owned).into_iter().collect();
                    d.note = format!("{m} is linked in B but not in A");
                    out.push(d);
                }
            }
        }
    }

    // Extent differences between chained mentions paired only via MIN.
    for p in alignment.pairs.iter().filter(|p| p.kind == MatchKind::Min) {
        if sa.chain_of.contains_key(&p.key) && sb.chain_of.contains_key(&p.response) {
            let mut d = blank(DiscrepancyKind::SpanMismatch);
            d.mentions_a = vec![p.key.clone()];
            d.mentions_b = vec![p.response.clone()];
            d.note = format!(
                "{:?} vs {:?}",
                sa.at.mention(&p.key).map(|m| sa.at.text(m.span)).unwrap_or_default(),
                sb.at.mention(&p.response).map(|m| sb.at.text(m.span)).unwrap_or_default()
            );
            out.push(d);
        }
    }
    out
}

/// Aggregates reports into per-document rows plus a SUM row.
pub fn tally(reports: &[DiffReport]) -> CategoryTally {
    CategoryTally::from_rows(reports.iter().map(DiffReport::row).collect())
}
