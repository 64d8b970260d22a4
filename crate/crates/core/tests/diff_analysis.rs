mod support;

use std::collections::BTreeMap;

use coref_core::sgml::parse_str;
use coref_core::{
    auto_classify, diff, parse_muc_sgml, tally, AnnotatedDocument, Category, CategoryRow, DiscrepancyKind,
    DiffReport, Mention, PronounLexicon,
};
use proptest::prelude::*;
use support::fixture_bytes;

fn fixture(name: &str) -> AnnotatedDocument {
    parse_muc_sgml(&fixture_bytes(name)).unwrap()
}

type Summary = (DiscrepancyKind, Vec<String>, Vec<String>, Category);

fn summary(rep: &DiffReport) -> Vec<Summary> {
    let mut v: Vec<_> = rep
        .discrepancies
        .iter()
        .map(|d| (d.kind, d.mentions_a.clone(), d.mentions_b.clone(), d.auto_category))
        .collect();
    v.sort();
    v
}

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn identical_annotations_have_no_discrepancies() {
    let a = fixture("bulger_a.sgml");
    let rep = diff(&a, &a, &PronounLexicon::default()).unwrap();
    assert!(rep.discrepancies.is_empty());
    assert_eq!(rep.tally.grand_total, 0);
    assert_eq!(rep.chain_pairs.len(), 5);
}

#[test]
fn two_annotator_fixture() {
    let a = fixture("bulger_a.sgml");
    let b = fixture("bulger_b.sgml");
    let rep = diff(&a, &b, &PronounLexicon::default()).unwrap();
    use DiscrepancyKind::*;
    let mut expected = vec![
        (ChainMissingInB, ids(&["11", "12"]), ids(&[]), Category::Missing),
        (MentionUnlinked, ids(&["h1"]), ids(&["h1"]), Category::EasyZone),
        (MentionUnlinked, ids(&["3"]), ids(&["3"]), Category::EasyPron),
        (SpanMismatch, ids(&["2"]), ids(&["2"]), Category::EasyBugs),
        (
            LinkDisagreement,
            ids(&["5", "7", "8", "10"]),
            ids(&["5", "7", "8", "10"]),
            Category::Unclassified,
        ),
    ];
    expected.sort();
    assert_eq!(summary(&rep), expected);

    let row = &rep.tally.sum;
    assert_eq!((row.pron, row.bugs, row.zone, row.missing, row.unclassified), (1, 1, 1, 1, 1));

    // every chain is paired or cited by exactly one ChainMissing
    for chain in ["C11"] {
        assert!(rep.chain_pairs.iter().all(|p| p.chain_a != chain));
    }
    assert_eq!(rep.chain_pairs.iter().filter(|p| p.chain_b == "C5").count(), 2);
}

#[test]
fn detection_is_symmetric_on_fixture() {
    let a = fixture("bulger_a.sgml");
    let b = fixture("bulger_b.sgml");
    let lex = PronounLexicon::default();
    let ab = diff(&a, &b, &lex).unwrap();
    let ba = diff(&b, &a, &lex).unwrap();
    let mut swapped: Vec<Summary> = summary(&ba)
        .into_iter()
        .map(|(k, ma, mb, c)| {
            let k = match k {
                DiscrepancyKind::ChainMissingInA => DiscrepancyKind::ChainMissingInB,
                DiscrepancyKind::ChainMissingInB => DiscrepancyKind::ChainMissingInA,
                k => k,
            };
            (k, mb, ma, c)
        })
        .collect();
    swapped.sort();
    assert_eq!(summary(&ab), swapped);
}

#[test]
fn fig1_chain_missing_and_pronoun_unlinked() {
    let a = fixture("fig1.sgml");
    let lex = PronounLexicon::default();

    // B never linked "his": the {1,3} chain has no counterpart at all
    let mut b = a.clone();
    b.mentions.iter_mut().find(|m| m.id == "3").unwrap().ref_id = None;
    let rep = diff(&a, &b, &lex).unwrap();
    assert_eq!(rep.discrepancies.len(), 1);
    assert_eq!(rep.discrepancies[0].kind, DiscrepancyKind::ChainMissingInB);
    assert_eq!(rep.discrepancies[0].mentions_a, ["1", "3"]);
    assert_eq!(rep.discrepancies[0].auto_category, Category::Missing);

    // B marks nothing of the chain
    let b2 = AnnotatedDocument::new(
        "",
        a.base_text.clone(),
        a.mentions.iter().filter(|m| m.id == "2" || m.id == "4").cloned().collect(),
    );
    let rep = diff(&a, &b2, &lex).unwrap();
    assert_eq!(summary(&rep), [(DiscrepancyKind::ChainMissingInB, ids(&["1", "3"]), ids(&[]), Category::Missing)]);

    // "his" dropped from a longer chain
    let mut a3 = a.clone();
    a3.mentions.iter_mut().find(|m| m.id == "4").unwrap().ref_id = Some("3".into());
    let mut b3 = a3.clone();
    b3.mentions.iter_mut().find(|m| m.id == "3").unwrap().ref_id = None;
    b3.mentions.iter_mut().find(|m| m.id == "4").unwrap().ref_id = Some("1".into());
    // a3: {1,3,4,2}; b3: {1,4,2}
    let rep = diff(&a3, &b3, &lex).unwrap();
    assert_eq!(summary(&rep), [(DiscrepancyKind::MentionUnlinked, ids(&["3"]), ids(&["3"]), Category::EasyPron)]);
}

#[test]
fn link_disagreement_awaits_manual_label() {
    let a = parse_str("<COREF ID=\"1\">the board</COREF> met <COREF ID=\"2\" REF=\"1\">the directors</COREF> and <COREF ID=\"3\">the chairman</COREF> <COREF ID=\"4\" REF=\"3\">the CEO</COREF>").unwrap();
    let mut b = a.clone();
    b.mentions.iter_mut().find(|m| m.id == "4").unwrap().ref_id = Some("2".into());
    b.mentions.iter_mut().find(|m| m.id == "2").unwrap().ref_id = None;
    let lex = PronounLexicon::default();
    let mut rep = diff(&a, &b, &lex).unwrap();
    let ld = rep.discrepancies.iter().find(|d| d.kind == DiscrepancyKind::LinkDisagreement).unwrap();
    assert_eq!(ld.auto_category, Category::Unclassified);
    assert_eq!(auto_classify(ld, &a, &b, &lex), Category::Unclassified);

    let key = ld.key();
    let before = rep.tally.sum.unclassified;
    let labels = BTreeMap::from([(key, Category::Hard)]);
    assert_eq!(rep.apply_labels(&labels), 1);
    assert_eq!(rep.tally.sum.hard, 1);
    assert_eq!(rep.tally.sum.unclassified, before - 1);
    // conservation
    assert_eq!(rep.tally.grand_total as usize, rep.discrepancies.len());
}

#[test]
fn fig4_counts_tally() {
    #[derive(serde::Deserialize)]
    struct Fig4 {
        rows: Vec<CategoryRow>,
    }
    let fig: Fig4 = serde_json::from_slice(&fixture_bytes("fig4_counts.json")).unwrap();
    let t = coref_core::diff::CategoryTally::from_rows(fig.rows);
    assert_eq!((t.sum.pron, t.sum.bugs, t.sum.zone, t.sum.pred), (11, 15, 5, 8));
    assert_eq!((t.sum.easy_total(), t.sum.missing, t.sum.hard, t.grand_total), (39, 79, 22, 140));
    assert_eq!((t.percentages.easy, t.percentages.missing, t.percentages.hard), (Some(28), Some(56), Some(16)));
    assert!(tally(&[]).rows.is_empty());
}

#[test]
fn text_mismatch_is_an_error() {
    let a = parse_str("one two").unwrap();
    let b = parse_str("one three").unwrap();
    assert!(diff(&a, &b, &PronounLexicon::default()).is_err());
}

const TEXT: &str = "he saw it and she said they liked his car there";

fn annotated(prefix: &'static str) -> impl Strategy<Value = AnnotatedDocument> {
    // word i covers chars [starts[i], starts[i]+len)
    let words: Vec<(usize, usize)> = {
        let mut v = Vec::new();
        let mut pos = 0;
        for w in TEXT.split(' ') {
            v.push((pos, pos + w.len()));
            pos += w.len() + 1;
        }
        v
    };
    let n = words.len();
    prop::collection::vec((any::<bool>(), prop::option::of(0..n)), n).prop_map(move |spec| {
        let marked: Vec<usize> = (0..n).filter(|&i| spec[i].0).collect();
        let mentions = marked
            .iter()
            .map(|&i| {
                let mut m = Mention::new(format!("{prefix}{i}"), words[i].0, words[i].1);
                if let Some(t) = spec[i].1 {
                    if t != i && spec[t].0 {
                        m.ref_id = Some(format!("{prefix}{t}"));
                    }
                }
                m
            })
            .collect();
        AnnotatedDocument::new("p", TEXT, mentions)
    })
}

proptest! {
    #[test]
    fn detection_is_symmetric(a in annotated("a"), b in annotated("b")) {
        let lex = PronounLexicon::default();
        let ab = diff(&a, &b, &lex).unwrap();
        let ba = diff(&b, &a, &lex).unwrap();
        let mut lhs: Vec<_> = ab.discrepancies.iter().map(|d| { let s = d.swapped(); (s.kind, s.mentions_a, s.mentions_b, s.auto_category) }).collect();
        let mut rhs: Vec<_> = ba.discrepancies.iter().map(|d| (d.kind, d.mentions_a.clone(), d.mentions_b.clone(), d.auto_category)).collect();
        lhs.sort();
        rhs.sort();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn discrepancies_cite_mentions_and_tally_conserves(a in annotated("a"), b in annotated("b")) {
        let rep = diff(&a, &b, &PronounLexicon::default()).unwrap();
        prop_assert!(rep.discrepancies.iter().all(|d| !d.mentions_a.is_empty() || !d.mentions_b.is_empty()));
        prop_assert_eq!(rep.tally.grand_total as usize, rep.discrepancies.len());
        prop_assert_eq!(tally(std::slice::from_ref(&rep)).sum, rep.tally.sum.clone());
    }
}
