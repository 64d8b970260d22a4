mod support;

use std::collections::HashSet;

use coref_core::{align, align_symmetric, parse_muc_sgml, AnnotatedDocument, MatchKind, Mention};
use proptest::prelude::*;
use support::fixture_bytes;

const TEXT: &str = "aa bb cc dd ee ff gg hh ii jj";

/// Nested-or-disjoint random spans over whole words, some with a MIN word.
fn doc_strategy(prefix: &'static str) -> impl Strategy<Value = AnnotatedDocument> {
    prop::collection::vec((0usize..10, 1usize..4, any::<bool>()), 0..10).prop_map(move |cands| {
        let word = |i: usize| (3 * i, 3 * i + 2);
        let mut spans: Vec<(usize, usize)> = Vec::new();
        let mut mentions = Vec::new();
        for (k, (s, len, with_min)) in cands.into_iter().enumerate() {
            let e = (s + len).min(10);
            let ok = spans.iter().all(|&(a, b)| {
                (e <= a || b <= s) || ((a <= s && e <= b) || (s <= a && b <= e)) && (a, b) != (s, e)
            });
            if !ok {
                continue;
            }
            spans.push((s, e));
            let mut m = Mention::new(format!("{prefix}{k}"), word(s).0, word(e - 1).1);
            if with_min {
                let (hs, he) = word(e - 1);
                m.min_head = Some(TEXT[hs..he].to_owned());
            }
            mentions.push(m);
        }
        AnnotatedDocument::new("d", TEXT, mentions)
    })
}

proptest! {
    #[test]
    fn alignment_is_injective_and_complete(k in doc_strategy("k"), r in doc_strategy("r")) {
        let al = align(&k, &r).unwrap();
        let keys: HashSet<_> = al.pairs.iter().map(|p| p.key.clone()).collect();
        let resps: HashSet<_> = al.pairs.iter().map(|p| p.response.clone()).collect();
        prop_assert_eq!(keys.len(), al.pairs.len());
        prop_assert_eq!(resps.len(), al.pairs.len());
        prop_assert!(al.unmatched_key.iter().all(|id| !keys.contains(id)));
        prop_assert!(al.unmatched_response.iter().all(|id| !resps.contains(id)));
        prop_assert_eq!(keys.len() + al.unmatched_key.len(), k.mentions.len());
        prop_assert_eq!(resps.len() + al.unmatched_response.len(), r.mentions.len());
        prop_assert_eq!(align(&k, &r).unwrap(), al);
    }

    #[test]
    fn exact_matches_dominate(k in doc_strategy("k"), r in doc_strategy("r")) {
        let al = align(&k, &r).unwrap();
        let resp_spans: HashSet<_> = r.mentions.iter().map(|m| m.span).collect();
        for p in &al.pairs {
            let ks = k.mention(&p.key).unwrap().span;
            let rs = r.mention(&p.response).unwrap().span;
            prop_assert_eq!(p.kind == MatchKind::Exact, ks == rs);
        }
        for m in &k.mentions {
            if resp_spans.contains(&m.span) {
                let p = al.pairs.iter().find(|p| p.key == m.id).unwrap();
                prop_assert_eq!(p.kind, MatchKind::Exact);
            }
        }
    }

    #[test]
    fn symmetric_alignment_swaps_roles(a in doc_strategy("a"), b in doc_strategy("b")) {
        let ab = align_symmetric(&a, &b).unwrap();
        let ba = align_symmetric(&b, &a).unwrap();
        let mut lhs: Vec<_> = ab.swapped().pairs.into_iter().map(|p| (p.key, p.response, p.kind)).collect();
        let mut rhs: Vec<_> = ba.pairs.into_iter().map(|p| (p.key, p.response, p.kind)).collect();
        lhs.sort();
        rhs.sort();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn self_alignment_is_identity(d in doc_strategy("m")) {
        let al = align(&d, &d).unwrap();
        prop_assert!(al.pairs.iter().all(|p| p.key == p.response && p.kind == MatchKind::Exact));
        prop_assert!(al.unmatched_key.is_empty() && al.unmatched_response.is_empty());
    }
}

#[test]
fn extended_fixture_alignment() {
    let a = parse_muc_sgml(&fixture_bytes("bulger_a.sgml")).unwrap();
    let b = parse_muc_sgml(&fixture_bytes("bulger_b.sgml")).unwrap();
    let al = align(&a, &b).unwrap();
    let two = al.pairs.iter().find(|p| p.key == "2").unwrap();
    assert_eq!((two.response.as_str(), two.kind), ("2", MatchKind::Min));
    assert_eq!(al.unmatched_key, ["11", "12"]);
    assert!(al.unmatched_response.is_empty());
}
