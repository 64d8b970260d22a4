#![allow(dead_code)]

use std::path::PathBuf;

use coref_core::{parse_muc_sgml, AnnotatedDocument, Mention};
use coref_service::{Link, NewProject, SourceFile, Store, StoreConfig};

pub fn core_fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn fig1() -> AnnotatedDocument {
    parse_muc_sgml(&core_fixture("fig1.sgml")).unwrap()
}

/// Fig. 1 mentions with their `REF`s removed.
pub fn fig1_markables() -> Vec<Mention> {
    fig1()
        .mentions
        .into_iter()
        .map(|mut m| {
            m.ref_id = None;
            m
        })
        .collect()
}

pub fn fig1_links() -> Vec<Link> {
    vec![Link::new("3", "1"), Link::new("4", "2")]
}

pub fn open(root: &std::path::Path) -> Store {
    Store::open_with(
        root,
        StoreConfig {
            fsync: false,
            ..StoreConfig::default()
        },
    )
    .unwrap()
}

/// Project `p` with annotators `a`, `b` and the Fig. 1 passage as document `fig1`.
pub fn fig1_project(store: &Store) -> String {
    store
        .create_project(NewProject {
            name: "p".into(),
            annotators: vec!["a".into(), "b".into()],
            documents: vec![SourceFile::new("fig1.sgml", core_fixture("fig1.sgml"))],
            ..NewProject::default()
        })
        .unwrap()
        .project_id
}

/// Drives one annotator through both passes and finishes.
pub fn annotate(store: &Store, p: &str, d: &str, a: &str, markables: Vec<Mention>, links: Vec<Link>) {
    let rev = store.state(p, d, a).unwrap().revision;
    let rev = store.save_markables(p, d, a, markables, rev).unwrap();
    store.advance_stage(p, d, a).unwrap();
    store.save_links(p, d, a, links, rev + 1).unwrap();
    store.advance_stage(p, d, a).unwrap();
}
