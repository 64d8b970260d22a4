//! Reference model of the annotation state machine for fuzzing the store.
//!
//! Each operation is applied both to a real [`Store`] and to the model; the
//! store's answer (success or error kind) and resulting state must agree
//! with the model's prediction.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use coref_core::Mention;
use coref_service::{Link, NewProject, ServiceError, SourceFile, Stage, Store, StoreConfig};
use rand::seq::SliceRandom;
use rand::Rng;

pub const TOKENS: usize = 24;
pub const DOCS: [&str; 2] = ["d0", "d1"];
pub const ANNOTATORS: [&str; 2] = ["a", "b"];

#[derive(Debug, Clone)]
pub enum Op {
    Markables {
        doc: usize,
        ann: usize,
        tokens: Vec<usize>,
        crossing: bool,
        stale: bool,
    },
    Links {
        doc: usize,
        ann: usize,
        /// `(from index, to index)` into the current markables.
        pairs: Vec<(usize, usize)>,
        unknown: bool,
        stale: bool,
    },
    Advance {
        doc: usize,
        ann: usize,
    },
    Restart,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotModel {
    pub stage: Stage,
    pub revision: u64,
    pub markables: Vec<String>,
    pub links: Vec<(String, String)>,
}

pub struct Model {
    pub project: String,
    pub slots: BTreeMap<(usize, usize), SlotModel>,
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Ok,
    WrongStage,
    Conflict,
    Span,
    Unknown,
}

fn outcome<T>(r: &Result<T, ServiceError>) -> Outcome {
    match r {
        Ok(_) => Outcome::Ok,
        Err(ServiceError::WrongStage { .. }) => Outcome::WrongStage,
        Err(ServiceError::RevisionConflict { .. }) => Outcome::Conflict,
        Err(ServiceError::SpanError(_)) => Outcome::Span,
        Err(ServiceError::UnknownMention(_)) => Outcome::Unknown,
        Err(e) => panic!("unexpected error {e:?}"),
    }
}

pub fn open_store(root: &Path) -> Store {
    Store::open_with(
        root,
        StoreConfig {
            fsync: false,
            ..StoreConfig::default()
        },
    )
    .unwrap()
}

fn text() -> String {
    "w ".repeat(TOKENS)
}

impl Model {
    pub fn new(store: &Store) -> Self {
        let project = store
            .create_project(NewProject {
                name: "fuzz".into(),
                annotators: ANNOTATORS.iter().map(|s| s.to_string()).collect(),
                documents: DOCS.iter().map(|d| SourceFile::new(format!("{d}.txt"), text())).collect(),
                ..NewProject::default()
            })
            .unwrap()
            .project_id;
        let mut slots = BTreeMap::new();
        for d in 0..DOCS.len() {
            for a in 0..ANNOTATORS.len() {
                slots.insert(
                    (d, a),
                    SlotModel {
                        stage: Stage::Markables,
                        revision: 1,
                        markables: vec![],
                        links: vec![],
                    },
                );
            }
        }
        Self { project, slots }
    }

    pub fn random_op(&self, rng: &mut impl Rng) -> Op {
        let doc = rng.gen_range(0..DOCS.len());
        let ann = rng.gen_range(0..ANNOTATORS.len());
        match rng.gen_range(0..100) {
            0..=39 => {
                let mut tokens: Vec<usize> = (0..TOKENS).filter(|_| rng.gen_bool(0.3)).collect();
                tokens.shuffle(rng);
                Op::Markables {
                    doc,
                    ann,
                    tokens,
                    crossing: rng.gen_bool(0.1),
                    stale: rng.gen_bool(0.15),
                }
            }
            40..=84 => {
                let n = self.slots[&(doc, ann)].markables.len().max(1);
                let mut pairs: Vec<(usize, usize)> = (0..rng.gen_range(0..=n))
                    .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
                    .filter(|(f, t)| f != t)
                    .collect();
                pairs.sort();
                pairs.dedup_by_key(|p| p.0);
                Op::Links {
                    doc,
                    ann,
                    pairs,
                    unknown: rng.gen_bool(0.05),
                    stale: rng.gen_bool(0.15),
                }
            }
            85..=97 => Op::Advance { doc, ann },
            _ => Op::Restart,
        }
    }

    /// Applies `op` to the store and the model and checks they agree.
    /// `Restart` is the caller's job (the store handle must be replaced).
    pub fn apply(&mut self, store: &Store, op: &Op) {
        let p = self.project.clone();
        match op {
            Op::Markables {
                doc,
                ann,
                tokens,
                crossing,
                stale,
            } => {
                let slot = self.slots.get_mut(&(*doc, *ann)).unwrap();
                let mut ms: Vec<Mention> = tokens.iter().map(|&i| Mention::new(format!("m{i}"), 2 * i, 2 * i + 1)).collect();
                if *crossing {
                    ms.push(Mention::new("x1", 0, 3));
                    ms.push(Mention::new("x2", 2, 5));
                }
                let rev = if *stale { slot.revision.wrapping_sub(1) } else { slot.revision };
                let expect = if slot.stage != Stage::Markables {
                    Outcome::WrongStage
                } else if *stale {
                    Outcome::Conflict
                } else if *crossing {
                    Outcome::Span
                } else {
                    Outcome::Ok
                };
                let r = store.save_markables(&p, DOCS[*doc], ANNOTATORS[*ann], ms, rev);
                assert_eq!(outcome(&r), expect, "{op:?} -> {r:?}");
                if expect == Outcome::Ok {
                    slot.revision += 1;
                    let mut sorted = tokens.clone();
                    sorted.sort();
                    slot.markables = sorted.iter().map(|i| format!("m{i}")).collect();
                    assert_eq!(r.unwrap(), slot.revision);
                }
            }
            Op::Links {
                doc,
                ann,
                pairs,
                unknown,
                stale,
            } => {
                let slot = self.slots.get_mut(&(*doc, *ann)).unwrap();
                let ids = &slot.markables;
                let mut links: Vec<Link> = pairs
                    .iter()
                    .filter(|(f, t)| *f < ids.len() && *t < ids.len())
                    .map(|&(f, t)| Link::new(ids[f].clone(), ids[t].clone()))
                    .collect();
                if *unknown {
                    links.push(Link::new("zz", ids.first().map_or("zz2", |s| s.as_str())));
                }
                let rev = if *stale { slot.revision + 1 } else { slot.revision };
                let expect = if slot.stage != Stage::Linking {
                    Outcome::WrongStage
                } else if *stale {
                    Outcome::Conflict
                } else if *unknown {
                    Outcome::Unknown
                } else {
                    Outcome::Ok
                };
                let r = store.save_links(&p, DOCS[*doc], ANNOTATORS[*ann], links.clone(), rev);
                assert_eq!(outcome(&r), expect, "{op:?} -> {r:?}");
                if expect == Outcome::Ok {
                    slot.revision += 1;
                    let mut l: Vec<(String, String)> = links.into_iter().map(|l| (l.from, l.to)).collect();
                    l.sort();
                    slot.links = l;
                }
            }
            Op::Advance { doc, ann } => {
                let slot = self.slots.get_mut(&(*doc, *ann)).unwrap();
                let r = store.advance_stage(&p, DOCS[*doc], ANNOTATORS[*ann]);
                match slot.stage.next() {
                    Some(next) => {
                        slot.stage = next;
                        slot.revision += 1;
                        let s = r.unwrap();
                        assert_eq!((s.stage, s.revision), (slot.stage, slot.revision));
                    }
                    None => assert_eq!(outcome(&r), Outcome::WrongStage),
                }
            }
            Op::Restart => {}
        }
        self.check(store);
    }

    /// Store state equals the model, and no slot in `Markables` has links.
    pub fn check(&self, store: &Store) {
        for (&(d, a), m) in &self.slots {
            let st = store.state(&self.project, DOCS[d], ANNOTATORS[a]).unwrap();
            assert!(st.stage != Stage::Markables || st.links.is_empty(), "link in Markables stage");
            assert_eq!(st.stage, m.stage);
            assert_eq!(st.revision, m.revision);
            let mut ids: Vec<&str> = st.markables.iter().map(|m| m.id.as_str()).collect();
            ids.sort_by_key(|id| id[1..].parse::<usize>().unwrap_or(usize::MAX));
            assert_eq!(ids, m.markables.iter().map(String::as_str).collect::<Vec<_>>());
            let mut links: Vec<(String, String)> = st.links.iter().map(|l| (l.from.clone(), l.to.clone())).collect();
            links.sort();
            assert_eq!(links, m.links);
        }
    }
}
