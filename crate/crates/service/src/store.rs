//! On-disk project store and the two-stage annotation state machine.
//!
//! Layout under the store root:
//!
//! ```text
//! <project>/project.json
//! <project>/docs/<doc>.txt                      base text, written once
//! <project>/annotations/<doc>/<annotator>.sgml  canonical COREF SGML
//! <project>/annotations/<doc>/<annotator>.state.json
//! ```
//!
//! Every file is replaced atomically (temporary file plus rename).
//! `project.json` is written last on import, so a document it does not list
//! is ignored on reopen.
//!
//! Mutations of one annotator's state on one document are serialized by a
//! per-slot mutex. Readers clone an `Arc` snapshot and never wait on disk IO.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use coref_core::sgml::parse_str;
use coref_core::{
    align, build_chains, chain_table_with, diff, parse_muc_sgml, score, serialize_muc_sgml, AnnotatedDocument,
    Category, CategoryTally, ChainSet, ChainTable, DiffReport, Mention, PronounLexicon, ScoreReport,
    Zone,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Markables,
    Linking,
    Done,
}

impl Stage {
    pub fn next(self) -> Option<Stage> {
        match self {
            Stage::Markables => Some(Stage::Linking),
            Stage::Linking => Some(Stage::Done),
            Stage::Done => None,
        }
    }
}

/// A coreference link from a mention to its antecedent (`REF`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub from: String,
    pub to: String,
}

impl Link {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectOptions {
    /// Annotators see each other's markables.
    #[serde(default)]
    pub share_markables: bool,
    /// Markables may still be edited during the linking pass.
    #[serde(default)]
    pub span_edits_in_linking: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub project_id: String,
    pub name: String,
    pub annotators: Vec<String>,
    pub documents: Vec<String>,
    #[serde(default)]
    pub options: ProjectOptions,
}

/// One annotator's work on one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationState {
    pub stage: Stage,
    pub revision: u64,
    /// Mentions in document order; `ref` is always empty here.
    pub markables: Vec<Mention>,
    pub links: Vec<Link>,
    /// Adjudication labels: other annotator, then discrepancy key.
    pub manual_diff_labels: BTreeMap<String, BTreeMap<String, Category>>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    stage: Stage,
    revision: u64,
    #[serde(default)]
    manual_diff_labels: BTreeMap<String, BTreeMap<String, Category>>,
}

/// Uploaded corpus file: plain text or COREF SGML.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl SourceFile {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NewProject {
    pub name: String,
    pub annotators: Vec<String>,
    pub documents: Vec<SourceFile>,
    pub options: ProjectOptions,
    /// Start every annotator from the COREF markup found in the files.
    pub seed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateSummary {
    pub stage: Stage,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub text_length: usize,
    pub states: BTreeMap<String, StateSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectSummary {
    pub project_id: String,
    pub name: String,
    pub annotators: Vec<String>,
    pub options: ProjectOptions,
    pub documents: Vec<DocumentSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocumentView {
    pub project_id: String,
    pub doc_id: String,
    pub annotator: String,
    pub base_text: String,
    /// Length in Unicode scalar values; all offsets use this unit.
    pub text_length: usize,
    pub zones: Vec<Zone>,
    pub stage: Stage,
    pub revision: u64,
    pub markables: Vec<Mention>,
    pub links: Vec<Link>,
    pub chains: ChainSet,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub peer_markables: BTreeMap<String, Vec<Mention>>,
}

/// Score with `key` as key and `response` as response, plus their diff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agreement {
    pub key: String,
    pub response: String,
    pub score: ScoreReport,
    pub diff: DiffReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocDump {
    pub base_text: String,
    pub states: BTreeMap<String, AnnotationState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectDump {
    pub meta: ProjectMeta,
    pub docs: BTreeMap<String, DocDump>,
}

/// Complete store contents, for comparing state across restarts.
pub type StoreDump = BTreeMap<String, ProjectDump>;

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub lexicon: PronounLexicon,
    /// `fsync` every file before it replaces the previous version.
    pub fsync: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            lexicon: PronounLexicon::default(),
            fsync: true,
        }
    }
}

pub struct Store {
    root: PathBuf,
    config: StoreConfig,
    projects: RwLock<BTreeMap<String, Arc<Project>>>,
    create_lock: Mutex<()>,
}

struct Project {
    dir: PathBuf,
    meta: RwLock<Arc<ProjectMeta>>,
    docs: RwLock<BTreeMap<String, Arc<DocEntry>>>,
    import_lock: Mutex<()>,
}

struct DocEntry {
    doc_id: String,
    base_text: String,
    zones: Vec<Zone>,
    slots: BTreeMap<String, Slot>,
}

struct Slot {
    write: Mutex<()>,
    current: RwLock<Arc<AnnotationState>>,
}

struct PreparedDoc {
    doc_id: String,
    base_text: String,
    seed: Option<Vec<Mention>>,
}

fn check_ident(kind: &str, s: &str) -> Result<()> {
    let mut chars = s.chars();
    let ok = s.len() <= 128
        && chars.next().is_some_and(|c| c.is_ascii_alphanumeric())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::Invalid(format!(
            "{kind} {s:?} must be 1-128 characters of [A-Za-z0-9._-] starting with a letter or digit"
        )))
    }
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' })
        .collect();
    let s = s.trim_matches('-').to_owned();
    if s.is_empty() {
        "project".to_owned()
    } else {
        s.chars().take(100).collect()
    }
}

fn file_stem(name: &str) -> &str {
    let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
    match base.rfind('.') {
        Some(i) if i > 0 => &base[..i],
        _ => base,
    }
}

fn write_atomic(path: &Path, bytes: &[u8], fsync: bool) -> std::io::Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let mut tmp = tempfile::Builder::new().prefix(".tmp").tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    if fsync {
        tmp.as_file().sync_all()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("store types serialize");
    v.push(b'\n');
    v
}

fn split_mentions(mentions: Vec<Mention>) -> (Vec<Mention>, Vec<Link>) {
    let mut links = Vec::new();
    let markables = mentions
        .into_iter()
        .map(|mut m| {
            if let Some(to) = m.ref_id.take() {
                links.push(Link::new(m.id.clone(), to));
            }
            m
        })
        .collect();
    (markables, links)
}

fn check_revision(state: &AnnotationState, expected: u64) -> Result<()> {
    if state.revision == expected {
        Ok(())
    } else {
        Err(ServiceError::RevisionConflict {
            expected,
            current: state.revision,
        })
    }
}

impl Slot {
    fn new(state: AnnotationState) -> Self {
        Self {
            write: Mutex::new(()),
            current: RwLock::new(Arc::new(state)),
        }
    }

    fn snapshot(&self) -> Arc<AnnotationState> {
        self.current.read().clone()
    }
}

impl DocEntry {
    fn slot(&self, annotator: &str) -> Result<&Slot> {
        self.slots
            .get(annotator)
            .ok_or_else(|| ServiceError::UnknownAnnotator(annotator.to_owned()))
    }

    fn document(&self, state: &AnnotationState) -> AnnotatedDocument {
        let refs: BTreeMap<&str, &str> = state.links.iter().map(|l| (l.from.as_str(), l.to.as_str())).collect();
        let mentions = state
            .markables
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.ref_id = refs.get(m.id.as_str()).map(|s| (*s).to_owned());
                m
            })
            .collect();
        AnnotatedDocument::new(self.doc_id.clone(), self.base_text.clone(), mentions)
    }

    /// Validates `mentions`, renders them to canonical SGML and re-reads the
    /// markup, so the in-memory state is exactly what a reload would produce.
    fn canonical(&self, mentions: Vec<Mention>) -> Result<(String, Vec<Mention>, Vec<Link>)> {
        let doc = AnnotatedDocument::new(self.doc_id.clone(), self.base_text.clone(), mentions);
        doc.validate().map_err(ServiceError::SpanError)?;
        let sgml = serialize_muc_sgml(&doc).map_err(ServiceError::SpanError)?;
        let back = parse_str(&sgml).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        if back.base_text != self.base_text {
            return Err(ServiceError::Corrupt("canonical form changed the base text".into()));
        }
        let (markables, links) = split_mentions(back.mentions);
        Ok((sgml, markables, links))
    }
}

impl Project {
    fn meta(&self) -> Arc<ProjectMeta> {
        self.meta.read().clone()
    }

    fn doc_path(&self, doc_id: &str) -> PathBuf {
        self.dir.join("docs").join(format!("{doc_id}.txt"))
    }

    fn ann_dir(&self, doc_id: &str) -> PathBuf {
        self.dir.join("annotations").join(doc_id)
    }

    fn sgml_path(&self, doc_id: &str, annotator: &str) -> PathBuf {
        self.ann_dir(doc_id).join(format!("{annotator}.sgml"))
    }

    fn state_path(&self, doc_id: &str, annotator: &str) -> PathBuf {
        self.ann_dir(doc_id).join(format!("{annotator}.state.json"))
    }

    fn doc(&self, doc_id: &str) -> Result<Arc<DocEntry>> {
        self.docs
            .read()
            .get(doc_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownDocument(doc_id.to_owned()))
    }

    fn write_state(&self, doc_id: &str, annotator: &str, state: &AnnotationState, sgml: Option<&str>, fsync: bool) -> Result<()> {
        if let Some(sgml) = sgml {
            write_atomic(&self.sgml_path(doc_id, annotator), sgml.as_bytes(), fsync)?;
        }
        let file = StateFile {
            stage: state.stage,
            revision: state.revision,
            manual_diff_labels: state.manual_diff_labels.clone(),
        };
        write_atomic(&self.state_path(doc_id, annotator), &to_json(&file), fsync)?;
        Ok(())
    }

    fn load(dir: PathBuf) -> Result<Self> {
        let meta: ProjectMeta = serde_json::from_slice(&fs::read(dir.join("project.json"))?)
            .map_err(|e| ServiceError::Corrupt(format!("{}: {e}", dir.display())))?;
        let project = Project {
            dir,
            meta: RwLock::new(Arc::new(meta.clone())),
            docs: RwLock::new(BTreeMap::new()),
            import_lock: Mutex::new(()),
        };
        let mut docs = BTreeMap::new();
        for doc_id in &meta.documents {
            let base_text = fs::read_to_string(project.doc_path(doc_id))?;
            let mut slots = BTreeMap::new();
            for a in &meta.annotators {
                let corrupt = |what: String| ServiceError::Corrupt(format!("{doc_id}/{a}: {what}"));
                let sgml = fs::read_to_string(project.sgml_path(doc_id, a))?;
                let parsed = parse_str(&sgml).map_err(|e| corrupt(e.to_string()))?;
                if parsed.base_text != base_text {
                    return Err(corrupt("annotation text differs from the document".into()));
                }
                let file: StateFile = serde_json::from_slice(&fs::read(project.state_path(doc_id, a))?)
                    .map_err(|e| corrupt(e.to_string()))?;
                let (markables, links) = split_mentions(parsed.mentions);
                slots.insert(
                    a.clone(),
                    Slot::new(AnnotationState {
                        stage: file.stage,
                        revision: file.revision,
                        markables,
                        links,
                        manual_diff_labels: file.manual_diff_labels,
                    }),
                );
            }
            let zones = coref_core::segment_zones(&base_text);
            docs.insert(
                doc_id.clone(),
                Arc::new(DocEntry {
                    doc_id: doc_id.clone(),
                    base_text,
                    zones,
                    slots,
                }),
            );
        }
        *project.docs.write() = docs;
        Ok(project)
    }
}

fn prepare(files: Vec<SourceFile>, taken: &HashSet<String>, seed: bool) -> Result<Vec<PreparedDoc>> {
    let mut seen = taken.clone();
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let parsed = parse_muc_sgml(&f.bytes).map_err(|source| ServiceError::ParseError {
            file: f.name.clone(),
            source,
        })?;
        let doc_id = if parsed.doc_id.is_empty() {
            file_stem(&f.name).to_owned()
        } else {
            parsed.doc_id.clone()
        };
        check_ident("document id", &doc_id).map_err(|e| ServiceError::Invalid(format!("{}: {e}", f.name)))?;
        if !seen.insert(doc_id.clone()) {
            return Err(ServiceError::ImportConflict(doc_id));
        }
        out.push(PreparedDoc {
            doc_id,
            base_text: parsed.base_text,
            seed: seed.then_some(parsed.mentions),
        });
    }
    Ok(out)
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        Self::open_with(root, StoreConfig::default())
    }

    /// Opens (creating if needed) the store at `root` and loads every project.
    pub fn open_with(root: impl Into<PathBuf>, config: StoreConfig) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut projects = BTreeMap::new();
        for entry in fs::read_dir(&root)? {
            let entry = entry?;
            let dir = entry.path();
            if !dir.join("project.json").is_file() {
                continue;
            }
            let project = Project::load(dir)?;
            let id = project.meta().project_id.clone();
            projects.insert(id, Arc::new(project));
        }
        Ok(Self {
            root,
            config,
            projects: RwLock::new(projects),
            create_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn list_projects(&self) -> Vec<ProjectMeta> {
        self.projects.read().values().map(|p| (*p.meta()).clone()).collect()
    }

    fn project_entry(&self, project_id: &str) -> Result<Arc<Project>> {
        self.projects
            .read()
            .get(project_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownProject(project_id.to_owned()))
    }

    fn entries(&self, project_id: &str, doc_id: &str) -> Result<(Arc<Project>, Arc<DocEntry>)> {
        let project = self.project_entry(project_id)?;
        let doc = project.doc(doc_id)?;
        Ok((project, doc))
    }

    pub fn create_project(&self, req: NewProject) -> Result<ProjectSummary> {
        let mut seen = HashSet::new();
        for a in &req.annotators {
            check_ident("annotator id", a)?;
            if !seen.insert(a.as_str()) {
                return Err(ServiceError::Invalid(format!("duplicate annotator {a:?}")));
            }
        }
        let prepared = prepare(req.documents, &HashSet::new(), req.seed)?;

        let _guard = self.create_lock.lock();
        let base = slug(&req.name);
        let mut project_id = base.clone();
        let mut n = 1;
        while self.projects.read().contains_key(&project_id) || self.root.join(&project_id).exists() {
            n += 1;
            project_id = format!("{base}-{n}");
        }
        let dir = self.root.join(&project_id);
        fs::create_dir_all(dir.join("docs"))?;
        fs::create_dir_all(dir.join("annotations"))?;
        let project = Arc::new(Project {
            dir,
            meta: RwLock::new(Arc::new(ProjectMeta {
                project_id: project_id.clone(),
                name: req.name,
                annotators: req.annotators,
                documents: Vec::new(),
                options: req.options,
            })),
            docs: RwLock::new(BTreeMap::new()),
            import_lock: Mutex::new(()),
        });
        self.commit_import(&project, prepared)?;
        self.projects.write().insert(project_id.clone(), project);
        self.project(&project_id)
    }

    /// Adds documents to a project. All files are parsed before anything is
    /// written; one bad file rejects the whole batch.
    pub fn import_documents(&self, project_id: &str, files: Vec<SourceFile>, seed: bool) -> Result<Vec<String>> {
        let project = self.project_entry(project_id)?;
        let _guard = project.import_lock.lock();
        let taken: HashSet<String> = project.meta().documents.iter().cloned().collect();
        let prepared = prepare(files, &taken, seed)?;
        let ids = prepared.iter().map(|d| d.doc_id.clone()).collect();
        self.commit_import(&project, prepared)?;
        Ok(ids)
    }

    fn commit_import(&self, project: &Project, prepared: Vec<PreparedDoc>) -> Result<()> {
        let fsync = self.config.fsync;
        let mut meta = (*project.meta()).clone();
        let mut entries = Vec::with_capacity(prepared.len());
        for p in prepared {
            write_atomic(&project.doc_path(&p.doc_id), p.base_text.as_bytes(), fsync)?;
            fs::create_dir_all(project.ann_dir(&p.doc_id))?;
            let mut entry = DocEntry {
                zones: coref_core::segment_zones(&p.base_text),
                doc_id: p.doc_id,
                base_text: p.base_text,
                slots: BTreeMap::new(),
            };
            let (sgml, markables, links) = entry.canonical(p.seed.unwrap_or_default())?;
            let stage = if links.is_empty() { Stage::Markables } else { Stage::Linking };
            for a in &meta.annotators {
                let state = AnnotationState {
                    stage,
                    revision: 1,
                    markables: markables.clone(),
                    links: links.clone(),
                    manual_diff_labels: BTreeMap::new(),
                };
                project.write_state(&entry.doc_id, a, &state, Some(&sgml), fsync)?;
                entry.slots.insert(a.clone(), Slot::new(state));
            }
            meta.documents.push(entry.doc_id.clone());
            entries.push(entry);
        }
        write_atomic(&project.dir.join("project.json"), &to_json(&meta), fsync)?;
        *project.meta.write() = Arc::new(meta);
        let mut docs = project.docs.write();
        for e in entries {
            docs.insert(e.doc_id.clone(), Arc::new(e));
        }
        Ok(())
    }

    pub fn project(&self, project_id: &str) -> Result<ProjectSummary> {
        let project = self.project_entry(project_id)?;
        let meta = project.meta();
        let docs = project.docs.read();
        let documents = meta
            .documents
            .iter()
            .filter_map(|id| docs.get(id))
            .map(|d| DocumentSummary {
                doc_id: d.doc_id.clone(),
                text_length: d.base_text.chars().count(),
                states: d
                    .slots
                    .iter()
                    .map(|(a, s)| {
                        let st = s.snapshot();
                        (
                            a.clone(),
                            StateSummary {
                                stage: st.stage,
                                revision: st.revision,
                            },
                        )
                    })
                    .collect(),
            })
            .collect();
        Ok(ProjectSummary {
            project_id: meta.project_id.clone(),
            name: meta.name.clone(),
            annotators: meta.annotators.clone(),
            options: meta.options.clone(),
            documents,
        })
    }

    pub fn state(&self, project_id: &str, doc_id: &str, annotator: &str) -> Result<Arc<AnnotationState>> {
        let (_, doc) = self.entries(project_id, doc_id)?;
        Ok(doc.slot(annotator)?.snapshot())
    }

    /// The annotator's view of a document. Other annotators' markables are
    /// included only when the project shares markables.
    pub fn document(&self, project_id: &str, doc_id: &str, annotator: &str) -> Result<DocumentView> {
        let (project, doc) = self.entries(project_id, doc_id)?;
        let state = doc.slot(annotator)?.snapshot();
        let chains = build_chains(&doc.document(&state)).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        let peer_markables = if project.meta().options.share_markables {
            doc.slots
                .iter()
                .filter(|(a, _)| a.as_str() != annotator)
                .map(|(a, s)| (a.clone(), s.snapshot().markables.clone()))
                .collect()
        } else {
            BTreeMap::new()
        };
        Ok(DocumentView {
            project_id: project_id.to_owned(),
            doc_id: doc.doc_id.clone(),
            annotator: annotator.to_owned(),
            text_length: doc.base_text.chars().count(),
            base_text: doc.base_text.clone(),
            zones: doc.zones.clone(),
            stage: state.stage,
            revision: state.revision,
            markables: state.markables.clone(),
            links: state.links.clone(),
            chains,
            peer_markables,
        })
    }

    fn commit(&self, project: &Project, doc: &DocEntry, annotator: &str, slot: &Slot, next: AnnotationState, sgml: Option<&str>) -> Result<u64> {
        project.write_state(&doc.doc_id, annotator, &next, sgml, self.config.fsync)?;
        let revision = next.revision;
        *slot.current.write() = Arc::new(next);
        Ok(revision)
    }

    /// Replaces the markable set. Allowed in stage `Markables`, and in
    /// `Linking` when the project enables span edits; existing links must
    /// still point at submitted markables.
    pub fn save_markables(
        &self,
        project_id: &str,
        doc_id: &str,
        annotator: &str,
        markables: Vec<Mention>,
        expected_revision: u64,
    ) -> Result<u64> {
        let (project, doc) = self.entries(project_id, doc_id)?;
        let slot = doc.slot(annotator)?;
        let _w = slot.write.lock();
        let cur = slot.snapshot();
        match cur.stage {
            Stage::Markables => {}
            Stage::Linking if project.meta().options.span_edits_in_linking => {}
            stage => return Err(ServiceError::WrongStage { stage, op: "save_markables" }),
        }
        check_revision(&cur, expected_revision)?;
        if let Some(m) = markables.iter().find(|m| m.ref_id.is_some()) {
            return Err(ServiceError::Invalid(format!(
                "markable {:?} carries a REF; links are saved separately",
                m.id
            )));
        }
        let ids: HashSet<&str> = markables.iter().map(|m| m.id.as_str()).collect();
        if let Some(l) = cur.links.iter().find(|l| !ids.contains(l.from.as_str()) || !ids.contains(l.to.as_str())) {
            return Err(ServiceError::InvalidLink(format!(
                "link {} -> {} refers to a removed markable",
                l.from, l.to
            )));
        }
        let refs: BTreeMap<&str, &str> = cur.links.iter().map(|l| (l.from.as_str(), l.to.as_str())).collect();
        let mentions = markables
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.ref_id = refs.get(m.id.as_str()).map(|s| (*s).to_owned());
                m
            })
            .collect();
        let (sgml, markables, links) = doc.canonical(mentions)?;
        let next = AnnotationState {
            stage: cur.stage,
            revision: cur.revision + 1,
            markables,
            links,
            manual_diff_labels: cur.manual_diff_labels.clone(),
        };
        self.commit(&project, &doc, annotator, slot, next, Some(&sgml))
    }

    /// Replaces the link set; only in stage `Linking`. Each mention has at
    /// most one antecedent.
    pub fn save_links(
        &self,
        project_id: &str,
        doc_id: &str,
        annotator: &str,
        links: Vec<Link>,
        expected_revision: u64,
    ) -> Result<u64> {
        let (project, doc) = self.entries(project_id, doc_id)?;
        let slot = doc.slot(annotator)?;
        let _w = slot.write.lock();
        let cur = slot.snapshot();
        if cur.stage != Stage::Linking {
            return Err(ServiceError::WrongStage {
                stage: cur.stage,
                op: "save_links",
            });
        }
        check_revision(&cur, expected_revision)?;
        let ids: HashSet<&str> = cur.markables.iter().map(|m| m.id.as_str()).collect();
        let mut targets: BTreeMap<&str, &str> = BTreeMap::new();
        for l in &links {
            for end in [&l.from, &l.to] {
                if !ids.contains(end.as_str()) {
                    return Err(ServiceError::UnknownMention(end.clone()));
                }
            }
            if l.from == l.to {
                return Err(ServiceError::InvalidLink(format!("{} links to itself", l.from)));
            }
            if let Some(prev) = targets.insert(&l.from, &l.to) {
                if prev != l.to {
                    return Err(ServiceError::InvalidLink(format!(
                        "{} has more than one antecedent ({prev}, {})",
                        l.from, l.to
                    )));
                }
            }
        }
        let mentions = cur
            .markables
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.ref_id = targets.get(m.id.as_str()).map(|s| (*s).to_owned());
                m
            })
            .collect();
        let (sgml, markables, links) = doc.canonical(mentions)?;
        let next = AnnotationState {
            stage: cur.stage,
            revision: cur.revision + 1,
            markables,
            links,
            manual_diff_labels: cur.manual_diff_labels.clone(),
        };
        self.commit(&project, &doc, annotator, slot, next, Some(&sgml))
    }

    /// Moves to the next stage and bumps the revision.
    pub fn advance_stage(&self, project_id: &str, doc_id: &str, annotator: &str) -> Result<StateSummary> {
        let (project, doc) = self.entries(project_id, doc_id)?;
        let slot = doc.slot(annotator)?;
        let _w = slot.write.lock();
        let cur = slot.snapshot();
        let stage = cur.stage.next().ok_or(ServiceError::WrongStage {
            stage: cur.stage,
            op: "advance",
        })?;
        let next = AnnotationState {
            stage,
            revision: cur.revision + 1,
            ..(*cur).clone()
        };
        let revision = self.commit(&project, &doc, annotator, slot, next, None)?;
        Ok(StateSummary { stage, revision })
    }

    pub fn export_sgml(&self, project_id: &str, doc_id: &str, annotator: &str) -> Result<String> {
        let (_, doc) = self.entries(project_id, doc_id)?;
        let state = doc.slot(annotator)?.snapshot();
        serialize_muc_sgml(&doc.document(&state)).map_err(|e| ServiceError::Corrupt(e.to_string()))
    }

    pub fn chains(&self, project_id: &str, doc_id: &str, annotator: &str) -> Result<ChainSet> {
        let (_, doc) = self.entries(project_id, doc_id)?;
        let state = doc.slot(annotator)?.snapshot();
        build_chains(&doc.document(&state)).map_err(|e| ServiceError::Corrupt(e.to_string()))
    }

    pub fn chain_table(&self, project_id: &str, doc_id: &str, annotator: &str, include_singletons: bool) -> Result<ChainTable> {
        let (_, doc) = self.entries(project_id, doc_id)?;
        let state = doc.slot(annotator)?.snapshot();
        let d = doc.document(&state);
        let chains = build_chains(&d).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        Ok(chain_table_with(&d, &chains, include_singletons))
    }

    /// The annotator pair in project order: `(owner, other, reversed)`.
    /// Labels for a pair live in the owner's state under the other's name,
    /// keyed in the owner's orientation.
    fn label_owner<'a>(meta: &ProjectMeta, a: &'a str, b: &'a str) -> Result<(&'a str, &'a str, bool)> {
        let pos = |x: &str| {
            meta.annotators
                .iter()
                .position(|y| y == x)
                .ok_or_else(|| ServiceError::UnknownAnnotator(x.to_owned()))
        };
        let (ia, ib) = (pos(a)?, pos(b)?);
        if ia == ib {
            return Err(ServiceError::Invalid("agreement needs two different annotators".into()));
        }
        Ok(if ia < ib { (a, b, false) } else { (b, a, true) })
    }

    fn done_snapshot(doc: &DocEntry, annotator: &str) -> Result<Arc<AnnotationState>> {
        let s = doc.slot(annotator)?.snapshot();
        if s.stage == Stage::Done {
            Ok(s)
        } else {
            Err(ServiceError::WrongStage {
                stage: s.stage,
                op: "agreement",
            })
        }
    }

    fn agreement_of(&self, project: &Project, doc: &DocEntry, a: &str, b: &str) -> Result<Agreement> {
        let (owner, other, reversed) = Self::label_owner(&project.meta(), a, b)?;
        let sa = Self::done_snapshot(doc, a)?;
        let sb = Self::done_snapshot(doc, b)?;
        let key = doc.document(&sa);
        let response = doc.document(&sb);
        let alignment = align(&key, &response).map_err(coref_core::DiffError::from)?;
        let kc = build_chains(&key).map_err(coref_core::DiffError::from)?;
        let rc = build_chains(&response).map_err(coref_core::DiffError::from)?;
        let score = score(&kc, &rc, &alignment).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        let mut report = diff(&key, &response, &self.config.lexicon)?;

        let owner_state = if owner == a { &sa } else { &sb };
        if let Some(stored) = owner_state.manual_diff_labels.get(other) {
            let oriented: BTreeMap<String, Category> = report
                .discrepancies
                .iter()
                .filter_map(|d| {
                    let canon = if reversed { d.swapped().key() } else { d.key() };
                    stored.get(&canon).map(|c| (d.key(), *c))
                })
                .collect();
            report.apply_labels(&oriented);
        }
        Ok(Agreement {
            key: a.to_owned(),
            response: b.to_owned(),
            score,
            diff: report,
        })
    }

    /// Scores `b` against `a` as key and diffs the two; both must be `Done`.
    pub fn compute_agreement(&self, project_id: &str, doc_id: &str, a: &str, b: &str) -> Result<Agreement> {
        let (project, doc) = self.entries(project_id, doc_id)?;
        self.agreement_of(&project, &doc, a, b)
    }

    /// Sets (`Some`) or clears (`None`) manual categories for discrepancies
    /// of the `(a, b)` diff, keyed as in that diff.
    pub fn set_diff_labels(
        &self,
        project_id: &str,
        doc_id: &str,
        a: &str,
        b: &str,
        labels: BTreeMap<String, Option<Category>>,
    ) -> Result<Agreement> {
        let (project, doc) = self.entries(project_id, doc_id)?;
        let (owner, other, reversed) = Self::label_owner(&project.meta(), a, b)?;
        let slot = doc.slot(owner)?;
        let _w = slot.write.lock();
        let current = self.agreement_of(&project, &doc, a, b)?;
        let by_key: BTreeMap<String, String> = current
            .diff
            .discrepancies
            .iter()
            .map(|d| (d.key(), if reversed { d.swapped().key() } else { d.key() }))
            .collect();
        let cur = slot.snapshot();
        let mut next = (*cur).clone();
        let stored = next.manual_diff_labels.entry(other.to_owned()).or_default();
        for (key, label) in labels {
            let canon = by_key
                .get(&key)
                .ok_or_else(|| ServiceError::UnknownDiscrepancy(key.clone()))?;
            match label {
                Some(c) => stored.insert(canon.clone(), c),
                None => stored.remove(canon),
            };
        }
        if stored.is_empty() {
            next.manual_diff_labels.remove(other);
        }
        self.commit(&project, &doc, owner, slot, next, None)?;
        self.agreement_of(&project, &doc, a, b)
    }

    /// Category counts over every document and every annotator pair that
    /// has finished; rows are labeled `doc` or `doc:a/b` when a project has
    /// more than two annotators.
    pub fn tally(&self, project_id: &str) -> Result<CategoryTally> {
        let project = self.project_entry(project_id)?;
        let meta = project.meta();
        let many = meta.annotators.len() > 2;
        let mut rows = Vec::new();
        for doc_id in &meta.documents {
            let doc = project.doc(doc_id)?;
            for (i, a) in meta.annotators.iter().enumerate() {
                for b in &meta.annotators[i + 1..] {
                    let done = |x: &str| doc.slot(x).map(|s| s.snapshot().stage == Stage::Done);
                    if !(done(a)? && done(b)?) {
                        continue;
                    }
                    let mut row = self.agreement_of(&project, &doc, a, b)?.diff.row();
                    if many {
                        row.doc_id = format!("{doc_id}:{a}/{b}");
                    }
                    rows.push(row);
                }
            }
        }
        Ok(CategoryTally::from_rows(rows))
    }

    pub fn dump(&self) -> StoreDump {
        self.projects
            .read()
            .iter()
            .map(|(id, p)| {
                let docs = p
                    .docs
                    .read()
                    .iter()
                    .map(|(d, e)| {
                        let states = e.slots.iter().map(|(a, s)| (a.clone(), (*s.snapshot()).clone())).collect();
                        (
                            d.clone(),
                            DocDump {
                                base_text: e.base_text.clone(),
                                states,
                            },
                        )
                    })
                    .collect();
                (
                    id.clone(),
                    ProjectDump {
                        meta: (*p.meta()).clone(),
                        docs,
                    },
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_and_stems() {
        assert_eq!(slug("Five docs / round 2"), "Five-docs---round-2");
        assert_eq!(slug("***"), "project");
        assert_eq!(file_stem("dir/a.b.sgml"), "a.b");
        assert_eq!(file_stem(".hidden"), ".hidden");
        assert_eq!(file_stem("plain"), "plain");
    }

    #[test]
    fn idents() {
        assert!(check_ident("x", "ann-1.b_c").is_ok());
        for bad in ["", "-a", "a/b", "..", "a b", &"x".repeat(129)] {
            assert!(check_ident("x", bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn stage_order() {
        assert_eq!(Stage::Markables.next(), Some(Stage::Linking));
        assert_eq!(Stage::Linking.next(), Some(Stage::Done));
        assert_eq!(Stage::Done.next(), None);
    }

    #[test]
    fn split_keeps_refs_as_links() {
        let (m, l) = split_mentions(vec![Mention::new("1", 0, 1), Mention::new("2", 2, 3).with_ref("1")]);
        assert!(m.iter().all(|m| m.ref_id.is_none()));
        assert_eq!(l, [Link::new("2", "1")]);
    }
}
