use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use coref_core::score::to_f64;
use coref_core::{
    align, build_chains, chain_table_with, diff, parse_muc_sgml, render_html, render_score_text, score, tally,
    AnnotatedDocument, CategoryRow, CategoryTally, DiffReport, PronounLexicon, ScoreReport,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "coref", version, about = "MUC COREF annotation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a COREF SGML file and list its mentions.
    Parse {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// List the coreference chains of a file.
    Chains {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Align the mentions of a response file to a key file.
    Align {
        key: PathBuf,
        response: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Score a response against a key (files, or directories of same-named files).
    Score {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        response: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// List and categorize the differences between two annotations.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        json: bool,
        /// Pronoun list, one word per line, `#` starts a comment.
        #[arg(long)]
        pronouns: Option<PathBuf>,
    },
    /// Tally categories over a directory of diff reports (`coref diff --json` output).
    Tally {
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Render the chain table of a file as HTML.
    Report {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        include_singletons: bool,
    },
    /// Run the annotation workflow service.
    Serve {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory holding the built annotation UI, served at /ui.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        #[arg(long)]
        pronouns: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<AnnotatedDocument> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_muc_sgml(&raw).with_context(|| format!("parsing {}", path.display()))
}

fn lexicon(path: Option<&Path>) -> Result<PronounLexicon> {
    match path {
        Some(p) => Ok(PronounLexicon::parse(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )),
        None => Ok(PronounLexicon::default()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_parse(file: &Path, json: bool) -> Result<()> {
    let doc = load(file)?;
    if json {
        return print_json(&doc);
    }
    println!("doc {:?}, {} characters, {} mentions", doc.doc_id, doc.text_len(), doc.mentions.len());
    for m in &doc.mentions {
        let mut line = format!("{:>6} {:>6}..{:<6} {:?}", m.id, m.span.start, m.span.end, doc.span_text(m.span));
        if let Some(r) = &m.ref_id {
            line.push_str(&format!(" REF={r}"));
        }
        if let Some(min) = &m.min_head {
            line.push_str(&format!(" MIN={min:?}"));
        }
        println!("{line}");
    }
    Ok(())
}

fn cmd_chains(file: &Path, json: bool) -> Result<()> {
    let doc = load(file)?;
    let chains = build_chains(&doc)?;
    if json {
        return print_json(&chains);
    }
    for c in &chains.chains {
        let members: Vec<String> = c
            .member_ids
            .iter()
            .map(|id| format!("{id} {:?}", doc.mention(id).map_or("", |m| doc.span_text(m.span))))
            .collect();
        println!("{}: {}", c.chain_id, members.join(" | "));
    }
    println!("{} chains, {} singletons", chains.chains.len(), chains.singletons.len());
    Ok(())
}

fn cmd_align(key: &Path, response: &Path, json: bool) -> Result<()> {
    let al = align(&load(key)?, &load(response)?)?;
    if json {
        return print_json(&al);
    }
    for p in &al.pairs {
        println!("{} -> {} ({:?})", p.key, p.response, p.kind);
    }
    println!("unmatched key: {}", al.unmatched_key.join(" "));
    println!("unmatched response: {}", al.unmatched_response.join(" "));
    Ok(())
}

fn score_pair(key: &Path, response: &Path) -> Result<ScoreReport> {
    let (k, r) = (load(key)?, load(response)?);
    let al = align(&k, &r).with_context(|| format!("aligning {}", response.display()))?;
    Ok(score(&build_chains(&k)?, &build_chains(&r)?, &al)?)
}

#[derive(Serialize)]
struct ScoreLine {
    doc: String,
    recall_num: u64,
    recall_den: u64,
    precision_num: u64,
    precision_den: u64,
    recall: Option<f64>,
    precision: Option<f64>,
    f_measure: Option<f64>,
}

impl ScoreLine {
    fn new(doc: String, s: &ScoreReport) -> Self {
        Self {
            doc,
            recall_num: s.recall_num,
            recall_den: s.recall_den,
            precision_num: s.precision_num,
            precision_den: s.precision_den,
            recall: s.recall.map(to_f64),
            precision: s.precision.map(to_f64),
            f_measure: s.f_measure.map(to_f64),
        }
    }
}

/// Unweighted per-document mean of the defined values.
fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn fmt3(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"))
}

fn cmd_score(key: &Path, response: &Path, json: bool) -> Result<()> {
    if !key.is_dir() {
        let report = score_pair(key, response)?;
        if json {
            return print_json(&ScoreLine::new(key.display().to_string(), &report));
        }
        print!("{}", render_score_text(&report));
        return Ok(());
    }
    if !response.is_dir() {
        bail!("--key is a directory but --response is not");
    }
    let mut names: Vec<String> = fs::read_dir(key)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no files in {}", key.display());
    }
    let reports: Vec<ScoreReport> = names
        .par_iter()
        .map(|n| {
            let r = response.join(n);
            if !r.is_file() {
                bail!("no response file {}", r.display());
            }
            score_pair(&key.join(n), &r)
        })
        .collect::<Result<_>>()?;
    let lines: Vec<ScoreLine> = names
        .iter()
        .zip(&reports)
        .map(|(n, r)| ScoreLine::new(n.clone(), r))
        .collect();
    let sum = ScoreLine::new("SUM".into(), &ScoreReport::sum(&reports));
    let mean_line = (
        mean(lines.iter().map(|l| l.recall)),
        mean(lines.iter().map(|l| l.precision)),
        mean(lines.iter().map(|l| l.f_measure)),
    );
    if json {
        return print_json(&serde_json::json!({
            "documents": lines,
            "sum": sum,
            "mean": { "recall": mean_line.0, "precision": mean_line.1, "f_measure": mean_line.2 },
        }));
    }
    let width = names.iter().map(|n| n.chars().count()).max().unwrap_or(0).max(4);
    println!("{:<width$} {:>13} {:>13} {:>6} {:>6} {:>6}", "doc", "R links", "P links", "R", "P", "F");
    for l in lines.iter().chain(std::iter::once(&sum)) {
        println!(
            "{:<width$} {:>13} {:>13} {:>6} {:>6} {:>6}",
            l.doc,
            format!("{}/{}", l.recall_num, l.recall_den),
            format!("{}/{}", l.precision_num, l.precision_den),
            fmt3(l.recall),
            fmt3(l.precision),
            fmt3(l.f_measure)
        );
    }
    println!(
        "{:<width$} {:>13} {:>13} {:>6} {:>6} {:>6}   (unweighted per-document mean)",
        "MEAN",
        "",
        "",
        fmt3(mean_line.0),
        fmt3(mean_line.1),
        fmt3(mean_line.2)
    );
    Ok(())
}

fn cmd_diff(a: &Path, b: &Path, json: bool, pronouns: Option<&Path>) -> Result<()> {
    let report = diff(&load(a)?, &load(b)?, &lexicon(pronouns)?)?;
    if json {
        return print_json(&report);
    }
    for d in &report.discrepancies {
        println!(
            "{:<18} a=[{}] b=[{}] {}{}",
            format!("{:?}", d.kind),
            d.mentions_a.join(","),
            d.mentions_b.join(","),
            d.category(),
            if d.note.is_empty() { String::new() } else { format!("  ({})", d.note) }
        );
    }
    print!("{}", report.tally.render_table());
    Ok(())
}

/// A tally input file: a diff report, or bare category rows.
#[derive(Deserialize)]
#[serde(untagged)]
enum TallyInput {
    Report(Box<DiffReport>),
    Rows { rows: Vec<CategoryRow> },
}

fn cmd_tally(dir: &Path, json: bool) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for p in &paths {
        let input: TallyInput = serde_json::from_slice(&fs::read(p)?)
            .with_context(|| format!("{} is neither a diff report nor a row list", p.display()))?;
        match input {
            TallyInput::Report(r) => reports.push(*r),
            TallyInput::Rows { rows: r } => rows.extend(r),
        }
    }
    let mut all = tally(&reports).rows;
    all.extend(rows);
    let t = CategoryTally::from_rows(all);
    if json {
        return print_json(&t);
    }
    print!("{}", t.render_table());
    Ok(())
}

fn cmd_report(file: &Path, output: &Path, include_singletons: bool) -> Result<()> {
    let doc = load(file)?;
    let chains = build_chains(&doc)?;
    let html = render_html(&chain_table_with(&doc, &chains, include_singletons));
    fs::write(output, html).with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

fn cmd_serve(root: PathBuf, addr: SocketAddr, ui_dir: Option<PathBuf>, pronouns: Option<&Path>) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let store = coref_service::Store::open_with(
        root,
        coref_service::StoreConfig {
            lexicon: lexicon(pronouns)?,
            ..Default::default()
        },
    )?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(coref_service::serve(Arc::new(store), ui_dir, addr))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Parse { file, json } => cmd_parse(&file, json),
        Command::Chains { file, json } => cmd_chains(&file, json),
        Command::Align { key, response, json } => cmd_align(&key, &response, json),
        Command::Score { key, response, json } => cmd_score(&key, &response, json),
        Command::Diff { a, b, json, pronouns } => cmd_diff(&a, &b, json, pronouns.as_deref()),
        Command::Tally { dir, json } => cmd_tally(&dir, json),
        Command::Report {
            file,
            output,
            include_singletons,
        } => cmd_report(&file, &output, include_singletons),
        Command::Serve {
            root,
            port,
            host,
            ui_dir,
            pronouns,
        } => cmd_serve(root, SocketAddr::new(host, port), ui_dir, pronouns.as_deref()),
    }
}
