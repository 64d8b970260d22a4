//! Tabular chain display and score text.
//!
//! The chain table has one column per zone (title in column 0, then one per
//! paragraph) and one row per chain; a cell lists the chain's mentions that
//! fall in that zone.

use std::collections::HashMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::chains::ChainSet;
use crate::score::{to_f64, Fraction, ScoreReport};
use crate::sgml::{id_index, AnnotatedDocument, ZoneKind};
use crate::text::CharIndex;

/// Cells longer than this are shortened in HTML, full text kept in `title`.
pub const CELL_TRUNCATE_CHARS: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub ordinal: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRow {
    /// Chain id, or the mention id for a singleton row.
    pub chain_id: String,
    /// One entry per column, mention texts in offset order.
    pub cells: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTable {
    pub doc_id: String,
    pub columns: Vec<Column>,
    pub rows: Vec<ChainRow>,
}

impl ChainTable {
    pub fn mention_count(&self) -> usize {
        self.rows.iter().flat_map(|r| r.cells.iter()).map(Vec::len).sum()
    }
}

pub fn chain_table(doc: &AnnotatedDocument, chains: &ChainSet) -> ChainTable {
    chain_table_with(doc, chains, false)
}

/// Like [`chain_table`]; `include_singletons` appends one-cell rows for
/// unlinked markables.
pub fn chain_table_with(doc: &AnnotatedDocument, chains: &ChainSet, include_singletons: bool) -> ChainTable {
    let mut columns = vec![Column {
        ordinal: 0,
        label: "Title".to_owned(),
    }];
    columns.extend(
        doc.zones
            .iter()
            .filter(|z| z.kind == ZoneKind::Paragraph)
            .map(|z| Column {
                ordinal: z.ordinal,
                label: format!("P{}", z.ordinal),
            }),
    );

    let ids = id_index(doc);
    let text = CharIndex::new(&doc.base_text);
    let col_by_ordinal: HashMap<usize, usize> =
        columns.iter().enumerate().rev().map(|(i, c)| (c.ordinal, i)).collect();
    let column_of = |id: &str| -> Option<(usize, String)> {
        let m = &doc.mentions[*ids.get(id)?];
        let ordinal = doc.zone_at(m.span.start).map_or(0, |z| z.ordinal);
        let col = col_by_ordinal.get(&ordinal).copied().unwrap_or(0);
        Some((col, text.slice(m.span.start, m.span.end).to_owned()))
    };

    let make_row = |chain_id: &str, members: &[String]| {
        let mut cells = vec![Vec::new(); columns.len()];
        for id in members {
            if let Some((col, text)) = column_of(id) {
                cells[col].push(text);
            }
        }
        ChainRow {
            chain_id: chain_id.to_owned(),
            cells,
        }
    };

    let mut rows: Vec<ChainRow> = chains
        .chains
        .iter()
        .map(|c| make_row(&c.chain_id, &c.member_ids))
        .collect();
    if include_singletons {
        rows.extend(chains.singletons.iter().map(|s| make_row(s, std::slice::from_ref(s))));
    }
    ChainTable {
        doc_id: doc.doc_id.clone(),
        columns,
        rows,
    }
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn render_cell(out: &mut String, texts: &[String]) {
    for (i, t) in texts.iter().enumerate() {
        if i > 0 {
            out.push_str("<br>");
        }
        if t.chars().count() > CELL_TRUNCATE_CHARS {
            let short: String = t.chars().take(CELL_TRUNCATE_CHARS).collect();
            let _ = write!(
                out,
                "<span class=\"m\" title=\"{}\">{}&hellip;</span>",
                escape_html(t),
                escape_html(&short)
            );
        } else {
            let _ = write!(out, "<span class=\"m\">{}</span>", escape_html(t));
        }
    }
}

/// Self-contained HTML page with a single table; output is deterministic.
pub fn render_html(table: &ChainTable) -> String {
    let mut out = String::new();
    let title = if table.doc_id.is_empty() {
        "Coreference chains".to_owned()
    } else {
        format!("Coreference chains: {}", escape_html(&table.doc_id))
    };
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>{title}</title>");
    out.push_str(concat!(
        "<style>\n",
        "table.chains { border-collapse: collapse; font-family: sans-serif; font-size: 14px; }\n",
        "table.chains th, table.chains td { border: 1px solid #999; padding: 4px 8px; vertical-align: top; }\n",
        "table.chains thead th { background: #eee; }\n",
        "table.chains tbody th { font-weight: normal; color: #555; text-align: left; }\n",
        "</style>\n",
        "</head>\n<body>\n",
    ));
    let _ = writeln!(out, "<h1>{title}</h1>");
    out.push_str("<table class=\"chains\">\n<thead>\n<tr><th>Chain</th>");
    for c in &table.columns {
        let _ = write!(out, "<th>{}</th>", escape_html(&c.label));
    }
    out.push_str("</tr>\n</thead>\n<tbody>\n");
    for row in &table.rows {
        let _ = write!(out, "<tr><th>{}</th>", escape_html(&row.chain_id));
        for cell in &row.cells {
            out.push_str("<td>");
            render_cell(&mut out, cell);
            out.push_str("</td>");
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</tbody>\n</table>\n</body>\n</html>\n");
    out
}

fn ratio_field(label: char, value: Option<Fraction>, num: u64, den: u64) -> String {
    match value {
        Some(v) => format!("{label} {:.3} ({num}/{den})", to_f64(v)),
        None => format!("{label} - ({num}/{den})"),
    }
}

/// Three-line fixed-width summary:
///
/// ```text
/// R 0.500 (1/2)
/// P 1.000 (1/1)
/// F 0.667
/// ```
pub fn render_score_text(report: &ScoreReport) -> String {
    let f = report
        .f_measure
        .map_or_else(|| "F -".to_owned(), |f| format!("F {:.3}", to_f64(f)));
    format!(
        "{}\n{}\n{}\n",
        ratio_field('R', report.recall, report.recall_num, report.recall_den),
        ratio_field('P', report.precision, report.precision_num, report.precision_den),
        f
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::build_chains;
    use crate::sgml::parse_str;

    #[test]
    fn escaping_in_cells() {
        let doc = parse_str("<COREF ID=\"1\">a<b</COREF> and <COREF ID=\"2\" REF=\"1\">it & co</COREF>").unwrap();
        let html = render_html(&chain_table(&doc, &build_chains(&doc).unwrap()));
        assert!(html.contains("a&lt;b"));
        assert!(html.contains("it &amp; co"));
        assert!(!html.contains("a<b"));
    }

    #[test]
    fn empty_table() {
        let doc = parse_str("Nothing here.").unwrap();
        let t = chain_table(&doc, &build_chains(&doc).unwrap());
        assert!(t.rows.is_empty());
        assert_eq!(t.columns.len(), 2);
        let html = render_html(&t);
        assert!(html.contains("<tbody>\n</tbody>"));
        assert_eq!(html.matches("<table").count(), 1);
    }

    #[test]
    fn long_cells_truncate_with_title() {
        let long = "x".repeat(70);
        let src = format!("<COREF ID=\"1\">{long}</COREF> <COREF ID=\"2\" REF=\"1\">y</COREF>");
        let doc = parse_str(&src).unwrap();
        let html = render_html(&chain_table(&doc, &build_chains(&doc).unwrap()));
        assert!(html.contains(&format!("title=\"{long}\">{}&hellip;", "x".repeat(60))));
    }

    #[test]
    fn singletons_optional() {
        let doc = parse_str("<COREF ID=\"1\">a</COREF> <COREF ID=\"2\">b</COREF>").unwrap();
        let cs = build_chains(&doc).unwrap();
        assert_eq!(chain_table(&doc, &cs).rows.len(), 0);
        let t = chain_table_with(&doc, &cs, true);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.mention_count(), 2);
    }

    #[test]
    fn score_text_lines() {
        let r = ScoreReport::from_counts(4, 4, 4, 4);
        assert!(render_score_text(&r).starts_with("R 1.000 (4/4)\n"));
        let fig5 = ScoreReport::from_counts(81, 100, 85, 100);
        assert!(render_score_text(&fig5).contains("F 0.830"));
        let undef = ScoreReport::from_counts(1, 2, 0, 0);
        let text = render_score_text(&undef);
        assert!(text.contains("P -"));
        assert!(text.contains("F -"));
    }
}
