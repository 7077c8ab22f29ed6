use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AggregateReport;

/// Table shapes for results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportLayout {
    /// Model × modeling task.
    Table2,
    /// Context group × loss variant, grouped by context.
    Table3,
    /// Encoder source × pooler source.
    Table4,
}

impl ReportLayout {
    pub fn key_headers(self) -> [&'static str; 2] {
        match self {
            ReportLayout::Table2 => ["Model", "Modeling Task"],
            ReportLayout::Table3 => ["Context", "Loss"],
            ReportLayout::Table4 => ["Model Layers", "Pooler Layer"],
        }
    }
}

impl FromStr for ReportLayout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table2" => Ok(ReportLayout::Table2),
            "table3" => Ok(ReportLayout::Table3),
            "table4" => Ok(ReportLayout::Table4),
            _ => Err(format!("unknown layout {s:?} (expected table2, table3 or table4)")),
        }
    }
}

/// One result line: two key cells and the aggregated score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub keys: [String; 2],
    pub result: AggregateReport,
}

const CONTEXT_ORDER: &[&str] = &["sentence", "local", "global", "local_and_global"];
const LOSS_ORDER: &[&str] = &[
    "ce_only",
    "r_drop_sentence",
    "r_drop_context",
    "context_drop_fixed",
    "context_drop_fixed_no_kl",
    "context_drop_dynamic",
    "context_drop_dynamic_no_kl",
];

fn rank(order: &[&str], key: &str) -> usize {
    order.iter().position(|k| *k == key).unwrap_or(order.len())
}

/// Renders a markdown table with one row per entry and `mean ±std` cells.
///
/// `table3` sorts rows by context group then loss variant (unknown names
/// keep their input order after the known ones) and prints each group
/// name once. The other layouts keep input order.
pub fn render_report(rows: &[ResultRow], layout: ReportLayout) -> String {
    let mut ordered: Vec<&ResultRow> = rows.iter().collect();
    if layout == ReportLayout::Table3 {
        ordered.sort_by_key(|r| (rank(CONTEXT_ORDER, &r.keys[0]), rank(LOSS_ORDER, &r.keys[1])));
    }
    let [h0, h1] = layout.key_headers();
    let mut cells: Vec<[String; 3]> = vec![[h0.into(), h1.into(), "F1".into()]];
    let mut prev_group: Option<&str> = None;
    for r in &ordered {
        let group = if layout == ReportLayout::Table3 && prev_group == Some(r.keys[0].as_str()) {
            String::new()
        } else {
            r.keys[0].clone()
        };
        prev_group = Some(&r.keys[0]);
        cells.push([group, r.keys[1].clone(), r.result.render_percent()]);
    }
    let width = |c: usize| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0).max(3);
    let widths = [width(0), width(1), width(2)];
    let line = |row: &[String; 3]| {
        let mut s = String::from("|");
        for (cell, w) in row.iter().zip(widths) {
            let _ = write!(s, " {cell}{} |", " ".repeat(w - cell.chars().count()));
        }
        s
    };
    let mut out = line(&cells[0]);
    out.push('\n');
    out.push('|');
    for w in widths {
        let _ = write!(out, "{}|", "-".repeat(w + 2));
    }
    out.push('\n');
    for row in &cells[1..] {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
