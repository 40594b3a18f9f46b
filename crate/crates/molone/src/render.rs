//! Plain-text rendering of a comparative matrix as a 2×2 table.

use std::fmt::Write;

use molone_core::explain::{ComparativeMatrix, ExplainedSample, Statement};

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("({})", parts.join(", "))
}

fn sample_line(label: &str, s: &ExplainedSample) -> String {
    let y: Vec<String> = s
        .y_pred
        .mean
        .iter()
        .zip(&s.y_pred.std)
        .map(|(m, sd)| format!("{m:.3}±{sd:.3}"))
        .collect();
    format!(
        "{label}: x = {}  y_pred = ({})",
        vector(s.x.coords()),
        y.join(", ")
    )
}

fn cell_lines(statements: &[Statement], marker: char) -> Vec<String> {
    if statements.is_empty() {
        vec!["(none)".to_string()]
    } else {
        statements
            .iter()
            .map(|s| format!("{marker} {} ({:+.3})", s.text, s.margin))
            .collect()
    }
}

fn column_width<'a>(lines: impl Iterator<Item = &'a String>, title: &str) -> usize {
    lines
        .map(|l| l.chars().count())
        .chain([title.chars().count()])
        .max()
        .unwrap_or(0)
}

pub fn matrix_text(m: &ComparativeMatrix) -> String {
    let cells: Vec<(&str, Vec<String>, Vec<String>)> = m
        .rows
        .iter()
        .map(|r| {
            let label = match r.sample {
                molone_core::explain::SampleLabel::A => "A",
                molone_core::explain::SampleLabel::B => "B",
            };
            (label, cell_lines(&r.why, '+'), cell_lines(&r.why_not, '-'))
        })
        .collect();
    let w1 = column_width(cells.iter().flat_map(|c| &c.1), "why");
    let w2 = column_width(cells.iter().flat_map(|c| &c.2), "why not");
    let rule = format!("+---+-{}-+-{}-+\n", "-".repeat(w1), "-".repeat(w2));
    let mut out = String::new();
    let _ = writeln!(out, "{}", sample_line("A", &m.sample_a));
    let _ = writeln!(out, "{}", sample_line("B", &m.sample_b));
    out.push_str(&rule);
    let _ = writeln!(out, "|   | {:<w1$} | {:<w2$} |", "why", "why not");
    for (label, why, why_not) in &cells {
        out.push_str(&rule);
        for i in 0..why.len().max(why_not.len()) {
            let l = if i == 0 { *label } else { "" };
            let a = why.get(i).map(String::as_str).unwrap_or("");
            let b = why_not.get(i).map(String::as_str).unwrap_or("");
            let _ = writeln!(out, "| {l:<1} | {a:<w1$} | {b:<w2$} |");
        }
    }
    out.push_str(&rule);
    out
}
