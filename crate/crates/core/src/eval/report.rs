//! Plain-text tables. Fractions are shown ×100 with one decimal.

use std::fmt::Write;

use super::anticipation::{Accuracy, AnticipationReport};
use super::generation::{GenerationTable, Task, KS};
use super::nlg::SummaryScores;
use super::stats::StatsReport;

pub fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

pub fn render_generation(t: &GenerationTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} | {:^22} | {:^22}",
        "", "With Constraint", "No Constraint"
    );
    let ks: Vec<String> = KS
        .iter()
        .map(|k| format!("{:>6}", format!("R@{k}")))
        .collect();
    let _ = writeln!(out, "{:<10} | {} | {}", "Task", ks.join(" "), ks.join(" "));
    for task in Task::ALL {
        let row = |constrained: bool| -> String {
            KS.iter()
                .map(|&k| {
                    let v = t
                        .get(constrained, task, k)
                        .map(pct)
                        .unwrap_or_else(|| "-".into());
                    format!("{v:>6}")
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, "{:<10} | {} | {}", task.title(), row(true), row(false));
    }
    out
}

fn acc_cells(a: &Accuracy) -> String {
    format!("{:>6} {:>6} {:>6}", pct(a.verb), pct(a.noun), pct(a.action))
}

pub fn render_anticipation(r: &AnticipationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:^20} | {:^20}", "Top-1", "Top-5");
    let head = format!("{:>6} {:>6} {:>6}", "Verb", "Noun", "Action");
    let _ = writeln!(out, "{head} | {head}");
    let _ = writeln!(out, "{} | {}", acc_cells(&r.top1), acc_cells(&r.top5));
    let _ = writeln!(out, "cases: {}", r.cases);
    out
}

/// CIDEr is printed as is; the other metrics ×100.
pub fn render_summary(s: &SummaryScores) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "CIDEr", "ROUGE-L", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4"
    );
    let _ = writeln!(
        out,
        "{:>7.3} {:>7} {:>7} {:>7} {:>7} {:>7}",
        s.cider,
        pct(s.rouge_l),
        pct(s.bleu1),
        pct(s.bleu2),
        pct(s.bleu3),
        pct(s.bleu4)
    );
    let _ = writeln!(out, "items: {}", s.items);
    out
}

pub fn render_stats(s: &StatsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sequences              {}", s.sequences);
    let _ = writeln!(out, "total hours            {:.1}", s.total_hours);
    let _ = writeln!(
        out,
        "avg sequence minutes   {:.1} ({} timed)",
        s.avg_sequence_seconds / 60.0,
        s.timed_sequences
    );
    let _ = writeln!(
        out,
        "avg graphs / sequence  {:.1}",
        s.avg_graphs_per_sequence
    );
    let _ = writeln!(
        out,
        "classes (obj/verb/rel) {}/{}/{}",
        s.object_classes, s.verb_classes, s.relation_classes
    );
    for (split, n) in &s.sequences_per_split {
        let boxes = s.boxes_per_split.get(split).copied().unwrap_or(0);
        let _ = writeln!(out, "split {split:<16} {n} sequences, {boxes} boxes");
    }
    let _ = writeln!(out, "graph lengths:");
    for (len, n) in &s.length_histogram {
        let _ = writeln!(out, "  {len:>4}  {n}");
    }
    let _ = writeln!(out, "scenarios:");
    for (name, n) in &s.scenarios {
        let _ = writeln!(out, "  {name}  {n}");
    }
    for w in &s.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::generation::GenerationCell;

    #[test]
    fn percentages() {
        assert_eq!(pct(0.604), "60.4");
        assert_eq!(pct(1.0), "100.0");
        assert_eq!(pct(0.0), "0.0");
    }

    #[test]
    fn generation_layout() {
        let t = GenerationTable {
            cells: vec![GenerationCell {
                constrained: true,
                task: Task::EdgeCls,
                k: 10,
                recall: 0.604,
            }],
        };
        let s = render_generation(&t);
        let row = s.lines().nth(2).unwrap();
        assert!(
            row.starts_with("Edge Cls   |   60.4      -      - |"),
            "{row}"
        );
    }
}
