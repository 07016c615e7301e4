use super::{granularity_label, Breakdown, EvalSummary, RecallCurve, TreeStats};
use crate::decompose::Category;

/// Left-aligned first column, right-aligned rest, two-space gutters.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = (0..cols)
            .map(|i| {
                let cell = cells.get(i).map(String::as_str).unwrap_or("");
                if i == 0 {
                    format!("{cell:<w$}", w = widths[i])
                } else {
                    format!("{cell:>w$}", w = widths[i])
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let total: usize = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
    let mut out = String::new();
    out.push_str(&line(header));
    out.push('\n');
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

fn cell(b: Option<&Breakdown>, pick: fn(&Breakdown) -> f64) -> String {
    match b {
        Some(b) if b.count > 0 => format!("{:.3}", pick(b)),
        _ => "-".into(),
    }
}

/// Hits@1 and Hits@10, overall and split by question complexity and answer
/// type.
pub fn hits_table(summary: &EvalSummary) -> String {
    let families: Vec<&str> = ["Multiple", "Single", "Simple", "Medium", "Complex"]
        .into_iter()
        .filter(|f| summary.by_complexity.contains_key(*f))
        .collect();
    let answer_types = ["Entity", "Time"];
    let mut header = vec!["Metric".to_string(), "Overall".to_string()];
    header.extend(families.iter().map(|f| f.to_string()));
    header.extend(answer_types.iter().map(|a| a.to_string()));
    let mut rows = Vec::new();
    for (name, pick) in [
        ("Hits@1", (|b: &Breakdown| b.hits1) as fn(&Breakdown) -> f64),
        ("Hits@10", |b| b.hits10),
    ] {
        let mut row = vec![name.to_string(), cell(Some(&summary.overall), pick)];
        row.extend(families.iter().map(|f| cell(summary.by_complexity.get(*f), pick)));
        row.extend(answer_types.iter().map(|a| cell(summary.by_answer_type.get(*a), pick)));
        rows.push(row);
    }
    render_table(&header, &rows)
}

/// Hits@1 by time granularity for the categories that carry one.
pub fn granularity_table(summary: &EvalSummary) -> String {
    let cats = [Category::Equal, Category::BeforeAfter, Category::EqualMulti];
    let grans = [
        crate::time::Granularity::Day,
        crate::time::Granularity::Month,
        crate::time::Granularity::Year,
    ];
    let mut header = vec!["Metric".to_string()];
    for c in cats {
        for g in grans {
            header.push(format!("{} {}", c.display_name(), granularity_label(g)));
        }
    }
    let mut row = vec!["Hits@1".to_string()];
    for c in cats {
        for g in grans {
            let key = format!("{}/{}", c.label(), granularity_label(g));
            row.push(cell(summary.by_granularity.get(&key), |b| b.hits1));
        }
    }
    render_table(&header, &[row])
}

pub fn efficiency_table(stats: &TreeStats) -> String {
    let header = vec!["".to_string(), "Value".to_string()];
    let rows = vec![
        vec!["Avg Depth".to_string(), format!("{:.2}", stats.avg_depth)],
        vec!["Avg Branch".to_string(), format!("{:.2}", stats.avg_branch)],
        vec!["Avg API Call".to_string(), format!("{:.2}", stats.avg_api_calls)],
    ];
    render_table(&header, &rows)
}

/// Context length against Hits@1 and Recall@n, or `None` without a curve.
pub fn context_table(summary: &EvalSummary) -> Option<String> {
    summary.recall.as_ref().map(recall_table)
}

pub fn recall_table(curve: &RecallCurve) -> String {
    let header = vec![
        "Context Length".to_string(),
        "Hits@1".to_string(),
        "Recall@n".to_string(),
    ];
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            vec![
                format!("n={}", p.n),
                p.hits1.map_or("-".into(), |h| format!("{:.1}%", 100.0 * h)),
                format!("{:.2}%", 100.0 * p.recall),
            ]
        })
        .collect();
    render_table(&header, &rows)
}

/// All tables with titles, as written to `eval.txt`.
pub fn render_report(summary: &EvalSummary) -> String {
    let mut out = format!("Questions: {}\n\n", summary.overall.count);
    out.push_str("Accuracy\n");
    out.push_str(&hits_table(summary));
    if !summary.by_granularity.is_empty() {
        out.push_str("\nHits@1 by time granularity\n");
        out.push_str(&granularity_table(summary));
    }
    out.push_str("\nTree shape and API usage\n");
    out.push_str(&efficiency_table(&summary.tree));
    if let Some(t) = context_table(summary) {
        out.push_str("\nContext length\n");
        out.push_str(&t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::RecallPoint;
    use std::collections::BTreeMap;

    fn summary() -> EvalSummary {
        let b = Breakdown {
            count: 4,
            hits1: 0.75,
            hits10: 1.0,
        };
        EvalSummary {
            overall: b,
            by_category: BTreeMap::from([("equal".into(), b)]),
            by_complexity: BTreeMap::from([("Single".into(), b)]),
            by_answer_type: BTreeMap::from([("Entity".into(), b)]),
            by_granularity: BTreeMap::from([("equal/day".into(), b)]),
            tree: TreeStats {
                avg_depth: 1.0,
                avg_branch: 3.0,
                avg_api_calls: 5.0,
            },
            recall: Some(RecallCurve {
                points: vec![
                    RecallPoint {
                        n: 10,
                        recall: 0.5,
                        hits1: None,
                    },
                    RecallPoint {
                        n: 50,
                        recall: 0.7178,
                        hits1: Some(0.778),
                    },
                ],
                questions: 4,
                excluded: 0,
            }),
        }
    }

    #[test]
    fn tables_have_expected_rows() {
        let s = summary();
        let hits = hits_table(&s);
        assert!(hits.starts_with("Metric"));
        assert!(hits.contains("Hits@1     0.750   0.750   0.750     -"), "{hits}");
        let ctx = context_table(&s).unwrap();
        assert!(ctx.contains("n=50"));
        assert!(ctx.contains("77.8%"));
        assert!(ctx.contains("71.78%"));
        assert!(efficiency_table(&s.tree).contains("Avg Branch"));
        assert!(granularity_table(&s).contains("0.750"));
        assert!(render_report(&s).contains("Context length"));
    }

    #[test]
    fn columns_align() {
        let t = render_table(
            &["a".into(), "bb".into()],
            &[vec!["long name".into(), "1".into()], vec!["x".into(), "22".into()]],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[2], "long name   1");
        assert_eq!(lines[3], "x          22");
    }
}
