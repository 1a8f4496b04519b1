use std::fmt::Write;

use super::metrics::{DecisionRatios, PerformanceRow, RelianceReport, ScopePerformance};

type ScopePick = fn(&ScopePerformance) -> PerformanceRow;
type DecisionPick = fn(&DecisionRatios) -> (f64, usize);

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}", v * 100.0))
}

fn with_delta(row: &PerformanceRow) -> String {
    match row.delta {
        Some(d) => format!("{} ({:+.1})", pct(row.human_ai_f1), d * 100.0),
        None => pct(row.human_ai_f1),
    }
}

/// Plain-text performance and decision tables, one column group per condition.
pub fn render_report(report: &RelianceReport) -> String {
    let mut out = String::new();
    let conds = &report.conditions;

    let _ = writeln!(out, "Performance (F1, %)");
    let _ = write!(out, "{:<24}", "");
    for c in conds {
        let _ = write!(out, "| {:<28}", c.condition.title());
    }
    let _ = writeln!(out);
    let _ = write!(out, "{:<24}", "");
    for _ in conds {
        let _ = write!(out, "| {:>8} {:>19}", "Human", "Human + AI");
    }
    let _ = writeln!(out);
    let rows: [(&str, ScopePick); 3] =
        [("All", |s| s.all), ("'Right' AI outputs", |s| s.right_ai), ("'Wrong' AI outputs", |s| s.wrong_ai)];
    for (name, pick) in rows {
        let _ = write!(out, "{name:<24}");
        for c in conds {
            let r = pick(&c.performance.pooled);
            let _ = write!(out, "| {:>8} {:>19}", pct(r.human_f1), with_delta(&r));
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Decisions (%, count)");
    let _ = write!(out, "{:<24}", "");
    for c in conds {
        let _ = write!(out, "| {:<28}", c.condition.title());
    }
    let _ = writeln!(out);
    let cells: [(&str, DecisionPick); 6] = [
        ("'Right' decisions", |d| (d.right, d.counts.agree_right + d.counts.reject_wrong)),
        ("  Agree w/ right AI", |d| (d.agree_right, d.counts.agree_right)),
        ("  Reject wrong AI", |d| (d.reject_wrong, d.counts.reject_wrong)),
        ("'Wrong' decisions", |d| (d.wrong, d.counts.agree_wrong + d.counts.reject_right)),
        ("  Agree w/ wrong AI", |d| (d.agree_wrong, d.counts.agree_wrong)),
        ("  Reject right AI", |d| (d.reject_right, d.counts.reject_right)),
    ];
    for (name, pick) in cells {
        let _ = write!(out, "{name:<24}");
        for c in conds {
            let (ratio, count) = pick(&c.decisions);
            let _ = write!(out, "| {:>8.1} {:>19}", ratio * 100.0, format!("({count}/{})", c.decisions.counts.total()));
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out);
    let _ = write!(out, "{:<24}", "Mean duration (s)");
    for c in conds {
        let _ = write!(out, "| {:>8.1} {:>19}", c.duration.mean_seconds, "");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Sessions analyzed: {}", report.n_sessions);
    if !report.incomplete_sessions.is_empty() {
        let _ = writeln!(out, "Incomplete sessions skipped: {}", report.incomplete_sessions.join(", "));
    }
    out
}
