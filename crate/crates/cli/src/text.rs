use std::fmt::Write;
use std::path::Path;

use rehabxai_core::dataset::Side;
use rehabxai_core::explain::{ComponentNeighbors, ExplanationPayload};
use rehabxai_core::model::GridSearchResult;
use rehabxai_core::{LosoReport, ModelConfig};

fn side(s: Side) -> &'static str {
    match s {
        Side::Affected => "affected",
        Side::Unaffected => "unaffected",
    }
}

pub fn model_report(
    config: &ModelConfig,
    grid: Option<&GridSearchResult>,
    loso: &LosoReport,
    out: Option<&Path>,
) -> String {
    let mut s = String::new();
    if let Some(g) = grid {
        let _ = writeln!(s, "grid search ({} cells, pooled LOSO F1)", g.table.len());
        let _ = writeln!(s, "{:>6} {:>6} {:>8} {:>9} {:>7}", "layers", "units", "lr", "params", "F1");
        for c in &g.table {
            let f1 = c.f1.map_or_else(|| "failed".to_string(), |f| format!("{f:.3}"));
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:>8} {:>9} {:>7}",
                c.n_hidden_layers, c.hidden_units, c.learning_rate, c.parameters, f1
            );
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s, "component   {}", loso.component);
    let _ = writeln!(
        s,
        "config      {}x{} lr {} epochs {} batch {} seed {}",
        config.n_hidden_layers,
        config.hidden_units,
        config.learning_rate,
        config.epochs,
        config.batch_size,
        config.seed
    );
    let _ =
        writeln!(s, "LOSO F1     {:.3} pooled, {:.3} mean over {} folds", loso.f1, loso.mean_fold_f1, loso.folds.len());
    let _ = writeln!(s, "accuracy    {:.3}", loso.accuracy);
    let wrong: Vec<&str> = loso.predictions.iter().filter(|p| !p.right).map(|p| p.trial_id.as_str()).collect();
    let _ = writeln!(s, "AI right    {} of {}", loso.predictions.len() - wrong.len(), loso.predictions.len());
    if !wrong.is_empty() {
        let _ = writeln!(s, "AI wrong    {}", wrong.join(" "));
    }
    if let Some(path) = out {
        let _ = writeln!(s, "model       {}", path.display());
    }
    s
}

fn neighbors(s: &mut String, n: &ComponentNeighbors) {
    let _ = writeln!(s, "{} neighbors (k={}, {}, {})", n.component, n.k, n.metric, n.space);
    for e in &n.neighbors {
        let b = &e.benchmark;
        let _ = writeln!(
            s,
            "  {:<10} d={:<9.4} truth={:<8} ai={:<8} {}",
            e.id,
            e.distance,
            b.ground_truth.to_string(),
            b.ai_label.to_string(),
            if b.ai_correct { "right" } else { "wrong" }
        );
    }
}

pub fn explanation(p: &ExplanationPayload) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "case {} (subject {}, {} side)", p.case, p.subject_id, side(p.side));
    for d in &p.decision {
        let _ = writeln!(
            s,
            "{:<4} {} ({:.2}); top features: {}",
            d.component.to_string(),
            d.prediction,
            d.confidence,
            d.top_features.join(", ")
        );
    }
    if let Some(ex) = &p.examples {
        neighbors(&mut s, &ex.rom);
        neighbors(&mut s, &ex.comp);
    }
    s
}
