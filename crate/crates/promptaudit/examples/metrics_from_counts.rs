//! Compute the abstention-aware metrics from the bundled reference
//! confusion counts (25 model × strategy cells) and print them.
//!
//! ```bash
//! cargo run -p promptaudit --example metrics_from_counts
//! ```

use promptaudit::metrics::{compute_metrics, summarize};
use promptaudit::report::{format_abstention, format_metric, read_confusion_csv};

const REFERENCE: &str = include_str!("../fixtures/reference_confusion.csv");

fn main() -> promptaudit::Result<()> {
    let rows = read_confusion_csv(REFERENCE)?;
    println!(
        "{:<10} {:<17} {:>8} {:>9} {:>7} {:>6} {:>7} {:>7}",
        "model", "strategy", "accuracy", "precision", "recall", "f1", "eff_f1", "abst%"
    );
    for (model, strategy, tally) in &rows {
        let m = compute_metrics(tally)?;
        println!(
            "{model:<10} {strategy:<17} {:>8} {:>9} {:>7} {:>6} {:>7} {:>7}",
            format_metric(m.accuracy),
            format_metric(m.precision),
            format_metric(m.recall),
            format_metric(m.f1),
            format_metric(m.effective_f1),
            format_abstention(m.abstention_rate),
        );
    }

    println!("\nper-model aggregates (mean / range):");
    for model in ["DeepSeek", "Mistral", "Gemma", "Falcon", "CodeLlama"] {
        let group: Vec<_> = rows
            .iter()
            .filter(|(m, _, _)| m == model)
            .map(|(_, _, t)| compute_metrics(t).unwrap())
            .collect();
        let s = summarize(&group)?;
        println!(
            "{model:<10} f1 {} / {}   effective_f1 {} / {}   abstention {}pp / {}pp",
            format_metric(s.f1.mean),
            format_metric(s.f1.range),
            format_metric(s.effective_f1.mean),
            format_metric(s.effective_f1.range),
            format_abstention(s.abstention_rate.mean.unwrap_or(0.0)),
            format_abstention(s.abstention_rate.range.unwrap_or(0.0)),
        );
    }
    Ok(())
}
