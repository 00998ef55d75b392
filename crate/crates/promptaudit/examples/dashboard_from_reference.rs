//! Render the HTML dashboard from the bundled reference confusion counts
//! and leave it on disk for a browser.
//!
//! ```bash
//! cargo run -p promptaudit --example dashboard_from_reference
//! ```

use promptaudit::report::{
    read_confusion_csv, render_dashboard, summary_csv_string, DashboardMeta, SummaryRow,
};

const REFERENCE: &str = include_str!("../fixtures/reference_confusion.csv");

fn main() -> promptaudit::Result<()> {
    let rows: Vec<SummaryRow> = read_confusion_csv(REFERENCE)?
        .into_iter()
        .map(|(model, strategy, tally)| {
            SummaryRow::from_tally(model, strategy, "verdict_first", "full", tally)
        })
        .collect::<promptaudit::Result<_>>()?;

    let meta = DashboardMeta {
        run_id: "reference".into(),
        generated_at: "example".into(),
    };
    let html = render_dashboard(&rows, &meta)?;
    let path = std::env::temp_dir().join("promptaudit-reference-dashboard.html");
    std::fs::write(&path, html).expect("write dashboard");

    println!("dashboard written to {}", path.display());
    println!("summary csv rows:");
    print!("{}", summary_csv_string(&rows)?);
    Ok(())
}
