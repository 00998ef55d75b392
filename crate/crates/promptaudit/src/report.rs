//! CSV summaries and the static HTML dashboard.
//!
//! The summary CSV has a fixed column order and deterministic row order;
//! undefined metrics serialize as the literal `NA`. Metrics are printed to
//! three decimals except `abstention_rate`, which is a percentage with two
//! decimals. The dashboard is one self-contained HTML file (embedded
//! styles, data, and sorting script; no network fetches) whose displayed
//! per-configuration numbers are exactly the CSV strings; its per-strategy
//! aggregate bars are arithmetic means of the summary rows, labeled as
//! such. Output is byte-deterministic for a fixed `generated_at`.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, ConfusionTally, MetricsRow};

pub const SUMMARY_HEADER: &str = "model,strategy,protocol,parser_mode,n_samples,tp,tn,fp,fn,unfn,incorrect,accuracy,precision,recall,f1,abstention_rate,coverage,effective_f1";

/// One summary line: a configuration, its tally, and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub strategy: String,
    pub protocol: String,
    pub parser_mode: String,
    pub n_samples: u64,
    pub tally: ConfusionTally,
    pub metrics: MetricsRow,
}

impl SummaryRow {
    pub fn from_tally(
        model: impl Into<String>,
        strategy: impl Into<String>,
        protocol: impl Into<String>,
        parser_mode: impl Into<String>,
        tally: ConfusionTally,
    ) -> Result<Self> {
        let metrics = compute_metrics(&tally)?;
        Ok(SummaryRow {
            model: model.into(),
            strategy: strategy.into(),
            protocol: protocol.into(),
            parser_mode: parser_mode.into(),
            n_samples: tally.total(),
            tally,
            metrics,
        })
    }

    fn sort_key(&self) -> (&str, &str, &str, &str) {
        (
            &self.model,
            &self.strategy,
            &self.protocol,
            &self.parser_mode,
        )
    }
}

/// Three-decimal metric cell; `NA` when undefined.
pub fn format_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "NA".to_string(),
    }
}

/// Abstention as a percentage with two decimals.
pub fn format_abstention(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

fn csv_field(s: &str) -> Cow<'_, str> {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        Cow::Owned(format!("\"{}\"", s.replace('"', "\"\"")))
    } else {
        Cow::Borrowed(s)
    }
}

/// Render the summary CSV: header, rows sorted by
/// (model, strategy, protocol, parser_mode), UTF-8, final row
/// newline-terminated. Errors on an empty row set.
pub fn summary_csv_string(rows: &[SummaryRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Report("no summary rows to write".into()));
    }
    let mut sorted: Vec<&SummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for row in sorted {
        let t = &row.tally;
        let m = &row.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&row.model),
            csv_field(&row.strategy),
            csv_field(&row.protocol),
            csv_field(&row.parser_mode),
            row.n_samples,
            t.tp,
            t.tn,
            t.fp,
            t.fn_,
            t.unfn,
            t.incorrect,
            format_metric(m.accuracy),
            format_metric(m.precision),
            format_metric(m.recall),
            format_metric(m.f1),
            format_abstention(m.abstention_rate),
            format_metric(Some(m.coverage)),
            format_metric(m.effective_f1),
        );
    }
    Ok(out)
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let text = summary_csv_string(rows)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parse a confusion-counts CSV with the schema
/// `model,prompt,tp,tn,fp,fn,incorrect,unfn` (the bundled reference
/// fixture uses it). Model and prompt cells must not contain commas.
pub fn read_confusion_csv(text: &str) -> Result<Vec<(String, String, ConfusionTally)>> {
    const HEADER: &str = "model,prompt,tp,tn,fp,fn,incorrect,unfn";
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == HEADER => {}
        other => {
            return Err(Error::Input(format!(
                "confusion CSV must start with header '{HEADER}' (got {:?})",
                other.map(|(_, l)| l)
            )))
        }
    }
    let mut rows = Vec::new();
    for (number, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(Error::Input(format!(
                "line {}: expected 8 comma-separated fields, got {}",
                number + 1,
                fields.len()
            )));
        }
        let parse = |s: &str, name: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::Input(format!("line {}: bad {name} count '{s}'", number + 1)))
        };
        rows.push((
            fields[0].to_string(),
            fields[1].to_string(),
            ConfusionTally::new(
                parse(fields[2], "tp")?,
                parse(fields[3], "tn")?,
                parse(fields[4], "fp")?,
                parse(fields[5], "fn")?,
                parse(fields[7], "unfn")?,
                parse(fields[6], "incorrect")?,
            ),
        ));
    }
    Ok(rows)
}

/// Header metadata stamped into the dashboard.
#[derive(Debug, Clone)]
pub struct DashboardMeta {
    pub run_id: String,
    /// Pin this for byte-identical output across invocations.
    pub generated_at: String,
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const EM_DASH: &str = "\u{2014}";

fn metric_cell(value: Option<f64>) -> String {
    match value {
        Some(_) => format_metric(value),
        None => EM_DASH.to_string(),
    }
}

fn sorted_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut v: Vec<&str> = items.collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn heatmap_section(rows: &[&SummaryRow], protocol: &str, parser_mode: &str) -> String {
    let models = sorted_unique(rows.iter().map(|r| r.model.as_str()));
    let strategies = sorted_unique(rows.iter().map(|r| r.strategy.as_str()));
    let max_eff = rows
        .iter()
        .filter_map(|r| r.metrics.effective_f1)
        .fold(0.0f64, f64::max);

    let mut html = String::new();
    let _ = writeln!(
        html,
        "<h2>Effective F1 heatmap <span class=\"dim\">({} / {})</span></h2>",
        html_escape(protocol),
        html_escape(parser_mode)
    );
    html.push_str("<table class=\"heatmap\">\n<tr><th>model</th>");
    for s in &strategies {
        let _ = write!(html, "<th>{}</th>", html_escape(s));
    }
    html.push_str("</tr>\n");
    for model in &models {
        let _ = write!(html, "<tr><th>{}</th>", html_escape(model));
        for strategy in &strategies {
            let cell = rows
                .iter()
                .find(|r| r.model == *model && r.strategy == *strategy);
            match cell.and_then(|r| r.metrics.effective_f1) {
                Some(v) => {
                    let alpha = if max_eff > 0.0 {
                        0.08 + 0.82 * (v / max_eff)
                    } else {
                        0.08
                    };
                    let _ = write!(
                        html,
                        "<td style=\"background: rgba(46,125,50,{alpha:.3})\" title=\"{} / {}\">{}</td>",
                        html_escape(model),
                        html_escape(strategy),
                        format_metric(Some(v))
                    );
                }
                None => {
                    let _ = write!(html, "<td class=\"gap\">{EM_DASH}</td>");
                }
            }
        }
        html.push_str("</tr>\n");
    }
    html.push_str("</table>\n");
    html
}

fn bars_section(rows: &[&SummaryRow]) -> String {
    let strategies = sorted_unique(rows.iter().map(|r| r.strategy.as_str()));
    let mut html = String::new();
    html.push_str("<h2>Per-strategy decomposition <span class=\"dim\">(means over the table rows)</span></h2>\n");
    html.push_str("<table class=\"bars\"><tr><th>strategy</th><th>F1</th><th>coverage</th><th>effective F1</th></tr>\n");
    for strategy in strategies {
        let group: Vec<&&SummaryRow> = rows.iter().filter(|r| r.strategy == strategy).collect();
        let mean = |get: &dyn Fn(&MetricsRow) -> Option<f64>| -> Option<f64> {
            let defined: Vec<f64> = group.iter().filter_map(|r| get(&r.metrics)).collect();
            if defined.is_empty() {
                None
            } else {
                Some(defined.iter().sum::<f64>() / defined.len() as f64)
            }
        };
        let bar = |value: Option<f64>| -> String {
            match value {
                Some(v) => format!(
                    "<div class=\"bar\"><div class=\"fill\" style=\"width:{:.1}%\"></div><span>{}</span></div>",
                    (v.clamp(0.0, 1.0)) * 100.0,
                    format_metric(Some(v))
                ),
                None => EM_DASH.to_string(),
            }
        };
        let _ = writeln!(
            html,
            "<tr><th>{}</th><td>{}</td><td>{}</td><td>{}</td></tr>",
            html_escape(strategy),
            bar(mean(&|m| m.f1)),
            bar(mean(&|m| Some(m.coverage))),
            bar(mean(&|m| m.effective_f1)),
        );
    }
    html.push_str("</table>\n");
    html
}

fn scatter_section(rows: &[&SummaryRow]) -> String {
    const W: f64 = 520.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    let mut html = String::new();
    html.push_str("<h2>Coverage vs. F1 <span class=\"dim\">(all configurations)</span></h2>\n");
    let _ = writeln!(
        html,
        "<svg class=\"scatter\" viewBox=\"0 0 {W} {H}\" width=\"{W}\" height=\"{H}\">"
    );
    // axes
    let _ = writeln!(
        html,
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" class=\"axis\"/>",
        H - PAD,
        W - 10.0
    );
    let _ = writeln!(
        html,
        "<line x1=\"{PAD}\" y1=\"10\" x2=\"{PAD}\" y2=\"{}\" class=\"axis\"/>",
        H - PAD
    );
    for tick in [0.0f64, 0.25, 0.5, 0.75, 1.0] {
        let x = PAD + tick * (W - PAD - 10.0);
        let y = H - PAD - tick * (H - PAD - 10.0);
        let _ = writeln!(
            html,
            "<text x=\"{x:.1}\" y=\"{}\" class=\"tick\">{tick}</text>",
            H - PAD + 16.0
        );
        let _ = writeln!(
            html,
            "<text x=\"{}\" y=\"{y:.1}\" class=\"tick\">{tick}</text>",
            PAD - 30.0
        );
    }
    let _ = writeln!(
        html,
        "<text x=\"{}\" y=\"{}\" class=\"label\">coverage</text>",
        W / 2.0,
        H - 8.0
    );
    for row in rows {
        let Some(f1) = row.metrics.f1 else { continue };
        let x = PAD + row.metrics.coverage * (W - PAD - 10.0);
        let y = H - PAD - f1.clamp(0.0, 1.0) * (H - PAD - 10.0);
        let _ = writeln!(
            html,
            "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"5\"><title>{} / {}: coverage {}, F1 {}</title></circle>",
            html_escape(&row.model),
            html_escape(&row.strategy),
            format_metric(Some(row.metrics.coverage)),
            format_metric(Some(f1)),
        );
    }
    html.push_str("</svg>\n");
    html
}

fn table_section(rows: &[&SummaryRow]) -> String {
    let mut html = String::new();
    html.push_str(
        "<h2>All configurations <span class=\"dim\">(click a header to sort)</span></h2>\n",
    );
    html.push_str("<table id=\"summary\" class=\"sortable\">\n<thead><tr>");
    for column in SUMMARY_HEADER.split(',') {
        let _ = write!(html, "<th>{column}</th>");
    }
    html.push_str("</tr></thead>\n<tbody>\n");
    for row in rows {
        let t = &row.tally;
        let m = &row.metrics;
        let cells = [
            html_escape(&row.model),
            html_escape(&row.strategy),
            html_escape(&row.protocol),
            html_escape(&row.parser_mode),
            row.n_samples.to_string(),
            t.tp.to_string(),
            t.tn.to_string(),
            t.fp.to_string(),
            t.fn_.to_string(),
            t.unfn.to_string(),
            t.incorrect.to_string(),
            metric_cell(m.accuracy),
            metric_cell(m.precision),
            metric_cell(m.recall),
            metric_cell(m.f1),
            format_abstention(m.abstention_rate),
            metric_cell(Some(m.coverage)),
            metric_cell(m.effective_f1),
        ];
        html.push_str("<tr>");
        for cell in cells {
            let _ = write!(html, "<td>{cell}</td>");
        }
        html.push_str("</tr>\n");
    }
    html.push_str("</tbody>\n</table>\n");
    html
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;margin:2rem auto;max-width:72rem;padding:0 1rem;color:#222}\
h1{font-size:1.4rem}h2{font-size:1.1rem;margin-top:2rem}.dim{color:#777;font-weight:normal;font-size:0.85em}\
table{border-collapse:collapse;margin:0.5rem 0}th,td{border:1px solid #ccc;padding:0.3rem 0.6rem;text-align:right;font-variant-numeric:tabular-nums}\
th{background:#f2f2f2;text-align:center}td:first-child,th:first-child{text-align:left}\
.heatmap td{min-width:4.5rem;text-align:center}.gap{color:#999;background:#fafafa}\
.bars .bar{position:relative;width:14rem;height:1.2rem;background:#eee}.bars .fill{position:absolute;left:0;top:0;bottom:0;background:#66a36e}\
.bars .bar span{position:absolute;left:0.3rem;top:0;font-size:0.8rem;line-height:1.2rem}\
.scatter{background:#fcfcfc;border:1px solid #ddd}.scatter circle{fill:#2e7d32;opacity:0.75}.scatter .axis{stroke:#444}\
.scatter text{font-size:10px;fill:#555}.sortable th{cursor:pointer}\
footer{margin-top:3rem;color:#888;font-size:0.8rem}";

const SORT_SCRIPT: &str =
    "document.querySelectorAll('table.sortable th').forEach(function(th, index){\
th.addEventListener('click', function(){\
var tbody = th.closest('table').querySelector('tbody');\
var rows = Array.from(tbody.querySelectorAll('tr'));\
var dir = th.dataset.dir === 'asc' ? -1 : 1;\
th.dataset.dir = dir === 1 ? 'asc' : 'desc';\
rows.sort(function(a, b){\
var x = a.children[index].textContent, y = b.children[index].textContent;\
var nx = parseFloat(x), ny = parseFloat(y);\
if (!isNaN(nx) && !isNaN(ny)) return (nx - ny) * dir;\
if (isNaN(nx) && !isNaN(ny)) return 1;\
if (!isNaN(nx) && isNaN(ny)) return -1;\
return x.localeCompare(y) * dir;});\
rows.forEach(function(r){ tbody.appendChild(r); });});});";

/// Render the dashboard HTML. Rows may cover several (protocol,
/// parser_mode) slices; each slice gets its own heatmap. Errors on an
/// empty summary; partial matrices render with gaps.
pub fn render_dashboard(rows: &[SummaryRow], meta: &DashboardMeta) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Report("empty summary; nothing to render".into()));
    }
    let mut sorted: Vec<&SummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut slices: Vec<(&str, &str)> = sorted
        .iter()
        .map(|r| (r.protocol.as_str(), r.parser_mode.as_str()))
        .collect();
    slices.sort_unstable();
    slices.dedup();

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(
        html,
        "<title>prompt audit {}</title>",
        html_escape(&meta.run_id)
    );
    let _ = writeln!(html, "<style>{STYLE}</style>");
    html.push_str("</head>\n<body>\n");
    let _ = writeln!(
        html,
        "<h1>Prompt audit <code>{}</code></h1>\n<p class=\"dim\">generated at {}</p>",
        html_escape(&meta.run_id),
        html_escape(&meta.generated_at)
    );

    for (protocol, parser_mode) in &slices {
        let slice: Vec<&SummaryRow> = sorted
            .iter()
            .copied()
            .filter(|r| r.protocol == *protocol && r.parser_mode == *parser_mode)
            .collect();
        html.push_str(&heatmap_section(&slice, protocol, parser_mode));
    }
    html.push_str(&bars_section(&sorted));
    html.push_str(&scatter_section(&sorted));
    html.push_str(&table_section(&sorted));

    // Embedded machine-readable copy of the summary rows.
    let json = serde_json::to_string(&sorted).map_err(|e| Error::Report(e.to_string()))?;
    let _ = writeln!(
        html,
        "<script type=\"application/json\" id=\"summary-data\">{}</script>",
        json.replace("</", "<\\/")
    );
    let _ = writeln!(html, "<script>{SORT_SCRIPT}</script>");
    let _ = writeln!(
        html,
        "<footer>self-contained report; run <code>{}</code></footer>",
        html_escape(&meta.run_id)
    );
    html.push_str("</body>\n</html>\n");
    Ok(html)
}

pub fn write_dashboard(rows: &[SummaryRow], meta: &DashboardMeta, path: &Path) -> Result<()> {
    let html = render_dashboard(rows, meta)?;
    std::fs::write(path, html).map_err(|e| Error::io(path, e))
}
