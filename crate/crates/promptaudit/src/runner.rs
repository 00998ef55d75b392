//! Cartesian matrix execution over the corpus, with checkpointed resume.
//!
//! Cells (configuration × sample) execute on a bounded worker pool;
//! execution order is configurations outer, samples inner, but the
//! canonical record ordering — configuration order, then lexicographic
//! sample_id — is imposed at finalization, so output is invariant under
//! any concurrency limit. Every raw completion is persisted verbatim
//! before parsing enters the picture.
//!
//! On-disk layout of a run directory:
//!
//! ```text
//! <out>/<run_id>/
//!   partial.jsonl     # records in completion order (append, crash-safe)
//!   checkpoint.txt    # fingerprint + one line per completed cell
//!   samples.jsonl     # canonical per-sample log (sorted)
//!   summary.csv       # per-configuration tallies and metrics
//!   dashboard.html    # self-contained report
//!   run_metadata.json # config snapshot, version, seed policy
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::{majority, VoteSet};
use crate::corpus::{CodeSample, CorpusManifest, Label};
use crate::error::{Error, Result};
use crate::gateway::{Backend, DecodingConfig};
use crate::metrics::{classify_outcome, ConfusionTally, OutcomeCategory};
use crate::parser::{parse, ParseOutcome, ParserMode, Tier, Verdict};
use crate::prompt::{sample_budget, Protocol, Strategy, TemplateSet};
use crate::report::{self, DashboardMeta, SummaryRow};

/// One cell of the dataset × model × strategy × protocol × parser matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfiguration {
    pub dataset_id: String,
    pub model_id: String,
    pub strategy: Strategy,
    pub protocol: Protocol,
    pub parser_mode: ParserMode,
    pub decoding: DecodingConfig,
    pub sc_samples: usize,
}

impl RunConfiguration {
    fn key(&self) -> (String, String, Strategy, Protocol, ParserMode) {
        (
            self.dataset_id.clone(),
            self.model_id.clone(),
            self.strategy,
            self.protocol,
            self.parser_mode,
        )
    }
}

pub const BACKEND_FAILURE_REASON: &str = "backend_failure";

/// Per-sample log record; the serialized field order is the log schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub run_id: String,
    pub dataset_id: String,
    pub model_id: String,
    pub strategy: Strategy,
    pub protocol: Protocol,
    pub parser_mode: ParserMode,
    pub sample_id: String,
    pub truth: Label,
    pub raw_responses: Vec<String>,
    pub verdict: Verdict,
    pub tier: Tier,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    #[serde(skip, default)]
    pub config_index: usize,
}

impl SampleRecord {
    pub fn outcome(&self) -> ParseOutcome {
        ParseOutcome {
            verdict: self.verdict,
            tier: self.tier,
        }
    }

    pub fn outcome_category(&self) -> OutcomeCategory {
        classify_outcome(self.truth, self.verdict)
    }
}

/// Execution knobs; `generated_at` must be pinned for byte-identical
/// dashboards, `cancel` supports cooperative interruption.
#[derive(Clone)]
pub struct RunnerOptions {
    pub run_id: String,
    pub concurrency: usize,
    pub cancel: Option<Arc<AtomicBool>>,
    pub generated_at: String,
    pub metadata: serde_json::Value,
}

impl Default for RunnerOptions {
    fn default() -> Self {
        RunnerOptions {
            run_id: "run".into(),
            concurrency: 1,
            cancel: None,
            generated_at: "unpinned".into(),
            metadata: serde_json::Value::Null,
        }
    }
}

/// Paths of the files a persistent run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(out_dir: &Path, run_id: &str) -> Self {
        RunPaths {
            dir: out_dir.join(run_id),
        }
    }

    pub fn partial_log(&self) -> PathBuf {
        self.dir.join("partial.jsonl")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.txt")
    }

    pub fn samples_log(&self) -> PathBuf {
        self.dir.join("samples.jsonl")
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.dir.join("summary.csv")
    }

    pub fn dashboard_html(&self) -> PathBuf {
        self.dir.join("dashboard.html")
    }

    pub fn metadata(&self) -> PathBuf {
        self.dir.join("run_metadata.json")
    }
}

/// Outcome of a persistent run.
#[derive(Debug, PartialEq)]
pub enum RunStatus {
    Completed { paths: RunPaths, cells: usize },
    Interrupted { completed: usize, total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cell {
    config_index: usize,
    sample_index: usize,
}

fn plan_cells(manifest: &CorpusManifest, configs: &[RunConfiguration]) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(configs.len() * manifest.samples.len());
    for config_index in 0..configs.len() {
        for sample_index in 0..manifest.samples.len() {
            cells.push(Cell {
                config_index,
                sample_index,
            });
        }
    }
    cells
}

fn validate_inputs(manifest: &CorpusManifest, configs: &[RunConfiguration]) -> Result<()> {
    let mut violations = Vec::new();
    if manifest.samples.is_empty() {
        violations.push("corpus is empty".to_string());
    }
    if configs.is_empty() {
        violations.push("no run configurations".to_string());
    }
    for c in configs {
        if c.sc_samples == 0 {
            violations.push(format!("{}: sc_samples must be >= 1", c.model_id));
        }
        if let Err(Error::Config(mut inner)) = c.decoding.validate() {
            violations.append(&mut inner);
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(violations))
    }
}

/// Execute one cell: render, collect the budgeted completions, parse each,
/// aggregate (self-consistency only), emit one record. Backend failures
/// surface as UNKNOWN with a reason tag, never as a run abort.
fn run_cell(
    run_id: &str,
    config: &RunConfiguration,
    config_index: usize,
    sample: &CodeSample,
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> SampleRecord {
    let prompt = templates.render(sample, config.strategy, config.protocol);
    let budget = sample_budget(config.strategy, config.sc_samples);

    let mut raw_responses = Vec::with_capacity(budget);
    let mut votes: Vec<ParseOutcome> = Vec::with_capacity(budget);
    let mut failures = 0usize;
    for vote in 0..budget {
        match backend.generate(&config.model_id, &prompt, &config.decoding, vote) {
            Ok(record) => {
                votes.push(parse(
                    &record.response_text,
                    config.parser_mode,
                    config.protocol,
                ));
                raw_responses.push(record.response_text);
            }
            Err(_) => {
                // A failed vote has no completion; an empty placeholder
                // keeps |raw_responses| == budget.
                failures += 1;
                raw_responses.push(String::new());
            }
        }
    }

    let outcome = if config.strategy == Strategy::SelfConsistency {
        majority(&VoteSet::new(budget, votes, failures))
    } else {
        votes.first().copied().unwrap_or_else(ParseOutcome::unknown)
    };

    SampleRecord {
        run_id: run_id.to_string(),
        dataset_id: config.dataset_id.clone(),
        model_id: config.model_id.clone(),
        strategy: config.strategy,
        protocol: config.protocol,
        parser_mode: config.parser_mode,
        sample_id: sample.sample_id.clone(),
        truth: sample.label,
        raw_responses,
        verdict: outcome.verdict,
        tier: outcome.tier,
        reason: (failures > 0).then(|| BACKEND_FAILURE_REASON.to_string()),
        config_index,
    }
}

/// Run `cells` on a bounded pool; `on_record` sees records in completion
/// order through a single serialized sink. Returns true if interrupted.
fn run_cells(
    cells: &[Cell],
    manifest: &CorpusManifest,
    configs: &[RunConfiguration],
    backend: &dyn Backend,
    templates: &TemplateSet,
    options: &RunnerOptions,
    mut on_record: impl FnMut(SampleRecord) -> Result<()>,
) -> Result<bool> {
    let concurrency = options.concurrency.max(1);
    let next = AtomicUsize::new(0);
    let cancel = options.cancel.clone();
    let run_id = options.run_id.clone();

    std::thread::scope(|scope| -> Result<bool> {
        let (tx, rx) = mpsc::channel::<SampleRecord>();
        for _ in 0..concurrency {
            let tx = tx.clone();
            let next = &next;
            let cancel = cancel.clone();
            let run_id = run_id.clone();
            scope.spawn(move || loop {
                if cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst)) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = cells.get(i) else { break };
                let record = run_cell(
                    &run_id,
                    &configs[cell.config_index],
                    cell.config_index,
                    &manifest.samples[cell.sample_index],
                    backend,
                    templates,
                );
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut completed = 0usize;
        for record in rx {
            on_record(record)?;
            completed += 1;
        }
        Ok(completed < cells.len())
    })
}

/// In-memory matrix execution; records come back in canonical order.
/// Intended for demos and tests; persistent runs go through [`run_to_dir`].
pub fn execute_matrix(
    manifest: &CorpusManifest,
    configs: &[RunConfiguration],
    backend: &dyn Backend,
    templates: &TemplateSet,
    options: &RunnerOptions,
) -> Result<Vec<SampleRecord>> {
    validate_inputs(manifest, configs)?;
    let cells = plan_cells(manifest, configs);
    let mut records = Vec::with_capacity(cells.len());
    let interrupted = run_cells(
        &cells,
        manifest,
        configs,
        backend,
        templates,
        options,
        |record| {
            records.push(record);
            Ok(())
        },
    )?;
    if interrupted {
        return Err(Error::Checkpoint(
            "in-memory run interrupted; use run_to_dir for resumable runs".into(),
        ));
    }
    sort_records(&mut records);
    Ok(records)
}

fn sort_records(records: &mut [SampleRecord]) {
    records.sort_by(|a, b| {
        (a.config_index, a.sample_id.as_str()).cmp(&(b.config_index, b.sample_id.as_str()))
    });
}

/// Fingerprint binding a checkpoint to (run_id, configurations, corpus).
fn fingerprint(run_id: &str, manifest: &CorpusManifest, configs: &[RunConfiguration]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(run_id.as_bytes());
    hasher.update([0]);
    for c in configs {
        hasher.update(
            format!(
                "{}|{}|{}|{}|{}|{}|{:?}",
                c.dataset_id,
                c.model_id,
                c.strategy,
                c.protocol,
                c.parser_mode,
                c.sc_samples,
                c.decoding
            )
            .as_bytes(),
        );
        hasher.update([0]);
    }
    for s in &manifest.samples {
        hasher.update(s.sample_id.as_bytes());
        hasher.update([1]);
        hasher.update(s.code.as_bytes());
        hasher.update([0]);
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

const CHECKPOINT_MAGIC: &str = "promptaudit-checkpoint v1";

struct CheckpointState {
    completed: BTreeSet<Cell>,
    records: Vec<SampleRecord>,
}

fn load_checkpoint(
    paths: &RunPaths,
    expected_fingerprint: &str,
    manifest: &CorpusManifest,
    configs: &[RunConfiguration],
) -> Result<CheckpointState> {
    let checkpoint_path = paths.checkpoint();
    let mut completed = BTreeSet::new();
    if !checkpoint_path.exists() {
        return Ok(CheckpointState {
            completed,
            records: Vec::new(),
        });
    }

    let sample_index: BTreeMap<&str, usize> = manifest
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.sample_id.as_str(), i))
        .collect();

    let text =
        std::fs::read_to_string(&checkpoint_path).map_err(|e| Error::io(&checkpoint_path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(CHECKPOINT_MAGIC) => {}
        other => {
            return Err(Error::Checkpoint(format!(
                "unrecognized checkpoint header {other:?} in {}",
                checkpoint_path.display()
            )))
        }
    }
    match lines.next().and_then(|l| l.strip_prefix("fingerprint ")) {
        Some(found) if found == expected_fingerprint => {}
        Some(found) => {
            return Err(Error::Checkpoint(format!(
                "checkpoint fingerprint mismatch (checkpoint {found:.12}…, current run {expected_fingerprint:.12}…); \
                 corpus, configuration, or run_id changed since the interrupted run"
            )))
        }
        None => {
            return Err(Error::Checkpoint("checkpoint is missing its fingerprint line".into()))
        }
    }
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let Some(rest) = line.strip_prefix("cell ") else {
            return Err(Error::Checkpoint(format!(
                "corrupt checkpoint line: {line:?}"
            )));
        };
        let Some((index, sample_id)) = rest.split_once(' ') else {
            return Err(Error::Checkpoint(format!(
                "corrupt checkpoint line: {line:?}"
            )));
        };
        let config_index: usize = index
            .parse()
            .map_err(|_| Error::Checkpoint(format!("corrupt checkpoint line: {line:?}")))?;
        if config_index >= configs.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint references configuration #{config_index} but only {} exist",
                configs.len()
            )));
        }
        let Some(&sample_idx) = sample_index.get(sample_id) else {
            return Err(Error::Checkpoint(format!(
                "checkpoint references sample_id '{sample_id}' which is not in the corpus"
            )));
        };
        completed.insert(Cell {
            config_index,
            sample_index: sample_idx,
        });
    }

    // Reload the partial log; keep the first record per completed cell.
    let config_lookup: BTreeMap<_, usize> = configs
        .iter()
        .enumerate()
        .map(|(i, c)| (c.key(), i))
        .collect();
    let mut records = Vec::new();
    let mut seen: BTreeSet<Cell> = BTreeSet::new();
    let partial_path = paths.partial_log();
    if partial_path.exists() {
        let file = std::fs::File::open(&partial_path).map_err(|e| Error::io(&partial_path, e))?;
        for (number, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&partial_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut record: SampleRecord = serde_json::from_str(&line).map_err(|e| {
                Error::Checkpoint(format!(
                    "{}:{}: corrupt partial record: {e}",
                    partial_path.display(),
                    number + 1
                ))
            })?;
            let key = (
                record.dataset_id.clone(),
                record.model_id.clone(),
                record.strategy,
                record.protocol,
                record.parser_mode,
            );
            let Some(&config_index) = config_lookup.get(&key) else {
                return Err(Error::Checkpoint(format!(
                    "partial log references a configuration not in this run: {}/{}",
                    record.model_id, record.strategy
                )));
            };
            let Some(&sample_idx) = sample_index.get(record.sample_id.as_str()) else {
                return Err(Error::Checkpoint(format!(
                    "partial log references sample_id '{}' which is not in the corpus",
                    record.sample_id
                )));
            };
            record.config_index = config_index;
            let cell = Cell {
                config_index,
                sample_index: sample_idx,
            };
            if completed.contains(&cell) && seen.insert(cell) {
                records.push(record);
            }
        }
    }
    let missing = completed.len() - records.len();
    if missing > 0 {
        return Err(Error::Checkpoint(format!(
            "checkpoint marks {missing} cell(s) complete that have no record in the partial log"
        )));
    }
    Ok(CheckpointState { completed, records })
}

/// Build per-configuration summary rows from canonical records.
pub fn summarize_records(
    configs: &[RunConfiguration],
    records: &[SampleRecord],
) -> Result<Vec<SummaryRow>> {
    let mut tallies: Vec<ConfusionTally> = vec![ConfusionTally::default(); configs.len()];
    for record in records {
        tallies[record.config_index].add(record.outcome_category());
    }
    configs
        .iter()
        .zip(tallies)
        .map(|(c, tally)| {
            SummaryRow::from_tally(
                c.model_id.clone(),
                c.strategy.name(),
                c.protocol.name(),
                c.parser_mode.name(),
                tally,
            )
        })
        .collect()
}

fn write_records_jsonl(records: &[SampleRecord], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for record in records {
        serde_json::to_writer(&mut file, record).map_err(|e| Error::Report(e.to_string()))?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Execute (or resume) the matrix, persisting progress after every cell.
///
/// A prior interrupted run in the same directory is picked up from its
/// checkpoint: only missing cells execute, and the merged output is
/// identical to an uninterrupted run. A checkpoint written against a
/// different corpus, configuration set, or run_id is a fatal error.
pub fn run_to_dir(
    manifest: &CorpusManifest,
    configs: &[RunConfiguration],
    backend: &dyn Backend,
    templates: &TemplateSet,
    options: &RunnerOptions,
    out_dir: &Path,
) -> Result<RunStatus> {
    validate_inputs(manifest, configs)?;
    let paths = RunPaths::new(out_dir, &options.run_id);
    std::fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;

    let print = fingerprint(&options.run_id, manifest, configs);
    let state = load_checkpoint(&paths, &print, manifest, configs)?;

    let all_cells = plan_cells(manifest, configs);
    let remaining: Vec<Cell> = all_cells
        .iter()
        .copied()
        .filter(|cell| !state.completed.contains(cell))
        .collect();

    let mut records = state.records;
    if !remaining.is_empty() {
        let fresh = !paths.checkpoint().exists();
        let mut checkpoint_file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(paths.checkpoint())
            .map_err(|e| Error::io(paths.checkpoint(), e))?;
        if fresh {
            writeln!(checkpoint_file, "{CHECKPOINT_MAGIC}")
                .and_then(|_| writeln!(checkpoint_file, "fingerprint {print}"))
                .map_err(|e| Error::io(paths.checkpoint(), e))?;
        }
        let mut partial_file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(paths.partial_log())
            .map_err(|e| Error::io(paths.partial_log(), e))?;

        let mut executed = 0usize;
        let interrupted = run_cells(
            &remaining,
            manifest,
            configs,
            backend,
            templates,
            options,
            |record| {
                // Record first, then the checkpoint line: a crash in
                // between re-runs the cell rather than losing it.
                serde_json::to_writer(&mut partial_file, &record)
                    .map_err(|e| Error::Report(e.to_string()))?;
                partial_file
                    .write_all(b"\n")
                    .and_then(|_| partial_file.flush())
                    .map_err(|e| Error::io(paths.partial_log(), e))?;
                writeln!(
                    checkpoint_file,
                    "cell {} {}",
                    record.config_index, record.sample_id
                )
                .and_then(|_| checkpoint_file.flush())
                .map_err(|e| Error::io(paths.checkpoint(), e))?;
                records.push(record);
                executed += 1;
                Ok(())
            },
        )?;
        if interrupted {
            return Ok(RunStatus::Interrupted {
                completed: state.completed.len() + executed,
                total: all_cells.len(),
            });
        }
    }

    sort_records(&mut records);
    write_records_jsonl(&records, &paths.samples_log())?;

    let summary = summarize_records(configs, &records)?;
    report::write_summary_csv(&summary, &paths.summary_csv())?;
    report::write_dashboard(
        &summary,
        &DashboardMeta {
            run_id: options.run_id.clone(),
            generated_at: options.generated_at.clone(),
        },
        &paths.dashboard_html(),
    )?;

    let metadata = serde_json::json!({
        "run_id": options.run_id,
        "generated_at": options.generated_at,
        "version": env!("CARGO_PKG_VERSION"),
        "seed_policy": "per-vote seed offset (seed + vote_index)",
        "cells": all_cells.len(),
        "config": options.metadata,
    });
    let metadata_path = paths.metadata();
    std::fs::write(
        &metadata_path,
        serde_json::to_string_pretty(&metadata).map_err(|e| Error::Report(e.to_string()))?,
    )
    .map_err(|e| Error::io(&metadata_path, e))?;

    Ok(RunStatus::Completed {
        paths,
        cells: all_cells.len(),
    })
}
