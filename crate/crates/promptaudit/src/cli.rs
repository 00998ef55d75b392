//! Subcommand implementations behind the thin `promptaudit` binary.
//!
//! `ingest` builds and validates a corpus manifest, `run` executes the
//! configured matrix (resuming from a checkpoint when one exists),
//! `metrics` recomputes metric rows from a confusion-counts CSV without
//! touching any model, `parse` probes a single response from stdin,
//! `synth` fabricates a synthetic test corpus, and `healthcheck` verifies
//! backend availability before a long run.

use std::io::Read;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{self, AuditConfig, Overrides, BACKEND_URL_ENV};
use crate::corpus::{self, IngestOptions};
use crate::error::{Error, Result};
use crate::gateway::{Backend, LiveBackend, ScriptedBackend};
use crate::parser::{parse, ParserMode};
use crate::prompt::{Protocol, TemplateSet};
use crate::report::{self, DashboardMeta, SummaryRow};
use crate::runner::{self, RunStatus, RunnerOptions};
use crate::synth;

#[derive(Parser)]
#[command(
    name = "promptaudit",
    version,
    about = "Audit how prompt templates, output protocols, and parser modes change an LLM-based SAFE/VULNERABLE classifier"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and validate a corpus manifest from a CVE-style folder tree.
    Ingest {
        /// Corpus root directory.
        #[arg(long)]
        corpus: PathBuf,
        /// Write the manifest as line-delimited JSON records.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Optional config file (for extension overrides).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Execute the configured matrix; resumes automatically from a
    /// checkpoint left by an interrupted run with the same run_id.
    Run {
        /// Audit configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Live backend base URL (overrides config and environment).
        #[arg(long)]
        backend: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: Option<String>,
        /// Run identifier (names the output subdirectory).
        #[arg(long)]
        run_id: Option<String>,
        /// Stratified subset size (omit to run the full corpus).
        #[arg(long)]
        subset_size: Option<usize>,
        /// Seed for the stratified subset shuffle.
        #[arg(long)]
        subset_seed: Option<u64>,
        /// Worker pool size.
        #[arg(long)]
        concurrency: Option<usize>,
        /// Pin the generated-at stamp for byte-reproducible dashboards.
        #[arg(long)]
        pin_timestamp: Option<String>,
    },
    /// Compute metric rows from a confusion-counts CSV
    /// (columns: model,prompt,tp,tn,fp,fn,incorrect,unfn).
    Metrics {
        /// Confusion-counts CSV to read.
        #[arg(long)]
        input: PathBuf,
        /// Write the summary CSV here (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render a dashboard.
        #[arg(long)]
        dashboard: Option<PathBuf>,
        /// Protocol column value for the output rows.
        #[arg(long, default_value = "verdict_first")]
        protocol: String,
        /// Parser-mode column value for the output rows.
        #[arg(long, default_value = "full")]
        parser_mode: String,
        /// Pin the generated-at stamp for byte-reproducible dashboards.
        #[arg(long)]
        pin_timestamp: Option<String>,
    },
    /// Parse one response from stdin and print "verdict<TAB>tier".
    Parse {
        /// Parser mode: strict, structured, or full.
        #[arg(long)]
        mode: String,
        /// Output protocol: verdict_first or verdict_last.
        #[arg(long)]
        protocol: String,
    },
    /// Generate a synthetic CVE-style corpus for tests and demos.
    Synth {
        /// Directory to create the corpus under.
        #[arg(long)]
        out: PathBuf,
        /// Number of before/after pairs (two samples each).
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Check backend availability for the configured (or given) models.
    Healthcheck {
        /// Audit configuration (TOML) naming the backend and models.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Live backend base URL (bypasses the config file).
        #[arg(long)]
        backend: Option<String>,
        /// Model to check (repeatable); defaults to the configured models.
        #[arg(long)]
        model: Vec<String>,
    },
}

/// Run a parsed command line; returns the process exit status.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn now_stamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

fn build_backend(config: &AuditConfig) -> Result<Box<dyn Backend>> {
    match config.backend.kind.as_str() {
        "scripted" => {
            let path = config.backend.script_path.as_deref().unwrap_or_default();
            Ok(Box::new(ScriptedBackend::from_path(std::path::Path::new(
                path,
            ))?))
        }
        "live" => {
            let url = config.backend.base_url.as_deref().unwrap_or_default();
            Ok(Box::new(LiveBackend::new(url)))
        }
        other => Err(Error::config(format!("unknown backend.kind '{other}'"))),
    }
}

fn templates_for(config: &AuditConfig) -> Result<TemplateSet> {
    match &config.prompts.template_dir {
        Some(dir) => TemplateSet::from_dir(std::path::Path::new(dir)),
        None => Ok(TemplateSet::builtin()),
    }
}

fn ingest_options(config: Option<&AuditConfig>) -> IngestOptions {
    IngestOptions {
        language_map: config.map(AuditConfig::language_map).unwrap_or_default(),
        ..IngestOptions::default()
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Ingest {
            corpus: root,
            export,
            config,
        } => {
            let config = config.as_deref().map(config::read_config).transpose()?;
            let opts = ingest_options(config.as_ref());
            let manifest = corpus::ingest_with(&root, &opts)?;
            manifest.validate(&opts)?;
            println!("samples: {}", manifest.samples.len());
            for (language, count) in &manifest.counts.per_language {
                println!("  language {language}: {count}");
            }
            for (label, count) in &manifest.counts.per_label {
                println!("  label {label}: {count}");
            }
            println!("rejected: {}", manifest.rejected.len());
            let mut by_reason = std::collections::BTreeMap::new();
            for r in &manifest.rejected {
                *by_reason.entry(r.reason.code()).or_insert(0usize) += 1;
            }
            for (reason, count) in by_reason {
                println!("  {reason}: {count}");
            }
            if let Some(path) = export {
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                manifest
                    .export_jsonl(std::io::BufWriter::new(file))
                    .map_err(|e| Error::io(&path, e))?;
                println!("manifest exported to {}", path.display());
            }
            Ok(0)
        }

        Command::Run {
            config: config_path,
            backend,
            out,
            run_id,
            subset_size,
            subset_seed,
            concurrency,
            pin_timestamp,
        } => {
            let mut config = config::read_config(&config_path)?;
            let env_url = std::env::var(BACKEND_URL_ENV).ok();
            config.apply_overrides(
                &Overrides {
                    backend_url: backend,
                    out_dir: out,
                    run_id,
                    subset_size,
                    subset_seed,
                    concurrency,
                },
                env_url.as_deref(),
            );
            config.validate()?;

            let opts = ingest_options(Some(&config));
            let mut manifest =
                corpus::ingest_with(std::path::Path::new(&config.corpus.path), &opts)?;
            if let Some(size) = config.subset.size {
                manifest = corpus::stratified_subset(&manifest, size, config.subset.seed);
            }

            let backend = build_backend(&config)?;
            if backend.kind() == "live" {
                for model in &config.models {
                    let report = backend.healthcheck(model);
                    println!("healthcheck {model}: {}", report.diagnostic);
                    if !report.available {
                        return Err(Error::Backend {
                            model: model.clone(),
                            message: report.diagnostic,
                        });
                    }
                }
            }

            let templates = templates_for(&config)?;
            let matrix = config.matrix()?;
            let options = RunnerOptions {
                run_id: config.run_id.clone(),
                concurrency: config.concurrency.limit,
                cancel: None,
                generated_at: pin_timestamp.unwrap_or_else(now_stamp),
                metadata: serde_json::to_value(&config)
                    .map_err(|e| Error::Report(e.to_string()))?,
            };
            let status = runner::run_to_dir(
                &manifest,
                &matrix,
                backend.as_ref(),
                &templates,
                &options,
                &config.output_dir(),
            )?;
            match status {
                RunStatus::Completed { paths, cells } => {
                    println!(
                        "run '{}' complete: {} cells over {} samples",
                        config.run_id,
                        cells,
                        manifest.samples.len()
                    );
                    println!("  samples log: {}", paths.samples_log().display());
                    println!("  summary:     {}", paths.summary_csv().display());
                    println!("  dashboard:   {}", paths.dashboard_html().display());
                    Ok(0)
                }
                RunStatus::Interrupted { completed, total } => {
                    println!("run interrupted at {completed}/{total} cells; re-run to resume");
                    Ok(3)
                }
            }
        }

        Command::Metrics {
            input,
            out,
            dashboard,
            protocol,
            parser_mode,
            pin_timestamp,
        } => {
            let protocol = Protocol::from_name(&protocol)?;
            let parser_mode = ParserMode::from_name(&parser_mode)?;
            let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let rows: Vec<SummaryRow> = report::read_confusion_csv(&text)?
                .into_iter()
                .map(|(model, prompt, tally)| {
                    SummaryRow::from_tally(
                        model,
                        prompt,
                        protocol.name(),
                        parser_mode.name(),
                        tally,
                    )
                })
                .collect::<Result<_>>()?;
            let csv = report::summary_csv_string(&rows)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
                    println!("summary written to {}", path.display());
                }
                None => print!("{csv}"),
            }
            if let Some(path) = dashboard {
                let meta = DashboardMeta {
                    run_id: input
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .unwrap_or("metrics")
                        .to_string(),
                    generated_at: pin_timestamp.unwrap_or_else(now_stamp),
                };
                report::write_dashboard(&rows, &meta, &path)?;
                println!("dashboard written to {}", path.display());
            }
            Ok(0)
        }

        Command::Parse { mode, protocol } => {
            let mode = ParserMode::from_name(&mode)?;
            let protocol = Protocol::from_name(&protocol)?;
            let mut response = String::new();
            std::io::stdin()
                .read_to_string(&mut response)
                .map_err(|e| Error::io("<stdin>", e))?;
            let outcome = parse(&response, mode, protocol);
            println!("{}\t{}", outcome.verdict, outcome.tier);
            Ok(0)
        }

        Command::Synth { out, pairs, seed } => {
            let files = synth::generate(&out, pairs, seed)?;
            println!(
                "wrote {files} files ({pairs} before/after pairs) under {}",
                out.display()
            );
            Ok(0)
        }

        Command::Healthcheck {
            config,
            backend,
            model,
        } => {
            let (backend, models): (Box<dyn Backend>, Vec<String>) = match (backend, config) {
                (Some(url), _) => (Box::new(LiveBackend::new(&url)), model),
                (None, Some(path)) => {
                    let config = config::load_config(&path)?;
                    let models = if model.is_empty() {
                        config.models.clone()
                    } else {
                        model
                    };
                    (build_backend(&config)?, models)
                }
                (None, None) => {
                    return Err(Error::config(
                        "healthcheck needs --backend URL or --config PATH",
                    ))
                }
            };
            let models = if models.is_empty() {
                vec!["(any)".to_string()]
            } else {
                models
            };
            let mut all_available = true;
            for m in &models {
                let report = backend.healthcheck(m);
                println!(
                    "{m}\t{}\t{}",
                    if report.available {
                        "available"
                    } else {
                        "unavailable"
                    },
                    report.diagnostic
                );
                all_available &= report.available;
            }
            Ok(if all_available { 0 } else { 1 })
        }
    }
}
