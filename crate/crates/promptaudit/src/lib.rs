//! PromptAudit: a reproducible audit harness measuring how prompt-template
//! choice, output protocol, and parser mode change the operational behavior
//! (recall, abstention, coverage, effective F1) of an LLM-based
//! SAFE/VULNERABLE code classifier, holding dataset, decoding, and
//! evaluation fixed.
//!
//! # Modules
//!
//! - [`corpus`] — CVE-style before/after ingestion, cleaning rules,
//!   near-duplicate removal, stratified subsetting
//! - [`prompt`] — the five strategy templates and two protocol suffixes
//! - [`gateway`] — `generate()` over a live local model server or a
//!   deterministic scripted backend, under a fixed decoding configuration
//! - [`parser`] — three-tier verdict extraction (strict / structured / full)
//! - [`consensus`] — strict-majority voting for self-consistency
//! - [`runner`] — Cartesian matrix execution with checkpointed resume
//! - [`metrics`] — six-category outcomes and abstention-aware metrics
//! - [`report`] — summary CSV and the self-contained HTML dashboard
//! - [`config`] — TOML configuration, overrides, matrix expansion
//!
//! # Runnable examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! ```bash
//! cargo run -p promptaudit --example render_prompts
//! cargo run -p promptaudit --example parse_transcripts
//! cargo run -p promptaudit --example consensus_votes
//! cargo run -p promptaudit --example metrics_from_counts
//! cargo run -p promptaudit --example synth_and_ingest
//! cargo run -p promptaudit --example scripted_matrix_run
//! cargo run -p promptaudit --example dashboard_from_reference
//! cargo run -p promptaudit --example live_backend_smoke   # needs a local model server
//! ```
//!
//! The thin `promptaudit` binary exposes the same capabilities as
//! subcommands: `ingest`, `run`, `metrics`, `parse`, `synth`,
//! `healthcheck`.

pub mod cli;
pub mod config;
pub mod consensus;
pub mod corpus;
pub mod gateway;
pub mod metrics;
pub mod parser;
pub mod prompt;
pub mod report;
pub mod rng;
pub mod runner;
pub mod synth;

mod error;

pub use error::{Error, Result};
