//! Execute a small matrix (2 strategies × 2 protocols) over a synthetic
//! corpus with the deterministic scripted backend, then print the summary
//! CSV and where the full report bundle landed.
//!
//! ```bash
//! cargo run -p promptaudit --example scripted_matrix_run
//! ```

use promptaudit::gateway::{prompt_digest, DecodingConfig, ScriptEntry, ScriptedBackend};
use promptaudit::parser::ParserMode;
use promptaudit::prompt::{sample_budget, Protocol, Strategy, TemplateSet};
use promptaudit::runner::{self, RunConfiguration, RunStatus, RunnerOptions};
use promptaudit::{corpus, report, synth};

fn main() -> promptaudit::Result<()> {
    let corpus_dir = tempfile::tempdir().expect("temp dir");
    synth::generate(corpus_dir.path(), 6, 99)?;
    let manifest = corpus::ingest(corpus_dir.path())?;

    let templates = TemplateSet::builtin();
    let mut configs = Vec::new();
    for strategy in [Strategy::ZeroShot, Strategy::SelfConsistency] {
        for protocol in Protocol::ALL {
            configs.push(RunConfiguration {
                dataset_id: "synth".into(),
                model_id: "scripted-7b".into(),
                strategy,
                protocol,
                parser_mode: ParserMode::Full,
                decoding: DecodingConfig::default(),
                sc_samples: 5,
            });
        }
    }

    // Script a verdict for every (config, sample, vote) cell. Responses
    // mostly agree with the ground truth but mix in disagreement, marker
    // phrasing, lexical cues, and inconclusive text so every parser tier
    // and outcome category shows up in the summary.
    let mut backend = ScriptedBackend::new();
    for config in &configs {
        for (idx, sample) in manifest.samples.iter().enumerate() {
            let truth = sample.label.name();
            let opposite = match sample.label {
                promptaudit::corpus::Label::Safe => "VULNERABLE",
                promptaudit::corpus::Label::Vulnerable => "SAFE",
            };
            let prompt = templates.render(sample, config.strategy, config.protocol);
            let budget = sample_budget(config.strategy, config.sc_samples);
            let responses: Vec<String> = (0..budget)
                .map(|vote| match (idx + vote) % 6 {
                    0 | 1 => format!("{truth}\nshort justification"),
                    2 => format!("Walking through the data flow.\nFinal answer: {truth}"),
                    3 => truth.to_string(),
                    4 => format!("{opposite}\nshort justification"),
                    _ => "hard to tell from this snippet alone".to_string(),
                })
                .collect();
            backend.insert(ScriptEntry {
                model: config.model_id.clone(),
                prompt_digest: prompt_digest(&prompt.text),
                responses,
            });
        }
    }

    let out_dir = tempfile::tempdir().expect("temp dir");
    let options = RunnerOptions {
        run_id: "scripted-demo".into(),
        concurrency: 4,
        cancel: None,
        generated_at: "example".into(),
        metadata: serde_json::json!({"example": "scripted_matrix_run"}),
    };
    let status = runner::run_to_dir(
        &manifest,
        &configs,
        &backend,
        &templates,
        &options,
        out_dir.path(),
    )?;
    let RunStatus::Completed { paths, cells } = status else {
        unreachable!("no cancellation configured");
    };
    println!(
        "completed {cells} cells over {} samples\n",
        manifest.samples.len()
    );

    let records = runner::execute_matrix(&manifest, &configs, &backend, &templates, &options)?;
    let summary = runner::summarize_records(&configs, &records)?;
    print!("{}", report::summary_csv_string(&summary)?);
    println!("\nbundle: {}", paths.dir.display());
    for file in [
        "samples.jsonl",
        "summary.csv",
        "dashboard.html",
        "run_metadata.json",
    ] {
        println!("  {file}");
    }
    Ok(())
}
