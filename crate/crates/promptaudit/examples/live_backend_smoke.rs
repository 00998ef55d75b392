//! Minimal live-backend round trip: healthcheck, one generation, parse.
//! Needs a local model server; point PROMPTAUDIT_BACKEND_URL at it and
//! PROMPTAUDIT_SMOKE_MODEL at any pulled model.
//!
//! ```bash
//! PROMPTAUDIT_BACKEND_URL=http://localhost:11434 \
//! PROMPTAUDIT_SMOKE_MODEL=mistral:latest \
//! cargo run -p promptaudit --example live_backend_smoke
//! ```

use promptaudit::corpus::{CodeSample, Label, Origin};
use promptaudit::gateway::{Backend, DecodingConfig, LiveBackend};
use promptaudit::parser::{parse, ParserMode};
use promptaudit::prompt::{Protocol, Strategy, TemplateSet};

fn main() {
    let Ok(base_url) = std::env::var("PROMPTAUDIT_BACKEND_URL") else {
        println!("PROMPTAUDIT_BACKEND_URL is not set; nothing to do.");
        println!("Start a local model server and re-run, e.g.:");
        println!("  PROMPTAUDIT_BACKEND_URL=http://localhost:11434 \\");
        println!("  PROMPTAUDIT_SMOKE_MODEL=mistral:latest \\");
        println!("  cargo run -p promptaudit --example live_backend_smoke");
        return;
    };
    let model =
        std::env::var("PROMPTAUDIT_SMOKE_MODEL").unwrap_or_else(|_| "mistral:latest".into());

    let backend = LiveBackend::new(&base_url);
    let health = backend.healthcheck(&model);
    println!("healthcheck: {}", health.diagnostic);
    if !health.available {
        std::process::exit(1);
    }

    let sample = CodeSample {
        sample_id: "SMOKE-0001/before_fix/copy.c".into(),
        cve_id: "SMOKE-0001".into(),
        year: 2024,
        language: "C".into(),
        code: "void copy(char *dst, const char *src, unsigned n) {\n    memcpy(dst, src, n);\n}"
            .into(),
        label: Label::Vulnerable,
        origin: Origin::BeforeFix,
    };
    let prompt = TemplateSet::builtin().render(&sample, Strategy::ZeroShot, Protocol::VerdictFirst);
    match backend.generate(&model, &prompt, &DecodingConfig::default(), 0) {
        Ok(record) => {
            println!(
                "\nraw completion ({} ms):\n{}",
                record.latency_ms, record.response_text
            );
            let outcome = parse(
                &record.response_text,
                ParserMode::Full,
                Protocol::VerdictFirst,
            );
            println!("\nparsed: {} via {}", outcome.verdict, outcome.tier);
        }
        Err(e) => {
            eprintln!("generation failed: {e}");
            std::process::exit(1);
        }
    }
}
