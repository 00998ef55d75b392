//! Generate a synthetic CVE-style corpus, ingest it, and take a
//! stratified subset.
//!
//! ```bash
//! cargo run -p promptaudit --example synth_and_ingest
//! ```

use promptaudit::{corpus, synth};

fn main() -> promptaudit::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = synth::generate(dir.path(), 8, 42)?;
    println!("wrote {files} files under {}", dir.path().display());

    let manifest = corpus::ingest(dir.path())?;
    println!(
        "ingested {} samples, {} rejected",
        manifest.samples.len(),
        manifest.rejected.len()
    );
    for (language, count) in &manifest.counts.per_language {
        println!("  {language}: {count}");
    }
    for sample in manifest.samples.iter().take(2) {
        println!(
            "\n{} [{} / {}]\n{}",
            sample.sample_id,
            sample.language,
            sample.label,
            sample.code.lines().take(4).collect::<Vec<_>>().join("\n")
        );
    }

    let subset = corpus::stratified_subset(&manifest, 8, 7);
    println!("\nstratified subset of 8 (seed 7):");
    for (language, count) in &subset.counts.per_language {
        println!("  {language}: {count}");
    }
    for (label, count) in &subset.counts.per_label {
        println!("  {label}: {count}");
    }
    Ok(())
}
