//! Walk a few model transcripts through the three parser modes.
//!
//! ```bash
//! cargo run -p promptaudit --example parse_transcripts
//! ```

use promptaudit::parser::{parse, ParserMode};
use promptaudit::prompt::Protocol;

const TRANSCRIPTS: &[&str] = &[
    "SAFE\nThe input is validated before use.",
    "The code is SAFE",
    "Reasoning step by step...\nFinal answer: VULNERABLE",
    "This code is not safe; the length check is missing.",
    "I think this could be vulnerable but it also looks safe.",
    "```\nVULNERABLE\n```\nfenced verdict above",
];

fn main() {
    for transcript in TRANSCRIPTS {
        println!("response: {transcript:?}");
        for mode in ParserMode::ALL {
            let outcome = parse(transcript, mode, Protocol::VerdictFirst);
            println!("  {mode:>10}: {} ({})", outcome.verdict, outcome.tier);
        }
        println!();
    }
}
