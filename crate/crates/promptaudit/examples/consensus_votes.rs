//! Strict-majority vote aggregation, including the abstention cases.
//!
//! ```bash
//! cargo run -p promptaudit --example consensus_votes
//! ```

use promptaudit::consensus::{majority, VoteSet};
use promptaudit::parser::{ParseOutcome, Tier, Verdict};

fn vote(v: Verdict) -> ParseOutcome {
    match v {
        Verdict::Unknown => ParseOutcome::unknown(),
        other => ParseOutcome {
            verdict: other,
            tier: Tier::StrictFirstLine,
        },
    }
}

fn main() {
    use Verdict::{Safe as S, Unknown as U, Vulnerable as V};
    let cases: &[(&str, Vec<Verdict>, usize)] = &[
        ("clear majority", vec![V, V, V, S, U], 0),
        ("split vote", vec![V, V, S, S, U], 0),
        ("unanimous", vec![S, S, S, S, S], 0),
        ("unknowns never win", vec![U, U, U, V, V], 0),
        ("two backend failures", vec![V, V, V], 2),
    ];
    for (label, verdicts, failures) in cases {
        let requested = verdicts.len() + failures;
        let votes = verdicts.iter().copied().map(vote).collect();
        let outcome = majority(&VoteSet::new(requested, votes, *failures));
        println!(
            "{label:>22}: votes {verdicts:?} + {failures} failure(s) over {requested} requested -> {}",
            outcome.verdict
        );
    }
}
