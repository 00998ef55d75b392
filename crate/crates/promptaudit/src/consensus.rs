//! Majority aggregation for self-consistency votes.
//!
//! A definite label wins only with a strict majority over the *requested*
//! sample count: UNKNOWN votes and backend failures count toward the
//! denominator but can never win. Disagreement is an abstention.

use crate::parser::{ParseOutcome, Verdict};

/// Votes collected for one sample under self-consistency.
///
/// Invariant: `votes.len() + failures == requested`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteSet {
    requested: usize,
    votes: Vec<ParseOutcome>,
    failures: usize,
}

impl VoteSet {
    /// Build a vote set; backend failures are folded in as missing votes.
    ///
    /// Panics if `votes.len() + failures != requested` or `requested == 0`.
    pub fn new(requested: usize, votes: Vec<ParseOutcome>, failures: usize) -> Self {
        assert!(requested >= 1, "requested must be at least 1");
        assert_eq!(
            votes.len() + failures,
            requested,
            "votes + failures must equal requested"
        );
        VoteSet {
            requested,
            votes,
            failures,
        }
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn votes(&self) -> &[ParseOutcome] {
        &self.votes
    }

    pub fn failures(&self) -> usize {
        self.failures
    }
}

/// Strict-majority vote.
///
/// SAFE or VULNERABLE wins iff its count strictly exceeds requested/2;
/// otherwise the result is (UNKNOWN, none). The winner's tier is taken
/// from the first vote carrying the winning label, so logs can attribute
/// the verdict to a parser layer.
pub fn majority(voteset: &VoteSet) -> ParseOutcome {
    let requested = voteset.requested();
    let count = |v: Verdict| voteset.votes().iter().filter(|o| o.verdict == v).count();

    let winner = [Verdict::Safe, Verdict::Vulnerable]
        .into_iter()
        .find(|&v| 2 * count(v) > requested);

    match winner {
        Some(label) => *voteset
            .votes()
            .iter()
            .find(|o| o.verdict == label)
            .expect("winning label must appear among the votes"),
        None => ParseOutcome::unknown(),
    }
}
