//! Layered verdict extraction: raw completions to SAFE / VULNERABLE / UNKNOWN.
//!
//! Three tiers, applied in order, first success wins:
//!
//! 1. **Strict** — the protocol-defined verdict line (first non-empty line
//!    for verdict-first, last for verdict-last) must be a single
//!    SAFE/VULNERABLE token after minor punctuation normalization.
//! 2. **Explicit marker** — non-empty lines scanned bottom to top against
//!    whole-line verdict phrases ("Final answer: SAFE", "The verdict is
//!    VULNERABLE", "In conclusion, the code is safe", "This code is
//!    vulnerable"). Bottom-up scanning prioritizes the committed final
//!    verdict over earlier speculation.
//! 3. **Lexical fallback** — a whole-response keyword scan with explicit
//!    negation handling; one-sided evidence yields a verdict, mixed or
//!    absent evidence yields UNKNOWN.
//!
//! The parser mode selects how many tiers are enabled: STRICT = tier 1,
//! STRUCTURED = tiers 1–2, FULL = tiers 1–3. Parsing is total: every
//! input maps to exactly one [`ParseOutcome`].

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::Protocol;

/// Which parser tiers are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParserMode {
    Strict,
    Structured,
    Full,
}

impl ParserMode {
    pub const ALL: [ParserMode; 3] = [ParserMode::Strict, ParserMode::Structured, ParserMode::Full];

    pub fn name(self) -> &'static str {
        match self {
            ParserMode::Strict => "strict",
            ParserMode::Structured => "structured",
            ParserMode::Full => "full",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        ParserMode::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown parser mode '{s}' (valid: strict, structured, full)"
                ))
            })
    }
}

impl fmt::Display for ParserMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Extracted classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Safe,
    Vulnerable,
    Unknown,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Safe => "SAFE",
            Verdict::Vulnerable => "VULNERABLE",
            Verdict::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Which parser layer produced the verdict. `None` accompanies UNKNOWN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    StrictFirstLine,
    StrictLastLine,
    ExplicitMarker,
    LexicalFallback,
    None,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::StrictFirstLine => "strict_first_line",
            Tier::StrictLastLine => "strict_last_line",
            Tier::ExplicitMarker => "explicit_marker",
            Tier::LexicalFallback => "lexical_fallback",
            Tier::None => "none",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Verdict plus the tier that produced it.
///
/// Invariant: `verdict == Unknown` iff `tier == None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub verdict: Verdict,
    pub tier: Tier,
}

impl ParseOutcome {
    pub fn unknown() -> Self {
        ParseOutcome {
            verdict: Verdict::Unknown,
            tier: Tier::None,
        }
    }

    pub fn is_definitive(&self) -> bool {
        self.verdict != Verdict::Unknown
    }
}

/// Extract the response's non-empty lines, trimmed and in order.
///
/// Lines consisting solely of Markdown code-fence markers (``` or ~~~,
/// with or without an info string) or horizontal rules (three or more
/// repeated `-`, `*`, or `_`) are treated as empty so fence noise never
/// becomes the protocol verdict line.
pub fn non_empty_lines(response: &str) -> Vec<&str> {
    response
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !is_markdown_noise(line))
        .collect()
}

fn is_markdown_noise(trimmed: &str) -> bool {
    if trimmed.starts_with("```") || trimmed.starts_with("~~~") {
        return true;
    }
    let mut chars = trimmed.chars();
    if let Some(first) = chars.next() {
        if matches!(first, '-' | '*' | '_') && trimmed.len() >= 3 {
            return chars.all(|c| c == first);
        }
    }
    false
}

/// Punctuation stripped from a candidate verdict token: `. , ! ? : ; " '`.
fn normalize_token(token: &str) -> Option<Verdict> {
    let stripped =
        token.trim_matches(|c: char| matches!(c, '.' | ',' | '!' | '?' | ':' | ';' | '"' | '\''));
    if stripped.eq_ignore_ascii_case("safe") {
        Some(Verdict::Safe)
    } else if stripped.eq_ignore_ascii_case("vulnerable") {
        Some(Verdict::Vulnerable)
    } else {
        None
    }
}

/// Tier 1: inspect only the protocol-defined verdict location.
///
/// Succeeds iff that line is a single token that normalizes to SAFE or
/// VULNERABLE; a multi-token line such as "The code is SAFE" fails here.
pub fn strict_line_label(lines: &[&str], protocol: Protocol) -> ParseOutcome {
    let target = match protocol {
        Protocol::VerdictFirst => lines.first(),
        Protocol::VerdictLast => lines.last(),
    };
    let Some(target) = target else {
        return ParseOutcome::unknown();
    };
    let mut parts = target.split_whitespace();
    let (Some(token), None) = (parts.next(), parts.next()) else {
        return ParseOutcome::unknown();
    };
    match normalize_token(token) {
        Some(verdict) => ParseOutcome {
            verdict,
            tier: match protocol {
                Protocol::VerdictFirst => Tier::StrictFirstLine,
                Protocol::VerdictLast => Tier::StrictLastLine,
            },
        },
        None => ParseOutcome::unknown(),
    }
}

// Whole-line verdict phrases, tried in order per line. The verdict word is
// the single capture group.
static EXPLICIT_VERDICT_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"(?i)^(?:final answer|answer|classification|verdict|label|conclusion)\s*[:\-]?\s*(?:is\s+)?(safe|vulnerable)\s*[.!]?\s*$",
        r"(?i)^(?:the\s+)?(?:final\s+answer|answer|classification|verdict)\s+is\s+(safe|vulnerable)\s*[.!]?\s*$",
        r"(?i)^(?:therefore|thus|overall|ultimately|in conclusion),?\s+(?:the\s+code\s+is\s+)?(safe|vulnerable)\s*[.!]?\s*$",
        r"(?i)^(?:the\s+code|this\s+code)\s+is\s+(safe|vulnerable)\s*[.!]?\s*$",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("explicit verdict pattern must compile"))
    .collect()
});

/// Tier 2: scan non-empty lines bottom to top for explicit verdict markers.
pub fn explicit_marker_label(lines: &[&str]) -> ParseOutcome {
    for line in lines.iter().rev() {
        for pattern in EXPLICIT_VERDICT_PATTERNS.iter() {
            if let Some(caps) = pattern.captures(line) {
                let verdict = if caps[1].eq_ignore_ascii_case("safe") {
                    Verdict::Safe
                } else {
                    Verdict::Vulnerable
                };
                return ParseOutcome {
                    verdict,
                    tier: Tier::ExplicitMarker,
                };
            }
        }
    }
    ParseOutcome::unknown()
}

static NOT_SAFE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bnot\s+safe\b").unwrap());
static UNSAFE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bunsafe\b").unwrap());
static VULNERABLE_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bvulnerable\b").unwrap());
static VULNERABILITY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bvulnerabilit(?:y|ies)\b").unwrap());
static EXPLOITABLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bexploitable\b").unwrap());
static AT_RISK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bat\s+risk\b").unwrap());
static SAFE_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bsafe\b").unwrap());
static SECURE_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bsecure\b").unwrap());
static NOT_VULNERABLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bnot\s+vulnerable\b").unwrap());
static NO_VULNERABILITY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bno\s+(?:known\s+)?vulnerabilit(?:y|ies)\b").unwrap());

fn spans(re: &Regex, text: &str) -> Vec<(usize, usize)> {
    re.find_iter(text).map(|m| (m.start(), m.end())).collect()
}

/// True if some match of `re` lies outside every consuming span.
fn any_unconsumed(re: &Regex, text: &str, consuming: &[(usize, usize)]) -> bool {
    re.find_iter(text).any(|m| {
        !consuming
            .iter()
            .any(|&(s, e)| m.start() >= s && m.end() <= e)
    })
}

/// Tier 3: whole-response contextual keyword scan.
///
/// Vulnerable cues: "not safe", "unsafe", "vulnerable", "vulnerability/ies",
/// "exploitable", "at risk". Safe cues: "safe", "secure", "not vulnerable",
/// "no (known) vulnerability/ies". Occurrences of "safe" inside "not safe"
/// (and "vulnerable"/"vulnerability" inside their negated forms) are
/// consumed by the negation and do not count toward the positive cue.
/// One-sided evidence yields that verdict; mixed or absent evidence yields
/// UNKNOWN.
pub fn lexical_fallback_label(response: &str) -> ParseOutcome {
    let lowered = response.to_lowercase();

    let not_safe = spans(&NOT_SAFE, &lowered);
    let not_vulnerable = spans(&NOT_VULNERABLE, &lowered);
    let no_vulnerability = spans(&NO_VULNERABILITY, &lowered);

    let vulnerable_signal = !not_safe.is_empty()
        || UNSAFE.is_match(&lowered)
        || any_unconsumed(&VULNERABLE_WORD, &lowered, &not_vulnerable)
        || any_unconsumed(&VULNERABILITY, &lowered, &no_vulnerability)
        || EXPLOITABLE.is_match(&lowered)
        || AT_RISK.is_match(&lowered);

    let positive_safe = any_unconsumed(&SAFE_WORD, &lowered, &not_safe)
        || SECURE_WORD.is_match(&lowered)
        || !not_vulnerable.is_empty()
        || !no_vulnerability.is_empty();

    let verdict = match (vulnerable_signal, positive_safe) {
        (true, false) => Verdict::Vulnerable,
        (false, true) => Verdict::Safe,
        _ => return ParseOutcome::unknown(),
    };
    ParseOutcome {
        verdict,
        tier: Tier::LexicalFallback,
    }
}

/// Apply the enabled tiers in order and return the first success,
/// otherwise (UNKNOWN, none). Total: never fails, empty input allowed.
pub fn parse(response: &str, mode: ParserMode, protocol: Protocol) -> ParseOutcome {
    let lines = non_empty_lines(response);

    let strict = strict_line_label(&lines, protocol);
    if strict.is_definitive() {
        return strict;
    }
    if mode == ParserMode::Strict {
        return ParseOutcome::unknown();
    }

    let explicit = explicit_marker_label(&lines);
    if explicit.is_definitive() {
        return explicit;
    }
    if mode == ParserMode::Structured {
        return ParseOutcome::unknown();
    }

    lexical_fallback_label(response)
}

#[cfg(test)]
mod tests {
    use super::*;

    const VF: Protocol = Protocol::VerdictFirst;
    const VL: Protocol = Protocol::VerdictLast;

    fn outcome(v: Verdict, t: Tier) -> ParseOutcome {
        ParseOutcome {
            verdict: v,
            tier: t,
        }
    }

    #[test]
    fn strict_first_line_single_token() {
        let got = parse(
            "SAFE\nThe input is validated before use.",
            ParserMode::Strict,
            VF,
        );
        assert_eq!(got, outcome(Verdict::Safe, Tier::StrictFirstLine));
    }

    #[test]
    fn strict_normalizes_minor_punctuation() {
        assert_eq!(
            strict_line_label(&["VULNERABLE."], VF),
            outcome(Verdict::Vulnerable, Tier::StrictFirstLine)
        );
        assert_eq!(
            strict_line_label(&["\"safe\","], VF),
            outcome(Verdict::Safe, Tier::StrictFirstLine)
        );
    }

    #[test]
    fn strict_rejects_multi_token_lines() {
        assert_eq!(
            strict_line_label(&["The code is SAFE"], VF),
            ParseOutcome::unknown()
        );
    }

    #[test]
    fn strict_last_line_under_verdict_last() {
        assert_eq!(
            strict_line_label(&["analysis...", "safe"], VL),
            outcome(Verdict::Safe, Tier::StrictLastLine)
        );
    }

    #[test]
    fn explicit_marker_final_answer() {
        let got = parse(
            "Reasoning...\nFinal answer: VULNERABLE",
            ParserMode::Structured,
            VF,
        );
        assert_eq!(got, outcome(Verdict::Vulnerable, Tier::ExplicitMarker));
    }

    #[test]
    fn explicit_marker_families() {
        for line in [
            "Final answer: SAFE",
            "answer safe",
            "Classification - SAFE",
            "Verdict: safe.",
            "Label: SAFE!",
            "conclusion is safe",
            "The answer is safe",
            "The final answer is SAFE",
            "Therefore, the code is safe",
            "thus safe",
            "Overall, safe.",
            "Ultimately the code is safe",
            "In conclusion, safe",
            "The code is SAFE",
            "This code is safe.",
        ] {
            assert_eq!(
                explicit_marker_label(&[line]),
                outcome(Verdict::Safe, Tier::ExplicitMarker),
                "line: {line:?}"
            );
        }
    }

    #[test]
    fn explicit_marker_scans_bottom_up_past_notes() {
        let lines = ["Some analysis", "Verdict: SAFE", "Note: review recommended"];
        assert_eq!(
            explicit_marker_label(&lines),
            outcome(Verdict::Safe, Tier::ExplicitMarker)
        );
        // Bottom-up means the later marker wins when two are present.
        let lines = ["Verdict: SAFE", "Final answer: VULNERABLE"];
        assert_eq!(explicit_marker_label(&lines).verdict, Verdict::Vulnerable);
    }

    #[test]
    fn explicit_marker_requires_whole_line_match() {
        assert_eq!(
            explicit_marker_label(&["The weather is nice"]),
            ParseOutcome::unknown()
        );
        assert_eq!(
            explicit_marker_label(&["The code is not safe; the length check is missing."]),
            ParseOutcome::unknown()
        );
    }

    #[test]
    fn lexical_negation_consumes_positive_substring() {
        let got = parse(
            "This code is not safe; the length check is missing.",
            ParserMode::Full,
            VF,
        );
        assert_eq!(got, outcome(Verdict::Vulnerable, Tier::LexicalFallback));

        let got = lexical_fallback_label("The function is not vulnerable.");
        assert_eq!(got, outcome(Verdict::Safe, Tier::LexicalFallback));
    }

    #[test]
    fn lexical_safe_cues() {
        let got =
            lexical_fallback_label("No known vulnerabilities were found; the code is secure.");
        assert_eq!(got, outcome(Verdict::Safe, Tier::LexicalFallback));
        let got = lexical_fallback_label("no vulnerabilities here");
        assert_eq!(got.verdict, Verdict::Safe);
    }

    #[test]
    fn lexical_vulnerable_cues() {
        let got = lexical_fallback_label("The buffer copy is exploitable.");
        assert_eq!(got, outcome(Verdict::Vulnerable, Tier::LexicalFallback));
        for text in [
            "this is unsafe",
            "the data is at risk",
            "a vulnerability exists",
        ] {
            assert_eq!(
                lexical_fallback_label(text).verdict,
                Verdict::Vulnerable,
                "text: {text:?}"
            );
        }
    }

    #[test]
    fn lexical_mixed_or_absent_evidence_is_unknown() {
        let got = parse(
            "I think this could be vulnerable but it also looks safe.",
            ParserMode::Full,
            VF,
        );
        assert_eq!(got, ParseOutcome::unknown());
        assert_eq!(lexical_fallback_label(""), ParseOutcome::unknown());
        assert_eq!(
            lexical_fallback_label("nothing conclusive here"),
            ParseOutcome::unknown()
        );
    }

    #[test]
    fn unsafe_does_not_count_as_safe() {
        // \bsafe\b must not fire inside the word "unsafe".
        let got = lexical_fallback_label("this pointer cast is unsafe");
        assert_eq!(got.verdict, Verdict::Vulnerable);
    }

    #[test]
    fn fence_noise_is_skipped_for_line_extraction() {
        let text = "```\nSAFE\n```\nexplanation";
        assert_eq!(non_empty_lines(text), vec!["SAFE", "explanation"]);
        let got = parse(text, ParserMode::Strict, VF);
        assert_eq!(got, outcome(Verdict::Safe, Tier::StrictFirstLine));

        let text = "---\n***\n```rust\nvulnerable\n```";
        let got = parse(text, ParserMode::Strict, VL);
        assert_eq!(got, outcome(Verdict::Vulnerable, Tier::StrictLastLine));
    }

    #[test]
    fn blank_padding_never_changes_the_outcome() {
        for mode in ParserMode::ALL {
            for protocol in [VF, VL] {
                for text in ["SAFE\nbecause reasons", "Final answer: VULNERABLE", "word"] {
                    let padded = format!("\n\n  \n{text}\n \n\n");
                    assert_eq!(
                        parse(text, mode, protocol),
                        parse(&padded, mode, protocol),
                        "mode={mode} protocol={protocol} text={text:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn parse_is_total_on_odd_inputs() {
        for text in ["", "\n\n", "```", "safe vulnerable", "🦀", "not  safe"] {
            for mode in ParserMode::ALL {
                let _ = parse(text, mode, VF);
                let _ = parse(text, mode, VL);
            }
        }
    }

    #[test]
    fn case_insensitive_at_verdict_level() {
        for text in ["safe", "Reasoning\nfinal answer: vulnerable"] {
            let upper = text.to_uppercase();
            for mode in [ParserMode::Strict, ParserMode::Structured] {
                assert_eq!(
                    parse(text, mode, VF).verdict,
                    parse(&upper, mode, VF).verdict
                );
            }
        }
    }

    #[test]
    fn strict_success_is_never_overridden_by_higher_modes() {
        let text = "VULNERABLE\nBut honestly it looks safe and secure to me.";
        let strict = parse(text, ParserMode::Strict, VF);
        assert_eq!(strict.verdict, Verdict::Vulnerable);
        assert_eq!(parse(text, ParserMode::Structured, VF), strict);
        assert_eq!(parse(text, ParserMode::Full, VF), strict);
    }
}
