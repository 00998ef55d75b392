// Expected-value tables are wide tuples on purpose; keep them flat.
#![allow(clippy::type_complexity)]

//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 1–2 check the metric engine against the bundled reference
//! tables (25 confusion rows and the published per-cell and aggregate
//! values derived from them). Six of the published numbers are internally
//! inconsistent in the upstream reference tables themselves; those six are
//! pinned in `reference_table_errata_are_documented`, which proves the
//! inconsistency arithmetically instead of asserting impossible values.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use promptaudit::consensus::{majority, VoteSet};
use promptaudit::corpus::{self, CorpusManifest, IngestOptions};
use promptaudit::gateway::{
    prompt_digest, Backend, DecodingConfig, GenerationRecord, ScriptEntry, ScriptedBackend,
};
use promptaudit::metrics::{compute_metrics, summarize, ConfusionTally, MetricsRow};
use promptaudit::parser::{parse, ParseOutcome, ParserMode, Tier, Verdict};
use promptaudit::prompt::{sample_budget, Protocol, RenderedPrompt, Strategy, TemplateSet};
use promptaudit::report;
use promptaudit::rng::SplitMix64;
use promptaudit::runner::{self, RunConfiguration, RunStatus, RunnerOptions};
use promptaudit::synth;

const TOL: f64 = 0.001;
const TOL_PP: f64 = 0.01;

const REFERENCE_CSV: &str = include_str!("../fixtures/reference_confusion.csv");
const PARSER_GOLDENS: &str = include_str!("../fixtures/parser_goldens.jsonl");

fn reference_rows() -> Vec<(String, String, ConfusionTally)> {
    report::read_confusion_csv(REFERENCE_CSV).expect("bundled reference fixture must parse")
}

fn assert_close(label: &str, got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol,
        "{label}: got {got:.6}, want {want:.6} (tol {tol})"
    );
}

/// Published per-cell values: accuracy, precision, recall, F1,
/// effective F1, abstention (percent). `None` marks the two cells whose
/// published values are underivable from the reference confusion row;
/// they are pinned in the errata test instead.
#[rustfmt::skip]
const EXPECTED_CELLS: &[(&str, &str, f64, f64, f64, f64, Option<f64>, Option<f64>)] = &[
    ("DeepSeek",  "zero_shot",        0.495, 0.497, 0.224, 0.308, Some(0.305), Some(1.25)),
    ("DeepSeek",  "few_shot",         0.476, 0.518, 0.497, 0.507, Some(0.435), Some(14.32)),
    ("DeepSeek",  "cot",              0.492, 0.488, 0.227, 0.310, Some(0.307), Some(1.12)),
    ("DeepSeek",  "adaptive_cot",     0.493, 0.487, 0.226, 0.309, Some(0.307), Some(0.54)),
    ("DeepSeek",  "self_consistency", 0.298, 0.531, 0.297, 0.381, Some(0.149), Some(60.96)),
    ("Mistral",   "zero_shot",        0.497, 0.499, 0.438, 0.466, Some(0.463), Some(0.71)),
    ("Mistral",   "few_shot",         0.508, 0.517, 0.359, 0.424, Some(0.417), Some(1.51)),
    ("Mistral",   "cot",              0.515, 0.517, 0.423, 0.465, Some(0.465), Some(0.08)),
    ("Mistral",   "adaptive_cot",     0.509, 0.517, 0.280, 0.363, Some(0.362), Some(0.25)),
    ("Mistral",   "self_consistency", 0.342, 0.514, 0.375, 0.434, Some(0.212), Some(51.07)),
    ("Gemma",     "zero_shot",        0.505, 0.545, 0.060, 0.109, Some(0.109), Some(0.00)),
    ("Gemma",     "few_shot",         0.514, 0.646, 0.063, 0.115, Some(0.115), Some(0.00)),
    ("Gemma",     "cot",              0.490, 0.488, 0.420, 0.451, Some(0.451), Some(0.00)),
    ("Gemma",     "adaptive_cot",     0.499, 0.493, 0.057, 0.102, Some(0.102), Some(0.00)),
    ("Gemma",     "self_consistency", 0.394, 0.513, 0.486, 0.499, Some(0.304), Some(39.15)),
    ("Falcon",    "zero_shot",        0.407, 0.504, 0.480, 0.492, Some(0.336), Some(31.66)),
    ("Falcon",    "few_shot",         0.426, 0.507, 0.540, 0.523, Some(0.377), Some(27.99)),
    ("Falcon",    "cot",              0.430, 0.508, 0.541, 0.524, Some(0.380), Some(27.49)),
    ("Falcon",    "adaptive_cot",     0.333, 0.492, 0.223, 0.307, Some(0.159), Some(48.19)),
    ("Falcon",    "self_consistency", 0.202, 0.517, 0.216, 0.304, Some(0.073), Some(75.96)),
    ("CodeLlama", "zero_shot",        0.472, 0.492, 0.865, 0.627, Some(0.593), Some(5.47)),
    ("CodeLlama", "few_shot",         0.455, 0.492, 0.704, 0.579, Some(0.510), Some(11.90)),
    ("CodeLlama", "cot",              0.486, 0.495, 0.685, 0.574, None,        None),
    ("CodeLlama", "adaptive_cot",     0.484, 0.492, 0.279, 0.356, Some(0.340), Some(4.48)),
    ("CodeLlama", "self_consistency", 0.330, 0.491, 0.476, 0.484, Some(0.247), Some(49.00)),
];

#[test]
fn criterion_01_metric_oracle_reproduces_reference_tables() {
    let started = Instant::now();
    let rows = reference_rows();
    assert_eq!(rows.len(), 25);

    let mut checked = 0usize;
    for ((model, strategy, tally), expected) in rows.iter().zip(EXPECTED_CELLS) {
        assert_eq!(
            (model.as_str(), strategy.as_str()),
            (expected.0, expected.1)
        );
        let m = compute_metrics(tally).unwrap();
        let cell = format!("{model}/{strategy}");
        assert_close(
            &format!("{cell} accuracy"),
            m.accuracy.unwrap(),
            expected.2,
            TOL,
        );
        assert_close(
            &format!("{cell} precision"),
            m.precision.unwrap(),
            expected.3,
            TOL,
        );
        assert_close(
            &format!("{cell} recall"),
            m.recall.unwrap(),
            expected.4,
            TOL,
        );
        assert_close(&format!("{cell} f1"), m.f1.unwrap(), expected.5, TOL);
        checked += 4;
        if let Some(eff) = expected.6 {
            assert_close(
                &format!("{cell} effective_f1"),
                m.effective_f1.unwrap(),
                eff,
                TOL,
            );
            checked += 1;
        }
        if let Some(abst) = expected.7 {
            assert_close(
                &format!("{cell} abstention"),
                m.abstention_rate * 100.0,
                abst,
                TOL_PP,
            );
            checked += 1;
        }
    }

    // Spot anchors.
    let deepseek_zs = compute_metrics(&rows[0].2).unwrap();
    assert_close("anchor accuracy", deepseek_zs.accuracy.unwrap(), 0.495, TOL);
    assert_close("anchor recall", deepseek_zs.recall.unwrap(), 0.224, TOL);
    let mistral_sc = compute_metrics(&rows[9].2).unwrap();
    assert_close(
        "anchor effective_f1",
        mistral_sc.effective_f1.unwrap(),
        0.212,
        TOL,
    );
    assert_close(
        "anchor abstention",
        mistral_sc.abstention_rate * 100.0,
        51.07,
        TOL_PP,
    );
    let falcon_sc = compute_metrics(&rows[19].2).unwrap();
    assert_close(
        "anchor abstention",
        falcon_sc.abstention_rate * 100.0,
        75.96,
        TOL_PP,
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "oracle took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 (metric oracle, full reference reproduction): PASS — {checked} published values within ±0.001/±0.01pp in {elapsed:?} (6 upstream-inconsistent values pinned by the errata test)"
    );
}

fn metrics_by<'a>(
    rows: &'a [(String, String, ConfusionTally)],
    pick: impl Fn(&str, &str) -> bool + 'a,
) -> Vec<MetricsRow> {
    rows.iter()
        .filter(|(m, s, _)| pick(m, s))
        .map(|(_, _, t)| compute_metrics(t).unwrap())
        .collect()
}

/// Per-model aggregates: mean F1, mean eff-F1, F1 range, eff-F1 range,
/// mean abstention (pp), abstention range (pp).
#[rustfmt::skip]
const EXPECTED_MODEL_AGGREGATES: &[(&str, f64, f64, f64, f64, Option<f64>, f64)] = &[
    ("DeepSeek",  0.363, 0.301, 0.199, 0.286, Some(15.64), 60.42),
    ("Mistral",   0.430, 0.384, 0.103, 0.253, Some(10.72), 50.99),
    ("Gemma",     0.255, 0.216, 0.398, 0.349, Some(7.83),  39.15),
    ("Falcon",    0.430, 0.265, 0.219, 0.307, Some(42.26), 48.47),
    ("CodeLlama", 0.524, 0.444, 0.271, 0.346, None,        44.52),
];

/// Per-strategy aggregates: mean F1, mean eff-F1, F1 range, eff-F1 range,
/// mean abstention (pp), abstention range (pp).
#[rustfmt::skip]
const EXPECTED_STRATEGY_AGGREGATES: &[(&str, f64, f64, f64, Option<f64>, Option<f64>, f64)] = &[
    ("zero_shot",        0.401, 0.361, 0.519, Some(0.484), Some(7.82),  31.66),
    ("few_shot",         0.430, 0.371, 0.464, Some(0.395), Some(11.15), 27.99),
    ("cot",              0.465, 0.427, 0.265, None,        None,        27.49),
    ("adaptive_cot",     0.287, 0.254, 0.261, None,        Some(10.69), 48.19),
    ("self_consistency", 0.420, 0.197, 0.195, Some(0.231), Some(55.23), 36.81),
];

#[test]
fn criterion_02_aggregate_oracle_reproduces_mean_and_range_rows() {
    let rows = reference_rows();

    for (model, mean_f1, mean_eff, range_f1, range_eff, mean_abst, range_abst) in
        EXPECTED_MODEL_AGGREGATES
    {
        let group = metrics_by(&rows, |m, _| m == *model);
        assert_eq!(group.len(), 5);
        let s = summarize(&group).unwrap();
        assert_close(
            &format!("{model} mean f1"),
            s.f1.mean.unwrap(),
            *mean_f1,
            TOL,
        );
        assert_close(
            &format!("{model} mean eff"),
            s.effective_f1.mean.unwrap(),
            *mean_eff,
            TOL,
        );
        assert_close(
            &format!("{model} range f1"),
            s.f1.range.unwrap(),
            *range_f1,
            TOL,
        );
        assert_close(
            &format!("{model} range eff"),
            s.effective_f1.range.unwrap(),
            *range_eff,
            TOL,
        );
        if let Some(want) = mean_abst {
            assert_close(
                &format!("{model} mean abstention"),
                s.abstention_rate.mean.unwrap() * 100.0,
                *want,
                TOL_PP,
            );
        }
        assert_close(
            &format!("{model} range abstention"),
            s.abstention_rate.range.unwrap() * 100.0,
            *range_abst,
            TOL_PP,
        );
    }

    for (strategy, mean_f1, mean_eff, range_f1, range_eff, mean_abst, range_abst) in
        EXPECTED_STRATEGY_AGGREGATES
    {
        let group = metrics_by(&rows, |_, s| s == *strategy);
        assert_eq!(group.len(), 5);
        let s = summarize(&group).unwrap();
        assert_close(
            &format!("{strategy} mean f1"),
            s.f1.mean.unwrap(),
            *mean_f1,
            TOL,
        );
        assert_close(
            &format!("{strategy} mean eff"),
            s.effective_f1.mean.unwrap(),
            *mean_eff,
            TOL,
        );
        assert_close(
            &format!("{strategy} range f1"),
            s.f1.range.unwrap(),
            *range_f1,
            TOL,
        );
        if let Some(want) = range_eff {
            assert_close(
                &format!("{strategy} range eff"),
                s.effective_f1.range.unwrap(),
                *want,
                TOL,
            );
        }
        if let Some(want) = mean_abst {
            assert_close(
                &format!("{strategy} mean abstention"),
                s.abstention_rate.mean.unwrap() * 100.0,
                *want,
                TOL_PP,
            );
        }
        assert_close(
            &format!("{strategy} range abstention"),
            s.abstention_rate.range.unwrap() * 100.0,
            *range_abst,
            TOL_PP,
        );
    }

    // Named anchors: Mistral F1 range, Gemma F1 range, S-C mean abstention.
    let mistral = summarize(&metrics_by(&rows, |m, _| m == "Mistral")).unwrap();
    assert_close("Mistral f1 range", mistral.f1.range.unwrap(), 0.103, TOL);
    let gemma = summarize(&metrics_by(&rows, |m, _| m == "Gemma")).unwrap();
    assert_close("Gemma f1 range", gemma.f1.range.unwrap(), 0.398, TOL);
    let sc = summarize(&metrics_by(&rows, |_, s| s == "self_consistency")).unwrap();
    assert_close(
        "S-C mean abstention",
        sc.abstention_rate.mean.unwrap() * 100.0,
        55.23,
        TOL_PP,
    );

    println!("ACCEPTANCE 2 (aggregate oracle, mean/range rows): PASS — 56 published aggregates within ±0.001/±0.01pp (4 upstream-inconsistent values pinned by the errata test)");
}

/// The six published values that cannot be derived from the published
/// confusion rows, each proven inconsistent and re-derived here.
#[test]
fn reference_table_errata_are_documented() {
    let rows = reference_rows();
    let codellama_cot = rows
        .iter()
        .find(|(m, s, _)| m == "CodeLlama" && s == "cot")
        .map(|(_, _, t)| *t)
        .unwrap();

    // The row sums to 5892, not the 6074 samples every other row accounts
    // for, so the row-internal abstention (Inc+UnFN)/total differs from
    // the published 7.70%, which instead matches a 6074 denominator.
    assert_eq!(codellama_cot.total(), 5892);
    let m = compute_metrics(&codellama_cot).unwrap();
    let derived_abst = m.abstention_rate * 100.0;
    assert_close("derived abstention", derived_abst, 7.94, TOL_PP);
    assert!((derived_abst - 7.70).abs() > TOL_PP);
    let published_denominator_abst =
        (codellama_cot.incorrect + codellama_cot.unfn) as f64 / 6074.0 * 100.0;
    assert_close(
        "published abstention, 6074 denominator",
        published_denominator_abst,
        7.70,
        TOL_PP,
    );

    // Effective F1 inherits the same denominator slip: published 0.530 is
    // f1 × (1 − 468/6074); the row-internal value is 0.529.
    let derived_eff = m.effective_f1.unwrap();
    assert_close("derived effective f1", derived_eff, 0.5289, 0.0005);
    assert!((derived_eff - 0.530).abs() > TOL);
    let published_variant = m.f1.unwrap() * (1.0 - 468.0 / 6074.0);
    assert_close(
        "published effective f1 variant",
        published_variant,
        0.530,
        TOL,
    );

    // Two aggregates are means over that cell and shift with it:
    // CodeLlama mean abstention (published 15.71, derived 15.76) and the
    // cot-column mean abstention (published 7.28, derived 7.33).
    let codellama = summarize(&metrics_by(&rows, |m, _| m == "CodeLlama")).unwrap();
    let derived_mean = codellama.abstention_rate.mean.unwrap() * 100.0;
    assert_close(
        "CodeLlama mean abstention (derived)",
        derived_mean,
        15.76,
        TOL_PP,
    );
    assert!((derived_mean - 15.71).abs() > TOL_PP);

    let cot = summarize(&metrics_by(&rows, |_, s| s == "cot")).unwrap();
    let derived_mean = cot.abstention_rate.mean.unwrap() * 100.0;
    assert_close("cot mean abstention (derived)", derived_mean, 7.33, TOL_PP);
    assert!((derived_mean - 7.28).abs() > TOL_PP);

    // Two published range cells disagree with the published per-cell
    // values themselves (0.530−0.307 = 0.223 ≠ 0.228 and
    // 0.362−0.102 = 0.260 ≠ 0.258); the derived ranges are asserted.
    let derived_range = cot.effective_f1.range.unwrap();
    assert_close("cot eff range (derived)", derived_range, 0.2224, 0.0005);
    assert!((derived_range - 0.228).abs() > TOL);

    let acot = summarize(&metrics_by(&rows, |_, s| s == "adaptive_cot")).unwrap();
    let derived_range = acot.effective_f1.range.unwrap();
    assert_close(
        "adaptive_cot eff range (derived)",
        derived_range,
        0.2605,
        0.0005,
    );
    assert!((derived_range - 0.258).abs() > TOL);

    println!(
        "ERRATA: PASS — all 6 underivable published values proven inconsistent and re-derived"
    );
}

#[derive(serde::Deserialize)]
struct Golden {
    name: String,
    mode: String,
    protocol: String,
    response: String,
    verdict: String,
    tier: String,
}

#[test]
fn criterion_03_parser_conformance_against_goldens() {
    let started = Instant::now();
    let mut count = 0usize;
    let mut cells = std::collections::BTreeSet::new();
    for line in PARSER_GOLDENS.lines().filter(|l| !l.trim().is_empty()) {
        let golden: Golden = serde_json::from_str(line).expect("golden corpus line must parse");
        let mode = ParserMode::from_name(&golden.mode).unwrap();
        let protocol = Protocol::from_name(&golden.protocol).unwrap();
        let got = parse(&golden.response, mode, protocol);
        assert_eq!(
            got.verdict.name(),
            golden.verdict,
            "golden '{}' verdict mismatch (response {:?})",
            golden.name,
            golden.response
        );
        assert_eq!(
            got.tier.name(),
            golden.tier,
            "golden '{}' tier mismatch (response {:?})",
            golden.name,
            golden.response
        );
        cells.insert((
            golden.mode.clone(),
            golden.protocol.clone(),
            golden.tier.clone(),
        ));
        count += 1;
    }
    assert!(count >= 60, "golden corpus has only {count} transcripts");

    // Every reachable mode × protocol × tier cell is exercised.
    for protocol in ["verdict_first", "verdict_last"] {
        let strict_tier = if protocol == "verdict_first" {
            "strict_first_line"
        } else {
            "strict_last_line"
        };
        for (mode, tiers) in [
            ("strict", vec![strict_tier, "none"]),
            ("structured", vec![strict_tier, "explicit_marker", "none"]),
            (
                "full",
                vec![strict_tier, "explicit_marker", "lexical_fallback", "none"],
            ),
        ] {
            for tier in tiers {
                assert!(
                    cells.contains(&(mode.to_string(), protocol.to_string(), tier.to_string())),
                    "no golden covers {mode} × {protocol} × {tier}"
                );
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "conformance took {elapsed:?}");
    println!(
        "ACCEPTANCE 3 (parser conformance): PASS — {count} goldens, all 18 mode×protocol×tier cells, 100% agreement in {elapsed:?}"
    );
}

/// Fragment pool for randomized transcripts: verdict tokens, markers,
/// lexical cues, fences, and noise in realistic mixtures.
const FRAGMENTS: &[&str] = &[
    "SAFE",
    "vulnerable.",
    "VULNERABLE!",
    "safe",
    "Safe,",
    "Final answer: SAFE",
    "final answer: vulnerable",
    "Verdict: VULNERABLE",
    "the code is safe",
    "In conclusion, the code is vulnerable.",
    "The answer is SAFE",
    "this is unsafe",
    "no known vulnerabilities found",
    "the call is exploitable",
    "it is not safe",
    "it is not vulnerable",
    "everything looks secure",
    "data is at risk",
    "the parser reads the input",
    "```",
    "---",
    "",
    "   ",
    "Note: review recommended",
    "The weather is nice",
    "**SAFE**",
];

#[test]
fn criterion_04_tier_monotonicity_over_randomized_transcripts() {
    let mut rng = SplitMix64::new(0xC0DE);
    let mut strict_hits = 0usize;
    for case in 0..10_000 {
        let lines = rng.below(7) as usize;
        let mut transcript = String::new();
        for _ in 0..lines {
            transcript.push_str(FRAGMENTS[rng.below(FRAGMENTS.len() as u64) as usize]);
            transcript.push('\n');
        }
        let protocol = if rng.below(2) == 0 {
            Protocol::VerdictFirst
        } else {
            Protocol::VerdictLast
        };

        let strict = parse(&transcript, ParserMode::Strict, protocol);
        let structured = parse(&transcript, ParserMode::Structured, protocol);
        let full = parse(&transcript, ParserMode::Full, protocol);

        if strict.verdict != Verdict::Unknown {
            strict_hits += 1;
            assert_eq!(
                structured, strict,
                "case {case}: STRUCTURED overrode STRICT on {transcript:?}"
            );
            assert_eq!(
                full, strict,
                "case {case}: FULL overrode STRICT on {transcript:?}"
            );
        }
        if structured.verdict != Verdict::Unknown {
            assert_eq!(
                full, structured,
                "case {case}: FULL overrode STRUCTURED on {transcript:?}"
            );
            if structured != strict {
                assert_eq!(structured.tier, Tier::ExplicitMarker);
            }
        }
        if full.verdict != Verdict::Unknown && full != structured {
            assert_eq!(full.tier, Tier::LexicalFallback);
        }
    }
    assert!(
        strict_hits > 100,
        "generator never exercised tier 1 ({strict_hits})"
    );
    println!("ACCEPTANCE 4 (tier monotonicity): PASS — 10000 randomized transcripts, no override ({strict_hits} strict hits)");
}

#[test]
fn criterion_05_consensus_matches_brute_force_enumeration() {
    let verdicts = [Verdict::Safe, Verdict::Vulnerable, Verdict::Unknown];
    let mut cases = 0usize;
    for requested in [1usize, 3, 5] {
        let total = 3usize.pow(requested as u32);
        for code in 0..total {
            let mut c = code;
            let mut votes = Vec::with_capacity(requested);
            for _ in 0..requested {
                votes.push(verdicts[c % 3]);
                c /= 3;
            }

            // Independent oracle: strict majority over the requested count.
            let safe = votes.iter().filter(|v| **v == Verdict::Safe).count();
            let vulnerable = votes.iter().filter(|v| **v == Verdict::Vulnerable).count();
            let expected = if 2 * safe > requested {
                Verdict::Safe
            } else if 2 * vulnerable > requested {
                Verdict::Vulnerable
            } else {
                Verdict::Unknown
            };

            let outcomes: Vec<ParseOutcome> = votes
                .iter()
                .map(|v| match v {
                    Verdict::Unknown => ParseOutcome::unknown(),
                    other => ParseOutcome {
                        verdict: *other,
                        tier: Tier::StrictFirstLine,
                    },
                })
                .collect();
            let got = majority(&VoteSet::new(requested, outcomes, 0));
            assert_eq!(
                got.verdict, expected,
                "requested {requested}, votes {votes:?}"
            );
            if expected == Verdict::Unknown {
                assert_eq!(got.tier, Tier::None);
            }
            cases += 1;
        }
    }
    assert_eq!(cases, 3 + 27 + 243);

    // Backend failures fold in as missing votes and count in the denominator.
    let two_votes = vec![
        ParseOutcome {
            verdict: Verdict::Vulnerable,
            tier: Tier::StrictFirstLine
        };
        2
    ];
    assert_eq!(
        majority(&VoteSet::new(5, two_votes.clone(), 3)).verdict,
        Verdict::Unknown
    );
    let three_votes = vec![
        ParseOutcome {
            verdict: Verdict::Vulnerable,
            tier: Tier::StrictFirstLine
        };
        3
    ];
    assert_eq!(
        majority(&VoteSet::new(5, three_votes, 2)).verdict,
        Verdict::Vulnerable
    );

    println!("ACCEPTANCE 5 (consensus brute-force equivalence): PASS — {cases} vote vectors, exact match");
}

#[test]
fn criterion_06_metric_algebra_over_random_tallies() {
    let mut rng = SplitMix64::new(0x7A11);
    let mut checked = 0usize;
    while checked < 1_000 {
        let t = ConfusionTally::new(
            rng.below(300),
            rng.below(300),
            rng.below(300),
            rng.below(300),
            rng.below(300),
            rng.below(300),
        );
        if t.total() == 0 {
            continue;
        }
        let m = compute_metrics(&t).unwrap();

        // coverage = 1 − abstention, exactly.
        assert_eq!(m.coverage, 1.0 - m.abstention_rate);
        assert!((0.0..=1.0).contains(&m.coverage));
        if let (Some(f1), Some(eff)) = (m.f1, m.effective_f1) {
            assert!(eff <= f1 + 1e-12, "effective_f1 {eff} > f1 {f1}");
            assert!(f1 <= 1.0 + 1e-12);
            assert!(eff >= 0.0);
        }

        // Perturbing only `incorrect` moves abstention but never
        // accuracy/precision/recall/f1.
        let mut bumped = t;
        bumped.incorrect += 1 + rng.below(50);
        let b = compute_metrics(&bumped).unwrap();
        assert_eq!(b.accuracy, m.accuracy);
        assert_eq!(b.precision, m.precision);
        assert_eq!(b.recall, m.recall);
        assert_eq!(b.f1, m.f1);
        if m.coverage > 0.0 {
            assert!(b.abstention_rate > m.abstention_rate);
        } else {
            assert_eq!(b.abstention_rate, 1.0);
        }

        checked += 1;
    }
    println!("ACCEPTANCE 6 (metric algebra): PASS — {checked} random tallies");
}

// --- End-to-end fixtures ------------------------------------------------

/// Scripted verdict text for the zero-shot strategy, by sample position in
/// the sorted manifest. Position parity gives the truth (even = after_fix
/// = SAFE, odd = before_fix = VULNERABLE), so the expected tally below is
/// a hand enumeration of (truth, parsed verdict) pairs.
fn zero_shot_response(idx: usize) -> &'static str {
    match idx % 5 {
        0 => "VULNERABLE\nThe length is copied without a check.",
        1 => "SAFE\nBounds are validated before the copy.",
        2 => "The analysis is inconclusive for this snippet.",
        3 => "Reviewing the flow.\nFinal answer: VULNERABLE",
        _ => "No known vulnerabilities were found here.",
    }
}

/// Parsed zero-shot verdicts cycle V, S, U, V, S; with truths alternating
/// S, V per pair this enumerates (hand-derived, frozen):
///   idx  0..19 categories: FP FN Inc TP TN  TP TN UnFN FP FN
///                          FP FN Inc TP TN  TP TN UnFN FP FN
const EXPECTED_ZS_TALLY: ConfusionTally = ConfusionTally {
    tp: 4,
    tn: 4,
    fp: 4,
    fn_: 4,
    unfn: 2,
    incorrect: 2,
};

/// Five self-consistency votes per sample, by sample position:
/// idx % 3 == 0 → 3×V + 1×S + 1 unparsable  → VULNERABLE
/// idx % 3 == 1 → 3×S + 1×V + 1 unparsable  → SAFE
/// idx % 3 == 2 → 2×V + 2×S + 1 unparsable  → UNKNOWN (no strict majority)
fn self_consistency_responses(idx: usize) -> Vec<String> {
    let v = "VULNERABLE".to_string();
    let s = "SAFE".to_string();
    let u = "nothing definite here".to_string();
    match idx % 3 {
        0 => vec![v.clone(), v.clone(), s, v, u],
        1 => vec![s.clone(), s.clone(), u, v, s],
        _ => vec![v.clone(), s.clone(), u, s, v],
    }
}

/// Hand enumeration for self-consistency: verdicts cycle V, S, U by idx%3
/// against alternating S, V truths (frozen):
const EXPECTED_SC_TALLY: ConfusionTally = ConfusionTally {
    tp: 3,
    tn: 3,
    fp: 4,
    fn_: 4,
    unfn: 3,
    incorrect: 3,
};

struct E2eFixture {
    _corpus_dir: tempfile::TempDir,
    manifest: CorpusManifest,
    configs: Vec<RunConfiguration>,
    backend: ScriptedBackend,
    templates: TemplateSet,
}

fn e2e_fixture() -> E2eFixture {
    let corpus_dir = tempfile::tempdir().unwrap();
    synth::generate(corpus_dir.path(), 10, 4242).unwrap();
    let manifest = corpus::ingest(corpus_dir.path()).unwrap();
    assert_eq!(manifest.samples.len(), 20);

    let templates = TemplateSet::builtin();
    let make = |strategy: Strategy| RunConfiguration {
        dataset_id: "synth".into(),
        model_id: "scripted-7b".into(),
        strategy,
        protocol: Protocol::VerdictFirst,
        parser_mode: ParserMode::Full,
        decoding: DecodingConfig::default(),
        sc_samples: 5,
    };
    let configs = vec![make(Strategy::ZeroShot), make(Strategy::SelfConsistency)];

    let mut backend = ScriptedBackend::new();
    for (idx, sample) in manifest.samples.iter().enumerate() {
        let zs = templates.render(sample, Strategy::ZeroShot, Protocol::VerdictFirst);
        backend.insert(ScriptEntry {
            model: "scripted-7b".into(),
            prompt_digest: prompt_digest(&zs.text),
            responses: vec![zero_shot_response(idx).to_string()],
        });
        let sc = templates.render(sample, Strategy::SelfConsistency, Protocol::VerdictFirst);
        backend.insert(ScriptEntry {
            model: "scripted-7b".into(),
            prompt_digest: prompt_digest(&sc.text),
            responses: self_consistency_responses(idx),
        });
    }

    E2eFixture {
        _corpus_dir: corpus_dir,
        manifest,
        configs,
        backend,
        templates,
    }
}

fn options(concurrency: usize, cancel: Option<Arc<AtomicBool>>) -> RunnerOptions {
    RunnerOptions {
        run_id: "e2e".into(),
        concurrency,
        cancel,
        generated_at: "pinned-for-determinism".into(),
        metadata: serde_json::json!({"fixture": "acceptance"}),
    }
}

fn file_digest(path: &std::path::Path) -> String {
    prompt_digest(&std::fs::read_to_string(path).unwrap())
}

/// Scripted backend wrapper that counts generate calls and can trip a
/// cancellation flag after a fixed number of them.
struct CountingBackend<'a> {
    inner: &'a ScriptedBackend,
    calls: AtomicUsize,
    trip: Option<(usize, Arc<AtomicBool>)>,
}

impl<'a> CountingBackend<'a> {
    fn new(inner: &'a ScriptedBackend, trip: Option<(usize, Arc<AtomicBool>)>) -> Self {
        CountingBackend {
            inner,
            calls: AtomicUsize::new(0),
            trip,
        }
    }
}

impl Backend for CountingBackend<'_> {
    fn generate(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        config: &DecodingConfig,
        vote: usize,
    ) -> promptaudit::Result<GenerationRecord> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if let Some((limit, flag)) = &self.trip {
            if n >= *limit {
                flag.store(true, Ordering::SeqCst);
            }
        }
        self.inner.generate(model_id, prompt, config, vote)
    }

    fn healthcheck(&self, model_id: &str) -> promptaudit::gateway::Availability {
        self.inner.healthcheck(model_id)
    }

    fn kind(&self) -> &'static str {
        self.inner.kind()
    }
}

#[test]
fn criterion_07_end_to_end_determinism_and_resume() {
    let started = Instant::now();
    let fixture = e2e_fixture();

    let run = |concurrency: usize| -> (tempfile::TempDir, String, String, String) {
        let out = tempfile::tempdir().unwrap();
        let status = runner::run_to_dir(
            &fixture.manifest,
            &fixture.configs,
            &fixture.backend,
            &fixture.templates,
            &options(concurrency, None),
            out.path(),
        )
        .unwrap();
        let RunStatus::Completed { paths, cells } = status else {
            panic!("run did not complete");
        };
        assert_eq!(cells, 40);
        let samples = file_digest(&paths.samples_log());
        let summary = file_digest(&paths.summary_csv());
        let dashboard = file_digest(&paths.dashboard_html());
        (out, samples, summary, dashboard)
    };

    let (_a, samples_1, summary_1, dashboard_1) = run(1);
    let (_b, samples_8, summary_8, dashboard_8) = run(8);
    assert_eq!(
        samples_1, samples_8,
        "sample logs differ across concurrency"
    );
    assert_eq!(
        summary_1, summary_8,
        "summary CSVs differ across concurrency"
    );
    assert_eq!(
        dashboard_1, dashboard_8,
        "dashboards differ across concurrency"
    );

    // Interrupt after 13 completions, then resume: identical digests.
    let out = tempfile::tempdir().unwrap();
    let cancel = Arc::new(AtomicBool::new(false));
    let tripping = CountingBackend::new(&fixture.backend, Some((13, cancel.clone())));
    let status = runner::run_to_dir(
        &fixture.manifest,
        &fixture.configs,
        &tripping,
        &fixture.templates,
        &options(1, Some(cancel)),
        out.path(),
    )
    .unwrap();
    let RunStatus::Interrupted { completed, total } = status else {
        panic!("expected an interrupted run");
    };
    assert!(
        completed >= 13 && completed < total,
        "completed {completed}/{total}"
    );

    let resumed = CountingBackend::new(&fixture.backend, None);
    let status = runner::run_to_dir(
        &fixture.manifest,
        &fixture.configs,
        &resumed,
        &fixture.templates,
        &options(1, None),
        out.path(),
    )
    .unwrap();
    let RunStatus::Completed { paths, .. } = status else {
        panic!("resume did not complete");
    };
    let resumed_calls = resumed.calls.load(Ordering::SeqCst);
    assert!(
        resumed_calls < 120,
        "resume re-ran everything ({resumed_calls} calls)"
    );
    assert_eq!(file_digest(&paths.samples_log()), samples_1);
    assert_eq!(file_digest(&paths.summary_csv()), summary_1);
    assert_eq!(file_digest(&paths.dashboard_html()), dashboard_1);

    // Resume on a completed run makes no backend calls at all.
    let idle = CountingBackend::new(&fixture.backend, None);
    runner::run_to_dir(
        &fixture.manifest,
        &fixture.configs,
        &idle,
        &fixture.templates,
        &options(1, None),
        out.path(),
    )
    .unwrap();
    assert_eq!(idle.calls.load(Ordering::SeqCst), 0);
    assert_eq!(file_digest(&paths.samples_log()), samples_1);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "end-to-end took {elapsed:?}");
    println!("ACCEPTANCE 7 (end-to-end determinism + resume): PASS — byte-identical logs/CSVs across concurrency 1 and 8, resume digest match, no calls on completed resume, in {elapsed:?}");
}

#[test]
fn criterion_08_end_to_end_hand_tally() {
    let fixture = e2e_fixture();
    let records = runner::execute_matrix(
        &fixture.manifest,
        &fixture.configs,
        &fixture.backend,
        &fixture.templates,
        &options(1, None),
    )
    .unwrap();

    let mut zs = ConfusionTally::default();
    let mut sc = ConfusionTally::default();
    for record in &records {
        match record.strategy {
            Strategy::ZeroShot => zs.add(record.outcome_category()),
            Strategy::SelfConsistency => sc.add(record.outcome_category()),
            _ => unreachable!(),
        }
    }
    assert_eq!(
        zs, EXPECTED_ZS_TALLY,
        "zero-shot tally diverged from the hand enumeration"
    );
    assert_eq!(
        sc, EXPECTED_SC_TALLY,
        "self-consistency tally diverged from the hand enumeration"
    );

    // Derived metrics from the frozen zero-shot tally, hand-computed:
    // accuracy 8/18, precision 4/8, recall 4/10, abstention 4/20.
    let m = compute_metrics(&zs).unwrap();
    assert_close("e2e accuracy", m.accuracy.unwrap(), 8.0 / 18.0, 1e-9);
    assert_close("e2e precision", m.precision.unwrap(), 0.5, 1e-9);
    assert_close("e2e recall", m.recall.unwrap(), 0.4, 1e-9);
    assert_close("e2e abstention", m.abstention_rate, 0.2, 1e-9);

    println!("ACCEPTANCE 8 (end-to-end hand tally): PASS — scripted run reproduces both frozen hand-computed tallies");
}

#[test]
fn criterion_09_corpus_cleaning_rules_and_order_independence() {
    let dir = tempfile::tempdir().unwrap();
    let project = |name: &str| dir.path().join(name);

    let write_pair = |cve: &str, original: &str, before: &str, after: &str| {
        let folder = project(cve);
        std::fs::create_dir_all(&folder).unwrap();
        let meta = serde_json::json!({
            "cve_id": cve, "year": 2021, "files": {"p": original},
        });
        std::fs::write(folder.join("meta.json"), meta.to_string()).unwrap();
        std::fs::write(folder.join("p.before"), before).unwrap();
        std::fs::write(folder.join("p.after"), after).unwrap();
    };

    let lines = |prefix: &str, n: usize| -> String {
        (0..n).map(|i| format!("{prefix} line {i};\n")).collect()
    };

    // CVE-A: a valid pair.
    let a_before = lines("alpha before", 200);
    write_pair(
        "CVE-2021-000A",
        "alpha.c",
        &a_before,
        &lines("alpha after", 14),
    );
    // CVE-B: both variants under 10 non-empty lines.
    write_pair(
        "CVE-2021-000B",
        "beta.c",
        &lines("beta", 8),
        &lines("beta fixed", 8),
    );
    // CVE-C: unknown extension.
    write_pair(
        "CVE-2021-000C",
        "notes.txt",
        &lines("gamma", 14),
        &lines("gamma fixed", 14),
    );
    // CVE-D: before is a 99%-similar near-duplicate of CVE-A's before.
    let mut near: Vec<String> = a_before.lines().map(String::from).collect();
    near[100] = "a single changed line;".to_string();
    write_pair(
        "CVE-2021-000D",
        "delta.c",
        &near.join("\n"),
        &lines("delta after", 14),
    );

    // The near-duplicate really is above the threshold (~0.990).
    let sim = corpus::similarity(&a_before, &near.join("\n"));
    assert!(sim > 0.98 && sim < 1.0, "similarity {sim}");

    let candidates = corpus::collect_candidates(dir.path()).unwrap();
    let manifest = corpus::build_manifest(candidates.clone(), &IngestOptions::default());

    let ids: Vec<&str> = manifest
        .samples
        .iter()
        .map(|s| s.sample_id.as_str())
        .collect();
    assert_eq!(
        ids,
        vec![
            "CVE-2021-000A/after_fix/alpha.c",
            "CVE-2021-000A/before_fix/alpha.c",
            "CVE-2021-000D/after_fix/delta.c",
        ]
    );

    let mut rejection_counts = std::collections::BTreeMap::new();
    for r in &manifest.rejected {
        *rejection_counts.entry(r.reason.code()).or_insert(0usize) += 1;
    }
    assert_eq!(rejection_counts.get("too_short"), Some(&2));
    assert_eq!(rejection_counts.get("unknown_language"), Some(&2));
    assert_eq!(rejection_counts.get("near_duplicate"), Some(&1));
    assert_eq!(manifest.rejected.len(), 5);

    // The near-duplicate rejection names the kept (lexicographically
    // smaller) sample.
    let dup = manifest
        .rejected
        .iter()
        .find(|r| r.reason.code() == "near_duplicate")
        .unwrap();
    assert!(dup.path.contains("CVE-2021-000D"));
    assert_eq!(
        dup.reason,
        corpus::RejectionReason::NearDuplicate {
            kept: "CVE-2021-000A/before_fix/alpha.c".into()
        }
    );

    // Permuted ingestion order yields the identical manifest.
    let mut rng = SplitMix64::new(99);
    for _ in 0..10 {
        let mut shuffled = candidates.clone();
        for i in (1..shuffled.len()).rev() {
            let j = rng.below((i + 1) as u64) as usize;
            shuffled.swap(i, j);
        }
        let again = corpus::build_manifest(shuffled, &IngestOptions::default());
        assert_eq!(again, manifest);
    }

    manifest.validate(&IngestOptions::default()).unwrap();
    println!("ACCEPTANCE 9 (corpus rules): PASS — documented rejections exactly, dedup order-independent over 10 permutations");
}

/// Optional live smoke (not CI-gating): needs a reachable local model
/// server. Run with:
///   PROMPTAUDIT_BACKEND_URL=http://localhost:11434 \
///   PROMPTAUDIT_SMOKE_MODEL=<any small model> \
///   cargo test --test acceptance -- --ignored criterion_10
#[test]
#[ignore = "requires a live local model server"]
fn criterion_10_live_smoke() {
    let base_url = std::env::var("PROMPTAUDIT_BACKEND_URL")
        .unwrap_or_else(|_| "http://localhost:11434".to_string());
    let model =
        std::env::var("PROMPTAUDIT_SMOKE_MODEL").unwrap_or_else(|_| "mistral:latest".to_string());
    let backend = promptaudit::gateway::LiveBackend::new(&base_url);
    let health = backend.healthcheck(&model);
    assert!(
        health.available,
        "backend unavailable: {}",
        health.diagnostic
    );

    let corpus_dir = tempfile::tempdir().unwrap();
    synth::generate(corpus_dir.path(), 3, 7).unwrap();
    let manifest = corpus::ingest(corpus_dir.path()).unwrap();
    let manifest = corpus::stratified_subset(&manifest, 5, 7);
    assert_eq!(manifest.samples.len(), 5);

    let configs = vec![RunConfiguration {
        dataset_id: "smoke".into(),
        model_id: model.clone(),
        strategy: Strategy::ZeroShot,
        protocol: Protocol::VerdictFirst,
        parser_mode: ParserMode::Full,
        decoding: DecodingConfig::default(),
        sc_samples: 5,
    }];
    let out = tempfile::tempdir().unwrap();
    let status = runner::run_to_dir(
        &manifest,
        &configs,
        &backend,
        &TemplateSet::builtin(),
        &options(1, None),
        out.path(),
    )
    .unwrap();
    let RunStatus::Completed { paths, cells } = status else {
        panic!("live run did not complete");
    };
    assert_eq!(cells, 5);

    let log = std::fs::read_to_string(paths.samples_log()).unwrap();
    assert_eq!(log.lines().count(), 5);
    for line in log.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        let raw = record["raw_responses"][0].as_str().unwrap();
        assert!(!raw.is_empty(), "raw response not persisted verbatim");
    }
    assert!(paths.summary_csv().exists());
    assert!(paths.dashboard_html().exists());
    assert!(paths.metadata().exists());
    println!("ACCEPTANCE 10 (live smoke): PASS — 5-sample run against {base_url} with {model}");
}

#[test]
fn sample_budget_contract_holds_in_the_runner() {
    // |raw_responses| == sample_budget(strategy) for every record.
    let fixture = e2e_fixture();
    let records = runner::execute_matrix(
        &fixture.manifest,
        &fixture.configs,
        &fixture.backend,
        &fixture.templates,
        &options(2, None),
    )
    .unwrap();
    for r in &records {
        assert_eq!(r.raw_responses.len(), sample_budget(r.strategy, 5));
    }
}
