//! Strategy templates and output-protocol suffixes.
//!
//! Five strategy bodies (zero-shot, few-shot, CoT, adaptive CoT,
//! self-consistency — the last reuses the adaptive-CoT body verbatim) are
//! combined with one of two protocol suffixes that pin where the verdict
//! token must appear. Templates are plain text files with two placeholder
//! tokens:
//!
//! - `<CODE_SNIPPET_HERE>` — replaced by the sample code, verbatim
//! - `<PLACEMENT_HINT>` — CoT/adaptive-CoT only; replaced by the
//!   protocol-matched hint sentence
//!
//! The files under `templates/` are the canonical data; [`TemplateSet::builtin`]
//! embeds those exact files so the library works without a template
//! directory at runtime. A checksum test pins their content.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::CodeSample;
use crate::error::{Error, Result};

pub const CODE_PLACEHOLDER: &str = "<CODE_SNIPPET_HERE>";
pub const HINT_PLACEHOLDER: &str = "<PLACEMENT_HINT>";

/// Prompting strategy under audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ZeroShot,
    FewShot,
    Cot,
    AdaptiveCot,
    SelfConsistency,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::ZeroShot,
        Strategy::FewShot,
        Strategy::Cot,
        Strategy::AdaptiveCot,
        Strategy::SelfConsistency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ZeroShot => "zero_shot",
            Strategy::FewShot => "few_shot",
            Strategy::Cot => "cot",
            Strategy::AdaptiveCot => "adaptive_cot",
            Strategy::SelfConsistency => "self_consistency",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown strategy '{s}' (valid: zero_shot, few_shot, cot, adaptive_cot, self_consistency)"
                ))
            })
    }

    /// Which template body this strategy renders with. Self-consistency
    /// shares the adaptive-CoT body; it differs only in sampling count.
    fn body_key(self) -> Strategy {
        match self {
            Strategy::SelfConsistency => Strategy::AdaptiveCot,
            other => other,
        }
    }

    /// Whether the body carries a `<PLACEMENT_HINT>` placeholder.
    fn uses_hint(self) -> bool {
        matches!(self.body_key(), Strategy::Cot | Strategy::AdaptiveCot)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Where the verdict token must be placed in the completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    VerdictFirst,
    VerdictLast,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::VerdictFirst, Protocol::VerdictLast];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::VerdictFirst => "verdict_first",
            Protocol::VerdictLast => "verdict_last",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Protocol::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown protocol '{s}' (valid: verdict_first, verdict_last)"
                ))
            })
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// A fully assembled prompt for one (sample, strategy, protocol) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub strategy: Strategy,
    pub protocol: Protocol,
    pub sample_id: String,
}

/// Loaded strategy bodies, protocol suffixes, and placement hints.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    bodies: BTreeMap<Strategy, String>,
    suffixes: BTreeMap<Protocol, String>,
    hints: BTreeMap<Protocol, String>,
}

/// File names expected inside a template directory.
const BODY_FILES: [(Strategy, &str); 4] = [
    (Strategy::ZeroShot, "zero_shot.txt"),
    (Strategy::FewShot, "few_shot.txt"),
    (Strategy::Cot, "cot.txt"),
    (Strategy::AdaptiveCot, "adaptive_cot.txt"),
];
const SUFFIX_FILES: [(Protocol, &str); 2] = [
    (Protocol::VerdictFirst, "protocol_verdict_first.txt"),
    (Protocol::VerdictLast, "protocol_verdict_last.txt"),
];
const HINT_FILES: [(Protocol, &str); 2] = [
    (Protocol::VerdictFirst, "hint_verdict_first.txt"),
    (Protocol::VerdictLast, "hint_verdict_last.txt"),
];

impl TemplateSet {
    /// The canonical templates shipped with the crate.
    pub fn builtin() -> Self {
        let mut bodies = BTreeMap::new();
        bodies.insert(
            Strategy::ZeroShot,
            include_str!("../templates/zero_shot.txt").to_string(),
        );
        bodies.insert(
            Strategy::FewShot,
            include_str!("../templates/few_shot.txt").to_string(),
        );
        bodies.insert(
            Strategy::Cot,
            include_str!("../templates/cot.txt").to_string(),
        );
        bodies.insert(
            Strategy::AdaptiveCot,
            include_str!("../templates/adaptive_cot.txt").to_string(),
        );
        let mut suffixes = BTreeMap::new();
        suffixes.insert(
            Protocol::VerdictFirst,
            include_str!("../templates/protocol_verdict_first.txt").to_string(),
        );
        suffixes.insert(
            Protocol::VerdictLast,
            include_str!("../templates/protocol_verdict_last.txt").to_string(),
        );
        let mut hints = BTreeMap::new();
        hints.insert(
            Protocol::VerdictFirst,
            include_str!("../templates/hint_verdict_first.txt").to_string(),
        );
        hints.insert(
            Protocol::VerdictLast,
            include_str!("../templates/hint_verdict_last.txt").to_string(),
        );
        let set = TemplateSet {
            bodies,
            suffixes,
            hints,
        };
        set.validate()
            .expect("builtin templates must satisfy the template invariants");
        set
    }

    /// Load a template set from a directory holding the eight files:
    /// one body per strategy (`zero_shot.txt`, `few_shot.txt`, `cot.txt`,
    /// `adaptive_cot.txt`), one suffix per protocol
    /// (`protocol_verdict_first.txt`, `protocol_verdict_last.txt`) and one
    /// hint per protocol (`hint_verdict_first.txt`, `hint_verdict_last.txt`).
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))
        };
        let mut bodies = BTreeMap::new();
        for (strategy, file) in BODY_FILES {
            bodies.insert(strategy, read(file)?);
        }
        let mut suffixes = BTreeMap::new();
        for (protocol, file) in SUFFIX_FILES {
            suffixes.insert(protocol, read(file)?);
        }
        let mut hints = BTreeMap::new();
        for (protocol, file) in HINT_FILES {
            hints.insert(protocol, read(file)?);
        }
        let set = TemplateSet {
            bodies,
            suffixes,
            hints,
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        for (strategy, body) in &self.bodies {
            let n = body.matches(CODE_PLACEHOLDER).count();
            if n != 1 {
                return Err(Error::Template(format!(
                    "{strategy} body must contain exactly one {CODE_PLACEHOLDER} (found {n})"
                )));
            }
            let hints = body.matches(HINT_PLACEHOLDER).count();
            let wants_hint = matches!(strategy, Strategy::Cot | Strategy::AdaptiveCot);
            if wants_hint && hints != 1 {
                return Err(Error::Template(format!(
                    "{strategy} body must contain exactly one {HINT_PLACEHOLDER} (found {hints})"
                )));
            }
            if !wants_hint && hints != 0 {
                return Err(Error::Template(format!(
                    "{strategy} body must not contain {HINT_PLACEHOLDER}"
                )));
            }
        }
        for (protocol, suffix) in &self.suffixes {
            if suffix.trim().is_empty() {
                return Err(Error::Template(format!("{protocol} suffix is empty")));
            }
        }
        for (protocol, hint) in &self.hints {
            if hint.trim().is_empty() {
                return Err(Error::Template(format!("{protocol} hint is empty")));
            }
        }
        Ok(())
    }

    pub fn body(&self, strategy: Strategy) -> &str {
        &self.bodies[&strategy.body_key()]
    }

    pub fn suffix(&self, protocol: Protocol) -> &str {
        &self.suffixes[&protocol]
    }

    pub fn hint(&self, protocol: Protocol) -> &str {
        &self.hints[&protocol]
    }

    /// Assemble the full prompt for one sample.
    ///
    /// The hint placeholder is substituted before the code placeholder so
    /// that placeholder-like text inside the sample code is never
    /// re-substituted; the code is inserted verbatim. The protocol suffix
    /// is appended after the body, separated by one blank line.
    pub fn render(
        &self,
        sample: &CodeSample,
        strategy: Strategy,
        protocol: Protocol,
    ) -> RenderedPrompt {
        let mut body = self.body(strategy).to_string();
        if strategy.uses_hint() {
            body = body.replace(HINT_PLACEHOLDER, self.hint(protocol).trim_end());
        }
        let body = body.replacen(CODE_PLACEHOLDER, &sample.code, 1);
        let text = format!(
            "{}\n\n{}\n",
            body.trim_end(),
            self.suffix(protocol).trim_end()
        );
        RenderedPrompt {
            text,
            strategy,
            protocol,
            sample_id: sample.sample_id.clone(),
        }
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::builtin()
    }
}

/// Completions requested per sample: 1 for all strategies except
/// self-consistency, which takes the configured vote count.
pub fn sample_budget(strategy: Strategy, sc_samples: usize) -> usize {
    match strategy {
        Strategy::SelfConsistency => sc_samples,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Origin};

    fn sample(code: &str) -> CodeSample {
        CodeSample {
            sample_id: "CVE-0000-0001/before_fix/demo.c".into(),
            cve_id: "CVE-0000-0001".into(),
            year: 2020,
            language: "C".into(),
            code: code.into(),
            label: Label::Vulnerable,
            origin: Origin::BeforeFix,
        }
    }

    #[test]
    fn zero_shot_verdict_first_has_no_examples_or_cot_cue() {
        let set = TemplateSet::builtin();
        let p = set.render(
            &sample("int x;"),
            Strategy::ZeroShot,
            Protocol::VerdictFirst,
        );
        assert!(p.text.contains("int x;"));
        assert!(!p.text.contains("Example 1"));
        assert!(!p.text.contains("step by step"));
        // The protocol suffix is the final block.
        assert!(p
            .text
            .trim_end()
            .ends_with("it must begin on the SECOND line."));
        assert!(p.text.contains("On the FIRST LINE ONLY"));
    }

    #[test]
    fn cot_verdict_last_gets_the_last_line_hint() {
        let set = TemplateSet::builtin();
        let p = set.render(&sample("int x;"), Strategy::Cot, Protocol::VerdictLast);
        assert!(p
            .text
            .contains("Reason step by step first, then place the final verdict on the last line"));
        assert!(p.text.contains("On the FINAL LINE ONLY"));
    }

    #[test]
    fn few_shot_verdict_first_keeps_example_order_before_target() {
        let set = TemplateSet::builtin();
        let code = "void target(void) {}";
        let p = set.render(&sample(code), Strategy::FewShot, Protocol::VerdictFirst);
        let vulnerable = p.text.find("Label: VULNERABLE").unwrap();
        let safe = p.text.find("Label: SAFE").unwrap();
        let target = p.text.find(code).unwrap();
        assert!(vulnerable < safe && safe < target);
    }

    #[test]
    fn self_consistency_shares_the_adaptive_cot_body() {
        let set = TemplateSet::builtin();
        let s = sample("int x;");
        let a = set.render(&s, Strategy::AdaptiveCot, Protocol::VerdictFirst);
        let b = set.render(&s, Strategy::SelfConsistency, Protocol::VerdictFirst);
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn rendering_is_deterministic_and_code_appears_once() {
        let set = TemplateSet::builtin();
        let s = sample("unique_snippet_marker();\nmore();");
        for strategy in Strategy::ALL {
            for protocol in Protocol::ALL {
                let a = set.render(&s, strategy, protocol);
                let b = set.render(&s, strategy, protocol);
                assert_eq!(a.text, b.text);
                assert_eq!(
                    a.text.matches("unique_snippet_marker();\nmore();").count(),
                    1
                );
                // suffix last, one blank line before it
                let suffix = set.suffix(protocol).trim_end();
                assert!(a.text.ends_with(&format!("\n\n{suffix}\n")));
            }
        }
    }

    #[test]
    fn placeholder_like_code_is_not_resubstituted() {
        let set = TemplateSet::builtin();
        let s = sample("printf(\"<PLACEMENT_HINT>\");\nuse(\"<CODE_SNIPPET_HERE>\");");
        let p = set.render(&s, Strategy::Cot, Protocol::VerdictFirst);
        // The literal placeholder tokens inside the code survive untouched.
        assert!(p.text.contains("printf(\"<PLACEMENT_HINT>\");"));
        assert!(p.text.contains("use(\"<CODE_SNIPPET_HERE>\");"));
    }

    #[test]
    fn budgets() {
        assert_eq!(sample_budget(Strategy::ZeroShot, 5), 1);
        assert_eq!(sample_budget(Strategy::SelfConsistency, 5), 5);
        assert_eq!(sample_budget(Strategy::SelfConsistency, 7), 7);
    }

    #[test]
    fn template_files_are_pinned() {
        // Template text is data, not code; any edit must be deliberate.
        let set = TemplateSet::builtin();
        let digest = |s: &str| crate::gateway::prompt_digest(s);
        assert_eq!(
            digest(set.body(Strategy::ZeroShot)),
            "4eb247e4415048a91a7a96d9f566ffde3b591462c82f1e6feab64c4bd0377d04"
        );
        assert_eq!(
            digest(set.body(Strategy::FewShot)),
            "00ef4902ab039c655593a99b0f4780a0843c9965938af08c37475582b43faaf7"
        );
        assert_eq!(
            digest(set.body(Strategy::Cot)),
            "738c1de2c4ef9c569d64c3a828c5fbda4f3e6aa6e1af99290bf93c61a037b7f3"
        );
        assert_eq!(
            digest(set.body(Strategy::AdaptiveCot)),
            "3a4a50f30ffb9156e679860e9a99ebedb87260d4c76744cfce62fdf4eaef4f4a"
        );
        assert_eq!(
            digest(set.suffix(Protocol::VerdictFirst)),
            "e9182d6ae6b5135187e4911062a4da63f7b6df34c86aff9e94b3a96499b596d6"
        );
        assert_eq!(
            digest(set.suffix(Protocol::VerdictLast)),
            "0025d096685be77668ce6ee775777886c12be578d2b9a87f521b702936f3dc63"
        );
        assert_eq!(
            digest(set.hint(Protocol::VerdictFirst)),
            "c6f95c5d78852720248df1bd5e77ce11a30da5cfd6a33ff97a4c75c1463e4ce3"
        );
        assert_eq!(
            digest(set.hint(Protocol::VerdictLast)),
            "fa74a8c2c4653fb31798c645afdef8674493b32b3473dd50f47830945ed8e0e8"
        );
    }

    #[test]
    fn builtin_matches_the_template_directory() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
        let from_dir = TemplateSet::from_dir(&dir).unwrap();
        let builtin = TemplateSet::builtin();
        for strategy in Strategy::ALL {
            assert_eq!(from_dir.body(strategy), builtin.body(strategy));
        }
        for protocol in Protocol::ALL {
            assert_eq!(from_dir.suffix(protocol), builtin.suffix(protocol));
            assert_eq!(from_dir.hint(protocol), builtin.hint(protocol));
        }
    }

    #[test]
    fn from_dir_rejects_broken_templates() {
        let dir = tempfile::tempdir().unwrap();
        for (name, content) in [
            ("zero_shot.txt", "no placeholder at all\n"),
            ("few_shot.txt", "<CODE_SNIPPET_HERE>\n"),
            ("cot.txt", "<CODE_SNIPPET_HERE>\n<PLACEMENT_HINT>\n"),
            (
                "adaptive_cot.txt",
                "<CODE_SNIPPET_HERE>\n<PLACEMENT_HINT>\n",
            ),
            ("protocol_verdict_first.txt", "suffix\n"),
            ("protocol_verdict_last.txt", "suffix\n"),
            ("hint_verdict_first.txt", "hint\n"),
            ("hint_verdict_last.txt", "hint\n"),
        ] {
            std::fs::write(dir.path().join(name), content).unwrap();
        }
        let err = TemplateSet::from_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("exactly one <CODE_SNIPPET_HERE>"));
    }

    #[test]
    fn from_name_rejects_unknown_kinds() {
        let err = Strategy::from_name("warp_speed").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("warp_speed"));
        assert!(msg.contains("zero_shot"));
        assert!(Protocol::from_name("sideways").is_err());
    }
}
