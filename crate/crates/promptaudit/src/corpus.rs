//! Corpus ingestion: CVE-style before/after file pairs to a deterministic
//! labeled sample set.
//!
//! # Input layout
//!
//! ```text
//! corpus_root/
//!   CVE-2021-1234/
//!     meta.json            # {"cve_id": "...", "year": 2021, "files": {"p0": "parse.c"}}
//!     p0.before            # pre-fix variant  -> label VULNERABLE
//!     p0.after             # post-fix variant -> label SAFE
//! ```
//!
//! `meta.json` keys: `cve_id` (string), `year` (integer), `files` (map from
//! stored pair stem to the recoverable original filename, whose extension
//! determines the language).
//!
//! # Cleaning rules
//!
//! Files are rejected, with a reason code, when the original filename
//! cannot be recovered, the variant has no counterpart, the extension maps
//! to no supported language, the normalized snippet has fewer than 10
//! non-empty lines, or the snippet is a near-duplicate (similarity > 0.98)
//! of a retained sample. Every ingested file lands exactly once in
//! `samples` or `rejected`, and the retained set is independent of
//! ingestion order (ties broken by lexicographically smallest sample_id).

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Ground-truth label, fixed by the variant's origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Safe,
    Vulnerable,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Safe => "SAFE",
            Label::Vulnerable => "VULNERABLE",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Which side of the fixing commit a sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    BeforeFix,
    AfterFix,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::BeforeFix => "before_fix",
            Origin::AfterFix => "after_fix",
        }
    }

    /// Labels are definitional: pre-fix code is VULNERABLE, post-fix SAFE.
    pub fn label(self) -> Label {
        match self {
            Origin::BeforeFix => Label::Vulnerable,
            Origin::AfterFix => Label::Safe,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// One labeled code snippet with CVE provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSample {
    pub sample_id: String,
    pub cve_id: String,
    pub year: u32,
    pub language: String,
    pub code: String,
    pub label: Label,
    pub origin: Origin,
}

/// Extension-to-language map. Case-insensitive on extensions.
#[derive(Debug, Clone)]
pub struct LanguageMap {
    map: BTreeMap<String, String>,
}

impl LanguageMap {
    /// The default map covers 16 languages.
    pub fn new() -> Self {
        let pairs: &[(&str, &str)] = &[
            ("c", "C"),
            ("h", "C"),
            ("cpp", "C++"),
            ("cc", "C++"),
            ("cxx", "C++"),
            ("hpp", "C++"),
            ("hh", "C++"),
            ("java", "Java"),
            ("py", "Python"),
            ("js", "JavaScript"),
            ("jsx", "JavaScript"),
            ("mjs", "JavaScript"),
            ("ts", "TypeScript"),
            ("tsx", "TypeScript"),
            ("php", "PHP"),
            ("phtml", "PHP"),
            ("go", "Go"),
            ("rb", "Ruby"),
            ("cs", "C#"),
            ("rs", "Rust"),
            ("sh", "Shell"),
            ("bash", "Shell"),
            ("pl", "Perl"),
            ("pm", "Perl"),
            ("kt", "Kotlin"),
            ("kts", "Kotlin"),
            ("swift", "Swift"),
            ("scala", "Scala"),
        ];
        let map = pairs
            .iter()
            .map(|(ext, lang)| (ext.to_string(), lang.to_string()))
            .collect();
        LanguageMap { map }
    }

    /// Add or override extension mappings (configuration hook).
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, String>) -> Self {
        for (ext, lang) in overrides {
            self.map.insert(ext.to_lowercase(), lang.clone());
        }
        self
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.map.values().map(String::as_str)
    }

    pub fn contains_language(&self, language: &str) -> bool {
        self.map.values().any(|l| l == language)
    }

    /// Deterministic extension lookup; `None` means unknown language.
    /// Filenames without an extension (e.g. `LICENSE`) are unknown.
    pub fn infer_language(&self, filename: &str) -> Option<&str> {
        let name = Path::new(filename).file_name()?.to_str()?;
        let (stem, ext) = name.rsplit_once('.')?;
        if stem.is_empty() {
            return None; // dotfiles like ".gitignore" carry no extension
        }
        self.map.get(&ext.to_lowercase()).map(String::as_str)
    }
}

impl Default for LanguageMap {
    fn default() -> Self {
        LanguageMap::new()
    }
}

pub const TAB_WIDTH: usize = 4;
pub const MIN_NON_EMPTY_LINES: usize = 10;
pub const DEDUP_THRESHOLD: f64 = 0.98;

/// Whitespace standardization: line endings unified to `\n`, tabs replaced
/// by four spaces, trailing whitespace stripped per line, trailing blank
/// lines dropped, and a single final newline appended when non-empty.
/// Idempotent; semantic content untouched.
pub fn normalize(code: &str) -> String {
    let unified = code.replace("\r\n", "\n").replace('\r', "\n");
    let mut lines: Vec<String> = unified
        .split('\n')
        .map(|line| {
            line.replace('\t', &" ".repeat(TAB_WIDTH))
                .trim_end()
                .to_string()
        })
        .collect();
    while lines.last().is_some_and(String::is_empty) {
        lines.pop();
    }
    if lines.is_empty() {
        return String::new();
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// Count of lines with non-whitespace content.
pub fn non_empty_line_count(code: &str) -> usize {
    code.lines().filter(|l| !l.trim().is_empty()).count()
}

fn shingle_counts(normalized: &str, shingle_lines: usize) -> HashMap<u64, u32> {
    let lines: Vec<&str> = normalized.lines().collect();
    let mut counts: HashMap<u64, u32> = HashMap::new();
    let hash_window = |window: &[&str]| -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for line in window {
            line.hash(&mut hasher);
            0u8.hash(&mut hasher); // separator so ["ab","c"] != ["a","bc"]
        }
        hasher.finish()
    };
    if lines.len() <= shingle_lines {
        *counts.entry(hash_window(&lines)).or_default() += 1;
        return counts;
    }
    for window in lines.windows(shingle_lines) {
        *counts.entry(hash_window(window)).or_default() += 1;
    }
    counts
}

fn multiset_jaccard(a: &HashMap<u64, u32>, b: &HashMap<u64, u32>) -> f64 {
    let mut intersection: u64 = 0;
    let mut union: u64 = 0;
    for (key, &ca) in a {
        let cb = b.get(key).copied().unwrap_or(0);
        intersection += u64::from(ca.min(cb));
        union += u64::from(ca.max(cb));
    }
    for (key, &cb) in b {
        if !a.contains_key(key) {
            union += u64::from(cb);
        }
    }
    if union == 0 {
        return 1.0; // two empty texts are identical
    }
    intersection as f64 / union as f64
}

/// Multiset Jaccard similarity over line shingles of the normalized texts.
///
/// Symmetric, `similarity(x, x) == 1.0`, disjoint line sets score 0.0.
/// With the default single-line shingles, two 100-line files differing in
/// one line score 99/101 ≈ 0.980, just over the dedup threshold.
pub fn similarity(a: &str, b: &str) -> f64 {
    similarity_with_shingle(a, b, 1)
}

pub fn similarity_with_shingle(a: &str, b: &str, shingle_lines: usize) -> f64 {
    let shingle_lines = shingle_lines.max(1);
    let na = normalize(a);
    let nb = normalize(b);
    multiset_jaccard(
        &shingle_counts(&na, shingle_lines),
        &shingle_counts(&nb, shingle_lines),
    )
}

/// Why a file was not admitted to the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectionReason {
    /// Extension of the recovered original filename maps to no language.
    UnknownLanguage,
    /// Fewer than the minimum non-empty lines after normalization.
    TooShort,
    /// Similarity above the threshold with a retained sample.
    NearDuplicate {
        kept: String,
    },
    /// meta.json missing, unparsable, or the stem has no filename entry.
    MissingMetadata,
    UnreadableFile,
    /// A `.before` without `.after`, or vice versa.
    UnpairedVariant,
    /// Same sample_id already admitted from another path.
    DuplicateSampleId {
        kept: String,
    },
    /// File does not match the `<stem>.before` / `<stem>.after` layout.
    UnrecognizedEntry,
}

impl RejectionReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectionReason::UnknownLanguage => "unknown_language",
            RejectionReason::TooShort => "too_short",
            RejectionReason::NearDuplicate { .. } => "near_duplicate",
            RejectionReason::MissingMetadata => "missing_metadata",
            RejectionReason::UnreadableFile => "unreadable_file",
            RejectionReason::UnpairedVariant => "unpaired_variant",
            RejectionReason::DuplicateSampleId { .. } => "duplicate_sample_id",
            RejectionReason::UnrecognizedEntry => "unrecognized_entry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub path: String,
    #[serde(flatten)]
    pub reason: RejectionReason,
}

/// Per-language and per-label tallies of the retained samples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub per_language: BTreeMap<String, usize>,
    pub per_label: BTreeMap<String, usize>,
}

/// Deterministic, immutable ingestion result.
///
/// Samples are ordered lexicographically by sample_id; every ingested file
/// appears exactly once, in `samples` or in `rejected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub samples: Vec<CodeSample>,
    pub counts: CorpusCounts,
    pub rejected: Vec<Rejection>,
}

/// JSONL export schema, one object per sample.
#[derive(Serialize)]
struct ManifestRecord<'a> {
    sample_id: &'a str,
    cve_id: &'a str,
    year: u32,
    language: &'a str,
    label: Label,
    origin: Origin,
    code: &'a str,
}

impl CorpusManifest {
    pub fn sample(&self, sample_id: &str) -> Option<&CodeSample> {
        self.samples
            .binary_search_by(|s| s.sample_id.as_str().cmp(sample_id))
            .ok()
            .map(|i| &self.samples[i])
    }

    /// Write line-delimited records with fields sample_id, cve_id, year,
    /// language, label, origin, code.
    pub fn export_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for s in &self.samples {
            let record = ManifestRecord {
                sample_id: &s.sample_id,
                cve_id: &s.cve_id,
                year: s.year,
                language: &s.language,
                label: s.label,
                origin: s.origin,
                code: &s.code,
            };
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Check every retained sample against the corpus invariants.
    pub fn validate(&self, opts: &IngestOptions) -> Result<()> {
        let mut violations = Vec::new();
        let mut seen = BTreeMap::new();
        for s in &self.samples {
            if s.label != s.origin.label() {
                violations.push(format!("{}: label does not match origin", s.sample_id));
            }
            if non_empty_line_count(&s.code) < opts.min_non_empty_lines {
                violations.push(format!(
                    "{}: fewer than {} non-empty lines",
                    s.sample_id, opts.min_non_empty_lines
                ));
            }
            if !opts.language_map.contains_language(&s.language) {
                violations.push(format!(
                    "{}: language '{}' not in the map",
                    s.sample_id, s.language
                ));
            }
            if seen.insert(s.sample_id.clone(), ()).is_some() {
                violations.push(format!("{}: duplicate sample_id", s.sample_id));
            }
        }
        for pair in self.samples.windows(2) {
            if pair[0].sample_id > pair[1].sample_id {
                violations.push("samples are not sorted by sample_id".into());
                break;
            }
        }
        for i in 0..self.samples.len() {
            for j in (i + 1)..self.samples.len() {
                let sim = similarity_with_shingle(
                    &self.samples[i].code,
                    &self.samples[j].code,
                    opts.shingle_lines,
                );
                if sim > opts.dedup_threshold {
                    violations.push(format!(
                        "{} and {} are near-duplicates ({sim:.4})",
                        self.samples[i].sample_id, self.samples[j].sample_id
                    ));
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(violations))
        }
    }
}

/// Knobs for ingestion; defaults follow the documented cleaning rules.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub language_map: LanguageMap,
    pub min_non_empty_lines: usize,
    pub dedup_threshold: f64,
    pub shingle_lines: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            language_map: LanguageMap::new(),
            min_non_empty_lines: MIN_NON_EMPTY_LINES,
            dedup_threshold: DEDUP_THRESHOLD,
            shingle_lines: 1,
        }
    }
}

/// One file pulled from the tree, before the cleaning rules run.
#[derive(Debug, Clone)]
pub enum CandidateFile {
    Pending(PendingSample),
    Rejected(Rejection),
}

#[derive(Debug, Clone)]
pub struct PendingSample {
    pub path: String,
    pub cve_id: String,
    pub year: u32,
    pub origin: Origin,
    pub original_filename: String,
    pub raw_code: String,
}

#[derive(Deserialize)]
struct FolderMeta {
    cve_id: String,
    year: u32,
    files: BTreeMap<String, String>,
}

pub const META_FILE: &str = "meta.json";

/// Walk the tree and classify every data file. Unreadable root is fatal;
/// per-file problems become rejections.
pub fn collect_candidates(root: &Path) -> Result<Vec<CandidateFile>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            dirs.push(path);
        } else {
            out.push(CandidateFile::Rejected(Rejection {
                path: path.display().to_string(),
                reason: RejectionReason::UnrecognizedEntry,
            }));
        }
    }
    dirs.sort();

    for dir in dirs {
        let meta: Option<FolderMeta> = std::fs::read_to_string(dir.join(META_FILE))
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok());

        let mut entries: Vec<_> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io(&dir, e))?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.file_name().and_then(|n| n.to_str()) != Some(META_FILE))
            .collect();
        entries.sort();

        // Group variants by stem so pairing can be checked.
        let mut stems: BTreeMap<String, (Option<std::path::PathBuf>, Option<std::path::PathBuf>)> =
            BTreeMap::new();
        for path in entries {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            let slot = if let Some(stem) = name.strip_suffix(".before") {
                Some((stem.to_string(), 0))
            } else {
                name.strip_suffix(".after")
                    .map(|stem| (stem.to_string(), 1))
            };
            match slot {
                Some((stem, 0)) => stems.entry(stem).or_default().0 = Some(path),
                Some((stem, _)) => stems.entry(stem).or_default().1 = Some(path),
                None => out.push(CandidateFile::Rejected(Rejection {
                    path: path.display().to_string(),
                    reason: RejectionReason::UnrecognizedEntry,
                })),
            }
        }

        for (stem, (before, after)) in stems {
            let both = match (&before, &after) {
                (Some(b), Some(a)) => Some((b.clone(), a.clone())),
                _ => None,
            };
            let Some((before, after)) = both else {
                for path in [before, after].into_iter().flatten() {
                    out.push(CandidateFile::Rejected(Rejection {
                        path: path.display().to_string(),
                        reason: RejectionReason::UnpairedVariant,
                    }));
                }
                continue;
            };

            let (meta, original) = match &meta {
                Some(m) => match m.files.get(&stem) {
                    Some(original) => (m, original.clone()),
                    None => {
                        for path in [&before, &after] {
                            out.push(CandidateFile::Rejected(Rejection {
                                path: path.display().to_string(),
                                reason: RejectionReason::MissingMetadata,
                            }));
                        }
                        continue;
                    }
                },
                None => {
                    for path in [&before, &after] {
                        out.push(CandidateFile::Rejected(Rejection {
                            path: path.display().to_string(),
                            reason: RejectionReason::MissingMetadata,
                        }));
                    }
                    continue;
                }
            };

            for (path, origin) in [(before, Origin::BeforeFix), (after, Origin::AfterFix)] {
                match std::fs::read_to_string(&path) {
                    Ok(raw_code) => out.push(CandidateFile::Pending(PendingSample {
                        path: path.display().to_string(),
                        cve_id: meta.cve_id.clone(),
                        year: meta.year,
                        origin,
                        original_filename: original.clone(),
                        raw_code,
                    })),
                    Err(_) => out.push(CandidateFile::Rejected(Rejection {
                        path: path.display().to_string(),
                        reason: RejectionReason::UnreadableFile,
                    })),
                }
            }
        }
    }
    Ok(out)
}

/// Apply the cleaning rules and assemble the manifest. The result is
/// invariant under any permutation of `candidates`: per-file checks are
/// order-free and deduplication runs over the sample_id-sorted survivors,
/// keeping the lexicographically smallest id.
pub fn build_manifest(candidates: Vec<CandidateFile>, opts: &IngestOptions) -> CorpusManifest {
    let mut rejected = Vec::new();
    let mut pending = Vec::new();

    for candidate in candidates {
        match candidate {
            CandidateFile::Rejected(r) => rejected.push(r),
            CandidateFile::Pending(p) => pending.push(p),
        }
    }

    let mut survivors: Vec<CodeSample> = Vec::new();
    let mut survivor_paths: Vec<String> = Vec::new();
    for p in pending {
        let Some(language) = opts.language_map.infer_language(&p.original_filename) else {
            rejected.push(Rejection {
                path: p.path,
                reason: RejectionReason::UnknownLanguage,
            });
            continue;
        };
        let code = normalize(&p.raw_code);
        if non_empty_line_count(&code) < opts.min_non_empty_lines {
            rejected.push(Rejection {
                path: p.path,
                reason: RejectionReason::TooShort,
            });
            continue;
        }
        let sample_id = format!("{}/{}/{}", p.cve_id, p.origin, p.original_filename);
        survivors.push(CodeSample {
            sample_id,
            cve_id: p.cve_id,
            year: p.year,
            language: language.to_string(),
            code,
            label: p.origin.label(),
            origin: p.origin,
        });
        survivor_paths.push(p.path);
    }

    // Deterministic processing order: (sample_id, path).
    let mut order: Vec<usize> = (0..survivors.len()).collect();
    order.sort_by(|&a, &b| {
        (survivors[a].sample_id.as_str(), survivor_paths[a].as_str())
            .cmp(&(survivors[b].sample_id.as_str(), survivor_paths[b].as_str()))
    });

    let mut kept: Vec<CodeSample> = Vec::new();
    let mut kept_shingles: Vec<HashMap<u64, u32>> = Vec::new();
    let mut kept_ids: BTreeMap<String, ()> = BTreeMap::new();
    for idx in order {
        let sample = &survivors[idx];
        let path = &survivor_paths[idx];
        match kept_ids.entry(sample.sample_id.clone()) {
            Entry::Occupied(_) => {
                rejected.push(Rejection {
                    path: path.clone(),
                    reason: RejectionReason::DuplicateSampleId {
                        kept: sample.sample_id.clone(),
                    },
                });
                continue;
            }
            Entry::Vacant(slot) => slot.insert(()),
        };
        let shingles = shingle_counts(&sample.code, opts.shingle_lines);
        let duplicate_of = kept
            .iter()
            .zip(&kept_shingles)
            .find(|(_, existing)| multiset_jaccard(existing, &shingles) > opts.dedup_threshold)
            .map(|(existing, _)| existing.sample_id.clone());
        match duplicate_of {
            Some(kept_id) => rejected.push(Rejection {
                path: path.clone(),
                reason: RejectionReason::NearDuplicate { kept: kept_id },
            }),
            None => {
                kept.push(sample.clone());
                kept_shingles.push(shingles);
            }
        }
    }

    let mut counts = CorpusCounts::default();
    for s in &kept {
        *counts.per_language.entry(s.language.clone()).or_insert(0) += 1;
        *counts
            .per_label
            .entry(s.label.name().to_string())
            .or_insert(0) += 1;
    }
    rejected.sort_by(|a, b| {
        (a.path.as_str(), a.reason.code()).cmp(&(b.path.as_str(), b.reason.code()))
    });

    CorpusManifest {
        samples: kept,
        counts,
        rejected,
    }
}

/// Ingest a corpus tree with default options.
pub fn ingest(root: &Path) -> Result<CorpusManifest> {
    ingest_with(root, &IngestOptions::default())
}

pub fn ingest_with(root: &Path, opts: &IngestOptions) -> Result<CorpusManifest> {
    Ok(build_manifest(collect_candidates(root)?, opts))
}

/// Proportionally stratified subset by (language, label) under a seeded
/// shuffle; quotas use the largest-remainder method and the result is
/// re-sorted by sample_id. Requesting at least the full size returns the
/// whole sample set.
pub fn stratified_subset(manifest: &CorpusManifest, size: usize, seed: u64) -> CorpusManifest {
    if size >= manifest.samples.len() {
        return manifest.clone();
    }

    let mut strata: BTreeMap<(String, Label), Vec<&CodeSample>> = BTreeMap::new();
    for s in &manifest.samples {
        strata
            .entry((s.language.clone(), s.label))
            .or_default()
            .push(s);
    }

    let total = manifest.samples.len() as f64;
    let mut quotas: Vec<usize> = Vec::with_capacity(strata.len());
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    for (i, members) in strata.values().enumerate() {
        let exact = size as f64 * members.len() as f64 / total;
        let floor = exact.floor() as usize;
        quotas.push(floor.min(members.len()));
        remainders.push((i, exact - floor as f64));
    }
    let mut assigned: usize = quotas.iter().sum();
    // Largest fractional part first; stratum order breaks ties.
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let mut cursor = 0;
    while assigned < size && cursor < remainders.len() {
        let (idx, _) = remainders[cursor];
        if quotas[idx] < sizes[idx] {
            quotas[idx] += 1;
            assigned += 1;
        }
        cursor += 1;
        if cursor == remainders.len() && assigned < size {
            cursor = 0; // strata exhausted their remainder round; loop again
        }
    }

    let mut picked: Vec<CodeSample> = Vec::with_capacity(size);
    for (stratum_index, members) in strata.values().enumerate() {
        let mut indices: Vec<usize> = (0..members.len()).collect();
        let mut rng = SplitMix64::new(seed.wrapping_add(stratum_index as u64));
        // Fisher-Yates
        for i in (1..indices.len()).rev() {
            let j = rng.below((i + 1) as u64) as usize;
            indices.swap(i, j);
        }
        for &i in indices.iter().take(quotas[stratum_index]) {
            picked.push(members[i].clone());
        }
    }
    picked.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    let mut counts = CorpusCounts::default();
    for s in &picked {
        *counts.per_language.entry(s.language.clone()).or_insert(0) += 1;
        *counts
            .per_label
            .entry(s.label.name().to_string())
            .or_insert(0) += 1;
    }
    CorpusManifest {
        samples: picked,
        counts,
        rejected: Vec::new(),
    }
}
