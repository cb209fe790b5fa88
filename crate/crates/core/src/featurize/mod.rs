//! Observed predicates: everything the model is told about a meeting before
//! inference. Structural facts come from utterance order, behavioral ones from
//! per-speaker counts and lengths, linguistic ones from locale-specific
//! patterns, and AI signals from externally produced predicate tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use regex::{RegexSet, RegexSetBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::{Arity, Category, Meeting, Role};
use crate::error::{Error, Result};

#[cfg(feature = "annotator")]
pub mod annotator;

/// Kind of entity a predicate argument names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Meeting,
    Utterance,
    Speaker,
    Category,
    Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predicate {
    First,
    Precedes,
    Spoken,
    SpeaksOften,
    SpeaksRarely,
    LongUtteranceRatio,
    CommentTransition,
    HearingTransition,
    Introduction,
    #[serde(rename = "SectionGenAI")]
    SectionGenAi,
    #[serde(rename = "RemarkTypePLM")]
    RemarkTypePlm,
    Section,
    RemarkType,
    SpeakerRole,
}

impl Predicate {
    pub const ALL: [Predicate; 14] = [
        Predicate::First,
        Predicate::Precedes,
        Predicate::Spoken,
        Predicate::SpeaksOften,
        Predicate::SpeaksRarely,
        Predicate::LongUtteranceRatio,
        Predicate::CommentTransition,
        Predicate::HearingTransition,
        Predicate::Introduction,
        Predicate::SectionGenAi,
        Predicate::RemarkTypePlm,
        Predicate::Section,
        Predicate::RemarkType,
        Predicate::SpeakerRole,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::First => "First",
            Predicate::Precedes => "Precedes",
            Predicate::Spoken => "Spoken",
            Predicate::SpeaksOften => "SpeaksOften",
            Predicate::SpeaksRarely => "SpeaksRarely",
            Predicate::LongUtteranceRatio => "LongUtteranceRatio",
            Predicate::CommentTransition => "CommentTransition",
            Predicate::HearingTransition => "HearingTransition",
            Predicate::Introduction => "Introduction",
            Predicate::SectionGenAi => "SectionGenAI",
            Predicate::RemarkTypePlm => "RemarkTypePLM",
            Predicate::Section => "Section",
            Predicate::RemarkType => "RemarkType",
            Predicate::SpeakerRole => "SpeakerRole",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Predicate::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Argument kinds, meeting id first.
    pub fn signature(self) -> &'static [ArgKind] {
        use ArgKind::*;
        match self {
            Predicate::First
            | Predicate::CommentTransition
            | Predicate::HearingTransition
            | Predicate::Introduction => &[Meeting, Utterance],
            Predicate::Precedes => &[Meeting, Utterance, Utterance],
            Predicate::Spoken => &[Meeting, Utterance, Speaker],
            Predicate::SpeaksOften | Predicate::SpeaksRarely | Predicate::LongUtteranceRatio => {
                &[Meeting, Speaker]
            }
            Predicate::SectionGenAi | Predicate::RemarkTypePlm | Predicate::Section | Predicate::RemarkType => {
                &[Meeting, Utterance, Category]
            }
            Predicate::SpeakerRole => &[Meeting, Speaker, Role],
        }
    }

    pub fn arity(self) -> usize {
        self.signature().len()
    }

    /// Inference targets; everything else is observed.
    pub fn is_open(self) -> bool {
        matches!(self, Predicate::Section | Predicate::RemarkType | Predicate::SpeakerRole)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomStatus {
    Observed,
    Open,
}

/// A ground atom with a soft truth value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub predicate: Predicate,
    pub args: Vec<String>,
    pub value: f64,
    pub status: AtomStatus,
}

impl Atom {
    pub fn observed(predicate: Predicate, args: Vec<String>, value: f64) -> Self {
        Atom {
            predicate,
            args,
            value: value.clamp(0.0, 1.0),
            status: AtomStatus::Observed,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(", "))
    }
}

// ---------------------------------------------------------------------------
// Locale configuration

fn default_introduction_patterns() -> Vec<String> {
    ["my name is", r"i live (at|on|in)", r"i('m| am) a resident", "calling in as a"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_end_patterns() -> Vec<String> {
    [
        r"(concludes?|closes?|ends?) (the |our )?public (comments?|hearings?)",
        r"public (comments?|hearings?) (is|are) (now )?(closed|concluded)",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn default_delta_words() -> usize {
    75
}
fn default_k_often() -> usize {
    10
}
fn default_k_rare() -> usize {
    5
}
fn default_arity() -> Arity {
    Arity::Three
}

/// Per-city patterns and thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocaleConfig {
    pub city: String,
    #[serde(default)]
    pub comment_transition_patterns: Vec<String>,
    #[serde(default)]
    pub hearing_transition_patterns: Vec<String>,
    #[serde(default = "default_introduction_patterns")]
    pub introduction_patterns: Vec<String>,
    /// Phrases that close an open comment or hearing period (heuristic
    /// baselines only; the model never sees section ends).
    #[serde(default = "default_end_patterns")]
    pub end_patterns: Vec<String>,
    #[serde(default = "default_delta_words")]
    pub delta_words: usize,
    #[serde(default = "default_k_often")]
    pub k_often: usize,
    #[serde(default = "default_k_rare")]
    pub k_rare: usize,
    #[serde(default = "default_arity")]
    pub arity: Arity,
}

impl LocaleConfig {
    pub fn new(city: impl Into<String>) -> Self {
        LocaleConfig {
            city: city.into(),
            comment_transition_patterns: Vec::new(),
            hearing_transition_patterns: Vec::new(),
            introduction_patterns: default_introduction_patterns(),
            end_patterns: default_end_patterns(),
            delta_words: default_delta_words(),
            k_often: default_k_often(),
            k_rare: default_k_rare(),
            arity: default_arity(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("locale config: {e}")))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("locale config: {e}")))
    }

    /// Reads a `.toml` or `.json` locale file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read locale config {}: {e}", path.display())))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("locale config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_words == 0 || self.k_often == 0 || self.k_rare == 0 {
            return Err(Error::Config(format!(
                "locale {}: delta_words, k_often and k_rare must be at least 1",
                self.city
            )));
        }
        Ok(())
    }

    /// Validates the thresholds and compiles every pattern list. Bad regexes
    /// fail here, never at match time.
    pub fn compile(&self) -> Result<CompiledLocale> {
        self.validate()?;
        let build = |what: &str, pats: &[String]| -> Result<RegexSet> {
            RegexSetBuilder::new(pats)
                .case_insensitive(true)
                .build()
                .map_err(|e| Error::Config(format!("locale {}: invalid {what} pattern: {e}", self.city)))
        };
        if self.comment_transition_patterns.is_empty() {
            log::warn!("locale {}: no comment-transition patterns configured", self.city);
        }
        Ok(CompiledLocale {
            comment: build("comment-transition", &self.comment_transition_patterns)?,
            hearing: build("hearing-transition", &self.hearing_transition_patterns)?,
            introduction: build("introduction", &self.introduction_patterns)?,
            end: build("end", &self.end_patterns)?,
            config: self.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct CompiledLocale {
    pub config: LocaleConfig,
    comment: RegexSet,
    hearing: RegexSet,
    introduction: RegexSet,
    end: RegexSet,
}

impl CompiledLocale {
    pub fn is_comment_transition(&self, text: &str) -> bool {
        self.comment.is_match(text)
    }
    pub fn is_hearing_transition(&self, text: &str) -> bool {
        self.hearing.is_match(text)
    }
    pub fn is_introduction(&self, text: &str) -> bool {
        self.introduction.is_match(text)
    }
    pub fn is_section_end(&self, text: &str) -> bool {
        self.end.is_match(text)
    }
}

// ---------------------------------------------------------------------------
// Feature computation

fn obs(predicate: Predicate, args: &[&str], value: f64) -> Atom {
    Atom::observed(predicate, args.iter().map(|s| s.to_string()).collect(), value)
}

/// `First`, `Precedes` and `Spoken`, all with value 1.
pub fn structural_atoms(meeting: &Meeting) -> Vec<Atom> {
    let m = meeting.meeting_id.as_str();
    let mut atoms = Vec::with_capacity(2 * meeting.utterances.len());
    if let Some(first) = meeting.utterances.first() {
        atoms.push(obs(Predicate::First, &[m, &first.utterance_id], 1.0));
    }
    for pair in meeting.utterances.windows(2) {
        atoms.push(obs(
            Predicate::Precedes,
            &[m, &pair[0].utterance_id, &pair[1].utterance_id],
            1.0,
        ));
    }
    for u in &meeting.utterances {
        atoms.push(obs(Predicate::Spoken, &[m, &u.utterance_id, &u.speaker_id], 1.0));
    }
    atoms
}

pub fn speaks_often_value(n: usize, k_often: usize) -> f64 {
    (n as f64 / k_often as f64).min(1.0)
}

pub fn speaks_rarely_value(n: usize, k_rare: usize) -> f64 {
    (1.0 - (n as f64 - 1.0) / k_rare as f64).clamp(0.0, 1.0)
}

pub fn speaks_often(meeting: &Meeting, cfg: &LocaleConfig) -> Vec<Atom> {
    meeting
        .speaker_counts()
        .into_iter()
        .filter(|(_, n)| *n > 0)
        .map(|(s, n)| obs(Predicate::SpeaksOften, &[&meeting.meeting_id, s], speaks_often_value(n, cfg.k_often)))
        .collect()
}

pub fn speaks_rarely(meeting: &Meeting, cfg: &LocaleConfig) -> Vec<Atom> {
    meeting
        .speaker_counts()
        .into_iter()
        .filter(|(_, n)| *n > 0)
        .map(|(s, n)| obs(Predicate::SpeaksRarely, &[&meeting.meeting_id, s], speaks_rarely_value(n, cfg.k_rare)))
        .collect()
}

/// Share of each speaker's utterances with at least `delta_words` words.
pub fn long_utterance_ratio(meeting: &Meeting, cfg: &LocaleConfig) -> Vec<Atom> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for u in &meeting.utterances {
        let e = tally.entry(u.speaker_id.as_str()).or_default();
        e.1 += 1;
        if u.word_count >= cfg.delta_words {
            e.0 += 1;
        }
    }
    tally
        .into_iter()
        .map(|(s, (long, n))| obs(Predicate::LongUtteranceRatio, &[&meeting.meeting_id, s], long as f64 / n as f64))
        .collect()
}

/// Binary transition and introduction atoms; zero-valued atoms are omitted.
pub fn transition_atoms(meeting: &Meeting, locale: &CompiledLocale) -> Vec<Atom> {
    let m = meeting.meeting_id.as_str();
    let mut atoms = Vec::new();
    for u in &meeting.utterances {
        let id = u.utterance_id.as_str();
        if locale.is_comment_transition(&u.text) {
            atoms.push(obs(Predicate::CommentTransition, &[m, id], 1.0));
        }
        if locale.is_hearing_transition(&u.text) {
            atoms.push(obs(Predicate::HearingTransition, &[m, id], 1.0));
        }
        if locale.is_introduction(&u.text) {
            atoms.push(obs(Predicate::Introduction, &[m, id], 1.0));
        }
    }
    atoms
}

/// Every locally computable observed atom of a meeting.
pub fn featurize_meeting(meeting: &Meeting, locale: &CompiledLocale) -> PredicateTable {
    let cfg = &locale.config;
    let mut atoms = structural_atoms(meeting);
    atoms.extend(speaks_often(meeting, cfg));
    atoms.extend(speaks_rarely(meeting, cfg));
    atoms.extend(long_utterance_ratio(meeting, cfg));
    atoms.extend(transition_atoms(meeting, locale));
    PredicateTable {
        meeting_id: meeting.meeting_id.clone(),
        atoms,
    }
}

// ---------------------------------------------------------------------------
// Predicate tables

/// Observed atoms for one meeting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredicateTable {
    pub meeting_id: String,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableFile {
    meeting_id: String,
    atoms: Vec<AtomRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AtomRecord {
    predicate: String,
    args: Vec<String>,
    value: f64,
}

impl PredicateTable {
    pub fn new(meeting_id: impl Into<String>) -> Self {
        PredicateTable {
            meeting_id: meeting_id.into(),
            atoms: Vec::new(),
        }
    }

    pub fn push(&mut self, predicate: Predicate, args: &[&str], value: f64) {
        self.atoms.push(obs(predicate, args, value));
    }

    /// Checks every atom against the meeting's utterances and speakers.
    pub fn validate_against(&self, meeting: &Meeting) -> Result<()> {
        if self.meeting_id != meeting.meeting_id {
            return Err(Error::validation(
                format!("predicate table {}", self.meeting_id),
                format!("applied to meeting {}", meeting.meeting_id),
            ));
        }
        let mut offenders = Vec::new();
        for a in &self.atoms {
            for (kind, arg) in a.predicate.signature().iter().zip(&a.args) {
                let ok = match kind {
                    ArgKind::Meeting => arg == &meeting.meeting_id,
                    ArgKind::Utterance => meeting.utterance(arg).is_some(),
                    ArgKind::Speaker => meeting.speakers.contains(arg),
                    ArgKind::Category | ArgKind::Role => true,
                };
                if !ok {
                    offenders.push(a.to_string());
                    break;
                }
            }
        }
        if offenders.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(
                format!("predicate table {}", self.meeting_id),
                format!("atoms reference unknown entities: {}", offenders.join("; ")),
            ))
        }
    }

    fn from_file(file: TableFile) -> Result<Self> {
        let ctx = format!("predicate table {}", file.meeting_id);
        let mut atoms = Vec::with_capacity(file.atoms.len());
        for rec in file.atoms {
            let predicate = Predicate::from_name(&rec.predicate)
                .ok_or_else(|| Error::parse(&ctx, format!("unknown predicate {:?}", rec.predicate)))?;
            if predicate.is_open() {
                return Err(Error::parse(&ctx, format!("{predicate} is inferred, not observed")));
            }
            if rec.args.len() != predicate.arity() {
                return Err(Error::parse(
                    &ctx,
                    format!("{predicate} takes {} arguments, got {}", predicate.arity(), rec.args.len()),
                ));
            }
            if rec.args[0] != file.meeting_id {
                return Err(Error::parse(&ctx, format!("atom {predicate}{:?} names another meeting", rec.args)));
            }
            for (kind, arg) in predicate.signature().iter().zip(&rec.args) {
                let bad = match kind {
                    ArgKind::Category => Category::parse(arg).is_none(),
                    ArgKind::Role => Role::parse(arg).is_none(),
                    _ => false,
                };
                if bad {
                    return Err(Error::parse(&ctx, format!("invalid category {arg:?} in {predicate}")));
                }
            }
            if !rec.value.is_finite() {
                return Err(Error::parse(&ctx, format!("non-finite value in {predicate}{:?}", rec.args)));
            }
            if !(0.0..=1.0).contains(&rec.value) {
                log::warn!("{ctx}: clamping {predicate}{:?} value {} into [0, 1]", rec.args, rec.value);
            }
            atoms.push(Atom::observed(predicate, rec.args, rec.value));
        }
        Ok(PredicateTable {
            meeting_id: file.meeting_id,
            atoms,
        })
    }

    fn to_file(&self) -> TableFile {
        TableFile {
            meeting_id: self.meeting_id.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    predicate: a.predicate.name().to_string(),
                    args: a.args.clone(),
                    value: a.value,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("table serializes")
    }
}

/// Parses one predicate-table document.
pub fn load_predicate_table(bytes: &[u8]) -> Result<PredicateTable> {
    let file: TableFile =
        serde_json::from_slice(bytes).map_err(|e| Error::parse("predicate table", e.to_string()))?;
    PredicateTable::from_file(file)
}

/// Parses a single table, a JSON array of tables, or newline-delimited tables.
pub fn load_predicate_tables(bytes: &[u8]) -> Result<Vec<PredicateTable>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("predicate table", e.to_string()))?;
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        let files: Vec<TableFile> =
            serde_json::from_str(trimmed).map_err(|e| Error::parse("predicate tables", e.to_string()))?;
        return files.into_iter().map(PredicateTable::from_file).collect();
    }
    if let Ok(file) = serde_json::from_str::<TableFile>(trimmed) {
        return Ok(vec![PredicateTable::from_file(file)?]);
    }
    trimmed
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| load_predicate_table(l.as_bytes()))
        .collect()
}

/// Newline-delimited serialization, one table per line.
pub fn serialize_predicate_tables(tables: &[PredicateTable]) -> String {
    let mut out = String::new();
    for t in tables {
        out.push_str(&t.to_json());
        out.push('\n');
    }
    out
}
