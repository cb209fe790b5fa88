//! Transcript data model: meetings, utterances, gold labels, and the steps
//! that turn diarized segments into utterances.
//!
//! An utterance is a maximal run of consecutive segments by one speaker. The
//! model only ever looks at utterance *order*; timestamps are carried along
//! for audit but never consulted.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A meeting section or a remark type. Both range over the same three values;
/// which of them are in play for remark types depends on the [`Arity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "PH")]
    Ph,
    Other,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Pc, Category::Ph, Category::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Pc => "PC",
            Category::Ph => "PH",
            Category::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PC" => Some(Category::Pc),
            "PH" => Some(Category::Ph),
            "Other" => Some(Category::Other),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Public,
    Other,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Public, Role::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Public => "Public",
            Role::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Public" => Some(Role::Public),
            "Other" => Some(Role::Other),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of remark classes: `{PC, Other}` or `{PC, PH, Other}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Arity {
    Two,
    Three,
}

impl Arity {
    /// Remark categories available at this arity, in tie-break order (Other last).
    pub fn remark_kinds(self) -> &'static [Category] {
        match self {
            Arity::Two => &[Category::Pc, Category::Other],
            Arity::Three => &Category::ALL,
        }
    }

    pub fn has_remark(self, c: Category) -> bool {
        self.remark_kinds().contains(&c)
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Arity::Two => 2,
            Arity::Three => 3,
        }
    }
}

impl TryFrom<u8> for Arity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            2 => Ok(Arity::Two),
            3 => Ok(Arity::Three),
            other => Err(format!("arity must be 2 or 3, got {other}")),
        }
    }
}

impl From<Arity> for u8 {
    fn from(a: Arity) -> u8 {
        a.as_u8()
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Gold remark type from a section and a speaker role.
///
/// A public speaker's utterance is a public comment inside a comment period,
/// a hearing remark inside a hearing (three-class task only), and `Other`
/// everywhere else.
pub fn derive_gold_label(section: Category, role: Role, arity: Arity) -> Category {
    match (role, section, arity) {
        (Role::Public, Category::Pc, _) => Category::Pc,
        (Role::Public, Category::Ph, Arity::Three) => Category::Ph,
        _ => Category::Other,
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub utterance_id: String,
    pub meeting_id: String,
    pub index: usize,
    pub speaker_id: String,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    pub text: String,
    pub word_count: usize,
}

impl Utterance {
    pub fn new(
        meeting_id: impl Into<String>,
        utterance_id: impl Into<String>,
        index: usize,
        speaker_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Utterance {
            utterance_id: utterance_id.into(),
            meeting_id: meeting_id.into(),
            index,
            speaker_id: speaker_id.into(),
            start_s: None,
            end_s: None,
            word_count: word_count(&text),
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Meeting {
    pub meeting_id: String,
    pub city: String,
    pub held_at: NaiveDateTime,
    pub utterances: Vec<Utterance>,
    pub speakers: BTreeSet<String>,
}

impl Meeting {
    /// Builds a meeting from utterances already in order, renumbering their
    /// indices and deriving the speaker set.
    pub fn new(
        meeting_id: impl Into<String>,
        city: impl Into<String>,
        held_at: NaiveDateTime,
        mut utterances: Vec<Utterance>,
    ) -> Result<Self> {
        let meeting_id = meeting_id.into();
        for (i, u) in utterances.iter_mut().enumerate() {
            u.index = i;
            u.meeting_id = meeting_id.clone();
        }
        let speakers = utterances.iter().map(|u| u.speaker_id.clone()).collect();
        let meeting = Meeting {
            meeting_id,
            city: city.into(),
            held_at,
            utterances,
            speakers,
        };
        meeting.validate()?;
        Ok(meeting)
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("meeting {}", self.meeting_id);
        let mut seen = HashSet::new();
        for (i, u) in self.utterances.iter().enumerate() {
            if u.index != i {
                return Err(Error::validation(
                    ctx(),
                    format!("utterance {} has index {} at position {i}", u.utterance_id, u.index),
                ));
            }
            if !seen.insert(u.utterance_id.as_str()) {
                return Err(Error::validation(
                    ctx(),
                    format!("duplicate utterance_id {}", u.utterance_id),
                ));
            }
            if !self.speakers.contains(&u.speaker_id) {
                return Err(Error::validation(
                    ctx(),
                    format!(
                        "utterance {} references unknown speaker_id {}",
                        u.utterance_id, u.speaker_id
                    ),
                ));
            }
            if let (Some(s), Some(e)) = (u.start_s, u.end_s) {
                if e < s {
                    return Err(Error::validation(
                        ctx(),
                        format!("utterance {} ends before it starts", u.utterance_id),
                    ));
                }
            }
            if u.start_s.is_some_and(|s| s < 0.0) {
                return Err(Error::validation(
                    ctx(),
                    format!("utterance {} has a negative start time", u.utterance_id),
                ));
            }
        }
        Ok(())
    }

    /// Utterance count per speaker.
    pub fn speaker_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts: BTreeMap<&str, usize> =
            self.speakers.iter().map(|s| (s.as_str(), 0)).collect();
        for u in &self.utterances {
            *counts.entry(u.speaker_id.as_str()).or_default() += 1;
        }
        counts
    }

    pub fn utterance(&self, utterance_id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.utterance_id == utterance_id)
    }
}

/// One gold annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub section: Category,
    pub role: Role,
    /// Three-class remark type; the binary label is derived on demand.
    pub remark_type: Category,
}

impl LabelRecord {
    pub fn new(section: Category, role: Role) -> Self {
        LabelRecord {
            section,
            role,
            remark_type: derive_gold_label(section, role, Arity::Three),
        }
    }

    pub fn remark(&self, arity: Arity) -> Category {
        match (arity, self.remark_type) {
            (Arity::Two, Category::Ph) => Category::Other,
            (_, r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelSet {
    pub utterances: BTreeMap<String, LabelRecord>,
    pub speaker_roles: BTreeMap<String, Role>,
}

impl LabelSet {
    /// Checks coverage against `meeting` and derives the per-speaker roles.
    ///
    /// A speaker holds one role per meeting; a speaker with any utterance
    /// annotated `Public` is taken to be public.
    pub fn for_meeting(meeting: &Meeting, utterances: BTreeMap<String, LabelRecord>) -> Result<Self> {
        let ctx = || format!("labels of meeting {}", meeting.meeting_id);
        let known: HashSet<&str> = meeting.utterances.iter().map(|u| u.utterance_id.as_str()).collect();
        let unknown: Vec<&str> = utterances
            .keys()
            .map(String::as_str)
            .filter(|id| !known.contains(id))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::validation(ctx(), format!("unknown utterance ids {unknown:?}")));
        }
        let missing: Vec<&str> = meeting
            .utterances
            .iter()
            .map(|u| u.utterance_id.as_str())
            .filter(|id| !utterances.contains_key(*id))
            .collect();
        if !missing.is_empty() {
            return Err(Error::validation(ctx(), format!("unlabeled utterances {missing:?}")));
        }

        let mut speaker_roles: BTreeMap<String, Role> =
            meeting.speakers.iter().map(|s| (s.clone(), Role::Other)).collect();
        for u in &meeting.utterances {
            if utterances[&u.utterance_id].role == Role::Public {
                speaker_roles.insert(u.speaker_id.clone(), Role::Public);
            }
        }
        Ok(LabelSet {
            utterances,
            speaker_roles,
        })
    }

    pub fn get(&self, utterance_id: &str) -> Option<&LabelRecord> {
        self.utterances.get(utterance_id)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub meetings: Vec<Meeting>,
    pub labels: BTreeMap<String, LabelSet>,
    pub cities: BTreeSet<String>,
}

impl Corpus {
    pub fn new(meetings: Vec<Meeting>, labels: BTreeMap<String, LabelSet>) -> Result<Self> {
        let mut ids = HashSet::new();
        for m in &meetings {
            if !ids.insert(m.meeting_id.as_str()) {
                return Err(Error::validation("corpus", format!("duplicate meeting_id {}", m.meeting_id)));
            }
        }
        if let Some(orphan) = labels.keys().find(|id| !ids.contains(id.as_str())) {
            return Err(Error::validation("corpus", format!("labels for unknown meeting {orphan}")));
        }
        let cities = meetings.iter().map(|m| m.city.clone()).collect();
        Ok(Corpus {
            meetings,
            labels,
            cities,
        })
    }

    pub fn meeting(&self, meeting_id: &str) -> Option<&Meeting> {
        self.meetings.iter().find(|m| m.meeting_id == meeting_id)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.meetings.iter().all(|m| self.labels.contains_key(&m.meeting_id))
    }

    /// A corpus holding only the named meetings (and their labels), in the
    /// order given.
    pub fn subset<'a>(&self, meeting_ids: impl IntoIterator<Item = &'a str>) -> Result<Corpus> {
        let mut meetings = Vec::new();
        let mut labels = BTreeMap::new();
        for id in meeting_ids {
            let m = self
                .meeting(id)
                .ok_or_else(|| Error::validation("corpus", format!("unknown meeting {id}")))?;
            meetings.push(m.clone());
            if let Some(l) = self.labels.get(id) {
                labels.insert(id.to_string(), l.clone());
            }
        }
        Corpus::new(meetings, labels)
    }
}

// ---------------------------------------------------------------------------
// Segments

/// A diarized speech segment, the unit that ASR emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSegment {
    #[serde(alias = "speaker")]
    pub speaker_id: String,
    pub text: String,
    #[serde(default, alias = "start", skip_serializing_if = "Option::is_none")]
    pub start_s: Option<f64>,
    #[serde(default, alias = "end", skip_serializing_if = "Option::is_none")]
    pub end_s: Option<f64>,
}

impl RawSegment {
    pub fn new(speaker_id: impl Into<String>, text: impl Into<String>) -> Self {
        RawSegment {
            speaker_id: speaker_id.into(),
            text: text.into(),
            start_s: None,
            end_s: None,
        }
    }
}

pub const DEFAULT_HALLUCINATION_MARKERS: [&str; 4] = ["www.", "openai", "https", "thanks for watching"];

/// Drops segments that carry a known ASR hallucination marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationFilter {
    pub markers: Vec<String>,
}

impl Default for HallucinationFilter {
    fn default() -> Self {
        HallucinationFilter {
            markers: DEFAULT_HALLUCINATION_MARKERS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl HallucinationFilter {
    pub fn is_hallucination(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.markers.iter().any(|m| lower.contains(&m.to_lowercase()))
    }

    pub fn clean(&self, segments: Vec<RawSegment>) -> Vec<RawSegment> {
        segments
            .into_iter()
            .filter(|s| !self.is_hallucination(&s.text))
            .collect()
    }
}

/// [`HallucinationFilter::clean`] with the default marker list.
pub fn clean_segments(segments: Vec<RawSegment>) -> Vec<RawSegment> {
    HallucinationFilter::default().clean(segments)
}

/// Merges each maximal run of same-speaker segments into one utterance.
/// Utterance ids are `{meeting_id}-u{index}`.
pub fn group_snippets(meeting_id: &str, segments: &[RawSegment]) -> Vec<Utterance> {
    let mut out: Vec<Utterance> = Vec::new();
    for seg in segments {
        match out.last_mut() {
            Some(last) if last.speaker_id == seg.speaker_id => {
                let piece = seg.text.trim();
                if !piece.is_empty() {
                    if !last.text.is_empty() {
                        last.text.push(' ');
                    }
                    last.text.push_str(piece);
                }
                last.word_count = word_count(&last.text);
                if last.start_s.is_none() {
                    last.start_s = seg.start_s;
                }
                if seg.end_s.is_some() {
                    last.end_s = seg.end_s;
                }
            }
            _ => {
                let index = out.len();
                let mut u = Utterance::new(
                    meeting_id,
                    format!("{meeting_id}-u{index}"),
                    index,
                    seg.speaker_id.clone(),
                    seg.text.trim(),
                );
                u.start_s = seg.start_s;
                u.end_s = seg.end_s;
                out.push(u);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
struct CorpusFile {
    #[serde(default)]
    meetings: Vec<MeetingRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<String, LabelFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeetingRecord {
    meeting_id: String,
    city: String,
    held_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speakers: Option<Vec<String>>,
    utterances: Vec<UtteranceRecord>,
    /// Only used by the newline-delimited per-meeting form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<LabelFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UtteranceRecord {
    utterance_id: String,
    index: usize,
    speaker_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_s: Option<f64>,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelFile {
    utterances: BTreeMap<String, LabelFileRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelFileRecord {
    section: Category,
    role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    remark_type: Option<Category>,
}

pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

pub fn format_datetime(dt: &NaiveDateTime) -> String {
    dt.format("%Y-%m-%dT%H:%M:%S").to_string()
}

fn meeting_from_record(rec: MeetingRecord) -> Result<(Meeting, Option<LabelSet>)> {
    let ctx = format!("meeting {}", rec.meeting_id);
    let held_at = parse_datetime(&rec.held_at)
        .ok_or_else(|| Error::parse(&ctx, format!("field held_at: not an ISO-8601 date: {:?}", rec.held_at)))?;

    let mut records = rec.utterances;
    records.sort_by_key(|u| u.index);
    if let Some(w) = records.windows(2).find(|w| w[0].index == w[1].index) {
        return Err(Error::validation(&ctx, format!("duplicate utterance index {}", w[0].index)));
    }
    let utterances: Vec<Utterance> = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| Utterance {
            word_count: word_count(&r.text),
            utterance_id: r.utterance_id,
            meeting_id: rec.meeting_id.clone(),
            index: i,
            speaker_id: r.speaker_id,
            start_s: r.start_s,
            end_s: r.end_s,
            text: r.text,
        })
        .collect();
    let speakers: BTreeSet<String> = match rec.speakers {
        Some(list) => list.into_iter().collect(),
        None => utterances.iter().map(|u| u.speaker_id.clone()).collect(),
    };
    let mut meeting = Meeting {
        meeting_id: rec.meeting_id,
        city: rec.city,
        held_at,
        utterances,
        speakers,
    };
    meeting.validate()?;
    // Listed speakers who never speak carry no signal.
    meeting.speakers = meeting.utterances.iter().map(|u| u.speaker_id.clone()).collect();
    let labels = rec.labels.map(|l| label_set_from_file(&meeting, l)).transpose()?;
    Ok((meeting, labels))
}

fn label_set_from_file(meeting: &Meeting, file: LabelFile) -> Result<LabelSet> {
    let records = file
        .utterances
        .into_iter()
        .map(|(id, r)| {
            let mut rec = LabelRecord::new(r.section, r.role);
            if let Some(rt) = r.remark_type {
                rec.remark_type = rt;
            }
            (id, rec)
        })
        .collect();
    LabelSet::for_meeting(meeting, records)
}

fn json_error(context: &str, e: serde_json::Error) -> Error {
    Error::parse(context, e.to_string())
}

/// Parses a corpus document: either one JSON object with `meetings` and
/// optional `labels`, or newline-delimited meeting objects (each may carry
/// its own `labels`).
pub fn parse_corpus(bytes: &[u8]) -> Result<Corpus> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("corpus", e.to_string()))?;
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Corpus::new(Vec::new(), BTreeMap::new());
    }

    let value: std::result::Result<serde_json::Value, _> = serde_json::from_str(text);
    let records: Vec<(MeetingRecord, Option<LabelFile>)> = match value {
        Ok(v) if v.get("meeting_id").is_none() => {
            let file: CorpusFile = serde_json::from_value(v).map_err(|e| json_error("corpus", e))?;
            let mut labels = file.labels;
            let pairs: Vec<_> = file
                .meetings
                .into_iter()
                .map(|m| {
                    let l = labels.remove(&m.meeting_id);
                    (m, l)
                })
                .collect();
            if let Some(orphan) = labels.keys().next() {
                return Err(Error::validation("corpus", format!("labels for unknown meeting {orphan}")));
            }
            pairs
        }
        _ => {
            let mut out = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: MeetingRecord =
                    serde_json::from_str(line).map_err(|e| json_error(&format!("corpus line {}", lineno + 1), e))?;
                out.push((rec, None));
            }
            out
        }
    };

    let mut meetings = Vec::with_capacity(records.len());
    let mut labels = BTreeMap::new();
    for (mut rec, outer) in records {
        if outer.is_some() {
            rec.labels = outer;
        }
        let (meeting, l) = meeting_from_record(rec)?;
        if let Some(l) = l {
            labels.insert(meeting.meeting_id.clone(), l);
        }
        meetings.push(meeting);
    }
    Corpus::new(meetings, labels)
}

fn meeting_to_record(m: &Meeting) -> MeetingRecord {
    MeetingRecord {
        meeting_id: m.meeting_id.clone(),
        city: m.city.clone(),
        held_at: format_datetime(&m.held_at),
        speakers: None,
        utterances: m
            .utterances
            .iter()
            .map(|u| UtteranceRecord {
                utterance_id: u.utterance_id.clone(),
                index: u.index,
                speaker_id: u.speaker_id.clone(),
                start_s: u.start_s,
                end_s: u.end_s,
                text: u.text.clone(),
            })
            .collect(),
        labels: None,
    }
}

fn label_set_to_file(l: &LabelSet) -> LabelFile {
    LabelFile {
        utterances: l
            .utterances
            .iter()
            .map(|(id, r)| {
                (
                    id.clone(),
                    LabelFileRecord {
                        section: r.section,
                        role: r.role,
                        remark_type: Some(r.remark_type),
                    },
                )
            })
            .collect(),
    }
}

/// Serializes to the single-document corpus form.
pub fn serialize_corpus(corpus: &Corpus) -> Vec<u8> {
    let file = CorpusFile {
        meetings: corpus.meetings.iter().map(meeting_to_record).collect(),
        labels: corpus
            .labels
            .iter()
            .map(|(id, l)| (id.clone(), label_set_to_file(l)))
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("corpus serializes");
    out.push(b'\n');
    out
}
