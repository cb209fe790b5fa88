//! Seeded generator of labeled synthetic meetings.
//!
//! Texts are template-built: the model only looks at phrase matches, speaker
//! counts and utterance lengths, so templates exercise every rule.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Category, Corpus, LabelRecord, LabelSet, Meeting, Role, Utterance};
use crate::error::{Error, Result};
use crate::featurize::{LocaleConfig, Predicate, PredicateTable};
use crate::logic::{GroundAtom, GroundPotential, HardConstraint, Mrf, RuleInfo};

/// Inclusive integer range `[lo, hi]`.
pub type Span = [usize; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CityProfile {
    pub city: String,

    // Section grammar.
    pub pc_probability: f64,
    /// Hearings per meeting: `max_hearings` independent draws.
    pub max_hearings: usize,
    pub hearing_probability: f64,
    pub agenda_items: Span,
    pub procedural_len: Span,

    // Speakers.
    pub officials: Span,
    pub public_per_comment: Span,
    pub public_per_hearing: Span,
    pub official_words: Span,
    pub official_long_probability: f64,
    pub official_long_words: Span,
    pub public_words: Span,
    pub public_second_probability: f64,
    pub introduction_probability: f64,
    pub chair_interjection_probability: f64,
    pub end_phrase_probability: f64,

    // Phrase bank.
    pub comment_phrases: Vec<String>,
    pub comment_paraphrases: Vec<String>,
    pub hearing_phrases: Vec<String>,
    pub hearing_paraphrases: Vec<String>,
    pub end_phrases: Vec<String>,
    pub decoy_phrases: Vec<String>,
    /// Chance a transition uses a paraphrase the locale patterns miss.
    pub phrase_noise: f64,
    /// Chance per procedural section of one decoy utterance.
    pub decoy_probability: f64,
    pub comment_patterns: Vec<String>,
    pub hearing_patterns: Vec<String>,

    // Simulated AI signals.
    /// Per-utterance chance the SectionGenAI label is replaced.
    pub genai_flip: f64,
    /// Per-boundary chance the SectionGenAI span edge moves.
    pub genai_jitter: f64,
    /// Per-utterance chance the RemarkTypePLM label is replaced.
    pub plm_flip: f64,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for CityProfile {
    fn default() -> Self {
        CityProfile {
            city: "lakeside".into(),
            pc_probability: 0.9,
            max_hearings: 2,
            hearing_probability: 0.3,
            agenda_items: [2, 4],
            procedural_len: [4, 9],
            officials: [5, 7],
            public_per_comment: [2, 6],
            public_per_hearing: [1, 3],
            official_words: [3, 40],
            official_long_probability: 0.12,
            official_long_words: [80, 160],
            public_words: [50, 190],
            public_second_probability: 0.15,
            introduction_probability: 0.7,
            chair_interjection_probability: 0.8,
            end_phrase_probability: 0.6,
            comment_phrases: strings(&[
                "We will now move to public comment.",
                "Next on the agenda is general public comment.",
                "Let's open the floor for public comment.",
            ]),
            comment_paraphrases: strings(&[
                "We have several speakers signed up, so let's hear from them.",
                "Now we'll hear from residents who came tonight.",
            ]),
            hearing_phrases: strings(&[
                "I will now open the public hearing on this item.",
                "The public hearing is now open.",
            ]),
            hearing_paraphrases: strings(&["We'll take testimony on this item now."]),
            end_phrases: strings(&["That concludes public comment.", "The public hearing is closed."]),
            decoy_phrases: strings(&["Written public comment can be sent to the clerk."]),
            phrase_noise: 0.1,
            decoy_probability: 0.15,
            comment_patterns: strings(&[r"public comment"]),
            hearing_patterns: strings(&[r"open(s|ing)? the public hearing", r"public hearing is (now )?open"]),
            genai_flip: 0.05,
            genai_jitter: 0.3,
            plm_flip: 0.1,
        }
    }
}

impl CityProfile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: CityProfile = toml::from_str(s).map_err(|e| Error::Config(format!("city profile: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: CityProfile = serde_json::from_str(s).map_err(|e| Error::Config(format!("city profile: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// Reads a `.toml` or `.json` profile, or a list of them under `profiles`.
    pub fn load_all(path: &Path) -> Result<Vec<Self>> {
        #[derive(Deserialize)]
        struct Many {
            profiles: Vec<CityProfile>,
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read profile {}: {e}", path.display())))?;
        let json = path.extension().and_then(|e| e.to_str()) == Some("json");
        let many: std::result::Result<Many, String> = if json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let profiles = match many {
            Ok(m) => m.profiles,
            Err(_) if json => vec![Self::from_json_str(&text)?],
            Err(_) => vec![Self::from_toml_str(&text)?],
        };
        for p in &profiles {
            p.validate()?;
        }
        Ok(profiles)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("pc_probability", self.pc_probability),
            ("hearing_probability", self.hearing_probability),
            ("official_long_probability", self.official_long_probability),
            ("public_second_probability", self.public_second_probability),
            ("introduction_probability", self.introduction_probability),
            ("chair_interjection_probability", self.chair_interjection_probability),
            ("end_phrase_probability", self.end_phrase_probability),
            ("phrase_noise", self.phrase_noise),
            ("decoy_probability", self.decoy_probability),
            ("genai_flip", self.genai_flip),
            ("genai_jitter", self.genai_jitter),
            ("plm_flip", self.plm_flip),
        ];
        let bad = |m: String| Err(Error::Config(format!("profile {}: {m}", self.city)));
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        let spans = [
            ("agenda_items", self.agenda_items),
            ("procedural_len", self.procedural_len),
            ("officials", self.officials),
            ("official_words", self.official_words),
            ("official_long_words", self.official_long_words),
            ("public_words", self.public_words),
            ("public_per_comment", self.public_per_comment),
            ("public_per_hearing", self.public_per_hearing),
        ];
        for (name, [lo, hi]) in spans {
            if lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] is empty"));
            }
        }
        for (name, [lo, _]) in &spans[..6] {
            if *lo == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.officials[0] < 2 {
            return bad("need at least two officials".into());
        }
        for (name, v) in [
            ("comment_phrases", &self.comment_phrases),
            ("hearing_phrases", &self.hearing_phrases),
            ("end_phrases", &self.end_phrases),
        ] {
            if v.is_empty() {
                return bad(format!("{name} is empty"));
            }
        }
        if self.city.is_empty() {
            return bad("city id is empty".into());
        }
        Ok(())
    }

    /// Locale whose patterns match this profile's phrase bank.
    pub fn locale(&self) -> LocaleConfig {
        let mut l = LocaleConfig::new(&self.city);
        l.comment_transition_patterns = self.comment_patterns.clone();
        l.hearing_transition_patterns = self.hearing_patterns.clone();
        for e in &self.end_phrases {
            let p = regex::escape(e.trim_end_matches('.'));
            if !l.end_patterns.contains(&p) {
                l.end_patterns.push(p);
            }
        }
        l
    }
}

fn city(name: &str, f: impl FnOnce(&mut CityProfile)) -> CityProfile {
    let mut p = CityProfile {
        city: name.into(),
        ..Default::default()
    };
    f(&mut p);
    p
}

/// A profile with two to four hearings in most meetings.
pub fn frequent_hearings_profile() -> CityProfile {
    city("eastbay", |p| {
        p.max_hearings = 4;
        p.hearing_probability = 0.7;
        p.public_per_hearing = [2, 4];
        p.comment_phrases = strings(&["Open forum is now open.", "We move to open forum."]);
        p.comment_patterns = strings(&[r"open forum"]);
        p.end_phrases = strings(&["That closes open forum.", "The public hearing is closed."]);
        p.decoy_phrases = strings(&["Speaker cards for open forum are at the back."]);
    })
}

/// Seven cities that differ in phrasing, hearing frequency and crowd size.
/// `harborview` rarely holds hearings, `eastbay` holds many.
pub fn default_profiles() -> Vec<CityProfile> {
    vec![
        city("harborview", |p| {
            p.max_hearings = 1;
            p.hearing_probability = 0.1;
            p.comment_phrases = strings(&["Next is general public comment.", "We now turn to public comment."]);
        }),
        frequent_hearings_profile(),
        city("lakeside", |_| {}),
        city("riverfalls", |p| {
            p.comment_phrases = strings(&["We now turn to citizen communications.", "Citizen communication is next."]);
            p.comment_patterns = strings(&[r"citizen communications?"]);
            p.end_phrases = strings(&["That ends citizen communications."]);
            p.decoy_phrases = strings(&["Please sign up for citizen communications with the clerk."]);
            p.public_per_comment = [1, 4];
        }),
        city("millbrook", |p| {
            p.comment_phrases = strings(&["The next item is audience participation."]);
            p.comment_patterns = strings(&[r"audience participation"]);
            p.end_phrases = strings(&["Audience participation is closed."]);
            p.decoy_phrases = strings(&["Audience participation rules are posted online."]);
            p.pc_probability = 0.75;
            p.introduction_probability = 0.5;
        }),
        city("pinecrest", |p| {
            p.comment_phrases = strings(&["We will take comments from the public now.", "Comments from the public, please."]);
            p.comment_patterns = strings(&[r"comments? from the public"]);
            p.end_phrases = strings(&["No more comments from the public, so we move on."]);
            p.decoy_phrases = strings(&["We received three comments from the public by email."]);
            p.public_per_comment = [3, 8];
            p.hearing_probability = 0.2;
        }),
        city("summit", |p| {
            p.comment_phrases = strings(&["This is the public input period.", "We now open public input."]);
            p.comment_patterns = strings(&[r"public input"]);
            p.end_phrases = strings(&["Public input is closed."]);
            p.decoy_phrases = strings(&["Public input on the budget closes Friday."]);
            p.officials = [6, 9];
            p.official_long_probability = 0.2;
        }),
    ]
}

// ---------------------------------------------------------------------------
// Meeting generation

const FILLER: &[&str] = &[
    "the", "budget", "housing", "street", "park", "council", "traffic", "safety", "library", "water", "rent",
    "neighborhood", "school", "plan", "zoning", "tax", "bus", "we", "need", "please", "consider", "our", "city",
    "families", "community", "about", "this", "proposal", "funding", "support", "oppose", "project", "very",
    "important", "for", "and", "to", "of", "in", "on",
];
const PUBLIC_OPENERS: &[&str] = &[
    "I want to talk about",
    "I am here tonight because of",
    "Thank you for having me, my concern is",
    "I am speaking in support of",
    "I strongly oppose",
];
const INTRODUCTIONS: &[&str] = &["My name is {name} and I live in district {d}.", "Hi, my name is {name}.", "I live on {name} Street.", "I'm a resident of ward {d}."];
const OFFICIAL_SHORT: &[&str] = &[
    "Thank you.",
    "Motion to approve.",
    "Second.",
    "All in favor?",
    "The item passes unanimously.",
    "Next item, please.",
    "Any discussion from the council?",
    "Roll call, please.",
    "I have a question for staff.",
    "Aye.",
];
const STAFF_REPORT: &[&str] = &["Staff recommends approval of the contract.", "This report summarizes the fiscal impact."];
const CHAIR_BETWEEN: &[&str] = &["Thank you. Next speaker, please.", "Thank you for your comments.", "Next caller."];
const NAMES: &[&str] = &["Alex", "Jordan", "Maria", "Wei", "Sam", "Priya", "Chris", "Dana", "Luis", "Kim"];

fn pick<'a, T>(rng: &mut ChaCha8Rng, v: &'a [T]) -> &'a T {
    v.choose(rng).expect("non-empty bank")
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: Span) -> usize {
    rng.gen_range(lo..=hi)
}

/// Pads `head` with filler words until it has `words` whitespace tokens.
fn pad(rng: &mut ChaCha8Rng, head: String, words: usize) -> String {
    let mut out = head;
    let mut n = out.split_whitespace().count();
    while n < words {
        out.push(' ');
        out.push_str(pick(rng, FILLER));
        n += 1;
    }
    out
}

struct Line {
    speaker: String,
    text: String,
    section: Category,
    role: Role,
}

struct Builder<'p> {
    p: &'p CityProfile,
    rng: ChaCha8Rng,
    lines: Vec<Line>,
    officials: Vec<String>,
    next_public: usize,
}

impl Builder<'_> {
    fn push(&mut self, speaker: String, text: String, section: Category, role: Role) {
        self.lines.push(Line { speaker, text, section, role });
    }

    /// An official other than whoever spoke last.
    fn official(&mut self) -> String {
        let last = self.lines.last().map(|l| l.speaker.clone());
        loop {
            let s = pick(&mut self.rng, &self.officials).clone();
            if Some(&s) != last.as_ref() {
                return s;
            }
        }
    }

    fn chair(&self) -> String {
        self.officials[0].clone()
    }

    fn official_text(&mut self) -> String {
        if self.rng.gen_bool(self.p.official_long_probability) {
            let words = draw(&mut self.rng, self.p.official_long_words);
            let head = pick(&mut self.rng, STAFF_REPORT).to_string();
            pad(&mut self.rng, head, words)
        } else {
            let words = draw(&mut self.rng, self.p.official_words);
            let head = pick(&mut self.rng, OFFICIAL_SHORT).to_string();
            pad(&mut self.rng, head, words)
        }
    }

    fn procedural(&mut self, opening: Option<String>) {
        let n = draw(&mut self.rng, self.p.procedural_len);
        let decoy = if !self.p.decoy_phrases.is_empty() && self.rng.gen_bool(self.p.decoy_probability) {
            Some(self.rng.gen_range(0..n))
        } else {
            None
        };
        for i in 0..n {
            let s = if i == 0 && opening.is_some() { self.chair() } else { self.official() };
            let text = match (&opening, decoy) {
                (Some(t), _) if i == 0 => t.clone(),
                (_, Some(d)) if d == i => pick(&mut self.rng, &self.p.decoy_phrases).clone(),
                _ => self.official_text(),
            };
            // The chair may talk twice in a row after an end phrase.
            if self.lines.last().is_some_and(|l| l.speaker == s) {
                let t = self.official();
                let text = self.official_text();
                self.push(t, text, Category::Other, Role::Other);
            }
            self.push(s, text, Category::Other, Role::Other);
        }
    }

    fn transition(&mut self, kind: Category) -> String {
        let (phrases, paraphrases) = match kind {
            Category::Pc => (&self.p.comment_phrases, &self.p.comment_paraphrases),
            _ => (&self.p.hearing_phrases, &self.p.hearing_paraphrases),
        };
        if !paraphrases.is_empty() && self.rng.gen_bool(self.p.phrase_noise) {
            pick(&mut self.rng, paraphrases).clone()
        } else {
            pick(&mut self.rng, phrases).clone()
        }
    }

    fn public_text(&mut self, introduce: bool) -> String {
        let words = draw(&mut self.rng, self.p.public_words);
        let mut head = String::new();
        if introduce {
            let name = pick(&mut self.rng, NAMES);
            let d = self.rng.gen_range(1..=9).to_string();
            head = pick(&mut self.rng, INTRODUCTIONS).replace("{name}", name).replace("{d}", &d);
            head.push(' ');
        }
        head.push_str(pick(&mut self.rng, PUBLIC_OPENERS));
        pad(&mut self.rng, head, words)
    }

    /// A comment period or hearing. Returns the closing phrase, if any, for
    /// the next procedural section to open with.
    fn public_period(&mut self, kind: Category) -> Option<String> {
        let chair = self.chair();
        if self.lines.last().is_some_and(|l| l.speaker == chair) {
            let s = self.official();
            let text = self.official_text();
            self.push(s, text, Category::Other, Role::Other);
        }
        let t = self.transition(kind);
        self.push(chair.clone(), t, kind, Role::Other);
        if kind == Category::Ph && self.rng.gen_bool(0.5) {
            let s = self.official();
            let words = draw(&mut self.rng, self.p.official_long_words);
            let head = pick(&mut self.rng, STAFF_REPORT).to_string();
            let text = pad(&mut self.rng, head, words);
            self.push(s, text, kind, Role::Other);
        }
        let crowd = match kind {
            Category::Pc => self.p.public_per_comment,
            _ => self.p.public_per_hearing,
        };
        let n = draw(&mut self.rng, crowd);
        for k in 0..n {
            let speaker = format!("public-{}", self.next_public);
            self.next_public += 1;
            if k > 0 && (self.rng.gen_bool(self.p.chair_interjection_probability) || self.lines.last().is_some_and(|l| l.role == Role::Public)) {
                let text = pick(&mut self.rng, CHAIR_BETWEEN).to_string();
                self.push(chair.clone(), text, kind, Role::Other);
            }
            let intro = self.rng.gen_bool(self.p.introduction_probability);
            let text = self.public_text(intro);
            self.push(speaker.clone(), text, kind, Role::Public);
            if self.rng.gen_bool(self.p.public_second_probability) {
                let q = pad(&mut self.rng, "Can you clarify that point?".into(), 5);
                let s = self.official();
                self.push(s, q, kind, Role::Other);
                let text = self.public_text(false);
                self.push(speaker, text, kind, Role::Public);
            }
        }
        if self.rng.gen_bool(self.p.end_phrase_probability) {
            Some(pick(&mut self.rng, &self.p.end_phrases).clone())
        } else {
            None
        }
    }
}

/// Simulated SectionGenAI: gold sections with jittered span edges and random
/// replacements, one atom per utterance.
fn simulate_genai(rng: &mut ChaCha8Rng, p: &CityProfile, gold: &[Category]) -> Vec<Category> {
    let mut out = gold.to_vec();
    let n = gold.len();
    for i in 1..n {
        if gold[i] != gold[i - 1] && rng.gen_bool(p.genai_jitter) {
            let shift = rng.gen_range(1..=2usize);
            if rng.gen_bool(0.5) {
                // Edge moves later: the new section starts late.
                for o in out.iter_mut().skip(i).take(shift) {
                    *o = gold[i - 1];
                }
            } else {
                // Edge moves earlier.
                for o in out.iter_mut().take(i).skip(i.saturating_sub(shift)) {
                    *o = gold[i];
                }
            }
        }
    }
    for o in out.iter_mut() {
        if rng.gen_bool(p.genai_flip) {
            let others: Vec<Category> = Category::ALL.into_iter().filter(|c| c != o).collect();
            *o = *pick(rng, &others);
        }
    }
    out
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // SplitMix64 finalizer over the combined words.
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One labeled meeting plus its simulated AI-signal table.
pub fn generate_meeting(profile: &CityProfile, meeting_id: &str, held_at: chrono::NaiveDateTime, seed: u64) -> Result<(Meeting, LabelSet, PredicateTable)> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_off = draw(&mut rng, profile.officials);
    let mut b = Builder {
        p: profile,
        officials: (0..n_off).map(|i| format!("official-{i}")).collect(),
        rng,
        lines: Vec::new(),
        next_public: 0,
    };

    let mut periods = Vec::new();
    if b.rng.gen_bool(profile.pc_probability) {
        periods.push(Category::Pc);
    }
    for _ in 0..profile.max_hearings {
        if b.rng.gen_bool(profile.hearing_probability) {
            periods.push(Category::Ph);
        }
    }
    periods.shuffle(&mut b.rng);
    let agenda = draw(&mut b.rng, profile.agenda_items).max(periods.len() + 1);
    // Agenda items between periods; public periods never open the meeting.
    let mut slots = vec![None; agenda];
    let mut free: Vec<usize> = (1..=agenda).collect();
    free.shuffle(&mut b.rng);
    let mut chosen: Vec<usize> = free.into_iter().take(periods.len()).collect();
    chosen.sort_unstable();
    for (slot, kind) in chosen.into_iter().zip(periods) {
        if slot < agenda {
            slots[slot] = Some(kind);
        } else {
            slots.push(Some(kind));
        }
    }

    let mut carry = None;
    b.procedural(None);
    for slot in slots.into_iter().skip(1) {
        match slot {
            Some(kind) => {
                if let Some(t) = carry.take() {
                    b.procedural(Some(t));
                }
                carry = b.public_period(kind);
            }
            None => b.procedural(carry.take()),
        }
    }
    b.procedural(carry.take());

    let mut utterances = Vec::with_capacity(b.lines.len());
    let mut t = 0.0;
    for (i, l) in b.lines.iter().enumerate() {
        let mut u = Utterance::new(meeting_id, format!("{meeting_id}-u{i}"), i, l.speaker.clone(), l.text.clone());
        let dur = 0.4 * u.word_count as f64 + 1.0;
        u.start_s = Some(t);
        u.end_s = Some(t + dur);
        t += dur + 0.5;
        utterances.push(u);
    }
    let meeting = Meeting::new(meeting_id, &profile.city, held_at, utterances)?;
    let records: BTreeMap<String, LabelRecord> = meeting
        .utterances
        .iter()
        .zip(&b.lines)
        .map(|(u, l)| (u.utterance_id.clone(), LabelRecord::new(l.section, l.role)))
        .collect();
    let labels = LabelSet::for_meeting(&meeting, records)?;

    let gold: Vec<Category> = b.lines.iter().map(|l| l.section).collect();
    let genai = simulate_genai(&mut b.rng, profile, &gold);
    let mut table = PredicateTable::new(meeting_id);
    for (u, c) in meeting.utterances.iter().zip(&genai) {
        table.push(Predicate::SectionGenAi, &[meeting_id, &u.utterance_id, c.as_str()], 1.0);
    }
    for u in &meeting.utterances {
        let gold = labels.get(&u.utterance_id).expect("labeled").remark_type;
        let (label, conf) = if b.rng.gen_bool(profile.plm_flip) {
            let others: Vec<Category> = Category::ALL.into_iter().filter(|c| *c != gold).collect();
            (*pick(&mut b.rng, &others), b.rng.gen_range(0.5..0.9))
        } else {
            (gold, b.rng.gen_range(0.6..1.0))
        };
        let conf: f64 = (conf * 1000.0f64).round() / 1000.0;
        table.push(Predicate::RemarkTypePlm, &[meeting_id, &u.utterance_id, label.as_str()], conf);
    }
    Ok((meeting, labels, table))
}

/// A generated corpus with AI-signal tables and per-city locales.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub tables: BTreeMap<String, PredicateTable>,
    pub locales: BTreeMap<String, LocaleConfig>,
}

/// `meetings_per_city` meetings per profile, two weeks apart, city-stamped
/// and labeled.
pub fn generate_corpus(profiles: &[CityProfile], meetings_per_city: usize, seed: u64) -> Result<SyntheticCorpus> {
    if profiles.is_empty() {
        return Err(Error::Config("no city profiles".into()));
    }
    let start = NaiveDate::from_ymd_opt(2023, 1, 3).expect("valid date").and_hms_opt(18, 0, 0).expect("valid time");
    let jobs: Vec<(usize, usize)> =
        (0..profiles.len()).flat_map(|c| (0..meetings_per_city).map(move |m| (c, m))).collect();
    let out: Vec<(Meeting, LabelSet, PredicateTable)> = jobs
        .par_iter()
        .map(|&(c, m)| {
            let p = &profiles[c];
            let id = format!("{}-{:03}", p.city, m);
            let at = start + Duration::days(14 * m as i64) + Duration::minutes(c as i64);
            generate_meeting(p, &id, at, mix(seed, c as u64 + 1, m as u64 + 1))
        })
        .collect::<Result<_>>()?;
    let mut meetings = Vec::with_capacity(out.len());
    let mut labels = BTreeMap::new();
    let mut tables = BTreeMap::new();
    for (m, l, t) in out {
        labels.insert(m.meeting_id.clone(), l);
        tables.insert(m.meeting_id.clone(), t);
        meetings.push(m);
    }
    let locales = profiles.iter().map(|p| (p.city.clone(), p.locale())).collect();
    Ok(SyntheticCorpus {
        corpus: Corpus::new(meetings, labels)?,
        tables,
        locales,
    })
}

// ---------------------------------------------------------------------------
// Random MRFs

/// A small random Mrf: open variables split into simplex groups of size 2 or
/// 3 plus at most two free variables, with 2 to 10 potentials of one to three
/// ±1 terms, mixed exponents and weights in `[0.1, 3]`.
///
/// Groups are sized so that at most five free grid coordinates exist, which
/// keeps [`crate::solve::brute_force_infer`] at step 0.05 fast.
pub fn random_mrf(seed: u64, max_vars: usize) -> Mrf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = Vec::new();
    let mut total = 0;
    let mut coords = 0;
    loop {
        let k = rng.gen_range(1..=3usize);
        let free = if k == 1 { 1 } else { k - 1 };
        if total + k > max_vars || coords + free > 5 || (k == 1 && sizes.iter().filter(|&&s| s == 1).count() >= 2) {
            break;
        }
        sizes.push(k);
        total += k;
        coords += free;
    }
    if sizes.is_empty() {
        sizes.push(2.min(max_vars.max(1)));
        total = sizes[0];
    }
    let variables: Vec<GroundAtom> = (0..total)
        .map(|i| GroundAtom::new(Predicate::Section, &["rand", &format!("v{i}"), "PC"]))
        .collect();
    let mut constraints = Vec::new();
    let mut next = 0;
    for &k in &sizes {
        if k > 1 {
            constraints.push(HardConstraint { vars: (next..next + k).collect() });
        }
        next += k;
    }
    let rules = vec![
        RuleInfo { id: "linear".into(), weight: 1.0, exponent: 1 },
        RuleInfo { id: "squared".into(), weight: 1.0, exponent: 2 },
    ];
    let n_pot = rng.gen_range(2..=10);
    let potentials = (0..n_pot)
        .map(|_| {
            let squared = rng.gen_bool(0.5);
            let n_terms = rng.gen_range(1..=3usize.min(total));
            let mut idx: Vec<usize> = (0..total).collect();
            idx.shuffle(&mut rng);
            let mut terms: Vec<(usize, f64)> =
                idx[..n_terms].iter().map(|&i| (i, if rng.gen_bool(0.5) { 1.0 } else { -1.0 })).collect();
            terms.sort_by_key(|t| t.0);
            GroundPotential {
                rule: usize::from(squared),
                weight: (rng.gen_range(0.1..3.0f64) * 100.0).round() / 100.0,
                exponent: if squared { 2 } else { 1 },
                terms,
                constant: (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0,
            }
        })
        .collect();
    Mrf::from_parts(format!("rand-{seed}"), variables, rules, potentials, constraints).expect("well-formed random mrf")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{serialize_corpus, Arity};

    fn at() -> chrono::NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 5, 1).unwrap().and_hms_opt(18, 0, 0).unwrap()
    }

    #[test]
    fn deterministic_meeting() {
        let p = CityProfile::default();
        let a = generate_meeting(&p, "m", at(), 42).unwrap();
        let b = generate_meeting(&p, "m", at(), 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        let c = generate_meeting(&p, "m", at(), 43).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn no_public_speakers_means_no_public_labels() {
        let p = CityProfile {
            public_per_comment: [0, 0],
            public_per_hearing: [0, 0],
            ..Default::default()
        };
        for seed in 0..10 {
            let (_, labels, _) = generate_meeting(&p, "m", at(), seed).unwrap();
            assert!(labels.utterances.values().all(|r| r.remark_type == Category::Other));
        }
    }

    #[test]
    fn clean_genai_matches_gold() {
        let p = CityProfile {
            genai_flip: 0.0,
            genai_jitter: 0.0,
            ..Default::default()
        };
        for seed in 0..10 {
            let (m, labels, table) = generate_meeting(&p, "m", at(), seed).unwrap();
            let genai: Vec<_> = table.atoms.iter().filter(|a| a.predicate == Predicate::SectionGenAi).collect();
            assert_eq!(genai.len(), m.utterances.len());
            for a in genai {
                assert_eq!(labels.get(&a.args[1]).unwrap().section.as_str(), a.args[2]);
            }
        }
    }

    #[test]
    fn meetings_open_procedurally_and_labels_are_consistent() {
        for p in default_profiles() {
            for seed in 0..5 {
                let (m, labels, table) = generate_meeting(&p, "m", at(), seed).unwrap();
                m.validate().unwrap();
                table.validate_against(&m).unwrap();
                assert_eq!(labels.get("m-u0").unwrap().section, Category::Other);
                for w in m.utterances.windows(2) {
                    assert_ne!(w[0].speaker_id, w[1].speaker_id, "{} {}", p.city, w[0].utterance_id);
                }
                for (id, r) in &labels.utterances {
                    let u = m.utterance(id).unwrap();
                    let role = if u.speaker_id.starts_with("public") { Role::Public } else { Role::Other };
                    assert_eq!(r.role, role);
                    assert_eq!(r.remark_type, crate::corpus::derive_gold_label(r.section, role, Arity::Three));
                }
            }
        }
    }

    #[test]
    fn corpus_shape() {
        let s = generate_corpus(&default_profiles(), 20, 7).unwrap();
        assert_eq!(s.corpus.meetings.len(), 140);
        assert_eq!(s.corpus.cities.len(), 7);
        assert_eq!(s.tables.len(), 140);
        for city in &s.corpus.cities {
            let dates: Vec<_> = s.corpus.meetings.iter().filter(|m| &m.city == city).map(|m| m.held_at).collect();
            assert!(dates.windows(2).all(|w| w[0] < w[1]));
        }
        let again = generate_corpus(&default_profiles(), 20, 7).unwrap();
        assert_eq!(serialize_corpus(&s.corpus), serialize_corpus(&again.corpus));
    }

    #[test]
    fn public_comments_are_a_minority() {
        let s = generate_corpus(&default_profiles(), 20, 1).unwrap();
        let (mut pc, mut all) = (0usize, 0usize);
        for l in s.corpus.labels.values() {
            all += l.utterances.len();
            pc += l.utterances.values().filter(|r| r.remark_type == Category::Pc).count();
        }
        let share = pc as f64 / all as f64;
        assert!(share > 0.0 && share < 0.20, "PC share {share}");
    }

    #[test]
    fn locale_patterns_match_phrase_banks() {
        for p in default_profiles() {
            let l = p.locale().compile().unwrap();
            for t in &p.comment_phrases {
                assert!(l.is_comment_transition(t), "{}: {t}", p.city);
                assert!(!l.is_hearing_transition(t), "{}: {t}", p.city);
            }
            for t in &p.hearing_phrases {
                assert!(l.is_hearing_transition(t), "{}: {t}", p.city);
            }
            for t in p.comment_paraphrases.iter().chain(&p.hearing_paraphrases) {
                assert!(!l.is_comment_transition(t) && !l.is_hearing_transition(t), "{}: {t}", p.city);
            }
            for t in &p.end_phrases {
                assert!(l.is_section_end(t), "{}: {t}", p.city);
            }
            for t in &p.decoy_phrases {
                assert!(l.is_comment_transition(t), "decoys should fool the phrase matcher: {t}");
            }
        }
    }

    #[test]
    fn profile_round_trip_and_validation() {
        let p = frequent_hearings_profile();
        let text = toml::to_string(&p).unwrap();
        assert_eq!(CityProfile::from_toml_str(&text).unwrap(), p);
        let bad = CityProfile {
            phrase_noise: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(CityProfile::from_toml_str("city = \"x\"\nbogus = 1").is_err());
    }

    #[test]
    fn random_mrfs_are_small() {
        for seed in 0..200 {
            let m = random_mrf(seed, 8);
            assert!(m.num_vars() >= 1 && m.num_vars() <= 8);
            let coords: usize = m.constraints.iter().map(|c| c.vars.len() - 1).sum::<usize>()
                + (m.num_vars() - m.constraints.iter().map(|c| c.vars.len()).sum::<usize>());
            assert!(coords <= 5);
        }
    }
}
