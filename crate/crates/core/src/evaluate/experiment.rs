use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{chronological_split, loco_split, SplitPlan, DEFAULT_RATIOS};
use super::{per_class_metrics, Metrics};
use crate::baseline::{assign_remark_types, segment_by_genai, segment_by_phrases};
use crate::corpus::{Arity, Category, Corpus, LabelSet, Meeting};
use crate::error::{Error, Result};
use crate::featurize::{CompiledLocale, LocaleConfig, PredicateTable};
use crate::learn::{select_hyperparameters, Example, GridPoint, LocaleOverrides};
use crate::logic::{build_model, Model, WeightMap};
use crate::pipeline::{observed_atoms, predict_meeting};
use crate::solve::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum Method {
    #[default]
    #[serde(rename = "publicspeak")]
    PublicSpeak,
    #[serde(rename = "phrases-roles")]
    PhrasesRoles,
    #[serde(rename = "genai-roles")]
    GenaiRoles,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PublicSpeak, Method::PhrasesRoles, Method::GenaiRoles];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PublicSpeak => "publicspeak",
            Method::PhrasesRoles => "phrases-roles",
            Method::GenaiRoles => "genai-roles",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Per city: train on the earliest meetings, validate on the next, test
    /// on the latest.
    #[default]
    Chrono,
    /// Leave one city out.
    Loco,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Chrono => "chrono",
            Protocol::Loco => "loco",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Protocol::Chrono, Protocol::Loco].into_iter().find(|p| p.as_str() == s)
    }
}

/// Why a meeting's gold labels were read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Purpose {
    Train,
    Validate,
    Score,
}

/// Gatekeeper for gold labels during an experiment. Every read is logged,
/// which lets tests prove that held-out labels only ever serve scoring.
#[derive(Debug, Default)]
pub struct LabelLedger {
    reads: Mutex<Vec<(String, Purpose)>>,
}

impl LabelLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read<'a>(&self, corpus: &'a Corpus, meeting_id: &str, purpose: Purpose) -> Result<&'a LabelSet> {
        self.reads.lock().expect("ledger lock").push((meeting_id.to_string(), purpose));
        corpus
            .labels
            .get(meeting_id)
            .ok_or_else(|| Error::Evaluate(format!("meeting {meeting_id} has no labels")))
    }

    /// Every read so far, in a stable order.
    pub fn entries(&self) -> Vec<(String, Purpose)> {
        let mut v = self.reads.lock().expect("ledger lock").clone();
        v.sort();
        v.dedup();
        v
    }

    pub fn meetings_read_for(&self, purpose: Purpose) -> BTreeSet<String> {
        self.entries().into_iter().filter(|(_, p)| *p == purpose).map(|(m, _)| m).collect()
    }
}

/// Everything an experiment reads besides its configuration.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a> {
    pub corpus: &'a Corpus,
    /// AI-signal tables by meeting id. Meetings without one get no AI atoms.
    pub tables: &'a BTreeMap<String, PredicateTable>,
    pub locales: &'a BTreeMap<String, LocaleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub protocol: Protocol,
    /// LOCO only. Without it every city is held out in turn.
    pub held_out: Option<String>,
    pub arities: Vec<Arity>,
    pub seed: u64,
    pub ratios: [f64; 3],
    /// Learn weights and pick the grid point with the best validation PC-F1.
    /// When false, the initial weights are used as they are.
    pub learn: bool,
    pub grid: Vec<GridPoint>,
    pub solver: SolverConfig,
    /// Initial weights layered over the defaults. Ids absent at an arity are
    /// ignored for that arity.
    pub weights: WeightMap,
    /// Hinge exponent per rule group, for groups that should not use the
    /// default of 2.
    pub exponents: BTreeMap<String, u8>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let (a, b, c) = DEFAULT_RATIOS;
        ExperimentConfig {
            method: Method::PublicSpeak,
            protocol: Protocol::Chrono,
            held_out: None,
            arities: vec![Arity::Two, Arity::Three],
            seed: 0,
            ratios: [a, b, c],
            learn: true,
            grid: vec![GridPoint::default()],
            solver: SolverConfig::default(),
            weights: WeightMap::new(),
            exponents: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arities.is_empty() {
            return Err(Error::Config("no arities to evaluate".into()));
        }
        if self.learn && self.grid.is_empty() {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        if self.held_out.is_some() && self.protocol != Protocol::Loco {
            return Err(Error::Config("a held-out city needs the loco protocol".into()));
        }
        for g in &self.grid {
            g.learn.validate()?;
        }
        self.solver.validate()
    }

    fn ratio_tuple(&self) -> (f64, f64, f64) {
        (self.ratios[0], self.ratios[1], self.ratios[2])
    }

    /// The seed is mirrored into the solver and every grid point so the
    /// report shows one consistent value.
    fn seeded(&self) -> Self {
        let mut c = self.clone();
        c.solver.seed = c.seed;
        for g in &mut c.grid {
            g.learn.seed = c.seed;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArityResult {
    pub arity: Arity,
    pub pc_f1: f64,
    pub metrics: Metrics,
    pub test_meetings: usize,
    pub test_utterances: usize,
    pub selected_grid_index: Option<usize>,
    pub validation_pc_f1: Option<f64>,
    pub weights: Option<WeightMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityResult {
    pub city: String,
    pub results: Vec<ArityResult>,
}

impl CityResult {
    pub fn at(&self, arity: Arity) -> Option<&ArityResult> {
        self.results.iter().find(|r| r.arity == arity)
    }
}

/// Aggregates over cities. The per-city mean is the headline figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub arity: Arity,
    pub mean_pc_f1: f64,
    pub micro_pc_f1: f64,
    pub metrics: Metrics,
}

/// One scored test utterance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub arity: Arity,
    pub city: String,
    pub meeting_id: String,
    pub utterance_id: String,
    pub gold: Category,
    pub predicted: Category,
    /// Soft RemarkType values, empty for the heuristic methods.
    pub scores: Vec<(Category, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cities: Vec<CityResult>,
    pub overall: Vec<Overall>,
    #[serde(skip)]
    pub predictions: Vec<PredictionRow>,
}

impl ExperimentReport {
    pub fn city(&self, city: &str) -> Option<&CityResult> {
        self.cities.iter().find(|c| c.city == city)
    }

    pub fn overall_at(&self, arity: Arity) -> Option<&Overall> {
        self.overall.iter().find(|o| o.arity == arity)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Training, validation and test meetings for one evaluated city.
struct Leg {
    city: String,
    train: Vec<String>,
    validation: Vec<String>,
    test: Vec<String>,
}

fn legs(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<Vec<Leg>> {
    let ratios = cfg.ratio_tuple();
    match cfg.protocol {
        Protocol::Chrono => Ok(chronological_split(corpus, ratios)?
            .cities
            .into_iter()
            .map(|(city, s)| Leg {
                city,
                train: s.train,
                validation: s.validation,
                test: s.test,
            })
            .collect()),
        Protocol::Loco => {
            let held: Vec<String> = match &cfg.held_out {
                Some(c) => vec![c.clone()],
                None => corpus.cities.iter().cloned().collect(),
            };
            held.into_iter()
                .map(|city| {
                    let plan: SplitPlan = loco_split(corpus, &city, ratios)?;
                    Ok(Leg {
                        train: plan.train_ids(),
                        validation: plan.validation_ids(),
                        test: plan.test_ids(),
                        city,
                    })
                })
                .collect()
        }
    }
}

struct Context<'a> {
    inputs: RunInputs<'a>,
    cfg: &'a ExperimentConfig,
    ledger: &'a LabelLedger,
}

impl<'a> Context<'a> {
    fn meeting(&self, id: &str) -> Result<&'a Meeting> {
        self.inputs
            .corpus
            .meeting(id)
            .ok_or_else(|| Error::Evaluate(format!("split names unknown meeting {id}")))
    }

    fn locale(&self, city: &str, overrides: &LocaleOverrides) -> Result<CompiledLocale> {
        let base = self
            .inputs
            .locales
            .get(city)
            .ok_or_else(|| Error::Config(format!("no locale configuration for city {city}")))?;
        overrides.apply(base).compile()
    }

    fn examples(&self, ids: &[String], purpose: Purpose, arity: Arity, overrides: &LocaleOverrides) -> Result<Vec<Example<'a>>> {
        let mut locales: BTreeMap<&str, CompiledLocale> = BTreeMap::new();
        ids.iter()
            .map(|id| {
                let meeting = self.meeting(id)?;
                if !locales.contains_key(meeting.city.as_str()) {
                    locales.insert(meeting.city.as_str(), self.locale(&meeting.city, overrides)?);
                }
                let labels = self.ledger.read(self.inputs.corpus, id, purpose)?;
                let observed = observed_atoms(meeting, &locales[meeting.city.as_str()], self.inputs.tables.get(id), arity)?;
                Ok(Example { meeting, labels, observed })
            })
            .collect()
    }

    fn initial_model(&self, arity: Arity) -> Result<Model> {
        let known = crate::logic::default_weights(arity);
        let w: WeightMap = self.cfg.weights.iter().filter(|(k, _)| known.contains_key(*k)).map(|(k, v)| (k.clone(), *v)).collect();
        let mut model = build_model(arity, &w)?;
        for (group, p) in &self.cfg.exponents {
            if model.soft_rules().any(|r| crate::logic::rule_group(&r.id) == group) {
                model.set_exponent(group, *p)?;
            }
        }
        Ok(model)
    }

    fn run_leg(&self, leg: &Leg, arity: Arity) -> Result<(ArityResult, Vec<PredictionRow>)> {
        let mut selected = None;
        let mut validation_pc_f1 = None;
        let mut weights = None;
        let mut overrides = LocaleOverrides::default();
        let mut model = None;

        if self.cfg.method == Method::PublicSpeak {
            let initial = self.initial_model(arity)?;
            let m = if self.cfg.learn {
                let sel = select_hyperparameters(&initial, &self.cfg.grid, &self.cfg.solver, |o| {
                    Ok((
                        self.examples(&leg.train, Purpose::Train, arity, o)?,
                        self.examples(&leg.validation, Purpose::Validate, arity, o)?,
                    ))
                })?;
                log::info!("{} arity {}: grid point {} (validation PC-F1 {:.3})", leg.city, arity, sel.index, sel.validation_pc_f1);
                overrides = self.cfg.grid[sel.index].locale.clone();
                selected = Some(sel.index);
                validation_pc_f1 = Some(sel.validation_pc_f1);
                initial.with_weights(&sel.weights)?
            } else {
                initial
            };
            weights = Some(m.weights());
            model = Some(m);
        }

        let mut rows = Vec::new();
        let mut pred = Vec::new();
        let mut gold = Vec::new();
        for id in &leg.test {
            let meeting = self.meeting(id)?;
            let locale = self.locale(&meeting.city, &overrides)?;
            let table = self.inputs.tables.get(id);
            let (labels, scores): (Vec<Category>, Vec<Vec<(Category, f64)>>) = match self.cfg.method {
                Method::PublicSpeak => {
                    let obs = observed_atoms(meeting, &locale, table, arity)?;
                    let (p, _, _) = predict_meeting(model.as_ref().expect("model built"), meeting, &obs, &self.cfg.solver)?;
                    p.utterances.into_iter().map(|u| (u.label, u.scores)).unzip()
                }
                Method::PhrasesRoles => {
                    let s = segment_by_phrases(meeting, &locale);
                    (assign_remark_types(meeting, &s, &locale, arity), vec![Vec::new(); meeting.utterances.len()])
                }
                Method::GenaiRoles => {
                    let s = match table {
                        Some(t) => segment_by_genai(meeting, t),
                        None => vec![Category::Other; meeting.utterances.len()],
                    };
                    (assign_remark_types(meeting, &s, &locale, arity), vec![Vec::new(); meeting.utterances.len()])
                }
            };
            let gold_set = self.ledger.read(self.inputs.corpus, id, Purpose::Score)?;
            for ((u, label), scores) in meeting.utterances.iter().zip(labels).zip(scores) {
                let g = gold_set
                    .get(&u.utterance_id)
                    .ok_or_else(|| Error::Evaluate(format!("utterance {} has no gold label", u.utterance_id)))?
                    .remark(arity);
                pred.push((u.utterance_id.clone(), label));
                gold.push((u.utterance_id.clone(), g));
                rows.push(PredictionRow {
                    arity,
                    city: leg.city.clone(),
                    meeting_id: id.clone(),
                    utterance_id: u.utterance_id.clone(),
                    gold: g,
                    predicted: label,
                    scores,
                });
            }
        }
        let metrics = per_class_metrics(&pred, &gold, arity.remark_kinds())?;
        Ok((
            ArityResult {
                arity,
                pc_f1: metrics.pc_f1(),
                metrics,
                test_meetings: leg.test.len(),
                test_utterances: pred.len(),
                selected_grid_index: selected,
                validation_pc_f1,
                weights,
            },
            rows,
        ))
    }
}

/// Runs the configured protocol and method over every city and arity.
///
/// City legs run in parallel; results are assembled in city and arity order
/// so the report does not depend on scheduling.
pub fn run_experiment(inputs: RunInputs<'_>, cfg: &ExperimentConfig, ledger: &LabelLedger) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cfg = cfg.seeded();
    for city in &inputs.corpus.cities {
        if !inputs.locales.contains_key(city) {
            return Err(Error::Config(format!("no locale configuration for city {city}")));
        }
    }
    let legs = legs(inputs.corpus, &cfg)?;
    let ctx = Context { inputs, cfg: &cfg, ledger };
    let jobs: Vec<(usize, Arity)> = (0..legs.len()).flat_map(|i| cfg.arities.iter().map(move |a| (i, *a))).collect();
    let results: Vec<(ArityResult, Vec<PredictionRow>)> =
        jobs.par_iter().map(|&(i, a)| ctx.run_leg(&legs[i], a)).collect::<Result<_>>()?;

    let mut cities: Vec<CityResult> = legs
        .iter()
        .map(|l| CityResult {
            city: l.city.clone(),
            results: Vec::new(),
        })
        .collect();
    let mut predictions = Vec::new();
    for ((i, _), (r, rows)) in jobs.iter().zip(results) {
        cities[*i].results.push(r);
        predictions.extend(rows);
    }

    let overall = cfg
        .arities
        .iter()
        .map(|&arity| {
            let per_city: Vec<&ArityResult> = cities.iter().filter_map(|c| c.at(arity)).collect();
            let metrics = per_city
                .iter()
                .fold(Metrics::empty(arity.remark_kinds()), |acc, r| acc.merge(&r.metrics));
            Overall {
                arity,
                mean_pc_f1: per_city.iter().map(|r| r.pc_f1).sum::<f64>() / per_city.len().max(1) as f64,
                micro_pc_f1: metrics.pc_f1(),
                metrics,
            }
        })
        .collect();

    Ok(ExperimentReport {
        config: cfg,
        cities,
        overall,
        predictions,
    })
}

/// City × arity PC-F1 table followed by the two overall rows.
pub fn render_table(report: &ExperimentReport) -> String {
    let arities = &report.config.arities;
    let width = report.cities.iter().map(|c| c.city.len()).chain(["Overall (micro)".len()]).max().unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "PC-F1 | method {} | protocol {}",
        report.config.method.as_str(),
        report.config.protocol.as_str()
    );
    let _ = write!(s, "{:<width$}", "City");
    for a in arities {
        let _ = write!(s, "  {:>7}", format!("{a}-Class"));
    }
    s.push('\n');
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    for c in &report.cities {
        let _ = write!(s, "{:<width$}", c.city);
        for a in arities {
            let _ = write!(s, "  {:>7}", cell(c.at(*a).map(|r| r.pc_f1)));
        }
        s.push('\n');
    }
    for (name, f) in [
        ("Overall (mean)", (|o: &Overall| o.mean_pc_f1) as fn(&Overall) -> f64),
        ("Overall (micro)", |o: &Overall| o.micro_pc_f1),
    ] {
        let _ = write!(s, "{name:<width$}");
        for a in arities {
            let _ = write!(s, "  {:>7}", cell(report.overall_at(*a).map(f)));
        }
        s.push('\n');
    }
    s
}

/// Per-utterance predictions as CSV, one row per arity and test utterance.
pub fn write_predictions_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let err = |e: csv::Error| Error::Evaluate(format!("writing predictions: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["arity", "city", "meeting_id", "utterance_id", "gold", "predicted", "score_pc", "score_ph", "score_other"])
        .map_err(err)?;
    for r in &report.predictions {
        let score = |c: Category| {
            r.scores
                .iter()
                .find(|(k, _)| *k == c)
                .map(|(_, v)| format!("{v:.6}"))
                .unwrap_or_default()
        };
        w.write_record([
            r.arity.to_string(),
            r.city.clone(),
            r.meeting_id.clone(),
            r.utterance_id.clone(),
            r.gold.to_string(),
            r.predicted.to_string(),
            score(Category::Pc),
            score(Category::Ph),
            score(Category::Other),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
