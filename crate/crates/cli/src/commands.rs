use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use publicspeak::corpus::{group_snippets, HallucinationFilter, parse_datetime, serialize_corpus, Arity, Corpus, Meeting, RawSegment};
use publicspeak::evaluate::{
    render_table, run_experiment, write_predictions_csv, ExperimentConfig, ExperimentReport, LabelLedger, Method, Protocol, RunInputs,
};
use publicspeak::featurize::{featurize_meeting, serialize_predicate_tables, PredicateTable};
use publicspeak::learn::{learn_weights_logged, write_log_csv, Example, LearnConfig};
use publicspeak::logic::{build_model, load_weights, serialize_weights, WeightMap};
use publicspeak::pipeline::{observed_atoms, predict_meeting, MeetingPrediction};
use publicspeak::solve::SolverConfig;
use publicspeak::synth::{default_profiles, generate_corpus, CityProfile};

use crate::inputs::{self, effective_config, load_data, to_json_pretty, Data};
use crate::{DataFlags, Global, SolverFlags, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArityArg {
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

impl From<ArityArg> for Arity {
    fn from(a: ArityArg) -> Arity {
        match a {
            ArityArg::Two => Arity::Two,
            ArityArg::Three => Arity::Three,
        }
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?} (publicspeak, phrases-roles, genai-roles)"))
}

fn parse_protocol(s: &str) -> std::result::Result<Protocol, String> {
    Protocol::parse(s).ok_or_else(|| format!("unknown protocol {s:?} (chrono, loco)"))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// A raw meeting file, or a directory of them (`.json`, one meeting per
    /// file or one per line).
    input: PathBuf,
    /// Output corpus file (`-` for stdout).
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Replace the default hallucination markers.
    #[arg(long = "marker")]
    markers: Vec<String>,
}

/// One meeting of diarized segments, before cleaning and grouping.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeeting {
    meeting_id: String,
    city: String,
    held_at: String,
    segments: Vec<RawSegment>,
}

fn raw_meetings(path: &Path) -> Result<Vec<RawMeeting>> {
    let text = String::from_utf8(inputs::read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let parsed = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed)
    } else {
        match serde_json::from_str::<RawMeeting>(trimmed) {
            Ok(m) => Ok(vec![m]),
            Err(_) => trimmed.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect(),
        }
    };
    parsed.map_err(|e| usage(format!("{}: malformed raw meeting file: {e}", path.display())))
}

pub fn ingest(_global: &Global, args: IngestArgs) -> Result<()> {
    let files = if args.input.is_dir() {
        inputs::files_with(&args.input, &["json", "jsonl"])?
    } else {
        vec![args.input.clone()]
    };
    let filter = if args.markers.is_empty() {
        HallucinationFilter::default()
    } else {
        HallucinationFilter { markers: args.markers.clone() }
    };
    let mut meetings = Vec::new();
    for f in files {
        for raw in raw_meetings(&f)? {
            let held_at = parse_datetime(&raw.held_at)
                .ok_or_else(|| usage(format!("{}: meeting {}: held_at {:?} is not ISO-8601", f.display(), raw.meeting_id, raw.held_at)))?;
            let utterances = group_snippets(&raw.meeting_id, &filter.clean(raw.segments));
            meetings.push(Meeting::new(raw.meeting_id, raw.city, held_at, utterances)?);
        }
    }
    let corpus = Corpus::new(meetings, BTreeMap::new())?;
    log::info!("ingested {} meetings", corpus.meetings.len());
    inputs::write(&args.output, &serialize_corpus(&corpus))
}

// ---------------------------------------------------------------------------
// featurize

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    locales: PathBuf,
    /// Output predicate tables, one JSON document per line.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Annotator configuration (TOML). With `--network`, SectionGenAI atoms
    /// are fetched from the configured endpoint and added to each table.
    #[cfg(feature = "annotator")]
    #[arg(long)]
    annotator: Option<PathBuf>,
    /// Allow the annotator to make network requests.
    #[cfg(feature = "annotator")]
    #[arg(long)]
    network: bool,
}

pub fn featurize(_global: &Global, args: FeaturizeArgs) -> Result<()> {
    let corpus = inputs::load_corpus(&args.corpus)?;
    let locales = inputs::load_locales(&args.locales)?;
    let mut compiled = BTreeMap::new();
    for (city, l) in &locales {
        compiled.insert(city.clone(), l.compile()?);
    }
    #[cfg(feature = "annotator")]
    let annotator: Option<publicspeak::featurize::annotator::AnnotatorConfig> = match &args.annotator {
        None => None,
        Some(p) => {
            let text = String::from_utf8(inputs::read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            Some(toml::from_str(&text).map_err(|e| usage(format!("annotator config {}: {e}", p.display())))?)
        }
    };
    let tables: Vec<PredicateTable> = corpus
        .meetings
        .iter()
        .map(|m| {
            let locale = compiled.get(&m.city).ok_or_else(|| usage(format!("no locale configuration for city {}", m.city)))?;
            #[allow(unused_mut)]
            let mut t = featurize_meeting(m, locale);
            #[cfg(feature = "annotator")]
            if let Some(cfg) = &annotator {
                let g = publicspeak::featurize::annotator::fetch_genai_sections(m, cfg, args.network)
                    .with_context(|| format!("meeting {}", m.meeting_id))?;
                t.atoms.extend(g.atoms);
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    inputs::write(&args.output, serialize_predicate_tables(&tables).as_bytes())
}

// ---------------------------------------------------------------------------
// infer

#[derive(Args, Debug)]
pub struct InferArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    solver: SolverFlags,
    /// Weight file; default weights when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "3")]
    arity: ArityArg,
    /// Predictions as JSON (`-` for stdout).
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
}

#[derive(Serialize)]
struct InferOutput<'a> {
    arity: Arity,
    seed: u64,
    solver: &'a SolverConfig,
    weights: &'a WeightMap,
    meetings: Vec<MeetingPrediction>,
}

fn load_weight_file(path: Option<&Path>) -> Result<WeightMap> {
    match path {
        None => Ok(WeightMap::new()),
        Some(p) => Ok(load_weights(&inputs::read(p)?).with_context(|| format!("weights {}", p.display()))?),
    }
}

pub fn infer(global: &Global, args: InferArgs) -> Result<()> {
    let cfg = effective_config(global, &args.solver)?;
    cfg.solver.validate()?;
    let Data { corpus, locales, tables } = load_data(&args.data)?;
    let arity: Arity = args.arity.into();
    let model = build_model(arity, &load_weight_file(args.weights.as_deref())?)?;
    let compiled: BTreeMap<&str, _> = locales.iter().map(|(c, l)| Ok((c.as_str(), l.compile()?))).collect::<Result<_>>()?;
    let meetings = corpus
        .meetings
        .par_iter()
        .map(|m| {
            let obs = observed_atoms(m, &compiled[m.city.as_str()], tables.get(&m.meeting_id), arity)?;
            let (p, _, _) = predict_meeting(&model, m, &obs, &cfg.solver)?;
            Ok(p)
        })
        .collect::<Vec<publicspeak::Result<_>>>()
        .into_iter()
        .zip(&corpus.meetings)
        .map(|(r, m)| r.with_context(|| format!("meeting {}", m.meeting_id)))
        .collect::<Result<Vec<_>>>()?;
    let weights = model.weights();
    let out = InferOutput {
        arity,
        seed: cfg.seed,
        solver: &cfg.solver,
        weights: &weights,
        meetings,
    };
    inputs::write(&args.output, &to_json_pretty(&out))
}

// ---------------------------------------------------------------------------
// learn

#[derive(Args, Debug)]
pub struct LearnArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, value_enum, default_value = "3")]
    arity: ArityArg,
    /// Starting weights; defaults when omitted.
    #[arg(long)]
    initial_weights: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    step_decay: Option<f64>,
    #[arg(long)]
    weight_cap: Option<f64>,
    /// Return the last weights instead of the epoch average.
    #[arg(long)]
    no_averaging: bool,
    /// Labeled corpus scored after every epoch for the training log.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Learned weights (`-` for stdout).
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Per-epoch training log as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn examples<'a>(
    corpus: &'a Corpus,
    data: &Data,
    compiled: &BTreeMap<&str, publicspeak::featurize::CompiledLocale>,
    arity: Arity,
) -> Result<Vec<Example<'a>>> {
    let mut ms: Vec<&Meeting> = corpus.meetings.iter().collect();
    ms.sort_by(|a, b| a.held_at.cmp(&b.held_at).then_with(|| a.meeting_id.cmp(&b.meeting_id)));
    ms.into_iter()
        .map(|m| {
            let labels = corpus
                .labels
                .get(&m.meeting_id)
                .ok_or_else(|| publicspeak::Error::Learn(format!("meeting {} has no labels", m.meeting_id)))?;
            let locale = compiled
                .get(m.city.as_str())
                .ok_or_else(|| usage(format!("no locale configuration for city {}", m.city)))?;
            let observed = observed_atoms(m, locale, data.tables.get(&m.meeting_id), arity)?;
            Ok(Example { meeting: m, labels, observed })
        })
        .collect()
}

pub fn learn(global: &Global, args: LearnArgs) -> Result<()> {
    let cfg = effective_config(global, &args.solver)?;
    let mut lc: LearnConfig = cfg.grid.first().map(|g| g.learn.clone()).unwrap_or_default();
    if let Some(v) = args.epochs {
        lc.epochs = v;
    }
    if let Some(v) = args.step_size {
        lc.step_size = v;
    }
    if let Some(v) = args.step_decay {
        lc.step_decay = v;
    }
    if let Some(v) = args.weight_cap {
        lc.weight_cap = v;
    }
    if args.no_averaging {
        lc.averaging = false;
    }
    lc.seed = cfg.seed;
    lc.validate()?;
    cfg.solver.validate()?;

    let data = load_data(&args.data)?;
    let arity: Arity = args.arity.into();
    let model = build_model(arity, &load_weight_file(args.initial_weights.as_deref())?)?;
    let compiled: BTreeMap<&str, _> = data.locales.iter().map(|(c, l)| Ok((c.as_str(), l.compile()?))).collect::<Result<_>>()?;
    let train = examples(&data.corpus, &data, &compiled, arity)?;
    let validation_corpus = match &args.validation {
        Some(p) => Some(inputs::load_corpus(p)?),
        None => None,
    };
    let validation = match &validation_corpus {
        Some(c) => examples(c, &data, &compiled, arity)?,
        None => Vec::new(),
    };
    let outcome = learn_weights_logged(&model, &train, &validation, &lc, &cfg.solver)?;
    if let Some(p) = &args.log {
        let mut buf = Vec::new();
        write_log_csv(&outcome.log, &mut buf)?;
        inputs::write(p, &buf)?;
    }
    inputs::write(&args.output, serialize_weights(&outcome.weights).as_bytes())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, value_parser = parse_protocol)]
    protocol: Option<Protocol>,
    /// City to hold out under `--protocol loco`; every city in turn when omitted.
    #[arg(long)]
    held_out: Option<String>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Arity to evaluate (repeatable); both when omitted.
    #[arg(long, value_enum)]
    arity: Vec<ArityArg>,
    /// Initial weights layered over the defaults.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Skip learning and evaluate the initial weights.
    #[arg(long)]
    no_learn: bool,
    /// Directory for report.json, report.txt and predictions.csv.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn eval(global: &Global, args: EvalArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = effective_config(global, &args.solver)?;
    if let Some(p) = args.protocol {
        cfg.protocol = p;
    }
    if let Some(h) = args.held_out {
        cfg.held_out = Some(h);
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if !args.arity.is_empty() {
        cfg.arities = args.arity.iter().map(|a| Arity::from(*a)).collect();
    }
    if args.weights.is_some() {
        cfg.weights = load_weight_file(args.weights.as_deref())?;
    }
    if args.no_learn {
        cfg.learn = false;
    }
    let data = load_data(&args.data)?;
    let inputs = RunInputs {
        corpus: &data.corpus,
        tables: &data.tables,
        locales: &data.locales,
    };
    let report = run_experiment(inputs, &cfg, &LabelLedger::new())?;
    let table = render_table(&report);
    match &args.output {
        Some(dir) => {
            inputs::write(&dir.join("report.json"), report.to_json().as_bytes())?;
            inputs::write(&dir.join("report.txt"), table.as_bytes())?;
            let mut csv = Vec::new();
            write_predictions_csv(&report, &mut csv)?;
            inputs::write(&dir.join("predictions.csv"), &csv)?;
            print!("{table}");
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of cities, taken in order from the profiles.
    #[arg(long, default_value_t = 7)]
    cities: usize,
    #[arg(long, default_value_t = 20)]
    meetings: usize,
    /// Profile file or directory; the built-in seven cities when omitted.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Override every profile's phrase-noise rate.
    #[arg(long)]
    phrase_noise: Option<f64>,
    /// Output directory for corpus.json, tables.jsonl and locales/.
    #[arg(short, long)]
    output: PathBuf,
}

pub fn synth(global: &Global, args: SynthArgs) -> Result<()> {
    let mut profiles = match &args.profiles {
        Some(p) => CityProfile::load_all(p)?,
        None => default_profiles(),
    };
    if args.cities == 0 || args.cities > profiles.len() {
        return Err(usage(format!("--cities must be between 1 and {} for these profiles", profiles.len())));
    }
    profiles.truncate(args.cities);
    if let Some(n) = args.phrase_noise {
        for p in &mut profiles {
            p.phrase_noise = n;
        }
    }
    let s = generate_corpus(&profiles, args.meetings, global.seed.unwrap_or(0))?;
    let dir = &args.output;
    inputs::write(&dir.join("corpus.json"), &serialize_corpus(&s.corpus))?;
    let tables: Vec<PredicateTable> = s.corpus.meetings.iter().filter_map(|m| s.tables.get(&m.meeting_id).cloned()).collect();
    inputs::write(&dir.join("tables.jsonl"), serialize_predicate_tables(&tables).as_bytes())?;
    for (city, l) in &s.locales {
        inputs::write(&dir.join("locales").join(format!("{city}.toml")), l.to_toml_string().as_bytes())?;
    }
    log::info!("wrote {} meetings to {}", s.corpus.meetings.len(), dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// report

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// A report.json written by `eval`.
    report: PathBuf,
}

pub fn report(args: ReportArgs) -> Result<()> {
    let bytes = inputs::read(&args.report)?;
    let r: ExperimentReport =
        serde_json::from_slice(&bytes).map_err(|e| usage(format!("{} is not an experiment report: {e}", args.report.display())))?;
    print!("{}", render_table(&r));
    Ok(())
}
