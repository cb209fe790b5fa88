//! Rule-weight learning by structured perceptron: push weights toward rules
//! the gold labels satisfy better than the current MAP state does.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSet, Meeting};
use crate::error::{Error, Result};
use crate::evaluate::{per_class_metrics, Metrics};
use crate::featurize::{Atom, LocaleConfig};
use crate::logic::{ground, total_potential, Model, Mrf, WeightMap};
use crate::pipeline::label_meeting;
use crate::solve::{map_infer_from, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub epochs: usize,
    pub step_size: f64,
    /// Step at epoch `e` is `step_size · step_decay^e`.
    pub step_decay: f64,
    pub weight_cap: f64,
    /// Return the mean of the per-epoch weight vectors.
    pub averaging: bool,
    /// Reserved. Meetings are visited in chronological order, so the seed
    /// does not currently change anything.
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            epochs: 25,
            step_size: 1.0,
            step_decay: 0.9,
            weight_cap: 100.0,
            averaging: true,
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(Error::Config(format!("step_decay must be in (0, 1], got {}", self.step_decay)));
        }
        if !(self.weight_cap > 0.0 && self.weight_cap.is_finite()) {
            return Err(Error::Config(format!("weight_cap must be positive, got {}", self.weight_cap)));
        }
        Ok(())
    }
}

/// One labeled training meeting with its observed atoms.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub meeting: &'a Meeting,
    pub labels: &'a LabelSet,
    pub observed: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: f64,
    /// Σ over meetings of the weighted energy at the MAP state.
    pub map_energy: f64,
    /// Euclidean norm of the summed per-meeting updates before clipping.
    pub gradient_norm: f64,
    pub validation_pc_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub weights: WeightMap,
    pub log: Vec<EpochLog>,
}

struct Prepared {
    open: Mrf,
    observed: WeightMap,
    warm: Option<Vec<f64>>,
}

fn prepare(model: &Model, ex: &Example<'_>) -> Result<Prepared> {
    let m = ex.meeting;
    for u in &m.utterances {
        if ex.labels.get(&u.utterance_id).is_none() {
            return Err(Error::Learn(format!("meeting {} is not fully labeled ({} missing)", m.meeting_id, u.utterance_id)));
        }
    }
    let open = ground(model, m, &ex.observed, None)?;
    let clamped = ground(model, m, &ex.observed, Some(ex.labels))?;
    let observed = total_potential(&clamped, &[])?.by_rule;
    Ok(Prepared { open, observed, warm: None })
}

/// Learns soft-rule weights, starting from the model's current weights.
pub fn learn_weights(model: &Model, train: &[Example<'_>], cfg: &LearnConfig, solver: &SolverConfig) -> Result<WeightMap> {
    Ok(learn_weights_logged(model, train, &[], cfg, solver)?.weights)
}

/// [`learn_weights`] with a per-epoch log. With a non-empty `validation`
/// set, each epoch also records validation PC-F1 of the weights so far.
pub fn learn_weights_logged(
    model: &Model,
    train: &[Example<'_>],
    validation: &[Example<'_>],
    cfg: &LearnConfig,
    solver: &SolverConfig,
) -> Result<LearnOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Learn("empty training set".into()));
    }
    let mut weights = model.weights();
    let mut prepared: Vec<Prepared> = train.iter().map(|ex| prepare(model, ex)).collect::<Result<_>>()?;
    if cfg.epochs == 0 {
        return Ok(LearnOutcome { weights, log: Vec::new() });
    }

    let mut sum: WeightMap = weights.keys().map(|k| (k.clone(), 0.0)).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let step = cfg.step_size * cfg.step_decay.powi(epoch as i32);
        let mut map_energy = 0.0;
        let mut total_update: WeightMap = WeightMap::new();
        for p in prepared.iter_mut() {
            p.open.reweight(&weights);
            let result = map_infer_from(&p.open, solver, p.warm.as_deref())?;
            let map = total_potential(&p.open, &snap_to_vertices(&p.open, &result.values))?;
            map_energy += map.weighted_total;
            p.warm = Some(result.values);
            for (rule, w) in weights.iter_mut() {
                let g = p.observed.get(rule).copied().unwrap_or(0.0) - map.by_rule.get(rule).copied().unwrap_or(0.0);
                *total_update.entry(rule.clone()).or_default() += g;
                *w = (*w - step * g).clamp(0.0, cfg.weight_cap);
            }
        }
        for (k, w) in &weights {
            *sum.get_mut(k).expect("same keys") += w;
        }
        let current = if cfg.averaging { average(&sum, epoch + 1) } else { weights.clone() };
        let validation_pc_f1 = if validation.is_empty() {
            None
        } else {
            Some(validation_score(&model.clone().with_weights(&current)?, validation, solver)?)
        };
        let gradient_norm = total_update.values().map(|g| g * g).sum::<f64>().sqrt();
        log::debug!("epoch {epoch}: step {step:.4}, energy {map_energy:.4}, |g| {gradient_norm:.4}");
        log.push(EpochLog {
            epoch,
            step,
            map_energy,
            gradient_norm,
            validation_pc_f1,
        });
    }
    let weights = if cfg.averaging { average(&sum, cfg.epochs) } else { weights };
    Ok(LearnOutcome { weights, log })
}

/// Coordinates within this distance of an integral vertex are treated as
/// sitting on it when computing MAP potential totals.
const SNAP_TOL: f64 = 1e-4;

/// Rounds each constraint group that lies within [`SNAP_TOL`] of a vertex of
/// its simplex, and each free variable within [`SNAP_TOL`] of 0 or 1.
///
/// ADMM stops a hair away from a vertex, which would otherwise leave a tiny
/// spurious gradient on rules the MAP state actually satisfies.
fn snap_to_vertices(mrf: &Mrf, y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    let mut grouped = vec![false; y.len()];
    for c in &mrf.constraints {
        for &v in &c.vars {
            grouped[v] = true;
        }
        if c.vars.iter().all(|&v| y[v] <= SNAP_TOL || y[v] >= 1.0 - SNAP_TOL) && c.vars.iter().filter(|&&v| y[v] >= 1.0 - SNAP_TOL).count() == 1 {
            for &v in &c.vars {
                out[v] = if y[v] >= 1.0 - SNAP_TOL { 1.0 } else { 0.0 };
            }
        }
    }
    for (v, g) in grouped.iter().enumerate() {
        if !g {
            if out[v] <= SNAP_TOL {
                out[v] = 0.0;
            } else if out[v] >= 1.0 - SNAP_TOL {
                out[v] = 1.0;
            }
        }
    }
    out
}

fn average(sum: &WeightMap, n: usize) -> WeightMap {
    sum.iter().map(|(k, v)| (k.clone(), v / n as f64)).collect()
}

/// Pooled PC-F1 of `model` over labeled examples.
pub fn validation_score(model: &Model, examples: &[Example<'_>], solver: &SolverConfig) -> Result<f64> {
    Ok(validation_metrics(model, examples, solver)?.pc_f1())
}

pub fn validation_metrics(model: &Model, examples: &[Example<'_>], solver: &SolverConfig) -> Result<Metrics> {
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for ex in examples {
        let mrf = ground(model, ex.meeting, &ex.observed, None)?;
        let result = crate::solve::map_infer(&mrf, solver)?;
        let p = label_meeting(ex.meeting, &mrf, &result, model.arity)?;
        for u in p.utterances {
            let g = ex.labels.get(&u.utterance_id).ok_or_else(|| Error::Learn(format!("{} is unlabeled", u.utterance_id)))?;
            gold.push((u.utterance_id.clone(), g.remark(model.arity)));
            pred.push((u.utterance_id, u.label));
        }
    }
    per_class_metrics(&pred, &gold, model.arity.remark_kinds())
}

/// Locale threshold overrides tried during model selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocaleOverrides {
    pub delta_words: Option<usize>,
    pub k_often: Option<usize>,
    pub k_rare: Option<usize>,
}

impl LocaleOverrides {
    pub fn apply(&self, base: &LocaleConfig) -> LocaleConfig {
        let mut l = base.clone();
        if let Some(v) = self.delta_words {
            l.delta_words = v;
        }
        if let Some(v) = self.k_often {
            l.k_often = v;
        }
        if let Some(v) = self.k_rare {
            l.k_rare = v;
        }
        l
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridPoint {
    pub learn: LearnConfig,
    pub locale: LocaleOverrides,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Position of the winner in the grid.
    pub index: usize,
    pub weights: WeightMap,
    pub validation_pc_f1: f64,
    pub scores: Vec<f64>,
    pub log: Vec<EpochLog>,
}

/// Trains at every grid point and keeps the best validation PC-F1, the
/// earliest point on ties. `data` builds the training and validation
/// examples for a point's locale overrides.
pub fn select_hyperparameters<'a, F>(model: &Model, grid: &[GridPoint], solver: &SolverConfig, mut data: F) -> Result<Selection>
where
    F: FnMut(&LocaleOverrides) -> Result<(Vec<Example<'a>>, Vec<Example<'a>>)>,
{
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let mut best: Option<Selection> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for (i, point) in grid.iter().enumerate() {
        let (train, val) = data(&point.locale)?;
        let outcome = learn_weights_logged(model, &train, &[], &point.learn, solver)?;
        let score = if val.is_empty() {
            0.0
        } else {
            validation_score(&model.clone().with_weights(&outcome.weights)?, &val, solver)?
        };
        scores.push(score);
        if best.as_ref().is_none_or(|b| score > b.validation_pc_f1) {
            best = Some(Selection {
                index: i,
                weights: outcome.weights,
                validation_pc_f1: score,
                scores: Vec::new(),
                log: outcome.log,
            });
        }
    }
    let mut best = best.expect("non-empty grid");
    best.scores = scores;
    Ok(best)
}

/// Writes the training log as CSV.
pub fn write_log_csv<W: Write>(log: &[EpochLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "step", "map_energy", "gradient_norm", "validation_pc_f1"])
        .map_err(|e| Error::Learn(e.to_string()))?;
    for e in log {
        w.write_record([
            e.epoch.to_string(),
            format!("{:.6}", e.step),
            format!("{:.6}", e.map_energy),
            format!("{:.6}", e.gradient_norm),
            e.validation_pc_f1.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])
        .map_err(|e| Error::Learn(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
