//! Per-meeting featurize → ground → solve → classify.

use serde::Serialize;

use crate::corpus::{Arity, Category, Meeting};
use crate::error::{Error, Result};
use crate::evaluate::classify;
use crate::featurize::{featurize_meeting, Atom, CompiledLocale, Predicate, PredicateTable};
use crate::logic::{ground, Model, Mrf};
use crate::solve::{map_infer, InferenceResult, SolverConfig};

/// Locally computed atoms plus any external AI-signal atoms for `meeting`.
///
/// At arity 2 a RemarkTypePLM atom for PH is read as Other, since a binary
/// classifier would have said Other.
pub fn observed_atoms(meeting: &Meeting, locale: &CompiledLocale, external: Option<&PredicateTable>, arity: Arity) -> Result<Vec<Atom>> {
    let mut atoms = featurize_meeting(meeting, locale).atoms;
    if let Some(t) = external {
        t.validate_against(meeting)?;
        for a in &t.atoms {
            if a.predicate.is_open() {
                return Err(Error::validation(
                    format!("predicate table {}", t.meeting_id),
                    format!("{a} is an inference target"),
                ));
            }
            let mut a = a.clone();
            if arity == Arity::Two && a.predicate == Predicate::RemarkTypePlm && a.args[2] == Category::Ph.as_str() {
                a.args[2] = Category::Other.as_str().to_string();
            }
            atoms.push(a);
        }
    }
    Ok(atoms)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtterancePrediction {
    pub utterance_id: String,
    pub label: Category,
    /// RemarkType values for the categories in play, in `Category::ALL` order.
    pub scores: Vec<(Category, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingPrediction {
    pub meeting_id: String,
    pub city: String,
    pub arity: Arity,
    pub utterances: Vec<UtterancePrediction>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl MeetingPrediction {
    pub fn labels(&self) -> Vec<Category> {
        self.utterances.iter().map(|u| u.label).collect()
    }
}

/// RemarkType values per utterance, in meeting order.
pub fn remark_scores(meeting: &Meeting, mrf: &Mrf, result: &InferenceResult, arity: Arity) -> Result<Vec<Vec<(Category, f64)>>> {
    let m = meeting.meeting_id.as_str();
    meeting
        .utterances
        .iter()
        .map(|u| {
            arity
                .remark_kinds()
                .iter()
                .map(|c| {
                    let atom = crate::logic::GroundAtom::new(Predicate::RemarkType, &[m, &u.utterance_id, c.as_str()]);
                    let i = mrf.var_index(&atom).ok_or_else(|| {
                        Error::validation(format!("meeting {m}"), format!("no RemarkType atom for utterance {}", u.utterance_id))
                    })?;
                    Ok((*c, result.values[i]))
                })
                .collect()
        })
        .collect()
}

/// Grounds, solves and labels one meeting.
pub fn predict_meeting(model: &Model, meeting: &Meeting, observed: &[Atom], solver: &SolverConfig) -> Result<(MeetingPrediction, Mrf, InferenceResult)> {
    let mrf = ground(model, meeting, observed, None)?;
    let result = map_infer(&mrf, solver)?;
    let prediction = label_meeting(meeting, &mrf, &result, model.arity)?;
    Ok((prediction, mrf, result))
}

pub fn label_meeting(meeting: &Meeting, mrf: &Mrf, result: &InferenceResult, arity: Arity) -> Result<MeetingPrediction> {
    let scores = remark_scores(meeting, mrf, result, arity)?;
    let utterances = meeting
        .utterances
        .iter()
        .zip(scores)
        .map(|(u, s)| UtterancePrediction {
            utterance_id: u.utterance_id.clone(),
            label: classify(&s),
            scores: s,
        })
        .collect();
    Ok(MeetingPrediction {
        meeting_id: meeting.meeting_id.clone(),
        city: meeting.city.clone(),
        arity,
        utterances,
        objective: result.objective,
        iterations: result.iterations,
        converged: result.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{build_model, WeightMap};
    use crate::synth::{generate_meeting, CityProfile};

    #[test]
    fn clean_synthetic_meeting_is_labeled_well() {
        let p = CityProfile {
            phrase_noise: 0.0,
            decoy_probability: 0.0,
            genai_flip: 0.0,
            genai_jitter: 0.0,
            plm_flip: 0.0,
            ..Default::default()
        };
        let at = crate::corpus::parse_datetime("2024-02-01").unwrap();
        let (m, labels, table) = generate_meeting(&p, "m", at, 3).unwrap();
        let locale = p.locale().compile().unwrap();
        let model = build_model(Arity::Three, &WeightMap::new()).unwrap();
        let obs = observed_atoms(&m, &locale, Some(&table), Arity::Three).unwrap();
        let (pred, _, _) = predict_meeting(&model, &m, &obs, &SolverConfig::default()).unwrap();
        let wrong = pred
            .utterances
            .iter()
            .filter(|u| labels.get(&u.utterance_id).unwrap().remark_type != u.label)
            .count();
        assert!(wrong * 10 <= m.utterances.len(), "{wrong} of {} wrong", m.utterances.len());
    }

    #[test]
    fn binary_arity_never_predicts_hearing() {
        let at = crate::corpus::parse_datetime("2024-02-01").unwrap();
        let p = crate::synth::frequent_hearings_profile();
        let (m, _, table) = generate_meeting(&p, "m", at, 5).unwrap();
        let locale = p.locale().compile().unwrap();
        let model = build_model(Arity::Two, &WeightMap::new()).unwrap();
        let obs = observed_atoms(&m, &locale, Some(&table), Arity::Two).unwrap();
        assert!(!obs.iter().any(|a| a.predicate == Predicate::RemarkTypePlm && a.args[2] == "PH"));
        let (pred, _, _) = predict_meeting(&model, &m, &obs, &SolverConfig::default()).unwrap();
        assert!(pred.utterances.iter().all(|u| u.label != Category::Ph && u.scores.len() == 2));
    }
}
