//! Labels from inference output, per-class metrics, splits and experiments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::argmax_or_other;
use crate::corpus::{Arity, Category, Meeting};
use crate::error::{Error, Result};
use crate::logic::Mrf;
use crate::pipeline::remark_scores;
use crate::solve::InferenceResult;

mod experiment;
mod split;

pub use experiment::{
    render_table, run_experiment, write_predictions_csv, ArityResult, CityResult, ExperimentConfig, ExperimentReport, LabelLedger,
    Method, Overall, Protocol, Purpose, RunInputs,
};
pub use split::{chronological_split, loco_split, CitySplit, SplitPlan, DEFAULT_RATIOS};

/// Highest-scoring category; exact ties go to Other.
pub fn classify(scores: &[(Category, f64)]) -> Category {
    argmax_or_other(scores.iter().copied())
}

/// Per-utterance remark labels for `meeting` from a solved Mrf.
pub fn classify_result(meeting: &Meeting, mrf: &Mrf, result: &InferenceResult, arity: Arity) -> Result<Vec<Category>> {
    Ok(remark_scores(meeting, mrf, result, arity)?.iter().map(|s| classify(s)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<Category>,
    /// Rows are gold classes, columns predicted classes, in `classes` order.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: BTreeMap<Category, ClassMetrics>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Metrics {
    pub fn from_confusion(classes: &[Category], confusion: Vec<Vec<usize>>) -> Self {
        let k = classes.len();
        let per_class = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let tp = confusion[i][i];
                let gold: usize = confusion[i].iter().sum();
                let pred: usize = (0..k).map(|r| confusion[r][i]).sum();
                let (p, r) = (ratio(tp, pred), ratio(tp, gold));
                (
                    *c,
                    ClassMetrics {
                        precision: p,
                        recall: r,
                        f1: f1(p, r),
                        support: gold,
                    },
                )
            })
            .collect();
        Metrics {
            classes: classes.to_vec(),
            confusion,
            per_class,
        }
    }

    /// An all-zero confusion matrix over `classes`.
    pub fn empty(classes: &[Category]) -> Self {
        Self::from_confusion(classes, vec![vec![0; classes.len()]; classes.len()])
    }

    /// Sums two confusion matrices over the same classes.
    pub fn merge(&self, other: &Metrics) -> Metrics {
        assert_eq!(self.classes, other.classes, "merging metrics over different classes");
        let confusion = self
            .confusion
            .iter()
            .zip(&other.confusion)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Self::from_confusion(&self.classes, confusion)
    }

    pub fn f1(&self, c: Category) -> f64 {
        self.per_class.get(&c).map_or(0.0, |m| m.f1)
    }

    pub fn pc_f1(&self) -> f64 {
        self.f1(Category::Pc)
    }
}

/// One-vs-rest precision, recall and F1 per class. Inputs are
/// `(utterance_id, label)` pairs aligned by position.
pub fn per_class_metrics(predicted: &[(String, Category)], gold: &[(String, Category)], classes: &[Category]) -> Result<Metrics> {
    if predicted.len() != gold.len() {
        return Err(Error::Evaluate(format!("{} predictions for {} gold labels", predicted.len(), gold.len())));
    }
    let index = |c: Category| {
        classes
            .iter()
            .position(|x| *x == c)
            .ok_or_else(|| Error::Evaluate(format!("label {c} is outside the class set")))
    };
    let mut confusion = vec![vec![0; classes.len()]; classes.len()];
    for ((pid, p), (gid, g)) in predicted.iter().zip(gold) {
        if pid != gid {
            return Err(Error::Evaluate(format!("prediction for {pid} aligned with gold label for {gid}")));
        }
        confusion[index(*g)?][index(*p)?] += 1;
    }
    Ok(Metrics::from_confusion(classes, confusion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Category::{Other, Pc, Ph};

    fn pairs(labels: &[Category]) -> Vec<(String, Category)> {
        labels.iter().enumerate().map(|(i, c)| (format!("u{i}"), *c)).collect()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[(Pc, 0.9), (Ph, 0.05), (Other, 0.05)]), Pc);
        assert_eq!(classify(&[(Pc, 0.5), (Other, 0.5)]), Other);
        assert_eq!(classify(&[(Pc, 0.4), (Ph, 0.4), (Other, 0.2)]), Other);
    }

    #[test]
    fn metric_examples() {
        let m = per_class_metrics(&pairs(&[Pc, Pc, Other]), &pairs(&[Pc, Other, Other]), &[Pc, Other]).unwrap();
        let pc = m.per_class[&Pc];
        assert_eq!(pc.precision, 0.5);
        assert_eq!(pc.recall, 1.0);
        assert!((pc.f1 - 2.0 / 3.0).abs() < 1e-15);

        let gold = pairs(&[Pc, Ph, Other, Other]);
        let m = per_class_metrics(&gold, &gold, &Category::ALL).unwrap();
        assert!(m.per_class.values().all(|c| c.f1 == 1.0));

        let m = per_class_metrics(&pairs(&[Other, Other]), &pairs(&[Pc, Other]), &[Pc, Other]).unwrap();
        assert_eq!(m.pc_f1(), 0.0);
        assert_eq!(m.per_class[&Pc].precision, 0.0);
    }

    #[test]
    fn misaligned_or_foreign_labels_fail() {
        let a = pairs(&[Pc]);
        let b = vec![("x".to_string(), Pc)];
        assert!(per_class_metrics(&a, &b, &[Pc, Other]).is_err());
        assert!(per_class_metrics(&pairs(&[Ph]), &pairs(&[Pc]), &[Pc, Other]).is_err());
        assert!(per_class_metrics(&pairs(&[Pc, Pc]), &pairs(&[Pc]), &[Pc, Other]).is_err());
    }

    fn cat() -> impl Strategy<Value = Category> {
        prop_oneof![Just(Pc), Just(Ph), Just(Other)]
    }

    proptest! {
        #[test]
        fn confusion_agrees_with_direct_counts(labels in proptest::collection::vec((cat(), cat()), 0..60)) {
            let pred: Vec<Category> = labels.iter().map(|l| l.0).collect();
            let gold: Vec<Category> = labels.iter().map(|l| l.1).collect();
            let m = per_class_metrics(&pairs(&pred), &pairs(&gold), &Category::ALL).unwrap();
            for c in Category::ALL {
                let tp = labels.iter().filter(|(p, g)| *p == c && *g == c).count();
                let np = labels.iter().filter(|(p, _)| *p == c).count();
                let ng = labels.iter().filter(|(_, g)| *g == c).count();
                let p = if np == 0 { 0.0 } else { tp as f64 / np as f64 };
                let r = if ng == 0 { 0.0 } else { tp as f64 / ng as f64 };
                let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
                prop_assert_eq!(m.per_class[&c].precision, p);
                prop_assert_eq!(m.per_class[&c].recall, r);
                prop_assert_eq!(m.per_class[&c].f1, f);
                prop_assert_eq!(m.per_class[&c].support, ng);
            }
            for (i, row) in m.confusion.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<usize>(), m.per_class[&m.classes[i]].support);
            }
        }

        #[test]
        fn classify_is_scale_invariant(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, k in 0.01f64..100.0) {
            let s = [(Pc, a), (Ph, b), (Other, c)];
            let scaled = [(Pc, a * k), (Ph, b * k), (Other, c * k)];
            prop_assert_eq!(classify(&s), classify(&scaled));
        }
    }
}
