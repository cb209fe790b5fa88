use std::collections::BTreeSet;

use super::{Literal, RuleTemplate, Term, Weight, WeightMap};
use crate::corpus::{Arity, Category, Role};
use crate::error::{Error, Result};
use crate::featurize::Predicate;

/// The rule set for one task arity.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arity: Arity,
    pub rules: Vec<RuleTemplate>,
}

pub const NEGATIVE_PRIOR: &str = "negative_prior";
const DEFAULT_EXPONENT: u8 = 2;

fn m() -> Term {
    Term::var("M")
}
fn var(name: &str) -> Term {
    Term::var(name)
}
fn cat(c: Category) -> Term {
    Term::constant(c)
}

fn section(u: &str, x: Category) -> Literal {
    Literal::new(Predicate::Section, vec![m(), var(u), cat(x)])
}
fn remark(u: &str, x: Category) -> Literal {
    Literal::new(Predicate::RemarkType, vec![m(), var(u), cat(x)])
}
fn role(s: &str, r: Role) -> Literal {
    Literal::new(Predicate::SpeakerRole, vec![m(), var(s), Term::constant(r)])
}
fn observed(p: Predicate, vars: &[&str]) -> Literal {
    let mut args = vec![m()];
    args.extend(vars.iter().map(|v| var(v)));
    Literal::new(p, args)
}
fn observed_cat(p: Predicate, u: &str, x: Category) -> Literal {
    Literal::new(p, vec![m(), var(u), cat(x)])
}

fn soft(id: String, body: Vec<Literal>, head: Literal) -> RuleTemplate {
    RuleTemplate {
        id,
        body,
        head,
        weight: Weight::Soft(1.0),
        exponent: DEFAULT_EXPONENT,
    }
}

fn hard(id: &str, head: Literal) -> RuleTemplate {
    RuleTemplate {
        id: id.to_string(),
        body: Vec::new(),
        head,
        weight: Weight::Hard,
        exponent: 1,
    }
}

/// Group a rule id belongs to: the part before the first dot.
pub fn rule_group(id: &str) -> &str {
    id.split('.').next().unwrap_or(id)
}

fn all_rules(arity: Arity) -> Vec<RuleTemplate> {
    use Category::{Other, Pc, Ph};
    let remarks = arity.remark_kinds();
    let mut rules = Vec::new();

    // Priors and categorical constraints.
    let mut prior = soft(NEGATIVE_PRIOR.into(), Vec::new(), role("S", Role::Public).negate());
    prior.weight = Weight::Soft(0.5);
    rules.push(prior);
    rules.push(hard(
        "sum.section",
        Literal::new(Predicate::Section, vec![m(), var("U"), var("T")]),
    ));
    rules.push(hard(
        "sum.remark_type",
        Literal::new(Predicate::RemarkType, vec![m(), var("U"), var("T")]),
    ));
    rules.push(hard(
        "sum.speaker_role",
        Literal::new(Predicate::SpeakerRole, vec![m(), var("S"), var("T")]),
    ));

    // Meeting structure.
    rules.push(soft(
        "first_other".into(),
        vec![observed(Predicate::First, &["U"])],
        section("U", Other),
    ));
    for x in Category::ALL {
        for y in Category::ALL {
            rules.push(soft(
                format!("section_transition.{x}.{y}"),
                vec![section("U1", x), observed(Predicate::Precedes, &["U1", "U2"])],
                section("U2", y),
            ));
        }
    }
    for &x in remarks {
        for &y in remarks {
            rules.push(soft(
                format!("remark_transition.{x}.{y}"),
                vec![
                    section("U1", x),
                    remark("U1", x),
                    observed(Predicate::Precedes, &["U1", "U2"]),
                ],
                remark("U2", y),
            ));
        }
    }

    // Speaker roles.
    rules.push(soft(
        "speaks_often".into(),
        vec![observed(Predicate::SpeaksOften, &["S"])],
        role("S", Role::Other),
    ));
    rules.push(soft(
        "speaks_rarely".into(),
        vec![observed(Predicate::SpeaksRarely, &["S"])],
        role("S", Role::Public),
    ));
    rules.push(soft(
        "long_utterance_ratio".into(),
        vec![observed(Predicate::LongUtteranceRatio, &["S"])],
        role("S", Role::Public),
    ));
    for x in Category::ALL {
        if !arity.has_remark(x) {
            continue;
        }
        for y in Role::ALL {
            rules.push(soft(
                format!("c2sp.{x}.{y}"),
                vec![
                    section("U", x),
                    observed(Predicate::Spoken, &["U", "S"]),
                    role("S", y),
                ],
                remark("U", x),
            ));
        }
    }

    // Linguistic signals.
    rules.push(soft(
        "comment_transition".into(),
        vec![observed(Predicate::CommentTransition, &["U"])],
        section("U", Pc),
    ));
    rules.push(soft(
        "hearing_transition".into(),
        vec![observed(Predicate::HearingTransition, &["U"])],
        section("U", Ph),
    ));
    rules.push(soft(
        "introduction".into(),
        vec![
            observed(Predicate::Introduction, &["U"]),
            observed(Predicate::Spoken, &["U", "S"]),
        ],
        remark("U", Pc),
    ));

    // External AI signals and their corrections.
    for x in Category::ALL {
        rules.push(soft(
            format!("genai.{x}"),
            vec![observed_cat(Predicate::SectionGenAi, "U", x)],
            section("U", x),
        ));
    }
    for &x in remarks {
        rules.push(soft(
            format!("plm.{x}"),
            vec![observed_cat(Predicate::RemarkTypePlm, "U", x)],
            remark("U", x),
        ));
    }
    for x in Category::ALL {
        if !arity.has_remark(x) {
            continue;
        }
        for &y in remarks {
            rules.push(soft(
                format!("fix.{x}.{y}"),
                vec![
                    observed_cat(Predicate::RemarkTypePlm, "U", y),
                    observed_cat(Predicate::SectionGenAi, "U", x),
                ],
                remark("U", x),
            ));
        }
    }
    rules
}

/// The full rule set at `arity`, with any weights in `weights` applied on top
/// of the defaults (1.0, and 0.5 for the negative role prior).
pub fn build_model(arity: Arity, weights: &WeightMap) -> Result<Model> {
    Model {
        arity,
        rules: all_rules(arity),
    }
    .with_weights(weights)
}

/// Default weight of every soft rule at `arity`.
pub fn default_weights(arity: Arity) -> WeightMap {
    Model {
        arity,
        rules: all_rules(arity),
    }
    .weights()
}

impl Model {
    pub fn soft_rules(&self) -> impl Iterator<Item = &RuleTemplate> {
        self.rules.iter().filter(|r| !r.is_hard())
    }

    pub fn weights(&self) -> WeightMap {
        self.soft_rules()
            .map(|r| (r.id.clone(), r.weight.soft().unwrap_or_default()))
            .collect()
    }

    /// A copy with the named weights replaced. Unknown ids, hard-constraint
    /// ids and negative or non-finite weights are errors.
    pub fn with_weights(mut self, weights: &WeightMap) -> Result<Model> {
        let known: BTreeSet<&str> = self.soft_rules().map(|r| r.id.as_str()).collect();
        if let Some(bad) = weights.keys().find(|k| !known.contains(k.as_str())) {
            return Err(Error::Config(format!("unknown rule id {bad:?} for arity {}", self.arity)));
        }
        if let Some((k, w)) = weights.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Config(format!("weight of {k} must be finite and nonnegative, got {w}")));
        }
        for r in self.rules.iter_mut() {
            if let Some(w) = weights.get(&r.id) {
                r.weight = Weight::Soft(*w);
            }
        }
        Ok(self)
    }

    /// Sets the hinge exponent of every soft rule in `group` (see [`rule_group`]).
    pub fn set_exponent(&mut self, group: &str, exponent: u8) -> Result<()> {
        if !matches!(exponent, 1 | 2) {
            return Err(Error::Config(format!("hinge exponent must be 1 or 2, got {exponent}")));
        }
        let mut hit = false;
        for r in self.rules.iter_mut().filter(|r| !r.is_hard() && rule_group(&r.id) == group) {
            r.exponent = exponent;
            hit = true;
        }
        if hit {
            Ok(())
        } else {
            Err(Error::Config(format!("no rule group named {group:?}")))
        }
    }

    pub fn rule(&self, id: &str) -> Option<&RuleTemplate> {
        self.rules.iter().find(|r| r.id == id)
    }
}

/// Reads a weight file (JSON object of rule id → weight).
pub fn load_weights(bytes: &[u8]) -> Result<WeightMap> {
    serde_json::from_slice(bytes).map_err(|e| Error::parse("weight file", e.to_string()))
}

pub fn serialize_weights(weights: &WeightMap) -> String {
    let mut s = serde_json::to_string_pretty(weights).expect("weights serialize");
    s.push('\n');
    s
}
