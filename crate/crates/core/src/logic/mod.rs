//! Weighted Łukasiewicz rules and their grounding into a hinge-loss Markov
//! random field.
//!
//! A rule `w : B₁ ∧ … ∧ Bₖ → H` grounds to the potential
//! `w · max(0, ℓ(y))^p` where `ℓ = Σ truth(Bᵢ) − (k − 1) − truth(H)` is the
//! rule's distance to satisfaction, linear in the open atoms `y`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::featurize::Predicate;

mod ground;
pub mod lukasiewicz;
mod model;

pub use ground::{ground, total_potential, GroundAtom, GroundPotential, HardConstraint, Mrf, PotentialTotals, RuleInfo, RuleStats};
pub use lukasiewicz::{distance_to_satisfaction, luk_and, luk_implies, luk_not, luk_or};
pub use model::{build_model, default_weights, load_weights, rule_group, serialize_weights, Model};

/// Rule id → weight. Hard constraints never appear here.
pub type WeightMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }
    pub fn constant(value: impl fmt::Display) -> Self {
        Term::Const(value.to_string())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Literal {
    pub predicate: Predicate,
    pub args: Vec<Term>,
    pub negated: bool,
}

impl Literal {
    pub fn new(predicate: Predicate, args: Vec<Term>) -> Self {
        assert_eq!(args.len(), predicate.arity(), "wrong argument count for {predicate}");
        Literal {
            predicate,
            args,
            negated: false,
        }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("¬")?;
        }
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Soft(f64),
    /// Infinite weight. A hard template with an empty body and a categorical
    /// head `P(…, T)` stands for `Σ_T P(…, T) = 1`.
    Hard,
}

impl Weight {
    pub fn soft(self) -> Option<f64> {
        match self {
            Weight::Soft(w) => Some(w),
            Weight::Hard => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTemplate {
    pub id: String,
    pub body: Vec<Literal>,
    pub head: Literal,
    pub weight: Weight,
    /// Hinge exponent, 1 or 2.
    pub exponent: u8,
}

impl RuleTemplate {
    pub fn is_hard(&self) -> bool {
        matches!(self.weight, Weight::Hard)
    }

    /// Head variables missing from a non-empty body. Such a rule cannot be
    /// grounded.
    pub fn unbound_head_variables(&self) -> Vec<&str> {
        if self.body.is_empty() || self.is_hard() {
            return Vec::new();
        }
        self.head
            .variables()
            .filter(|v| !self.body.iter().any(|b| b.variables().any(|x| x == *v)))
            .collect()
    }
}

impl fmt::Display for RuleTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.weight {
            Weight::Soft(w) => write!(f, "{}: {w} ", self.id)?,
            Weight::Hard => write!(f, "{}: ∞ ", self.id)?,
        }
        if self.is_hard() {
            return write!(f, "Σ {} = 1", self.head);
        }
        for (i, b) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            write!(f, "{b}")?;
        }
        if !self.body.is_empty() {
            f.write_str(" → ")?;
        }
        write!(f, "{}", self.head)?;
        if self.exponent == 2 {
            f.write_str(" ^2")?;
        }
        Ok(())
    }
}
