use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};

use super::{Literal, Model, RuleTemplate, Term, Weight, WeightMap};
use crate::corpus::{Arity, Category, LabelSet, Meeting, Role};
use crate::error::{Error, Result};
use crate::featurize::{ArgKind, Atom, Predicate};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: Predicate,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: Predicate, args: &[&str]) -> Self {
        GroundAtom {
            predicate,
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(", "))
    }
}

/// `weight · max(0, constant + Σ coef·y[var])^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundPotential {
    /// Index into [`Mrf::rules`].
    pub rule: usize,
    pub weight: f64,
    pub exponent: u8,
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl GroundPotential {
    pub fn linear(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * y[i]).sum::<f64>()
    }

    /// `max(0, ℓ(y))^p`, without the weight.
    pub fn unweighted(&self, y: &[f64]) -> f64 {
        let d = self.linear(y).max(0.0);
        if self.exponent == 2 {
            d * d
        } else {
            d
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.weight * self.unweighted(y)
    }
}

/// The open variables in `vars` must sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct HardConstraint {
    pub vars: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleInfo {
    pub id: String,
    pub weight: f64,
    pub exponent: u8,
}

/// Ground rules produced per template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RuleStats {
    /// Complete variable bindings found, before trivially satisfied rules are dropped.
    pub instantiated: usize,
    /// Bindings dropped because a body literal was observed false.
    pub dropped: usize,
}

/// A grounded hinge-loss Markov random field over `[0, 1]`-valued variables.
#[derive(Debug, Clone)]
pub struct Mrf {
    pub meeting_id: String,
    pub variables: Vec<GroundAtom>,
    index: HashMap<GroundAtom, usize>,
    pub observed: BTreeMap<GroundAtom, f64>,
    pub rules: Vec<RuleInfo>,
    pub potentials: Vec<GroundPotential>,
    pub constraints: Vec<HardConstraint>,
    pub stats: Vec<RuleStats>,
}

impl Mrf {
    /// Assembles an Mrf from parts, checking that potentials and constraints
    /// only reference registered variables and that no variable is in two
    /// constraint groups.
    pub fn from_parts(
        meeting_id: impl Into<String>,
        variables: Vec<GroundAtom>,
        rules: Vec<RuleInfo>,
        potentials: Vec<GroundPotential>,
        constraints: Vec<HardConstraint>,
    ) -> Result<Self> {
        let meeting_id = meeting_id.into();
        let d = variables.len();
        let ctx = || format!("mrf {meeting_id}");
        for p in &potentials {
            if p.rule >= rules.len() {
                return Err(Error::validation(ctx(), format!("potential names rule {}", p.rule)));
            }
            if !(p.exponent == 1 || p.exponent == 2) || p.weight < 0.0 || !p.weight.is_finite() {
                return Err(Error::validation(ctx(), "potential weight or exponent out of range"));
            }
            if let Some(&(i, _)) = p.terms.iter().find(|(i, _)| *i >= d) {
                return Err(Error::validation(ctx(), format!("potential references variable {i} of {d}")));
            }
        }
        let mut grouped = vec![false; d];
        for c in &constraints {
            for &i in &c.vars {
                if i >= d || std::mem::replace(&mut grouped[i], true) {
                    return Err(Error::validation(ctx(), format!("variable {i} is unknown or in two groups")));
                }
            }
        }
        let index = variables.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let stats = vec![RuleStats::default(); rules.len()];
        Ok(Mrf {
            meeting_id,
            variables,
            index,
            observed: BTreeMap::new(),
            rules,
            potentials,
            constraints,
            stats,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_index(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    /// Truth value of `atom` under `assignment`: open atoms read the
    /// assignment, observed atoms the store, anything else is 0.
    pub fn truth(&self, atom: &GroundAtom, assignment: &[f64]) -> f64 {
        match self.var_index(atom) {
            Some(i) => assignment[i],
            None => self.observed.get(atom).copied().unwrap_or(0.0),
        }
    }

    pub fn rule_index(&self, id: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }

    pub fn stats_for(&self, id: &str) -> Option<RuleStats> {
        self.rule_index(id).map(|i| self.stats[i])
    }

    /// Potentials grounded from rule `id`.
    pub fn potentials_of<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a GroundPotential> + 'a {
        let idx = self.rule_index(id);
        self.potentials.iter().filter(move |p| Some(p.rule) == idx)
    }

    /// Replaces rule weights by id; unknown ids are ignored.
    pub fn reweight(&mut self, weights: &WeightMap) {
        for r in self.rules.iter_mut() {
            if let Some(w) = weights.get(&r.id) {
                r.weight = *w;
            }
        }
        for p in self.potentials.iter_mut() {
            p.weight = self.rules[p.rule].weight;
        }
    }

    /// Feasible starting point: `1/k` in every group of size `k`, 0.5 for
    /// ungrouped variables.
    pub fn uniform_point(&self) -> Vec<f64> {
        let mut y = vec![0.5; self.num_vars()];
        for c in &self.constraints {
            let v = 1.0 / c.vars.len() as f64;
            for &i in &c.vars {
                y[i] = v;
            }
        }
        y
    }

    /// Checks the box and every sum-to-one group within `tol`.
    pub fn check_feasible(&self, y: &[f64], tol: f64) -> Result<()> {
        if y.len() != self.num_vars() {
            return Err(Error::Infeasible(format!(
                "assignment has {} values for {} variables",
                y.len(),
                self.num_vars()
            )));
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !(-tol..=1.0 + tol).contains(*v)) {
            return Err(Error::Infeasible(format!("{} = {v} is outside [0, 1]", self.variables[i])));
        }
        for c in &self.constraints {
            let s: f64 = c.vars.iter().map(|&i| y[i]).sum();
            if (s - 1.0).abs() > tol {
                let names: Vec<String> = c.vars.iter().map(|&i| self.variables[i].to_string()).collect();
                return Err(Error::Infeasible(format!("Σ {{{}}} = {s}, expected 1", names.join(", "))));
            }
        }
        Ok(())
    }

    /// Weighted energy `Σ w·max(0, ℓ)^p`, no feasibility check.
    pub fn energy(&self, y: &[f64]) -> f64 {
        self.potentials.iter().map(|p| p.value(y)).sum()
    }

    /// Human-readable listing of every ground potential and constraint.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# mrf {}: {} variables, {} potentials, {} constraints",
            self.meeting_id,
            self.num_vars(),
            self.potentials.len(),
            self.constraints.len()
        );
        for p in &self.potentials {
            let r = &self.rules[p.rule];
            let _ = write!(out, "{} w={} p={}: max(0, {}", r.id, p.weight, p.exponent, p.constant);
            for &(i, c) in &p.terms {
                let _ = write!(out, " {} {}·{}", if c < 0.0 { '-' } else { '+' }, c.abs(), self.variables[i]);
            }
            let _ = writeln!(out, ")");
        }
        for c in &self.constraints {
            let names: Vec<String> = c.vars.iter().map(|&i| self.variables[i].to_string()).collect();
            let _ = writeln!(out, "hard: {} = 1", names.join(" + "));
        }
        out
    }
}

/// Per-rule unweighted potential sums and the weighted grand total.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTotals {
    pub by_rule: BTreeMap<String, f64>,
    pub weighted_total: f64,
}

pub fn total_potential(mrf: &Mrf, assignment: &[f64]) -> Result<PotentialTotals> {
    if assignment.len() != mrf.num_vars() {
        return Err(Error::Infeasible(format!(
            "assignment has {} values for {} variables",
            assignment.len(),
            mrf.num_vars()
        )));
    }
    if let Some((i, v)) = assignment
        .iter()
        .enumerate()
        .find(|(_, v)| !(-1e-9..=1.0 + 1e-9).contains(*v))
    {
        return Err(Error::Infeasible(format!("{} = {v} is outside [0, 1]", mrf.variables[i])));
    }
    let mut sums = vec![0.0; mrf.rules.len()];
    let mut weighted_total = 0.0;
    for p in &mrf.potentials {
        let u = p.unweighted(assignment);
        sums[p.rule] += u;
        weighted_total += p.weight * u;
    }
    Ok(PotentialTotals {
        by_rule: mrf.rules.iter().map(|r| r.id.clone()).zip(sums).collect(),
        weighted_total,
    })
}

// ---------------------------------------------------------------------------
// Grounding

struct Domain {
    meeting: Vec<String>,
    utterances: Vec<String>,
    speakers: Vec<String>,
    categories: Vec<String>,
    roles: Vec<String>,
}

impl Domain {
    fn of(&self, kind: ArgKind) -> &[String] {
        match kind {
            ArgKind::Meeting => &self.meeting,
            ArgKind::Utterance => &self.utterances,
            ArgKind::Speaker => &self.speakers,
            ArgKind::Category => &self.categories,
            ArgKind::Role => &self.roles,
        }
    }
}

enum Step<'a> {
    Join(&'a Literal),
    Range(String, ArgKind),
}

type Binding = HashMap<String, String>;

struct Grounder<'a> {
    domain: Domain,
    observed: BTreeMap<GroundAtom, f64>,
    by_predicate: HashMap<Predicate, Vec<(GroundAtom, f64)>>,
    open_predicates: HashSet<Predicate>,
    variables: Vec<GroundAtom>,
    index: HashMap<GroundAtom, usize>,
    _meeting: &'a Meeting,
}

fn resolve(lit: &Literal, b: &Binding) -> GroundAtom {
    GroundAtom {
        predicate: lit.predicate,
        args: lit
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => b[v].clone(),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    }
}

fn var_kinds(lit: &Literal) -> impl Iterator<Item = (&str, ArgKind)> {
    lit.args
        .iter()
        .zip(lit.predicate.signature())
        .filter_map(|(t, k)| match t {
            Term::Var(v) => Some((v.as_str(), *k)),
            Term::Const(_) => None,
        })
}

impl<'a> Grounder<'a> {
    fn plan<'r>(&self, rule: &'r RuleTemplate) -> Vec<Step<'r>> {
        let mut steps = Vec::new();
        let mut bound: HashSet<&str> = HashSet::new();
        for lit in &rule.body {
            if !lit.negated && !self.open_predicates.contains(&lit.predicate) {
                steps.push(Step::Join(lit));
                bound.extend(lit.variables());
            }
        }
        for lit in rule.body.iter().chain(std::iter::once(&rule.head)) {
            for (v, kind) in var_kinds(lit) {
                if bound.insert(v) {
                    steps.push(Step::Range(v.to_string(), kind));
                }
            }
        }
        steps
    }

    fn enumerate(&self, steps: &[Step<'_>], binding: &mut Binding, out: &mut Vec<Binding>) {
        let Some((step, rest)) = steps.split_first() else {
            out.push(binding.clone());
            return;
        };
        match step {
            Step::Join(lit) => {
                let Some(atoms) = self.by_predicate.get(&lit.predicate) else {
                    return;
                };
                for (atom, _) in atoms {
                    let mut fresh = Vec::new();
                    let mut ok = true;
                    for (term, value) in lit.args.iter().zip(&atom.args) {
                        match term {
                            Term::Const(c) => ok = c == value,
                            Term::Var(v) => match binding.get(v) {
                                Some(b) => ok = b == value,
                                None => {
                                    binding.insert(v.clone(), value.clone());
                                    fresh.push(v.clone());
                                }
                            },
                        }
                        if !ok {
                            break;
                        }
                    }
                    if ok {
                        self.enumerate(rest, binding, out);
                    }
                    for v in fresh {
                        binding.remove(&v);
                    }
                }
            }
            Step::Range(var, kind) => {
                for value in self.domain.of(*kind) {
                    binding.insert(var.clone(), value.clone());
                    self.enumerate(rest, binding, out);
                }
                binding.remove(var);
            }
        }
    }

    /// Adds `truth(lit)` (times `sign`) to the linear form. Returns the
    /// observed truth value, or `None` for an open atom.
    fn fold(
        &self,
        rule: &RuleTemplate,
        lit: &Literal,
        b: &Binding,
        sign: f64,
        terms: &mut Vec<(usize, f64)>,
        constant: &mut f64,
    ) -> Result<Option<f64>> {
        let atom = resolve(lit, b);
        if self.open_predicates.contains(&lit.predicate) {
            let &i = self.index.get(&atom).ok_or_else(|| Error::Grounding {
                rule: rule.id.clone(),
                message: format!("{atom} is not a registered open atom"),
            })?;
            if lit.negated {
                *constant += sign;
                terms.push((i, -sign));
            } else {
                terms.push((i, sign));
            }
            Ok(None)
        } else {
            let v = self.observed.get(&atom).copied().unwrap_or(0.0);
            let truth = if lit.negated { 1.0 - v } else { v };
            *constant += sign * truth;
            Ok(Some(truth))
        }
    }
}

fn merge_terms(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (i, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

fn register_open(meeting: &Meeting, arity: Arity) -> Vec<GroundAtom> {
    let m = meeting.meeting_id.as_str();
    let mut atoms = Vec::new();
    for u in &meeting.utterances {
        for c in Category::ALL {
            atoms.push(GroundAtom::new(Predicate::Section, &[m, &u.utterance_id, c.as_str()]));
        }
        for c in arity.remark_kinds() {
            atoms.push(GroundAtom::new(Predicate::RemarkType, &[m, &u.utterance_id, c.as_str()]));
        }
    }
    for s in &meeting.speakers {
        for r in Role::ALL {
            atoms.push(GroundAtom::new(Predicate::SpeakerRole, &[m, s, r.as_str()]));
        }
    }
    atoms
}

fn gold_atoms(meeting: &Meeting, labels: &LabelSet, arity: Arity) -> Result<Vec<(GroundAtom, f64)>> {
    let m = meeting.meeting_id.as_str();
    let mut out = Vec::new();
    let one = |b: bool| if b { 1.0 } else { 0.0 };
    for u in &meeting.utterances {
        let rec = labels.get(&u.utterance_id).ok_or_else(|| {
            Error::validation(format!("meeting {m}"), format!("no gold label for {}", u.utterance_id))
        })?;
        for c in Category::ALL {
            out.push((GroundAtom::new(Predicate::Section, &[m, &u.utterance_id, c.as_str()]), one(rec.section == c)));
        }
        let remark = rec.remark(arity);
        for &c in arity.remark_kinds() {
            out.push((GroundAtom::new(Predicate::RemarkType, &[m, &u.utterance_id, c.as_str()]), one(remark == c)));
        }
    }
    for s in &meeting.speakers {
        let role = labels.speaker_roles.get(s).copied().unwrap_or(Role::Other);
        for r in Role::ALL {
            out.push((GroundAtom::new(Predicate::SpeakerRole, &[m, s, r.as_str()]), one(role == r)));
        }
    }
    Ok(out)
}

/// Grounds `model` over one meeting.
///
/// `observed` must include the structural atoms (`First`, `Precedes`,
/// `Spoken`); missing observed atoms count as 0. With `clamped_gold`, the
/// section, remark and role atoms are fixed to the gold labels and the Mrf
/// has no open variables.
pub fn ground(model: &Model, meeting: &Meeting, observed: &[Atom], clamped_gold: Option<&LabelSet>) -> Result<Mrf> {
    for rule in &model.rules {
        let unbound = rule.unbound_head_variables();
        if !unbound.is_empty() {
            return Err(Error::Grounding {
                rule: rule.id.clone(),
                message: format!("head variables {unbound:?} do not occur in the body"),
            });
        }
    }

    let arity = model.arity;
    let mut observed_store: BTreeMap<GroundAtom, f64> = BTreeMap::new();
    let mut by_predicate: HashMap<Predicate, Vec<(GroundAtom, f64)>> = HashMap::new();
    let mut insert = |atom: GroundAtom, value: f64| match observed_store.get_mut(&atom) {
        Some(v) => *v = v.max(value),
        None => {
            observed_store.insert(atom.clone(), value);
            by_predicate.entry(atom.predicate).or_default().push((atom, value));
        }
    };
    for a in observed {
        if a.args.first() != Some(&meeting.meeting_id) {
            return Err(Error::validation(
                format!("meeting {}", meeting.meeting_id),
                format!("observed atom {a} belongs to another meeting"),
            ));
        }
        if a.predicate.is_open() {
            return Err(Error::validation(
                format!("meeting {}", meeting.meeting_id),
                format!("{a} is an inference target, not an observation"),
            ));
        }
        insert(
            GroundAtom {
                predicate: a.predicate,
                args: a.args.clone(),
            },
            a.value,
        );
    }

    let mut open_predicates: HashSet<Predicate> =
        [Predicate::Section, Predicate::RemarkType, Predicate::SpeakerRole].into_iter().collect();
    let variables = match clamped_gold {
        Some(labels) => {
            for (atom, v) in gold_atoms(meeting, labels, arity)? {
                insert(atom, v);
            }
            open_predicates.clear();
            Vec::new()
        }
        None => register_open(meeting, arity),
    };
    // Keep join order deterministic regardless of how duplicates were merged.
    for list in by_predicate.values_mut() {
        for (atom, v) in list.iter_mut() {
            *v = observed_store[atom];
        }
    }
    let index: HashMap<GroundAtom, usize> = variables.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();

    let grounder = Grounder {
        domain: Domain {
            meeting: vec![meeting.meeting_id.clone()],
            utterances: meeting.utterances.iter().map(|u| u.utterance_id.clone()).collect(),
            speakers: meeting.speakers.iter().cloned().collect(),
            categories: Category::ALL.iter().map(|c| c.as_str().to_string()).collect(),
            roles: Role::ALL.iter().map(|r| r.as_str().to_string()).collect(),
        },
        observed: observed_store,
        by_predicate,
        open_predicates,
        variables,
        index,
        _meeting: meeting,
    };

    let mut rules = Vec::new();
    let mut stats = Vec::new();
    let mut potentials = Vec::new();
    let mut constraints = Vec::new();

    for rule in &model.rules {
        if rule.is_hard() {
            constraints.extend(ground_constraint(&grounder, rule)?);
            continue;
        }
        let weight = rule.weight.soft().unwrap_or_default();
        let rule_idx = rules.len();
        rules.push(RuleInfo {
            id: rule.id.clone(),
            weight,
            exponent: rule.exponent,
        });
        let mut st = RuleStats::default();

        let steps = grounder.plan(rule);
        let mut bindings = Vec::new();
        grounder.enumerate(&steps, &mut Binding::new(), &mut bindings);
        let k = rule.body.len() as f64;

        'binding: for b in bindings {
            st.instantiated += 1;
            let mut terms = Vec::new();
            let mut constant = 1.0 - k;
            for lit in &rule.body {
                if grounder.fold(rule, lit, &b, 1.0, &mut terms, &mut constant)? == Some(0.0) {
                    st.dropped += 1;
                    continue 'binding;
                }
            }
            grounder.fold(rule, &rule.head, &b, -1.0, &mut terms, &mut constant)?;
            potentials.push(GroundPotential {
                rule: rule_idx,
                weight,
                exponent: rule.exponent,
                terms: merge_terms(terms),
                constant,
            });
        }
        stats.push(st);
    }

    let mut mrf = Mrf::from_parts(&meeting.meeting_id, grounder.variables, rules, potentials, constraints)?;
    mrf.observed = grounder.observed;
    mrf.stats = stats;
    Ok(mrf)
}

fn ground_constraint(g: &Grounder<'_>, rule: &RuleTemplate) -> Result<Vec<HardConstraint>> {
    debug_assert!(matches!(rule.weight, Weight::Hard));
    let head = &rule.head;
    let sig = head.predicate.signature();
    let summed = match (head.args.last(), sig.last()) {
        (Some(Term::Var(v)), Some(ArgKind::Category | ArgKind::Role)) => v.clone(),
        _ => {
            return Err(Error::Grounding {
                rule: rule.id.clone(),
                message: "hard constraint head must end in a category variable".into(),
            })
        }
    };
    if !g.open_predicates.contains(&head.predicate) {
        return Ok(Vec::new());
    }
    let mut steps = Vec::new();
    for (v, kind) in var_kinds(head) {
        if v != summed {
            steps.push(Step::Range(v.to_string(), kind));
        }
    }
    let mut bindings = Vec::new();
    g.enumerate(&steps, &mut Binding::new(), &mut bindings);
    let mut out = Vec::new();
    for mut b in bindings {
        let mut vars = Vec::new();
        for value in g.domain.of(*sig.last().expect("non-empty signature")) {
            b.insert(summed.clone(), value.clone());
            if let Some(&i) = g.index.get(&resolve(head, &b)) {
                vars.push(i);
            }
        }
        if !vars.is_empty() {
            out.push(HardConstraint { vars });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_datetime, LabelRecord, Utterance};
    use crate::featurize::{structural_atoms, PredicateTable};
    use crate::logic::build_model;

    fn meeting(n: usize, speakers: usize) -> Meeting {
        let utts = (0..n)
            .map(|i| Utterance::new("m", format!("u{i}"), i, format!("s{}", i % speakers), "a few words"))
            .collect();
        Meeting::new("m", "c", parse_datetime("2024-01-01").unwrap(), utts).unwrap()
    }

    fn model(arity: Arity) -> Model {
        build_model(arity, &WeightMap::new()).unwrap()
    }

    #[test]
    fn open_variable_and_constraint_counts() {
        let m = meeting(5, 2);
        let obs = structural_atoms(&m);
        let mrf = ground(&model(Arity::Three), &m, &obs, None).unwrap();
        assert_eq!(mrf.num_vars(), 3 * 5 + 3 * 5 + 2 * 2);
        assert_eq!(mrf.constraints.len(), 5 + 5 + 2);
        let mrf2 = ground(&model(Arity::Two), &m, &obs, None).unwrap();
        assert_eq!(mrf2.num_vars(), 3 * 5 + 2 * 5 + 2 * 2);
    }

    #[test]
    fn section_transition_count() {
        let m = meeting(6, 3);
        let mrf = ground(&model(Arity::Three), &m, &structural_atoms(&m), None).unwrap();
        let total: usize = mrf
            .rules
            .iter()
            .zip(&mrf.stats)
            .filter(|(r, _)| r.id.starts_with("section_transition."))
            .map(|(_, s)| s.instantiated)
            .sum();
        assert_eq!(total, 9 * 5);
        assert_eq!(mrf.potentials_of("section_transition.PC.PH").count(), 5);
    }

    #[test]
    fn zero_observations_produce_no_potentials() {
        let m = meeting(4, 2);
        let mut obs = structural_atoms(&m);
        let mrf = ground(&model(Arity::Three), &m, &obs, None).unwrap();
        assert_eq!(mrf.potentials_of("comment_transition").count(), 0);

        // Explicit zero: instantiated, then dropped.
        let mut t = PredicateTable::new("m");
        t.push(Predicate::CommentTransition, &["m", "u1"], 0.0);
        t.push(Predicate::CommentTransition, &["m", "u2"], 1.0);
        obs.extend(t.atoms);
        let mrf = ground(&model(Arity::Three), &m, &obs, None).unwrap();
        let st = mrf.stats_for("comment_transition").unwrap();
        assert_eq!((st.instantiated, st.dropped), (2, 1));
        let p: Vec<_> = mrf.potentials_of("comment_transition").collect();
        assert_eq!(p.len(), 1);
        // ℓ = 1 − Section(u2, PC)
        let i = mrf.var_index(&GroundAtom::new(Predicate::Section, &["m", "u2", "PC"])).unwrap();
        assert_eq!(p[0].constant, 1.0);
        assert_eq!(p[0].terms, vec![(i, -1.0)]);
    }

    #[test]
    fn prior_is_linear_in_public_role() {
        let m = meeting(2, 2);
        let mrf = ground(&model(Arity::Three), &m, &structural_atoms(&m), None).unwrap();
        let p: Vec<_> = mrf.potentials_of("negative_prior").collect();
        assert_eq!(p.len(), 2);
        let i = mrf.var_index(&GroundAtom::new(Predicate::SpeakerRole, &["m", "s0", "Public"])).unwrap();
        assert_eq!(p[0].constant, 0.0);
        assert_eq!(p[0].terms, vec![(i, 1.0)]);
        assert_eq!(p[0].weight, 0.5);
    }

    #[test]
    fn unbound_head_variable_is_an_error() {
        let mut model = model(Arity::Three);
        let rule = model.rules.iter_mut().find(|r| r.id == "genai.PC").unwrap();
        // Head names a speaker that the body never binds.
        rule.head = Literal::new(
            Predicate::SpeakerRole,
            vec![Term::var("M"), Term::var("S"), Term::constant("Public")],
        );
        let m = meeting(2, 1);
        match ground(&model, &m, &structural_atoms(&m), None) {
            Err(Error::Grounding { rule, .. }) => assert_eq!(rule, "genai.PC"),
            other => panic!("expected grounding error, got {other:?}"),
        }
    }

    fn gold(m: &Meeting) -> LabelSet {
        let recs = m
            .utterances
            .iter()
            .map(|u| {
                let s = if u.index >= 2 { Category::Pc } else { Category::Other };
                let r = if u.speaker_id == "s1" { Role::Public } else { Role::Other };
                (u.utterance_id.clone(), LabelRecord::new(s, r))
            })
            .collect();
        LabelSet::for_meeting(m, recs).unwrap()
    }

    fn gold_assignment(mrf: &Mrf, labels: &LabelSet) -> Vec<f64> {
        mrf.variables
            .iter()
            .map(|a| {
                let hit = match a.predicate {
                    Predicate::Section => labels.get(&a.args[1]).unwrap().section.as_str() == a.args[2],
                    Predicate::RemarkType => labels.get(&a.args[1]).unwrap().remark_type.as_str() == a.args[2],
                    _ => labels.speaker_roles[&a.args[1]].as_str() == a.args[2],
                };
                if hit {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn clamped_grounding_matches_open_grounding_at_gold() {
        let m = meeting(7, 3);
        let labels = gold(&m);
        let mut obs = structural_atoms(&m);
        obs.extend(crate::featurize::speaks_often(&m, &crate::featurize::LocaleConfig::new("c")));
        let model = model(Arity::Three);
        let open = ground(&model, &m, &obs, None).unwrap();
        let clamped = ground(&model, &m, &obs, Some(&labels)).unwrap();
        assert_eq!(clamped.num_vars(), 0);
        assert!(clamped.constraints.is_empty());
        let y = gold_assignment(&open, &labels);
        open.check_feasible(&y, 1e-12).unwrap();
        let a = total_potential(&open, &y).unwrap();
        let b = total_potential(&clamped, &[]).unwrap();
        for (k, v) in &a.by_rule {
            assert!((v - b.by_rule[k]).abs() < 1e-12, "{k}: {v} vs {}", b.by_rule[k]);
        }
    }

    #[test]
    fn total_potential_arithmetic() {
        let rules = vec![RuleInfo {
            id: "r".into(),
            weight: 2.0,
            exponent: 2,
        }];
        let pot = GroundPotential {
            rule: 0,
            weight: 2.0,
            exponent: 2,
            terms: vec![(0, 1.0)],
            constant: 0.0,
        };
        let mrf = Mrf::from_parts("x", vec![GroundAtom::new(Predicate::Section, &["x", "u", "PC"])], rules, vec![pot], vec![])
            .unwrap();
        let t = total_potential(&mrf, &[0.5]).unwrap();
        assert!((t.by_rule["r"] - 0.25).abs() < 1e-15);
        assert!((t.weighted_total - 0.5).abs() < 1e-15);
        assert_eq!(total_potential(&mrf, &[0.5]).unwrap(), t);
        assert_eq!(total_potential(&mrf, &[0.0]).unwrap().weighted_total, 0.0);
        assert!(total_potential(&mrf, &[1.5]).is_err());
    }

    #[test]
    fn linear_forms_bounded_by_one() {
        let m = meeting(6, 3);
        let mut obs = structural_atoms(&m);
        let cfg = crate::featurize::LocaleConfig::new("c");
        obs.extend(crate::featurize::speaks_rarely(&m, &cfg));
        obs.extend(crate::featurize::long_utterance_ratio(&m, &cfg));
        let mrf = ground(&model(Arity::Three), &m, &obs, None).unwrap();
        // max of ℓ over the box: constant + positive coefficients.
        for p in &mrf.potentials {
            let hi = p.constant + p.terms.iter().map(|t| t.1.max(0.0)).sum::<f64>();
            assert!(hi <= 1.0 + 1e-12, "{}", mrf.rules[p.rule].id);
        }
    }

    #[test]
    fn dump_lists_everything() {
        let m = meeting(2, 1);
        let mrf = ground(&model(Arity::Two), &m, &structural_atoms(&m), None).unwrap();
        let d = mrf.dump();
        assert!(d.contains("first_other"));
        assert_eq!(d.lines().filter(|l| l.starts_with("hard:")).count(), mrf.constraints.len());
    }
}
