//! MAP inference: consensus ADMM for real instances and an exhaustive grid
//! search for tiny ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::Mrf;

mod admm;
mod brute;
mod simplex;

pub use admm::{map_infer, map_infer_from};
pub use brute::{brute_force_infer, MAX_BRUTE_FORCE_VARIABLES};
pub use simplex::project_simplex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Augmented-Lagrangian penalty, relative to the mean potential weight.
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
    /// Reserved. Initialization is the deterministic uniform point, so the
    /// seed does not currently change anything.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            max_iterations: 25_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0) {
            return Err(Error::Config("eps_abs and eps_rel must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// One value per open variable of the Mrf, in registry order.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl InferenceResult {
    /// Atom name → value, for serialization.
    pub fn named_values(&self, mrf: &Mrf) -> BTreeMap<String, f64> {
        mrf.variables.iter().map(|a| a.to_string()).zip(self.values.iter().copied()).collect()
    }
}

/// `Σ w·max(0, ℓ)^p` at a feasible assignment.
pub fn evaluate_objective(mrf: &Mrf, assignment: &[f64]) -> Result<f64> {
    mrf.check_feasible(assignment, 1e-6)?;
    Ok(mrf.energy(assignment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::Predicate;
    use crate::logic::{GroundAtom, GroundPotential, HardConstraint, RuleInfo};

    /// Role pair under a simplex: prior `w_prior·y²`, rule `w_rule·(1−y)²`.
    pub(crate) fn role_pair(w_prior: f64, w_rule: f64) -> Mrf {
        let vars = vec![
            GroundAtom::new(Predicate::SpeakerRole, &["m", "s", "Public"]),
            GroundAtom::new(Predicate::SpeakerRole, &["m", "s", "Other"]),
        ];
        let rules = vec![
            RuleInfo { id: "prior".into(), weight: w_prior, exponent: 2 },
            RuleInfo { id: "rule".into(), weight: w_rule, exponent: 2 },
        ];
        let pots = vec![
            GroundPotential { rule: 0, weight: w_prior, exponent: 2, terms: vec![(0, 1.0)], constant: 0.0 },
            GroundPotential { rule: 1, weight: w_rule, exponent: 2, terms: vec![(0, -1.0)], constant: 1.0 },
        ];
        Mrf::from_parts("m", vars, rules, pots, vec![HardConstraint { vars: vec![0, 1] }]).unwrap()
    }

    #[test]
    fn evaluate_objective_checks_feasibility() {
        let mrf = role_pair(1.0, 1.0);
        assert!((evaluate_objective(&mrf, &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        let err = evaluate_objective(&mrf, &[0.5, 0.4]).unwrap_err().to_string();
        assert!(err.contains("SpeakerRole(m, s, Public)"), "{err}");
        assert!(evaluate_objective(&mrf, &[1.2, -0.2]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { rho: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
    }
}
