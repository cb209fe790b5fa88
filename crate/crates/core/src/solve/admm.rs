use super::simplex::project_simplex_in_place;
use super::{InferenceResult, SolverConfig};
use crate::error::{Error, Result};
use crate::logic::Mrf;

#[derive(Clone, Copy)]
enum Kind {
    /// Hinge `w·max(0, a·x + b)^p`.
    Hinge { weight: f64, constant: f64, squared: bool, norm2: f64 },
    Simplex,
}

struct Factor {
    kind: Kind,
    /// Range into the flattened copy arrays.
    start: usize,
    end: usize,
}

/// Flattened factor graph. Every factor owns a contiguous block of local
/// copies `x`, with scaled duals `u`, coefficients and variable indices.
struct Problem {
    factors: Vec<Factor>,
    var: Vec<usize>,
    coef: Vec<f64>,
    /// Number of copies of each consensus variable.
    degree: Vec<usize>,
}

impl Problem {
    fn new(mrf: &Mrf) -> Self {
        let mut factors = Vec::new();
        let mut var = Vec::new();
        let mut coef = Vec::new();
        for p in &mrf.potentials {
            if p.terms.is_empty() || p.weight == 0.0 {
                continue;
            }
            let start = var.len();
            for &(i, c) in &p.terms {
                var.push(i);
                coef.push(c);
            }
            factors.push(Factor {
                kind: Kind::Hinge {
                    weight: p.weight,
                    constant: p.constant,
                    squared: p.exponent == 2,
                    norm2: p.terms.iter().map(|t| t.1 * t.1).sum(),
                },
                start,
                end: var.len(),
            });
        }
        for c in &mrf.constraints {
            let start = var.len();
            for &i in &c.vars {
                var.push(i);
                coef.push(1.0);
            }
            factors.push(Factor {
                kind: Kind::Simplex,
                start,
                end: var.len(),
            });
        }
        let mut degree = vec![0; mrf.num_vars()];
        for &i in &var {
            degree[i] += 1;
        }
        Problem { factors, var, coef, degree }
    }
}

/// Minimizes the Mrf's energy over the box and simplex constraints.
pub fn map_infer(mrf: &Mrf, cfg: &SolverConfig) -> Result<InferenceResult> {
    map_infer_from(mrf, cfg, None)
}

/// Like [`map_infer`], starting the consensus variables from `init` (for
/// example the previous solution during weight learning). Duals start at 0.
pub fn map_infer_from(mrf: &Mrf, cfg: &SolverConfig, init: Option<&[f64]>) -> Result<InferenceResult> {
    cfg.validate()?;
    let n = mrf.num_vars();
    let mut z = match init {
        Some(v) if v.len() == n => v.iter().map(|x| x.clamp(0.0, 1.0)).collect(),
        Some(v) => {
            return Err(Error::Infeasible(format!("warm start has {} values for {n} variables", v.len())))
        }
        None => mrf.uniform_point(),
    };

    let prob = Problem::new(mrf);
    let m = prob.var.len();

    // The penalty follows the weight scale so that multiplying every weight
    // by a constant leaves the iterates unchanged.
    let (wsum, wcount) = prob.factors.iter().fold((0.0, 0usize), |(s, c), f| match f.kind {
        Kind::Hinge { weight, .. } => (s + weight, c + 1),
        Kind::Simplex => (s, c),
    });
    let rho = if wcount > 0 && wsum > 0.0 { cfg.rho * wsum / wcount as f64 } else { cfg.rho };

    let mut x: Vec<f64> = prob.var.iter().map(|&i| z[i]).collect();
    let mut u = vec![0.0; m];
    let mut acc = vec![0.0; n];
    let mut iterations = 0;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = m == 0;
    let sqrt_m = (m as f64).sqrt();

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;

        // Local steps: prox of each factor at v = z − u.
        for f in &prob.factors {
            let r = f.start..f.end;
            for k in r.clone() {
                x[k] = z[prob.var[k]] - u[k];
            }
            match f.kind {
                Kind::Simplex => project_simplex_in_place(&mut x[r]),
                Kind::Hinge { weight, constant, squared, norm2 } => {
                    let lin = constant + r.clone().map(|k| prob.coef[k] * x[k]).sum::<f64>();
                    if lin <= 0.0 {
                        continue;
                    }
                    let step = if squared {
                        let s = lin / (1.0 + 2.0 * weight * norm2 / rho);
                        2.0 * weight * s / rho
                    } else if lin - weight / rho * norm2 >= 0.0 {
                        weight / rho
                    } else {
                        lin / norm2
                    };
                    for k in r {
                        x[k] -= step * prob.coef[k];
                    }
                }
            }
        }

        // Consensus: average x + u per variable, in copy order, then clip.
        acc.iter_mut().for_each(|a| *a = 0.0);
        for k in 0..m {
            acc[prob.var[k]] += x[k] + u[k];
        }
        let mut dz2 = 0.0;
        for i in 0..n {
            let d = prob.degree[i];
            if d == 0 {
                continue;
            }
            let new = (acc[i] / d as f64).clamp(0.0, 1.0);
            let diff = new - z[i];
            dz2 += diff * diff * d as f64;
            z[i] = new;
        }

        // Dual update and residuals, all in scaled form.
        let (mut r2, mut x2, mut zc2, mut u2) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..m {
            let zk = z[prob.var[k]];
            let r = x[k] - zk;
            u[k] += r;
            r2 += r * r;
            x2 += x[k] * x[k];
            zc2 += zk * zk;
            u2 += u[k] * u[k];
        }
        primal = r2.sqrt();
        dual = dz2.sqrt();
        let eps_pri = cfg.eps_abs * sqrt_m + cfg.eps_rel * x2.sqrt().max(zc2.sqrt());
        let eps_dual = cfg.eps_abs * sqrt_m + cfg.eps_rel * u2.sqrt();
        converged = primal <= eps_pri && dual <= eps_dual;
    }

    for c in &mrf.constraints {
        let mut g: Vec<f64> = c.vars.iter().map(|&i| z[i]).collect();
        project_simplex_in_place(&mut g);
        for (&i, v) in c.vars.iter().zip(g) {
            z[i] = v;
        }
    }
    if !converged {
        log::debug!(
            "admm on {} stopped after {iterations} iterations (primal {primal:.2e}, dual {dual:.2e})",
            mrf.meeting_id
        );
    }
    Ok(InferenceResult {
        objective: mrf.energy(&z),
        values: z,
        iterations,
        primal_residual: if m == 0 { 0.0 } else { primal },
        dual_residual: if m == 0 { 0.0 } else { dual },
        converged,
    })
}
