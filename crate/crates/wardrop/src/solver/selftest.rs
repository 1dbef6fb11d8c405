//! Seeded self-test suite: random strictly convex programs solved by the
//! interior-point method and cross-checked against the active-set oracle.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::oracle::active_set_minimize;
use super::{solve, ConicProblem, LinearRow, Sense, SolveOptions, SolveStatus};

#[derive(Debug, Clone, serde::Serialize)]
pub struct SelftestReport {
    pub instances: usize,
    pub solved: usize,
    pub max_objective_rel_error: f64,
    pub max_weak_duality_violation: f64,
    pub failures: Vec<String>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
            && self.solved == self.instances
            && self.max_objective_rel_error <= 1e-7
            && self.max_weak_duality_violation <= 1e-6
    }
}

/// Draws a random strictly convex QP with a handful of linear rows. The
/// strictly convex objective keeps every instance bounded without box
/// constraints, which keeps the oracle's active-set enumeration small.
pub fn random_qp(rng: &mut StdRng) -> ConicProblem {
    let n = rng.gen_range(2..=10);
    let m = rng.gen_range(1..=10);
    let mut p = ConicProblem::new(n);

    // P = L L' + 0.1 I keeps the objective strictly convex.
    let l = DMatrix::from_fn(n, n, |i, j| if j <= i { rng.gen_range(-1.0..1.0) } else { 0.0 });
    p.objective_quad = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
    p.objective_lin = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    for _ in 0..m {
        let coeffs = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        // Strictly feasible at the origin so every instance is solvable.
        let rhs = rng.gen_range(0.05..1.5);
        p.rows.push(LinearRow { coeffs, rhs, sense: Sense::Le });
    }
    p
}

/// Runs `instances` seeded problems and compares objectives against the
/// oracle at relative tolerance 1e-7.
pub fn run(seed: u64, instances: usize) -> SelftestReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = SelftestReport {
        instances,
        solved: 0,
        max_objective_rel_error: 0.0,
        max_weak_duality_violation: 0.0,
        failures: Vec::new(),
    };
    for case in 0..instances {
        let problem = random_qp(&mut rng);
        let ipm = solve(&problem, &SolveOptions::default());
        if ipm.status != SolveStatus::Optimal {
            report.failures.push(format!("case {case}: status {:?}", ipm.status));
            continue;
        }
        let Some(reference) = active_set_minimize(&problem, 1e-9) else {
            report.failures.push(format!("case {case}: oracle found no solution"));
            continue;
        };
        report.solved += 1;
        let scale = 1.0 + reference.objective.abs();
        let rel = (ipm.objective - reference.objective).abs() / scale;
        report.max_objective_rel_error = report.max_objective_rel_error.max(rel);
        if rel > 1e-7 {
            report.failures.push(format!(
                "case {case}: objective {} vs oracle {} (rel {rel:.3e})",
                ipm.objective, reference.objective
            ));
        }
        for it in &ipm.iterates {
            if let Some(dual) = it.dual_objective {
                let violation = (dual - it.primal_objective) / (1.0 + it.primal_objective.abs());
                // Weak duality needs a feasible primal point for the
                // comparison to be meaningful; interior-point iterates are
                // near-feasible after the first few steps.
                if it.max_primal_violation <= 1e-9 {
                    report.max_weak_duality_violation =
                        report.max_weak_duality_violation.max(violation);
                }
            }
        }
    }
    report
}
