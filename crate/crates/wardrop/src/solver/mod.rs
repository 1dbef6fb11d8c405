//! Dense convex-programming engine.
//!
//! Handles quadratic objectives over linear equality/inequality rows,
//! optional variable bounds, and at most one convex quadratic inequality row,
//! via a primal-dual interior-point method with Mehrotra-style
//! predictor-corrector steps. Problems at the intended scale are a few
//! hundred variables, so all linear algebra is dense.

mod ipm;
pub mod oracle;
pub mod selftest;

use nalgebra::{DMatrix, DVector};

pub use ipm::solve;

/// Row sense for linear constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

/// One linear constraint `coeffs' x (<=|=) rhs`.
#[derive(Debug, Clone)]
pub struct LinearRow {
    pub coeffs: DVector<f64>,
    pub rhs: f64,
    pub sense: Sense,
}

/// One convex quadratic constraint `1/2 x'Qx + lin'x + offset <= 0`.
#[derive(Debug, Clone)]
pub struct QuadRow {
    pub quad: DMatrix<f64>,
    pub lin: DVector<f64>,
    pub offset: f64,
}

/// A convex program: `min 1/2 x'Px + q'x` subject to linear rows, optional
/// bounds, and at most one convex quadratic row.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub objective_quad: DMatrix<f64>,
    pub objective_lin: DVector<f64>,
    pub rows: Vec<LinearRow>,
    pub quad_row: Option<QuadRow>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl ConicProblem {
    /// Unconstrained skeleton with `n` variables and zero objective.
    pub fn new(n: usize) -> Self {
        ConicProblem {
            objective_quad: DMatrix::zeros(n, n),
            objective_lin: DVector::zeros(n),
            rows: Vec::new(),
            quad_row: None,
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective_lin.len()
    }

    pub fn objective_value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (self.objective_quad.clone() * x).dot(x) + self.objective_lin.dot(x)
    }

    /// Evaluates the quadratic row at `x`, if present.
    pub fn quad_row_value(&self, x: &DVector<f64>) -> Option<f64> {
        self.quad_row
            .as_ref()
            .map(|qr| 0.5 * (qr.quad.clone() * x).dot(x) + qr.lin.dot(x) + qr.offset)
    }

    fn validate(&self) -> Result<(), String> {
        let n = self.num_vars();
        if self.objective_quad.nrows() != n || self.objective_quad.ncols() != n {
            return Err("objective matrix dimension mismatch".into());
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err("bound vector dimension mismatch".into());
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(format!("row {i} has {} coefficients for {n} variables", row.coeffs.len()));
            }
        }
        if let Some(qr) = &self.quad_row {
            if qr.quad.nrows() != n || qr.quad.ncols() != n || qr.lin.len() != n {
                return Err("quadratic row dimension mismatch".into());
            }
        }
        for (l, u) in self.lower.iter().zip(self.upper.iter()) {
            if let (Some(l), Some(u)) = (l, u) {
                if l > u {
                    return Err(format!("empty bound interval [{l}, {u}]"));
                }
            }
        }
        Ok(())
    }
}

/// Solver termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Stalled,
}

/// Scalar diagnostics for one interior-point iterate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IterateDiag {
    pub primal_objective: f64,
    /// Lagrangian dual value at the iterate's multipliers, when finite.
    pub dual_objective: Option<f64>,
    pub max_primal_violation: f64,
    pub complementarity: f64,
}

/// Solution report. Dual multipliers are nonnegative for `<=` rows and free
/// for `=` rows; bound multipliers are nonnegative.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub row_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub quad_dual: f64,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub iterates: Vec<IterateDiag>,
    /// Static regularization added to the KKT system, for disclosure.
    pub static_regularization: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol_primal: f64,
    pub tol_gap: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol_primal: 1e-8, tol_gap: 1e-8, max_iters: 200 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("certification mismatch: {0}")]
    CertificationMismatch(String),
}

/// Independent residual recomputation for a finished solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Certificate {
    pub stationarity: f64,
    pub primal_violation: f64,
    pub equality_violation: f64,
    pub complementarity: f64,
    pub dual_sign_violation: f64,
}

/// Recomputes all optimality residuals from problem data, without reusing
/// any solver internals, and cross-checks them against the report.
pub fn certify(problem: &ConicProblem, report: &SolveReport) -> Result<Certificate, SolverError> {
    problem.validate().map_err(SolverError::InvalidProblem)?;
    if report.status == SolveStatus::Infeasible {
        // Nothing to certify at a non-solution; sign conditions on the duals
        // are the only meaningful check.
        let sign = report
            .row_duals
            .iter()
            .zip(problem.rows.iter())
            .filter(|(_, r)| r.sense == Sense::Le)
            .map(|(&d, _)| (-d).max(0.0))
            .fold(0.0, f64::max);
        return Ok(Certificate {
            stationarity: f64::NAN,
            primal_violation: f64::NAN,
            equality_violation: f64::NAN,
            complementarity: f64::NAN,
            dual_sign_violation: sign,
        });
    }

    let x = &report.x;
    let n = problem.num_vars();
    let mut grad = problem.objective_quad.clone() * x + &problem.objective_lin;
    let mut primal_violation: f64 = 0.0;
    let mut equality_violation: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut dual_sign_violation: f64 = 0.0;

    for (row, &dual) in problem.rows.iter().zip(report.row_duals.iter()) {
        let slack = row.coeffs.dot(x) - row.rhs;
        match row.sense {
            Sense::Le => {
                primal_violation = primal_violation.max(slack);
                complementarity = complementarity.max((dual * slack).abs());
                dual_sign_violation = dual_sign_violation.max(-dual);
            }
            Sense::Eq => equality_violation = equality_violation.max(slack.abs()),
        }
        grad += row.coeffs.clone() * dual;
    }
    for j in 0..n {
        if let Some(l) = problem.lower[j] {
            let slack = l - x[j];
            primal_violation = primal_violation.max(slack);
            complementarity = complementarity.max((report.lower_duals[j] * slack).abs());
            dual_sign_violation = dual_sign_violation.max(-report.lower_duals[j]);
            grad[j] -= report.lower_duals[j];
        }
        if let Some(u) = problem.upper[j] {
            let slack = x[j] - u;
            primal_violation = primal_violation.max(slack);
            complementarity = complementarity.max((report.upper_duals[j] * slack).abs());
            dual_sign_violation = dual_sign_violation.max(-report.upper_duals[j]);
            grad[j] += report.upper_duals[j];
        }
    }
    if let Some(qr) = &problem.quad_row {
        let value = problem.quad_row_value(x).unwrap();
        primal_violation = primal_violation.max(value);
        complementarity = complementarity.max((report.quad_dual * value).abs());
        dual_sign_violation = dual_sign_violation.max(-report.quad_dual);
        grad += (qr.quad.clone() * x + &qr.lin) * report.quad_dual;
    }
    let stationarity = grad.amax();

    let cert = Certificate {
        stationarity,
        primal_violation,
        equality_violation,
        complementarity,
        dual_sign_violation,
    };
    let scale = 1.0 + report.objective.abs();
    if report.status == SolveStatus::Optimal {
        let budget = 10.0 * (report.primal_residual + report.dual_residual + report.duality_gap.abs() + 1e-9) * scale.max(1.0);
        let worst = stationarity
            .max(primal_violation)
            .max(equality_violation)
            .max(complementarity);
        if worst > budget.max(1e-5 * scale) {
            return Err(SolverError::CertificationMismatch(format!(
                "recomputed residual {worst:.3e} exceeds reported budget {budget:.3e}"
            )));
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn scalar_quadratic_with_lower_bound() {
        // min x^2 subject to x >= 1
        let mut p = ConicProblem::new(1);
        p.objective_quad = dmatrix![2.0];
        p.lower[0] = Some(1.0);
        let report = solve(&p, &SolveOptions::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!((report.x[0] - 1.0).abs() < 1e-7, "x = {}", report.x[0]);
        certify(&p, &report).unwrap();
    }

    #[test]
    fn linear_objective_with_active_quadratic_row() {
        // min -x subject to x^2 <= 4, x >= 0   =>   x = 2
        let mut p = ConicProblem::new(1);
        p.objective_lin = dvector![-1.0];
        p.quad_row = Some(QuadRow { quad: dmatrix![2.0], lin: dvector![0.0], offset: -4.0 });
        p.lower[0] = Some(0.0);
        let report = solve(&p, &SolveOptions::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!((report.x[0] - 2.0).abs() < 1e-6, "x = {}", report.x[0]);
        certify(&p, &report).unwrap();
    }

    #[test]
    fn equality_and_inequality_rows() {
        // min x^2 + y^2 s.t. x + y = 2, x - y <= -0.5  =>  x = 0.75, y = 1.25
        let mut p = ConicProblem::new(2);
        p.objective_quad = dmatrix![2.0, 0.0; 0.0, 2.0];
        p.rows.push(LinearRow { coeffs: dvector![1.0, 1.0], rhs: 2.0, sense: Sense::Eq });
        p.rows.push(LinearRow { coeffs: dvector![1.0, -1.0], rhs: -0.5, sense: Sense::Le });
        let report = solve(&p, &SolveOptions::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!((report.x[0] - 0.75).abs() < 1e-7, "x = {}", report.x[0]);
        assert!((report.x[1] - 1.25).abs() < 1e-7, "y = {}", report.x[1]);
        certify(&p, &report).unwrap();
    }

    #[test]
    fn weak_duality_on_every_exposed_iterate() {
        let mut p = ConicProblem::new(3);
        p.objective_quad = DMatrix::identity(3, 3) * 2.0;
        p.objective_lin = dvector![1.0, -2.0, 0.5];
        p.rows.push(LinearRow { coeffs: dvector![1.0, 1.0, 1.0], rhs: 1.0, sense: Sense::Le });
        p.lower = vec![Some(-5.0); 3];
        p.upper = vec![Some(5.0); 3];
        let report = solve(&p, &SolveOptions::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        for it in &report.iterates {
            if let Some(dual) = it.dual_objective {
                assert!(
                    dual <= it.primal_objective + 1e-6 * (1.0 + it.primal_objective.abs()),
                    "dual {dual} exceeds primal {}",
                    it.primal_objective
                );
            }
        }
    }

    #[test]
    fn objective_scaling_leaves_argmin_unchanged() {
        let mut p = ConicProblem::new(2);
        p.objective_quad = dmatrix![2.0, 0.4; 0.4, 2.0];
        p.objective_lin = dvector![-1.0, 0.3];
        p.rows.push(LinearRow { coeffs: dvector![1.0, 2.0], rhs: 0.5, sense: Sense::Le });
        p.lower = vec![Some(-3.0), Some(-3.0)];
        p.upper = vec![Some(3.0), Some(3.0)];
        let base = solve(&p, &SolveOptions::default());

        let mut scaled = p.clone();
        scaled.objective_quad *= 250.0;
        scaled.objective_lin *= 250.0;
        let s = solve(&scaled, &SolveOptions::default());
        for j in 0..2 {
            assert!((base.x[j] - s.x[j]).abs() <= 1e-7 * 10.0, "coordinate {j}");
        }
    }

    #[test]
    fn determinism_bitwise() {
        let mut p = ConicProblem::new(4);
        p.objective_quad = DMatrix::identity(4, 4);
        p.objective_lin = dvector![0.3, -0.7, 0.2, 0.9];
        p.rows.push(LinearRow { coeffs: dvector![1.0, 1.0, 0.0, 0.0], rhs: 0.4, sense: Sense::Le });
        p.rows.push(LinearRow { coeffs: dvector![0.0, 1.0, 1.0, -1.0], rhs: 0.0, sense: Sense::Eq });
        p.lower = vec![Some(-2.0); 4];
        p.upper = vec![Some(2.0); 4];
        let a = solve(&p, &SolveOptions::default());
        let b = solve(&p, &SolveOptions::default());
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.row_duals, b.row_duals);
    }

    #[test]
    fn certify_flags_perturbed_solution() {
        let mut p = ConicProblem::new(2);
        p.objective_quad = DMatrix::identity(2, 2) * 2.0;
        p.objective_lin = dvector![1.0, 1.0];
        p.lower = vec![Some(0.0), Some(0.0)];
        let mut report = solve(&p, &SolveOptions::default());
        report.x[0] += 1e-3;
        assert!(certify(&p, &report).is_err());
    }
}
