//! The direction-finding subproblem of the outer iteration.
//!
//! Variables are the next iterate `(beta, g, xi)` together with the frozen
//! program's primal block `(y, eps)` and multipliers `nu`. The constraints
//! are the frozen primal rows, multiplier stationarity `A' nu = 0`, the
//! relaxed strong-duality row
//! `eps'eps + beta'H beta + 1/4 nu'CC'nu + 1/4 nu'BH^-1B'nu - h'nu <= xi`,
//! a demand trust region, a matching coefficient box, and nonnegativity of
//! `nu` and the iterate. The objective is the linearized estimation
//! objective, so the solution is the steepest feasible move.

use nalgebra::{DMatrix, DVector};

use super::{BilevelError, Gradient, JointConfig, JointState};
use crate::invvi::CompactQp;
use crate::latency::LatencyCoefficients;
use crate::solver::{self, ConicProblem, LinearRow, QuadRow, Sense, SolveStatus};

/// Frozen constraint data plus the variable layout of the subproblem.
pub struct FrozenModel<'a> {
    qp: &'a CompactQp,
    prev: &'a JointState,
    /// Compact rows that are not identically zero.
    kept_rows: Vec<usize>,
    /// Multiplier rescale: the dual curvature spans many orders of
    /// magnitude, so the subproblem works in `nu_scaled = nu * nu_scale`.
    nu_scale: f64,
    n_beta: usize,
    n_demand: usize,
    n_y: usize,
    n_eps: usize,
}

impl<'a> FrozenModel<'a> {
    pub fn new(qp: &'a CompactQp, prev: &'a JointState, _cfg: &JointConfig) -> Self {
        let kept_rows: Vec<usize> = (0..qp.num_rows())
            .filter(|&r| {
                qp.h_vec[r] != 0.0
                    || (0..qp.n_beta).any(|i| qp.b_mat[(r, i)] != 0.0)
                    || (0..qp.n_y()).any(|j| qp.a_mat[(r, j)] != 0.0)
                    || (0..qp.n_eps).any(|k| qp.c_mat[(r, k)] != 0.0)
            })
            .collect();
        let curvature = qp.dual_curvature();
        let mut max_curv = 0.0_f64;
        for &r in &kept_rows {
            for &c in &kept_rows {
                max_curv = max_curv.max(curvature[(r, c)].abs());
            }
        }
        let nu_scale = max_curv.sqrt().max(1.0);
        FrozenModel {
            qp,
            prev,
            kept_rows,
            nu_scale,
            n_beta: qp.n_beta,
            n_demand: prev.demands.len(),
            n_y: qp.n_y(),
            n_eps: qp.n_eps,
        }
    }

    fn num_vars(&self) -> usize {
        self.n_beta + self.n_demand + 1 + self.n_y + self.n_eps + self.kept_rows.len()
    }

    fn beta_at(&self, i: usize) -> usize {
        i
    }
    fn demand_at(&self, w: usize) -> usize {
        self.n_beta + w
    }
    fn xi_at(&self) -> usize {
        self.n_beta + self.n_demand
    }
    fn y_at(&self, j: usize) -> usize {
        self.n_beta + self.n_demand + 1 + j
    }
    fn eps_at(&self, k: usize) -> usize {
        self.n_beta + self.n_demand + 1 + self.n_y + k
    }
    fn nu_at(&self, kept_idx: usize) -> usize {
        self.n_beta + self.n_demand + 1 + self.n_y + self.n_eps + kept_idx
    }

    fn build_problem(&self, gradient: &Gradient, cfg: &JointConfig, widen: f64) -> ConicProblem {
        let qp = self.qp;
        let n = self.num_vars();
        let mut problem = ConicProblem::new(n);

        // Linearized objective over (beta, g, xi); the remaining blocks are
        // free to settle wherever the constraints take them.
        for i in 0..self.n_beta {
            problem.objective_lin[self.beta_at(i)] = gradient.beta[i];
        }
        for w in 0..self.n_demand {
            problem.objective_lin[self.demand_at(w)] = gradient.demand[w];
        }
        problem.objective_lin[self.xi_at()] = gradient.lambda;

        // Tie-break: a vanishing proximal pull toward the previous iterate.
        // When a coordinate's linearized gradient is at noise level, the
        // subproblem is indifferent across its whole box and the barrier
        // would otherwise park it anywhere; the pull pins it to the previous
        // value instead. The weight is sized to stay orders of magnitude
        // below any meaningful gradient entry.
        let tie = cfg.tie_break_weight * gradient.lambda.max(1.0);
        for i in 0..self.n_beta {
            let w = tie / (2.0 * cfg.beta_box).powi(2);
            let prev = self.prev.beta.tail()[i];
            problem.objective_quad[(self.beta_at(i), self.beta_at(i))] += 2.0 * w;
            problem.objective_lin[self.beta_at(i)] += -2.0 * w * prev;
        }
        for w_idx in 0..self.n_demand {
            let w = tie / (cfg.c1 + cfg.c2).powi(2);
            let prev = self.prev.demands.values()[w_idx];
            problem.objective_quad[(self.demand_at(w_idx), self.demand_at(w_idx))] += 2.0 * w;
            problem.objective_lin[self.demand_at(w_idx)] += -2.0 * w * prev;
        }

        // Frozen primal rows over (y, beta, eps).
        for &r in &self.kept_rows {
            let mut coeffs = DVector::zeros(n);
            for i in 0..self.n_beta {
                coeffs[self.beta_at(i)] = qp.b_mat[(r, i)];
            }
            for j in 0..self.n_y {
                coeffs[self.y_at(j)] = qp.a_mat[(r, j)];
            }
            for k in 0..self.n_eps {
                coeffs[self.eps_at(k)] = qp.c_mat[(r, k)];
            }
            problem.rows.push(LinearRow { coeffs, rhs: -qp.h_vec[r], sense: Sense::Le });
        }
        // Potential pinning, as in the recovery solve.
        for block in &qp.y_blocks {
            let mut coeffs = DVector::zeros(n);
            coeffs[self.y_at(block.offset + block.origin_node)] = 1.0;
            problem.rows.push(LinearRow { coeffs, rhs: 0.0, sense: Sense::Eq });
        }
        // Multiplier stationarity A' nu = 0, one row per potential
        // coordinate. The condition is homogeneous, so it holds for the
        // rescaled multipliers verbatim.
        for j in 0..self.n_y {
            let mut coeffs = DVector::zeros(n);
            let mut any = false;
            for (idx, &r) in self.kept_rows.iter().enumerate() {
                let a = qp.a_mat[(r, j)];
                if a != 0.0 {
                    coeffs[self.nu_at(idx)] = a;
                    any = true;
                }
            }
            if any {
                problem.rows.push(LinearRow { coeffs, rhs: 0.0, sense: Sense::Eq });
            }
        }

        // Relaxed strong-duality row.
        let curvature = qp.dual_curvature();
        let mut quad = DMatrix::zeros(n, n);
        for i in 0..self.n_beta {
            quad[(self.beta_at(i), self.beta_at(i))] = 2.0 * qp.h_mat[(i, i)];
        }
        for k in 0..self.n_eps {
            quad[(self.eps_at(k), self.eps_at(k))] = 2.0;
        }
        for (ri, &r) in self.kept_rows.iter().enumerate() {
            for (ci, &c) in self.kept_rows.iter().enumerate() {
                let v = 0.5 * curvature[(r, c)] / (self.nu_scale * self.nu_scale);
                if v != 0.0 {
                    quad[(self.nu_at(ri), self.nu_at(ci))] = v;
                }
            }
        }
        let mut lin = DVector::zeros(n);
        lin[self.xi_at()] = -1.0;
        for (idx, &r) in self.kept_rows.iter().enumerate() {
            lin[self.nu_at(idx)] = -qp.h_vec[r] / self.nu_scale;
        }
        problem.quad_row = Some(QuadRow { quad, lin, offset: 0.0 });

        // Trust regions and sign constraints.
        for i in 0..self.n_beta {
            let prev = self.prev.beta.tail()[i];
            problem.lower[self.beta_at(i)] = Some((prev - cfg.beta_box * widen).max(0.0));
            problem.upper[self.beta_at(i)] = Some(prev + cfg.beta_box * widen);
        }
        for w in 0..self.n_demand {
            let prev = self.prev.demands.values()[w];
            problem.lower[self.demand_at(w)] = Some((prev - cfg.c1 * widen).max(0.0));
            problem.upper[self.demand_at(w)] = Some(prev + cfg.c2 * widen);
        }
        problem.lower[self.xi_at()] = Some(0.0);
        for idx in 0..self.kept_rows.len() {
            problem.lower[self.nu_at(idx)] = Some(0.0);
        }
        problem
    }
}

/// Solves the direction subproblem and returns the next iterate, flagging
/// whether the trust region had to be widened to restore feasibility.
pub fn fw_step(
    model: &FrozenModel<'_>,
    gradient: &Gradient,
    cfg: &JointConfig,
) -> Result<(JointState, bool), BilevelError> {
    for (attempt, widen) in [1.0_f64, 2.0].into_iter().enumerate() {
        let problem = model.build_problem(gradient, cfg, widen);
        let report = solver::solve(&problem, &cfg.solve);
        match report.status {
            SolveStatus::Optimal => {
                let tail: Vec<f64> =
                    (0..model.n_beta).map(|i| report.x[model.beta_at(i)]).collect();
                let beta = LatencyCoefficients::from_tail(&tail, 1e-7)?;
                let demands = model.prev.demands.with_values(
                    (0..model.n_demand)
                        .map(|w| report.x[model.demand_at(w)].max(0.0))
                        .collect(),
                )?;
                let xi = report.x[model.xi_at()].max(0.0);
                return Ok((
                    JointState { beta, demands, xi, iteration: model.prev.iteration + 1 },
                    attempt > 0,
                ));
            }
            SolveStatus::Infeasible if attempt == 0 => continue,
            SolveStatus::Infeasible => return Err(BilevelError::SubproblemInfeasible),
            SolveStatus::Stalled => return Err(BilevelError::SolverStalled),
        }
    }
    Err(BilevelError::SubproblemInfeasible)
}
