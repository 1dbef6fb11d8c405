//! Latency-coefficient recovery from equilibrium flow snapshots.
//!
//! Observed flows are rationalized as approximate equilibria: node potentials
//! `y` must be dually feasible against the candidate travel times, the
//! primal-dual gap of each snapshot is bounded by a slack `eps_k`, and the
//! recovered multiplier must be monotone across the observed
//! flow-to-capacity ratios. Minimizing `||eps||^2` plus a quadratic
//! coefficient penalty yields a convex QP in compact block form
//! `A(g) y + B(x) beta + C eps + h <= 0`, solved by the interior-point
//! engine.

mod assemble;

pub use assemble::assemble_qp;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::latency::{LatencyCoefficients, LatencyError};
use crate::netcore::{DemandVector, FlowVector, LinkId, NetError, Network};
use crate::solver::{self, ConicProblem, LinearRow, Sense, SolveOptions, SolveStatus};

#[derive(Debug, Error)]
pub enum InvViError {
    #[error("at least one snapshot is required")]
    EmptySnapshot,
    #[error("snapshot {snapshot}: {what}")]
    InconsistentDimensions { snapshot: usize, what: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("recovery program reported infeasible; the slack variables make it feasible by construction, so the assembly is inconsistent")]
    Infeasible,
    #[error("solver stalled after {0} iterations")]
    SolverStalled(usize),
    #[error("multipliers are not dual feasible: {0}")]
    InfeasibleDual(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
}

/// One observed network instance: measured link flows over a subset of
/// links, with the OD demands in effect when the observation was taken.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub id: usize,
    pub network: Arc<Network>,
    /// Link positions (canonical ordering) with a flow measurement.
    pub observed_links: Vec<usize>,
    /// Observed flow per measured link, aligned with `observed_links`.
    pub flows: Vec<f64>,
    pub demands: DemandVector,
}

impl Snapshot {
    pub fn new(
        id: usize,
        network: Arc<Network>,
        observed_links: Vec<usize>,
        flows: Vec<f64>,
        demands: DemandVector,
    ) -> Result<Self, InvViError> {
        if observed_links.is_empty() {
            return Err(InvViError::InconsistentDimensions {
                snapshot: id,
                what: "no observed links".into(),
            });
        }
        if observed_links.len() != flows.len() {
            return Err(InvViError::InconsistentDimensions {
                snapshot: id,
                what: format!("{} observed links but {} flows", observed_links.len(), flows.len()),
            });
        }
        for (&pos, &x) in observed_links.iter().zip(flows.iter()) {
            if pos >= network.num_links() {
                return Err(InvViError::InconsistentDimensions {
                    snapshot: id,
                    what: format!("link position {pos} out of range"),
                });
            }
            if x < 0.0 || !x.is_finite() {
                return Err(InvViError::InconsistentDimensions {
                    snapshot: id,
                    what: format!("negative flow {x}"),
                });
            }
        }
        for pair in demands.pairs() {
            network.node_index(pair.origin).map_err(|e| InvViError::InconsistentDimensions {
                snapshot: id,
                what: e.to_string(),
            })?;
            network.node_index(pair.destination).map_err(|e| {
                InvViError::InconsistentDimensions { snapshot: id, what: e.to_string() }
            })?;
        }
        Ok(Snapshot { id, network, observed_links, flows, demands })
    }

    /// Snapshot covering every link of the network.
    pub fn full(
        id: usize,
        network: Arc<Network>,
        flows: &FlowVector,
        demands: DemandVector,
    ) -> Result<Self, InvViError> {
        let observed: Vec<usize> = (0..network.num_links()).collect();
        let values = observed.iter().map(|&p| flows.get(p)).collect();
        Snapshot::new(id, network, observed, values, demands)
    }

    /// Flow-to-capacity ratio of the `i`-th observed link.
    pub fn ratio(&self, i: usize) -> f64 {
        self.flows[i] / self.network.link(self.observed_links[i]).capacity
    }
}

/// Which constraint a compact row encodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowTag {
    /// Node-potential feasibility for one (snapshot, OD pair, link).
    DualFeasibility { snapshot: usize, od: usize, link: LinkId },
    /// Primal-dual gap bound for one snapshot.
    Gap { snapshot: usize },
    /// Multiplier monotonicity between two consecutively ranked ratios.
    Monotonicity { lo: (usize, LinkId), hi: (usize, LinkId) },
    /// Slack nonnegativity for one snapshot.
    EpsNonneg { snapshot: usize },
    /// Coefficient nonnegativity, included as an explicit row so the
    /// multiplier algebra of the optimality system stays exact.
    BetaNonneg { coefficient: usize },
}

/// Layout of one node-potential block inside the stacked `y` vector.
#[derive(Debug, Clone, Copy)]
pub struct YBlock {
    pub snapshot: usize,
    pub od: usize,
    pub offset: usize,
    pub len: usize,
    /// Node position of the OD origin; pinned to zero when solving because
    /// potentials are translation invariant.
    pub origin_node: usize,
}

/// The compact quadratic program `min eps'eps + beta'H beta` subject to
/// `A y + B beta + C eps + h <= 0`, with a tagged index map back to the
/// originating constraints.
#[derive(Debug, Clone)]
pub struct CompactQp {
    pub n_beta: usize,
    pub n_eps: usize,
    pub h_mat: DMatrix<f64>,
    pub a_mat: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
    pub c_mat: DMatrix<f64>,
    pub h_vec: DVector<f64>,
    pub tags: Vec<RowTag>,
    pub y_blocks: Vec<YBlock>,
}

impl CompactQp {
    pub fn num_rows(&self) -> usize {
        self.tags.len()
    }

    pub fn n_y(&self) -> usize {
        self.a_mat.ncols()
    }

    pub fn rows_tagged(&self, pred: impl Fn(&RowTag) -> bool) -> usize {
        self.tags.iter().filter(|t| pred(t)).count()
    }

    /// Primal objective `eps'eps + beta'H beta`.
    pub fn primal_objective(&self, beta_tail: &DVector<f64>, eps: &DVector<f64>) -> f64 {
        eps.dot(eps) + (&self.h_mat * beta_tail).dot(beta_tail)
    }

    /// Row values `A y + B beta + C eps + h`; feasible when all <= 0.
    pub fn row_values(
        &self,
        beta_tail: &DVector<f64>,
        y: &DVector<f64>,
        eps: &DVector<f64>,
    ) -> DVector<f64> {
        &self.a_mat * y + &self.b_mat * beta_tail + &self.c_mat * eps + &self.h_vec
    }

    /// Curvature of the dual objective: `C C' + B H^-1 B'`, scaled by 1/4 in
    /// the dual function itself.
    pub fn dual_curvature(&self) -> DMatrix<f64> {
        let h_inv = DMatrix::from_fn(self.n_beta, self.n_beta, |i, j| {
            if i == j { 1.0 / self.h_mat[(i, i)] } else { 0.0 }
        });
        &self.c_mat * self.c_mat.transpose() + &self.b_mat * h_inv * self.b_mat.transpose()
    }
}

/// Result of a coefficient-recovery solve.
#[derive(Debug, Clone)]
pub struct InvViSolution {
    pub beta: LatencyCoefficients,
    /// Node potentials per snapshot, per OD pair.
    pub duals_y: Vec<Vec<DVector<f64>>>,
    /// Gap slack per snapshot.
    pub epsilons: Vec<f64>,
    pub objective_value: f64,
    /// Largest first-order optimality residual (see [`kkt_residuals`]).
    pub kkt_residual: f64,
    /// Row multipliers aligned with the compact rows.
    pub duals_nu: Vec<f64>,
}

/// Maps the compact program onto the stacked solver layout (primarily an
/// internal hook; exposed for diagnostics)
/// `u = (beta_tail, y, eps)`, optionally pinning the coefficients to a fixed
/// value. Returns the problem and, per compact row, the solver row it became
/// (identically zero rows — monotonicity between tied ratios — are skipped:
/// they would pin a barrier slack at zero, and their multiplier is zero by
/// convention).
pub fn conic_for(qp: &CompactQp, pin_beta: Option<&[f64]>) -> (ConicProblem, Vec<Option<usize>>) {
    let n_beta = qp.n_beta;
    let n_y = qp.n_y();
    let n_eps = qp.n_eps;
    let n = n_beta + n_y + n_eps;

    let mut problem = ConicProblem::new(n);
    for i in 0..n_beta {
        problem.objective_quad[(i, i)] = 2.0 * qp.h_mat[(i, i)];
    }
    for k in 0..n_eps {
        let j = n_beta + n_y + k;
        problem.objective_quad[(j, j)] = 2.0;
    }
    let mut solver_row_of = vec![None; qp.num_rows()];
    for r in 0..qp.num_rows() {
        let mut coeffs = DVector::zeros(n);
        for i in 0..n_beta {
            coeffs[i] = qp.b_mat[(r, i)];
        }
        for j in 0..n_y {
            coeffs[n_beta + j] = qp.a_mat[(r, j)];
        }
        for k in 0..n_eps {
            coeffs[n_beta + n_y + k] = qp.c_mat[(r, k)];
        }
        if coeffs.amax() == 0.0 && qp.h_vec[r] == 0.0 {
            continue;
        }
        solver_row_of[r] = Some(problem.rows.len());
        problem.rows.push(LinearRow { coeffs, rhs: -qp.h_vec[r], sense: Sense::Le });
    }
    // Pin each potential block at its origin node: potentials enter every
    // constraint through differences, so the pin removes the translation
    // nullspace without changing the feasible set or the row multipliers.
    for block in &qp.y_blocks {
        let mut coeffs = DVector::zeros(n);
        coeffs[n_beta + block.offset + block.origin_node] = 1.0;
        problem.rows.push(LinearRow { coeffs, rhs: 0.0, sense: Sense::Eq });
    }
    if let Some(values) = pin_beta {
        for i in 0..n_beta {
            let mut coeffs = DVector::zeros(n);
            coeffs[i] = 1.0;
            problem.rows.push(LinearRow { coeffs, rhs: values[i], sense: Sense::Eq });
        }
    }
    (problem, solver_row_of)
}

/// Solves the compact recovery program.
pub fn solve_inverse_vi(qp: &CompactQp, opts: &SolveOptions) -> Result<InvViSolution, InvViError> {
    let n_beta = qp.n_beta;
    let n_y = qp.n_y();
    let n_eps = qp.n_eps;
    let (problem, solver_row_of) = conic_for(qp, None);

    let report = solver::solve(&problem, opts);
    match report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(InvViError::Infeasible),
        SolveStatus::Stalled => return Err(InvViError::SolverStalled(report.iterations)),
    }

    let beta_tail: Vec<f64> = (0..n_beta).map(|i| report.x[i]).collect();
    let beta = LatencyCoefficients::from_tail(&beta_tail, 1e-6)?;
    let duals_nu: Vec<f64> = solver_row_of
        .iter()
        .map(|slot| slot.map(|sr| report.row_duals[sr]).unwrap_or(0.0))
        .collect();
    let mut duals_y: Vec<Vec<DVector<f64>>> = Vec::new();
    for block in &qp.y_blocks {
        let v = DVector::from_fn(block.len, |i, _| report.x[n_beta + block.offset + i]);
        if duals_y.len() <= block.snapshot {
            duals_y.resize(block.snapshot + 1, Vec::new());
        }
        duals_y[block.snapshot].push(v);
    }
    let epsilons: Vec<f64> =
        (0..n_eps).map(|k| report.x[n_beta + n_y + k].max(0.0)).collect();

    let beta_vec = DVector::from_vec(beta.tail().to_vec());
    let eps_vec = DVector::from_vec(epsilons.clone());
    let objective_value = qp.primal_objective(&beta_vec, &eps_vec);

    let mut solution = InvViSolution {
        beta,
        duals_y,
        epsilons,
        objective_value,
        kkt_residual: 0.0,
        duals_nu,
    };
    let nu = DVector::from_vec(solution.duals_nu.clone());
    solution.kkt_residual = kkt_residuals(qp, &solution, &nu)?.max_residual;
    Ok(solution)
}

impl InvViSolution {
    /// Potentials stacked in the compact layout.
    pub fn stacked_y(&self, qp: &CompactQp) -> DVector<f64> {
        let mut y = DVector::zeros(qp.n_y());
        for block in &qp.y_blocks {
            let v = &self.duals_y[block.snapshot][block.od];
            y.rows_mut(block.offset, block.len).copy_from(v);
        }
        y
    }
}

/// First-order optimality residuals of a candidate primal-dual pair.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KktReport {
    /// `|| 2 eps + C' nu ||_inf`
    pub eps_stationarity: f64,
    /// `|| 2 H beta + B' nu ||_inf`
    pub beta_stationarity: f64,
    /// `|| A' nu ||_inf`
    pub y_stationarity: f64,
    /// `max_r | nu_r * row_r |`
    pub complementary_slackness: f64,
    /// `eps'eps + beta'H beta + 1/4 nu'CC'nu + 1/4 nu'B H^-1 B'nu - h'nu`
    pub strong_duality_gap: f64,
    pub max_residual: f64,
}

/// Evaluates the optimality system at a candidate primal-dual pair.
pub fn kkt_residuals(
    qp: &CompactQp,
    sol: &InvViSolution,
    nu: &DVector<f64>,
) -> Result<KktReport, InvViError> {
    let beta_tail = DVector::from_vec(sol.beta.tail().to_vec());
    let eps = DVector::from_vec(sol.epsilons.clone());
    let y = sol.stacked_y(qp);
    kkt_residuals_raw(qp, &beta_tail, &y, &eps, nu)
}

/// As [`kkt_residuals`] but over raw stacked vectors.
pub fn kkt_residuals_raw(
    qp: &CompactQp,
    beta_tail: &DVector<f64>,
    y: &DVector<f64>,
    eps: &DVector<f64>,
    nu: &DVector<f64>,
) -> Result<KktReport, InvViError> {
    if beta_tail.len() != qp.n_beta
        || eps.len() != qp.n_eps
        || nu.len() != qp.num_rows()
        || y.len() != qp.n_y()
    {
        return Err(InvViError::DimensionMismatch(format!(
            "expected beta {}, y {}, eps {}, nu {}; got {}, {}, {}, {}",
            qp.n_beta,
            qp.n_y(),
            qp.n_eps,
            qp.num_rows(),
            beta_tail.len(),
            y.len(),
            eps.len(),
            nu.len()
        )));
    }
    let eps_stationarity = (eps * 2.0 + qp.c_mat.transpose() * nu).amax();
    let beta_stationarity = (&qp.h_mat * beta_tail * 2.0 + qp.b_mat.transpose() * nu).amax();
    let y_stationarity = (qp.a_mat.transpose() * nu).amax();

    let rows = qp.row_values(beta_tail, y, eps);
    let complementary_slackness = (0..qp.num_rows())
        .map(|r| (nu[r] * rows[r]).abs())
        .fold(0.0, f64::max);

    let strong_duality_gap = qp.primal_objective(beta_tail, eps) - dual_value_unchecked(qp, nu);

    let max_residual = eps_stationarity.max(beta_stationarity).max(y_stationarity);
    Ok(KktReport {
        eps_stationarity,
        beta_stationarity,
        y_stationarity,
        complementary_slackness,
        strong_duality_gap,
        max_residual,
    })
}

fn dual_value_unchecked(qp: &CompactQp, nu: &DVector<f64>) -> f64 {
    let c_term = (qp.c_mat.transpose() * nu).norm_squared();
    let b_nu = qp.b_mat.transpose() * nu;
    let mut bh_term = 0.0;
    for i in 0..qp.n_beta {
        bh_term += b_nu[i] * b_nu[i] / qp.h_mat[(i, i)];
    }
    -0.25 * c_term - 0.25 * bh_term + qp.h_vec.dot(nu)
}

/// Lagrangian dual objective at `nu`; requires `nu >= 0` and `A'nu = 0`
/// within `tol`, the conditions under which the value is a valid bound.
pub fn dual_objective(qp: &CompactQp, nu: &DVector<f64>, tol: f64) -> Result<f64, InvViError> {
    if nu.len() != qp.num_rows() {
        return Err(InvViError::DimensionMismatch(format!(
            "nu has {} entries for {} rows",
            nu.len(),
            qp.num_rows()
        )));
    }
    if let Some(bad) = nu.iter().find(|&&v| v < -tol) {
        return Err(InvViError::InfeasibleDual(format!("negative multiplier {bad}")));
    }
    let y_res = (qp.a_mat.transpose() * nu).amax();
    let scale = 1.0 + nu.amax();
    if y_res > tol * scale {
        return Err(InvViError::InfeasibleDual(format!(
            "potential stationarity residual {y_res} exceeds tolerance"
        )));
    }
    Ok(dual_value_unchecked(qp, nu))
}
