//! Joint estimation of OD demands and latency coefficients.
//!
//! The estimation drives the squared mismatch between predicted equilibrium
//! flows and observed flows to zero while keeping the coefficient vector
//! consistent with the recovery program of [`crate::invvi`]. The recovery
//! program's optimality conditions enter as constraints; its nonconvex
//! strong-duality equation is relaxed to a gap bound `xi`, penalized in the
//! objective. Each outer iteration freezes the constraint data at the
//! previous iterate, assembles the first-order model of the objective, and
//! solves one linear-objective subproblem with a single convex quadratic row
//! to obtain the next iterate.

mod step;

pub use step::{fw_step, FrozenModel};

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::invvi::{self, CompactQp, InvViError, Snapshot};
use crate::latency::{KernelConfig, LatencyCoefficients, LatencyError};
use crate::netcore::{DemandVector, FlowVector, NetError, Network};
use crate::solver::{SolveOptions, SolveStatus};
use crate::tap::{self, TapConfig, TapError, TapSolution};

#[derive(Debug, Error)]
pub enum BilevelError {
    #[error("observed flows: {0}")]
    BadObservation(String),
    #[error("equilibrium solve failed to converge (gap {gap:.3e}); gradients would be unreliable")]
    TapNotConverged { gap: f64 },
    #[error("direction subproblem infeasible even after widening the trust region")]
    SubproblemInfeasible,
    #[error("direction subproblem stalled")]
    SolverStalled,
    #[error(transparent)]
    Tap(#[from] TapError),
    #[error(transparent)]
    InvVi(#[from] InvViError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
}

/// One observed flow record: measured links and their flows. Demands are not
/// part of an observation; they are what is being estimated.
#[derive(Debug, Clone)]
pub struct ObservedFlows {
    pub link_positions: Vec<usize>,
    pub values: Vec<f64>,
}

impl ObservedFlows {
    pub fn new(link_positions: Vec<usize>, values: Vec<f64>) -> Result<Self, BilevelError> {
        if link_positions.is_empty() || link_positions.len() != values.len() {
            return Err(BilevelError::BadObservation(format!(
                "{} links against {} values",
                link_positions.len(),
                values.len()
            )));
        }
        Ok(ObservedFlows { link_positions, values })
    }

    /// Full-coverage observation of every link.
    pub fn full(net: &Network, flow: &FlowVector) -> Self {
        ObservedFlows {
            link_positions: (0..net.num_links()).collect(),
            values: flow.values().to_vec(),
        }
    }

    fn mismatch(&self, flow: &FlowVector) -> f64 {
        self.link_positions
            .iter()
            .zip(self.values.iter())
            .map(|(&pos, &target)| {
                let d = flow.get(pos) - target;
                d * d
            })
            .sum()
    }
}

/// Current estimate `(beta, g, xi)` of the outer iteration.
#[derive(Debug, Clone)]
pub struct JointState {
    pub beta: LatencyCoefficients,
    pub demands: DemandVector,
    pub xi: f64,
    pub iteration: usize,
}

/// Outer-loop settings.
#[derive(Debug, Clone)]
pub struct JointConfig {
    /// Penalty weight on the duality-gap bound.
    pub lambda: f64,
    /// Trust-region half-width below the previous demand iterate.
    pub c1: f64,
    /// Trust-region half-width above the previous demand iterate.
    pub c2: f64,
    /// Finite-difference step on the coefficients.
    pub rho: f64,
    /// Per-step cap on coefficient moves, mirroring the demand trust region.
    pub beta_box: f64,
    /// Weight of the proximal tie-break that pins direction-subproblem
    /// coordinates with noise-level gradients to their previous values.
    pub tie_break_weight: f64,
    pub max_outer_iterations: usize,
    /// Relative flatness threshold of the stopping rule.
    pub f_tolerance: f64,
    /// Use central instead of forward differences for the flow derivatives.
    pub central_differences: bool,
    pub tap: TapConfig,
    pub kernel: KernelConfig,
    pub solve: SolveOptions,
}

impl JointConfig {
    pub fn new(kernel: KernelConfig) -> Self {
        JointConfig {
            lambda: 1e3,
            c1: 5.0,
            c2: 5.0,
            rho: 0.5,
            beta_box: 0.5,
            tie_break_weight: 1e-3,
            max_outer_iterations: 500,
            f_tolerance: 1e-3,
            central_differences: false,
            tap: TapConfig::default(),
            kernel,
            solve: SolveOptions::default(),
        }
    }
}

/// Per-iteration record of the outer loop.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub xi: f64,
    pub demands: Vec<f64>,
    pub beta_tail: Vec<f64>,
    pub tap_gap: f64,
    pub trust_region_widened: bool,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

/// Squared flow mismatch plus the penalized gap bound, evaluated by solving
/// the equilibrium at the state's parameters.
pub fn objective_f(
    state: &JointState,
    observed: &[ObservedFlows],
    net: &Network,
    cfg: &JointConfig,
) -> Result<f64, BilevelError> {
    objective_f_with_tap(state, observed, net, cfg).map(|(value, _)| value)
}

/// As [`objective_f`], also returning the equilibrium solve for reuse.
pub fn objective_f_with_tap(
    state: &JointState,
    observed: &[ObservedFlows],
    net: &Network,
    cfg: &JointConfig,
) -> Result<(f64, TapSolution), BilevelError> {
    let sol = tap::solve_tap(net, &state.beta, &state.demands, &cfg.tap)?;
    let mismatch: f64 = observed.iter().map(|o| o.mismatch(&sol.flow)).sum();
    Ok((mismatch + cfg.lambda * state.xi, sol))
}

/// Per-OD-pair link indicators of the current shortest route: entry `a` is 1
/// exactly when link `a` lies on the OD pair's minimum-time route at the
/// equilibrium travel times. This is the route-collapse approximation of the
/// demand sensitivity of link flows.
pub fn grad_wrt_demand(
    net: &Network,
    state: &JointState,
    equilibrium: &TapSolution,
) -> Result<Vec<Vec<f64>>, BilevelError> {
    let times = tap::travel_times(net, &state.beta, &equilibrium.flow)?;
    let mut out = Vec::with_capacity(state.demands.len());
    for od in state.demands.pairs() {
        let route = crate::netcore::shortest_route(net, &times, od)?;
        let mut indicator = vec![0.0; net.num_links()];
        for &p in route.link_positions() {
            indicator[p] = 1.0;
        }
        out.push(indicator);
    }
    Ok(out)
}

/// Finite-difference sensitivities of equilibrium link flows to each latency
/// coefficient: column `l` holds `(x(beta + rho e_l) - x(beta)) / rho`
/// (forward differences; central when configured). The perturbed equilibria
/// are solved concurrently. A non-converged solve is a hard error because a
/// noisy column destabilizes the outer iteration.
pub fn grad_wrt_beta(
    net: &Network,
    state: &JointState,
    cfg: &JointConfig,
    base: &TapSolution,
) -> Result<DMatrix<f64>, BilevelError> {
    let n = state.beta.degree();
    let n_links = net.num_links();
    let solve_at = |tail: Vec<f64>| -> Result<FlowVector, BilevelError> {
        let coeffs = LatencyCoefficients::from_tail(&tail, 1e-9)?;
        let sol = tap::solve_tap(net, &coeffs, &state.demands, &cfg.tap)?;
        if !sol.converged {
            return Err(BilevelError::TapNotConverged { gap: sol.relative_gap });
        }
        Ok(sol.flow)
    };

    let mut jobs: Vec<Vec<f64>> = Vec::new();
    for l in 0..n {
        let mut up = state.beta.tail().to_vec();
        up[l] += cfg.rho;
        jobs.push(up);
        if cfg.central_differences {
            let mut dn = state.beta.tail().to_vec();
            dn[l] = (dn[l] - cfg.rho).max(0.0);
            jobs.push(dn);
        }
    }
    let results: Vec<Result<FlowVector, BilevelError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|tail| scope.spawn(move || solve_at(tail)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });

    let mut grad = DMatrix::zeros(n_links, n);
    if cfg.central_differences {
        for l in 0..n {
            let up = results[2 * l].as_ref().map_err(clone_err)?;
            let dn = results[2 * l + 1].as_ref().map_err(clone_err)?;
            let dn_tail = (state.beta.tail()[l] - cfg.rho).max(0.0);
            let width = state.beta.tail()[l] + cfg.rho - dn_tail;
            for a in 0..n_links {
                grad[(a, l)] = (up.get(a) - dn.get(a)) / width;
            }
        }
    } else {
        for l in 0..n {
            let up = results[l].as_ref().map_err(clone_err)?;
            for a in 0..n_links {
                grad[(a, l)] = (up.get(a) - base.flow.get(a)) / cfg.rho;
            }
        }
    }
    Ok(grad)
}

fn clone_err(e: &BilevelError) -> BilevelError {
    match e {
        BilevelError::TapNotConverged { gap } => BilevelError::TapNotConverged { gap: *gap },
        other => BilevelError::BadObservation(other.to_string()),
    }
}

/// First-order model of the objective at the current state: entries over
/// `(beta_1..beta_n, g_1..g_W, xi)`. The mismatch terms chain through the
/// flow sensitivities; the gap-bound entry is the constant penalty weight.
pub struct Gradient {
    pub beta: Vec<f64>,
    pub demand: Vec<f64>,
    pub lambda: f64,
}

pub fn grad_f(
    state: &JointState,
    observed: &[ObservedFlows],
    net: &Network,
    cfg: &JointConfig,
    equilibrium: &TapSolution,
    beta_sens: &DMatrix<f64>,
    demand_sens: &[Vec<f64>],
) -> Gradient {
    let n = state.beta.degree();
    let mut residual = vec![0.0; net.num_links()];
    for obs in observed {
        for (&pos, &target) in obs.link_positions.iter().zip(obs.values.iter()) {
            residual[pos] += 2.0 * (equilibrium.flow.get(pos) - target);
        }
    }
    let beta = (0..n)
        .map(|l| (0..net.num_links()).map(|a| residual[a] * beta_sens[(a, l)]).sum())
        .collect();
    let demand = demand_sens
        .iter()
        .map(|ind| (0..net.num_links()).map(|a| residual[a] * ind[a]).sum())
        .collect();
    Gradient { beta, demand, lambda: cfg.lambda }
}

/// Builds the frozen inner program at the state's own predicted equilibrium:
/// constraint data are evaluated at the previous iterate, exactly as the
/// direction subproblem requires.
pub fn freeze_inner_qp(
    net: &Arc<Network>,
    state: &JointState,
    observed: &[ObservedFlows],
    cfg: &JointConfig,
    equilibrium: &TapSolution,
) -> Result<CompactQp, BilevelError> {
    let mut snapshots = Vec::with_capacity(observed.len());
    for (k, obs) in observed.iter().enumerate() {
        let flows: Vec<f64> =
            obs.link_positions.iter().map(|&p| equilibrium.flow.get(p)).collect();
        snapshots.push(Snapshot::new(
            k,
            net.clone(),
            obs.link_positions.clone(),
            flows,
            state.demands.clone(),
        )?);
    }
    Ok(invvi::assemble_qp(&snapshots, &cfg.kernel)?)
}

/// Duality gap of the frozen program with the coefficients pinned at the
/// state's value: the restricted primal optimum minus the dual optimum.
/// Seeding `xi` with this gap makes the initial state feasible for the
/// relaxed strong-duality row.
pub fn initial_gap_bound(qp: &CompactQp, beta: &LatencyCoefficients, opts: &SolveOptions) -> Result<f64, BilevelError> {
    let (pinned, _) = invvi::conic_for(qp, Some(beta.tail()));
    let pinned_report = crate::solver::solve(&pinned, opts);
    if pinned_report.status != SolveStatus::Optimal {
        return Err(BilevelError::SolverStalled);
    }
    let free = invvi::solve_inverse_vi(qp, opts)?;
    Ok((pinned_report.objective - free.objective_value).max(0.0))
}

/// Joint estimation loop: evaluates the objective, assembles gradients and
/// the frozen constraint data, and takes direction steps until the objective
/// flattens or the iteration budget is spent. Returns the best state seen
/// and the full trace.
pub fn joint_estimate(
    observed: &[ObservedFlows],
    net: &Arc<Network>,
    init_beta: LatencyCoefficients,
    init_demands: DemandVector,
    cfg: &JointConfig,
) -> Result<(JointState, IterationTrace), BilevelError> {
    if observed.is_empty() {
        return Err(BilevelError::BadObservation("no observations".into()));
    }
    for obs in observed {
        for &pos in &obs.link_positions {
            if pos >= net.num_links() {
                return Err(BilevelError::BadObservation(format!(
                    "observed link position {pos} out of range"
                )));
            }
        }
    }

    let init_beta = init_beta.padded_to(cfg.kernel.degree)?;
    let mut state = JointState { beta: init_beta, demands: init_demands, xi: 0.0, iteration: 0 };
    // Initial equilibrium, frozen program, and gap bound.
    let (_, mut equilibrium) = objective_f_with_tap(&state, observed, net, cfg)?;
    let mut frozen = freeze_inner_qp(net, &state, observed, cfg, &equilibrium)?;
    state.xi = initial_gap_bound(&frozen, &state.beta, &cfg.solve)?;
    let (mut f_prev, _) = objective_f_with_tap(&state, observed, net, cfg)
        .map(|(v, _)| (v, ()))?;

    let mut trace = IterationTrace::default();
    trace.records.push(IterationRecord {
        iteration: 0,
        objective: f_prev,
        xi: state.xi,
        demands: state.demands.values().to_vec(),
        beta_tail: state.beta.tail().to_vec(),
        tap_gap: equilibrium.relative_gap,
        trust_region_widened: false,
    });

    let mut best = (f_prev, state.clone());
    let mut flat_streak = 0;
    let mut stall_streak = 0;

    for j in 1..=cfg.max_outer_iterations {
        let demand_sens = grad_wrt_demand(net, &state, &equilibrium)?;
        let beta_sens = grad_wrt_beta(net, &state, cfg, &equilibrium)?;
        let gradient = grad_f(&state, observed, net, cfg, &equilibrium, &beta_sens, &demand_sens);

        let model = FrozenModel::new(&frozen, &state, cfg);
        let (mut next, widened) = fw_step(&model, &gradient, cfg)?;
        next.iteration = j;

        let (f_next, eq_next) = objective_f_with_tap(&next, observed, net, cfg)?;
        trace.records.push(IterationRecord {
            iteration: j,
            objective: f_next,
            xi: next.xi,
            demands: next.demands.values().to_vec(),
            beta_tail: next.beta.tail().to_vec(),
            tap_gap: eq_next.relative_gap,
            trust_region_widened: widened,
        });

        if f_next < best.0 {
            best = (f_next, next.clone());
            stall_streak = 0;
        } else {
            stall_streak += 1;
            if stall_streak == 20 {
                trace.warnings.push(format!(
                    "objective has not improved for 20 consecutive iterations (iteration {j})"
                ));
            }
        }

        if (f_next - f_prev).abs() <= cfg.f_tolerance * f_prev.max(1.0) {
            flat_streak += 1;
        } else {
            flat_streak = 0;
        }

        equilibrium = eq_next;
        state = next;
        f_prev = f_next;

        if flat_streak >= 5 {
            break;
        }
        if j < cfg.max_outer_iterations {
            frozen = freeze_inner_qp(net, &state, observed, cfg, &equilibrium)?;
        }
    }

    let (f_best, mut state_best) = best;
    state_best.iteration = state.iteration;
    debug_assert!(f_best >= 0.0);
    Ok((state_best, trace))
}

#[cfg(test)]
mod tests;
