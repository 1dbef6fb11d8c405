//! Forward user-equilibrium solver.
//!
//! Iterates all-or-nothing direction finding with either successive-average
//! steps or an exact line search on the closed-form potential. Convergence is
//! measured by the relative gap `(t'x - t'x_aon) / (t'x)`, which is the
//! equilibrium violation normalized by total travel cost.

use serde::Serialize;
use thiserror::Error;

use crate::latency::{f_eval, link_travel_time, potential, LatencyCoefficients, LatencyError};
use crate::netcore::{
    all_or_nothing_per_od, enumerate_routes, shortest_route, DemandVector, FlowVector, NetError,
    Network,
};

#[derive(Debug, Error)]
pub enum TapError {
    #[error("demand for OD pair {index} cannot be routed: {source}")]
    InfeasibleDemand {
        index: usize,
        #[source]
        source: NetError,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
}

/// Step-size rule for the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Successive averages: step `1/(j+1)` at iteration `j`.
    Msa,
    /// Bisection on the directional derivative of the potential over [0, 1].
    ExactLineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct TapConfig {
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    pub step_rule: StepRule,
    /// Record per-iteration diagnostics in the solution.
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for TapConfig {
    fn default() -> Self {
        TapConfig {
            max_iterations: 100_000,
            gap_tolerance: 1e-6,
            step_rule: StepRule::ExactLineSearch,
            record_trace: false,
        }
    }
}

impl TapConfig {
    pub fn with_gap_tolerance(mut self, tol: f64) -> Self {
        self.gap_tolerance = tol;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TapIteration {
    pub iteration: usize,
    pub relative_gap: f64,
    pub potential: f64,
    pub step: f64,
}

/// Equilibrium solve outcome. `converged` is false when the iteration budget
/// ran out; the best flow found is still returned.
#[derive(Debug, Clone)]
pub struct TapSolution {
    pub flow: FlowVector,
    pub per_od_flow: Vec<FlowVector>,
    pub iterations: usize,
    pub relative_gap: f64,
    pub potential_value: f64,
    pub converged: bool,
    /// Set when the latency slope is everywhere zero at the solution, in
    /// which case link flows need not be unique.
    pub degenerate_costs: bool,
    pub trace: Vec<TapIteration>,
}

fn line_search(
    net: &Network,
    coeffs: &LatencyCoefficients,
    current: &FlowVector,
    target: &FlowVector,
) -> Result<f64, TapError> {
    // phi(alpha) = potential(current + alpha (target - current)) is convex;
    // its derivative is t(x_alpha)' (target - current). Bisect on the sign.
    let derivative = |alpha: f64| -> Result<f64, TapError> {
        let x = current.blend(target, alpha);
        let t = link_travel_time(net, coeffs, &x)?;
        Ok((0..net.num_links())
            .map(|a| t[a] * (target.get(a) - current.get(a)))
            .sum())
    };
    if derivative(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    if derivative(1.0)? <= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if derivative(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the traffic assignment problem for the given latency coefficients
/// and demands.
pub fn solve_tap(
    net: &Network,
    coeffs: &LatencyCoefficients,
    demands: &DemandVector,
    cfg: &TapConfig,
) -> Result<TapSolution, TapError> {
    let aon_at = |costs: &[f64]| {
        all_or_nothing_per_od(net, costs, demands).map_err(|e| match e {
            NetError::NoPath { origin, destination } => {
                let index = demands
                    .pairs()
                    .iter()
                    .position(|p| p.origin.0 == origin && p.destination.0 == destination)
                    .unwrap_or(0);
                TapError::InfeasibleDemand { index, source: NetError::NoPath { origin, destination } }
            }
            other => TapError::Net(other),
        })
    };

    let free_flow = net.free_flow_times();
    let (mut flow, mut per_od) = aon_at(&free_flow)?;
    let mut trace = Vec::new();
    let mut last_gap = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    for j in 0..cfg.max_iterations {
        iterations = j + 1;
        let times = link_travel_time(net, coeffs, &flow)?;
        let (aon_flow, aon_per_od) = aon_at(&times)?;
        let cost_now = flow.dot(&times);
        let cost_aon = aon_flow.dot(&times);
        last_gap = if cost_now > 0.0 { ((cost_now - cost_aon) / cost_now).max(0.0) } else { 0.0 };

        if cfg.record_trace {
            trace.push(TapIteration {
                iteration: j,
                relative_gap: last_gap,
                potential: potential(net, coeffs, &flow)?,
                step: 0.0,
            });
        }
        if last_gap <= cfg.gap_tolerance {
            converged = true;
            break;
        }

        let alpha = match cfg.step_rule {
            StepRule::Msa => 1.0 / (j as f64 + 2.0),
            StepRule::ExactLineSearch => line_search(net, coeffs, &flow, &aon_flow)?,
        };
        if let Some(last) = trace.last_mut() {
            last.step = alpha;
        }
        flow = flow.blend(&aon_flow, alpha);
        for (cur, aon) in per_od.iter_mut().zip(aon_per_od.iter()) {
            *cur = cur.blend(aon, alpha);
        }
    }

    let degenerate_costs = {
        let slope_free = coeffs.tail().iter().all(|&b| b == 0.0);
        slope_free && demands.total() > 0.0
    };

    Ok(TapSolution {
        potential_value: potential(net, coeffs, &flow)?,
        relative_gap: last_gap,
        iterations,
        converged,
        degenerate_costs,
        flow,
        per_od_flow: per_od,
        trace,
    })
}

/// Tightest equilibrium violation of `flow` at its own travel times:
/// `max(0, t(x)'x - min_{feasible y} t(x)'y)`. The inner minimum is exact
/// because a linear objective over the feasible set is attained by loading
/// every OD pair on its shortest route.
pub fn vi_gap(
    net: &Network,
    coeffs: &LatencyCoefficients,
    flow: &FlowVector,
    demands: &DemandVector,
) -> Result<f64, TapError> {
    let times = link_travel_time(net, coeffs, flow)?;
    let (aon_flow, _) = all_or_nothing_per_od(net, &times, demands)?;
    Ok((flow.dot(&times) - aon_flow.dot(&times)).max(0.0))
}

/// Checks the equilibrium route condition: for every OD pair, total travel
/// cost carried by the pair equals demand times the shortest-route time,
/// within relative tolerance `tol`. Routes are enumerated (up to
/// `max_routes`) so callers can inspect per-route times on small networks.
pub fn wardrop_route_check(
    net: &Network,
    coeffs: &LatencyCoefficients,
    flow: &FlowVector,
    per_od_flow: &[FlowVector],
    demands: &DemandVector,
    tol: f64,
    max_routes: usize,
) -> Result<bool, TapError> {
    if per_od_flow.len() != demands.len() {
        return Err(NetError::DimensionMismatch(format!(
            "{} per-OD flows for {} OD pairs",
            per_od_flow.len(),
            demands.len()
        ))
        .into());
    }
    let times = link_travel_time(net, coeffs, flow)?;
    for (w, od) in demands.pairs().iter().enumerate() {
        let demand = demands.values()[w];
        if demand <= 0.0 {
            continue;
        }
        let routes = enumerate_routes(net, od, max_routes)?;
        if routes.len() == max_routes {
            // The enumeration may have been truncated; the shortest route by
            // current times must still be present for the check to be exact.
            let best = shortest_route(net, &times, od)?;
            if !routes.iter().any(|r| r.link_positions() == best.link_positions()) {
                return Err(NetError::RouteEnumerationExceeded(max_routes).into());
            }
        }
        let min_time = routes
            .iter()
            .map(|r| r.cost(&times))
            .fold(f64::INFINITY, f64::min);
        // All flow on minimum-time routes is equivalent to the carried cost
        // matching demand * min_time.
        let carried: f64 = (0..net.num_links())
            .map(|a| per_od_flow[w].get(a) * times[a])
            .sum();
        if carried > (1.0 + tol) * demand * min_time {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Convenience: travel times of a flow vector under the given coefficients.
pub fn travel_times(
    net: &Network,
    coeffs: &LatencyCoefficients,
    flow: &FlowVector,
) -> Result<Vec<f64>, TapError> {
    Ok(link_travel_time(net, coeffs, flow)?)
}

/// Smallest marginal congestion slope across links at the given flow; zero
/// means the equilibrium may not pin link flows uniquely.
pub fn min_latency_slope(
    net: &Network,
    coeffs: &LatencyCoefficients,
    flow: &FlowVector,
) -> Result<f64, TapError> {
    let mut min_slope = f64::INFINITY;
    for (pos, link) in net.links().iter().enumerate() {
        let r = flow.get(pos) / link.capacity;
        // d t / d x = t0 f'(r) / m
        let mut fp = 0.0;
        let mut r_pow = 1.0;
        for (i, &b) in coeffs.beta().iter().enumerate().skip(1) {
            fp += i as f64 * b * r_pow;
            r_pow *= r.max(0.0);
        }
        let _ = f_eval(coeffs, r.max(0.0))?;
        min_slope = min_slope.min(link.free_flow_time * fp / link.capacity);
    }
    Ok(min_slope)
}
