use std::sync::Arc;

use super::*;
use crate::fixtures::{braess_demand, braess_network, braess_true_coefficients, parallel_network};
use crate::latency::bpr_coefficients;
use crate::netcore::NodeId;

fn kernel5() -> KernelConfig {
    KernelConfig::new(5, 30.0, 1.0)
}

fn ground_truth_observation(net: &Arc<Network>) -> (Vec<ObservedFlows>, TapSolution) {
    let cfg = TapConfig::default().with_gap_tolerance(1e-9);
    let sol = tap::solve_tap(net, &braess_true_coefficients(), &braess_demand(4000.0), &cfg)
        .unwrap();
    (vec![ObservedFlows::full(net, &sol.flow)], sol)
}

#[test]
fn objective_is_zero_at_truth_and_positive_at_bpr_start() {
    let net = Arc::new(braess_network());
    let (observed, _) = ground_truth_observation(&net);
    let cfg = JointConfig::new(kernel5());

    let truth = JointState {
        beta: braess_true_coefficients(),
        demands: braess_demand(4000.0),
        xi: 0.0,
        iteration: 0,
    };
    let f_truth = objective_f(&truth, &observed, &net, &cfg).unwrap();
    assert!(f_truth <= 1e-4, "objective at truth = {f_truth}");

    let start = JointState {
        beta: bpr_coefficients(5).unwrap(),
        demands: braess_demand(5500.0),
        xi: 0.0,
        iteration: 0,
    };
    let f_start = objective_f(&start, &observed, &net, &cfg).unwrap();
    assert!(f_start > 1e5, "objective at start = {f_start}");
}

#[test]
fn penalty_term_is_linear_in_xi() {
    let net = Arc::new(braess_network());
    let (observed, _) = ground_truth_observation(&net);
    let cfg = JointConfig::new(kernel5());
    let state = JointState {
        beta: braess_true_coefficients(),
        demands: braess_demand(4000.0),
        xi: 1.0,
        iteration: 0,
    };
    let with_xi = objective_f(&state, &observed, &net, &cfg).unwrap();
    let without = objective_f(&JointState { xi: 0.0, ..state.clone() }, &observed, &net, &cfg)
        .unwrap();
    assert!((with_xi - without - cfg.lambda).abs() < 1e-9);
}

#[test]
fn demand_gradient_is_the_tie_broken_shortest_route() {
    let net = Arc::new(braess_network());
    let cfg = JointConfig::new(kernel5());
    let state = JointState {
        beta: braess_true_coefficients(),
        demands: braess_demand(4000.0),
        xi: 0.0,
        iteration: 0,
    };
    let eq = tap::solve_tap(&net, &state.beta, &state.demands, &cfg.tap).unwrap();
    // Force the exactly calibrated equilibrium so both used routes tie to
    // the bit and the lexicographic rule decides.
    let exact = TapSolution { flow: crate::fixtures::braess_equilibrium_flows(), ..eq };
    let grad = grad_wrt_demand(&net, &state, &exact).unwrap();
    assert_eq!(grad.len(), 1);
    assert_eq!(grad[0], vec![1.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn demand_gradient_traces_exactly_one_route() {
    let net = Arc::new(braess_network());
    let cfg = JointConfig::new(kernel5());
    let state = JointState {
        beta: bpr_coefficients(5).unwrap(),
        demands: braess_demand(5500.0),
        xi: 0.0,
        iteration: 0,
    };
    let eq = tap::solve_tap(&net, &state.beta, &state.demands, &cfg.tap).unwrap();
    let grad = grad_wrt_demand(&net, &state, &eq).unwrap();
    let od = state.demands.pairs()[0];
    let routes = crate::netcore::enumerate_routes(&net, &od, 16).unwrap();
    let matches = routes
        .iter()
        .filter(|r| {
            (0..net.num_links()).all(|a| r.indicator(a) == grad[0][a])
        })
        .count();
    assert_eq!(matches, 1, "indicator {:?} must trace exactly one route", grad[0]);
}

#[test]
fn beta_gradient_vanishes_on_symmetric_parallel_links() {
    let net = Arc::new(parallel_network());
    let cfg = JointConfig::new(KernelConfig::new(3, 30.0, 1.0));
    let state = JointState {
        beta: crate::latency::LatencyCoefficients::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap(),
        demands: crate::netcore::DemandVector::single(NodeId(1), NodeId(2), 100.0).unwrap(),
        xi: 0.0,
        iteration: 0,
    };
    let eq = tap::solve_tap(&net, &state.beta, &state.demands, &cfg.tap).unwrap();
    let sens = grad_wrt_beta(&net, &state, &cfg, &eq).unwrap();
    // Perturbing any coefficient preserves the symmetric 50/50 split.
    for l in 0..3 {
        for a in 0..2 {
            assert!(
                sens[(a, l)].abs() < 1e-4,
                "sensitivity ({a}, {l}) = {}",
                sens[(a, l)]
            );
        }
    }
}

#[test]
fn gradient_at_matching_state_is_pure_penalty() {
    let net = Arc::new(braess_network());
    let cfg = JointConfig::new(kernel5());
    let state = JointState {
        beta: braess_true_coefficients(),
        demands: braess_demand(4000.0),
        xi: 0.0,
        iteration: 0,
    };
    // Observed flows are the solver's own output, so the mismatch is
    // bitwise zero and every flow-dependent entry vanishes.
    let eq = tap::solve_tap(&net, &state.beta, &state.demands, &cfg.tap).unwrap();
    let observed = vec![ObservedFlows::full(&net, &eq.flow)];
    let demand_sens = grad_wrt_demand(&net, &state, &eq).unwrap();
    let beta_sens = grad_wrt_beta(&net, &state, &cfg, &eq).unwrap();
    let gradient = grad_f(&state, &observed, &net, &cfg, &eq, &beta_sens, &demand_sens);
    for v in &gradient.beta {
        assert_eq!(*v, 0.0);
    }
    for v in &gradient.demand {
        assert_eq!(*v, 0.0);
    }
    assert_eq!(gradient.lambda, cfg.lambda);
}

#[test]
fn single_link_mismatch_gives_double_residual_demand_partial() {
    // One measured link with x - x* = 3 and a unit route indicator yields a
    // demand partial of exactly 6.
    let net = Arc::new(parallel_network());
    let cfg = JointConfig::new(KernelConfig::new(2, 30.0, 1.0));
    let state = JointState {
        beta: crate::latency::LatencyCoefficients::new(vec![1.0, 1.0, 0.0]).unwrap(),
        demands: crate::netcore::DemandVector::single(NodeId(1), NodeId(2), 10.0).unwrap(),
        xi: 0.0,
        iteration: 0,
    };
    let eq = tap::solve_tap(&net, &state.beta, &state.demands, &cfg.tap).unwrap();
    let observed = vec![ObservedFlows::new(vec![0], vec![eq.flow.get(0) - 3.0]).unwrap()];
    let demand_sens = vec![vec![1.0, 0.0]];
    let beta_sens = nalgebra::DMatrix::zeros(2, 2);
    let gradient = grad_f(&state, &observed, &net, &cfg, &eq, &beta_sens, &demand_sens);
    assert!((gradient.demand[0] - 6.0).abs() < 1e-9);
}

#[test]
fn fw_step_respects_trust_region_and_reduces_gap_bound() {
    let net = Arc::new(braess_network());
    let (observed, _) = ground_truth_observation(&net);
    let cfg = JointConfig::new(kernel5());
    let state = JointState {
        beta: bpr_coefficients(5).unwrap(),
        demands: braess_demand(5500.0),
        xi: 0.0,
        iteration: 0,
    };
    let (_, eq) = objective_f_with_tap(&state, &observed, &net, &cfg).unwrap();
    let frozen = freeze_inner_qp(&net, &state, &observed, &cfg, &eq).unwrap();
    let xi0 = initial_gap_bound(&frozen, &state.beta, &cfg.solve).unwrap();
    let state = JointState { xi: xi0, ..state };

    let demand_sens = grad_wrt_demand(&net, &state, &eq).unwrap();
    let beta_sens = grad_wrt_beta(&net, &state, &cfg, &eq).unwrap();
    let gradient = grad_f(&state, &observed, &net, &cfg, &eq, &beta_sens, &demand_sens);

    let model = FrozenModel::new(&frozen, &state, &cfg);
    let (next, widened) = fw_step(&model, &gradient, &cfg).unwrap();
    assert!(!widened);
    // Demand trust region |g_j - g_{j-1}| <= c1/c2.
    let moved = next.demands.values()[0] - 5500.0;
    assert!(moved >= -cfg.c1 - 1e-6 && moved <= cfg.c2 + 1e-6, "demand moved by {moved}");
    // Mismatch pressure pushes the demand down against the box.
    assert!((moved + cfg.c1).abs() < 1e-3, "expected the lower box corner, moved {moved}");
    // Coefficient box.
    for (a, b) in next.beta.tail().iter().zip(state.beta.tail().iter()) {
        assert!((a - b).abs() <= cfg.beta_box + 1e-9);
    }
    assert!(next.xi >= 0.0);
}

#[test]
fn pure_penalty_gradient_drives_gap_bound_to_floor() {
    let net = Arc::new(braess_network());
    let (observed, eq_truth) = ground_truth_observation(&net);
    let cfg = JointConfig::new(kernel5());
    let state = JointState {
        beta: braess_true_coefficients().padded_to(5).unwrap(),
        demands: braess_demand(4000.0),
        xi: 7.5,
        iteration: 0,
    };
    let frozen = freeze_inner_qp(&net, &state, &observed, &cfg, &eq_truth).unwrap();
    let gradient = Gradient { beta: vec![0.0; 5], demand: vec![0.0], lambda: cfg.lambda };
    let model = FrozenModel::new(&frozen, &state, &cfg);
    let (next, _) = fw_step(&model, &gradient, &cfg).unwrap();
    // The minimal feasible gap bound at frozen data is essentially zero.
    assert!(next.xi <= 1e-4, "xi = {}", next.xi);
}

#[test]
fn joint_estimate_from_truth_terminates_quickly() {
    let net = Arc::new(braess_network());
    let (observed, _) = ground_truth_observation(&net);
    let mut cfg = JointConfig::new(kernel5());
    cfg.max_outer_iterations = 25;
    let (state, trace) = joint_estimate(
        &observed,
        &net,
        braess_true_coefficients(),
        braess_demand(4000.0),
        &cfg,
    )
    .unwrap();
    let final_f = trace.records.last().unwrap().objective;
    let initial_f = trace.records[0].objective;
    assert!(trace.records.len() <= 7, "terminated after {} records", trace.records.len());
    assert!(final_f <= initial_f.max(1.0));
    assert!((state.demands.values()[0] - 4000.0).abs() <= 10.0);
}
