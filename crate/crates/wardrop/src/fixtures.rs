//! Small benchmark networks with calibrated parameters, shared by tests,
//! the CLI experiment runner, and documentation examples.

use crate::latency::LatencyCoefficients;
use crate::netcore::{DemandVector, FlowVector, Network, NodeId};

/// The classic four-node Braess diamond: links 1: 1->3, 2: 3->2, 3: 3->4
/// (the bridge), 4: 1->4, 5: 4->2, one OD pair from node 1 to node 2.
///
/// Free-flow times (63, 65, 8, 64, 65) with capacities (2048, 2048, 2048,
/// 1920, 1920) are calibrated so that under `f(x) = 1 + x` and a demand of
/// 4000 the user equilibrium is exactly (2080, 2080, 0, 1920, 1920): both
/// used routes then cost exactly 258 (the tie is exact in binary arithmetic
/// because every flow-to-capacity ratio is dyadic) and the bridge route
/// costs 264.984375. Capacities are close to proportional to the target
/// flows, so the equilibrium split is insensitive to the exact latency
/// shape, mirroring the weak identifiability of the original experiment.
pub fn braess_network() -> Network {
    Network::build(&[
        (1, 3, 63.0, 2048.0),
        (3, 2, 65.0, 2048.0),
        (3, 4, 8.0, 2048.0),
        (1, 4, 64.0, 1920.0),
        (4, 2, 65.0, 1920.0),
    ])
    .expect("braess network is valid")
}

/// Single OD pair 1 -> 2 with the given demand.
pub fn braess_demand(demand: f64) -> DemandVector {
    DemandVector::single(NodeId(1), NodeId(2), demand).expect("valid demand")
}

/// Linear latency multiplier `f(x) = 1 + x` used to generate the benchmark
/// ground truth.
pub fn braess_true_coefficients() -> LatencyCoefficients {
    LatencyCoefficients::new(vec![1.0, 1.0]).expect("valid coefficients")
}

/// Equilibrium link flows for [`braess_network`] under
/// [`braess_true_coefficients`] and a demand of 4000.
pub fn braess_equilibrium_flows() -> FlowVector {
    FlowVector::new(vec![2080.0, 2080.0, 0.0, 1920.0, 1920.0])
}

/// Two parallel links between two nodes with identical parameters; any
/// demand splits evenly at equilibrium for a strictly increasing latency.
pub fn parallel_network() -> Network {
    Network::build(&[(1, 2, 10.0, 100.0), (1, 2, 10.0, 100.0)]).expect("valid network")
}
