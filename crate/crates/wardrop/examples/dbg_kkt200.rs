use std::sync::Arc;
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wardrop::invvi::{assemble_qp, kkt_residuals, solve_inverse_vi, Snapshot};
use wardrop::latency::KernelConfig;
use wardrop::netcore::{DemandVector, FlowVector, Network, NodeId, OdPair};
use wardrop::solver::SolveOptions;

fn random_ring_network(rng: &mut StdRng, max_nodes: u32, max_chords: usize) -> Network {
    let n = rng.gen_range(2..=max_nodes);
    let mut links = Vec::new();
    for v in 1..=n {
        let next = if v == n { 1 } else { v + 1 };
        links.push((v, next, rng.gen_range(1.0..20.0), rng.gen_range(50.0..500.0)));
    }
    for _ in 0..rng.gen_range(0..=max_chords) {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if a != b {
            links.push((a, b, rng.gen_range(1.0..20.0), rng.gen_range(50.0..500.0)));
        }
    }
    Network::build(&links).unwrap()
}
fn random_od(rng: &mut StdRng, net: &Network, index: usize) -> OdPair {
    loop {
        let nodes = net.nodes();
        let o = nodes[rng.gen_range(0..nodes.len())];
        let d = nodes[rng.gen_range(0..nodes.len())];
        if o != d { return OdPair::new(o, d, index).unwrap(); }
    }
}
fn main() {
    let mut rng = StdRng::seed_from_u64(4242);
    let mut solved = 0;
    let mut bad = 0;
    while solved < 200 {
        let net = Arc::new(random_ring_network(&mut rng, 5, 3));
        let n_od = rng.gen_range(1..=2);
        let pairs: Vec<_> = (0..n_od).map(|i| random_od(&mut rng, &net, i)).collect();
        let values: Vec<f64> = (0..n_od).map(|_| rng.gen_range(5.0..200.0)).collect();
        let Ok(demands) = DemandVector::new(pairs, values) else { continue };
        let flows = FlowVector::new((0..net.num_links()).map(|_| rng.gen_range(0.0..300.0)).collect());
        let Ok(snapshot) = Snapshot::full(0, net.clone(), &flows, demands) else { continue };
        let degree = rng.gen_range(2..=5);
        let cfg = KernelConfig::new(degree, 30.0, 1.0);
        let qp = assemble_qp(&[snapshot], &cfg).unwrap();
        let Ok(sol) = solve_inverse_vi(&qp, &SolveOptions::default()) else { continue };
        let nu = DVector::from_vec(sol.duals_nu.clone());
        let kkt = kkt_residuals(&qp, &sol, &nu).unwrap();
        if kkt.max_residual > 1e-6 || kkt.strong_duality_gap.abs() > 1e-6 * (1.0 + sol.objective_value.abs()) {
            bad += 1;
            println!("instance {solved}: residual {:.3e} (eps {:.1e} beta {:.1e} y {:.1e}) gap {:.3e} obj {:.3e} links {} rows {}",
                kkt.max_residual, kkt.eps_stationarity, kkt.beta_stationarity, kkt.y_stationarity,
                kkt.strong_duality_gap, sol.objective_value, net.num_links(), qp.num_rows());
            if solved == 88 {
                std::env::set_var("WARDROP_IPM_DEBUG", "1");
                let _ = solve_inverse_vi(&qp, &SolveOptions::default());
                std::env::remove_var("WARDROP_IPM_DEBUG");
            }
        }
        solved += 1;
    }
    println!("bad: {bad}/200");
}
