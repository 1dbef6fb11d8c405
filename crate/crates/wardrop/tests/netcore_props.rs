//! Property tests for the network substrate.

mod common;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use wardrop::netcore::{
    all_or_nothing_per_od, assert_feasible, enumerate_routes, shortest_route, DemandVector,
};

proptest! {
    /// All-or-nothing loads are feasible for any costs and demands.
    #[test]
    fn aon_output_is_feasible(seed in 0u64..500) {
        let mut rng = StdRng::seed_from_u64(seed);
        let net = common::random_ring_network(&mut rng, 6, 4);
        let n_od = rng.gen_range(1..=3);
        let pairs = (0..n_od).map(|i| common::random_od(&mut rng, &net, i)).collect::<Vec<_>>();
        let values = (0..n_od).map(|_| rng.gen_range(0.0..200.0)).collect::<Vec<_>>();
        let demands = DemandVector::new(pairs, values).unwrap();
        let costs: Vec<f64> = (0..net.num_links()).map(|_| rng.gen_range(0.0..10.0)).collect();

        let (total, per_od) = all_or_nothing_per_od(&net, &costs, &demands).unwrap();
        prop_assert!(assert_feasible(&net, &demands, &total, &per_od, 1e-9).unwrap());
    }

    /// The shortest route's cost equals the minimum over full enumeration.
    #[test]
    fn shortest_route_matches_enumeration(seed in 0u64..500) {
        let mut rng = StdRng::seed_from_u64(seed ^ 0xbeef);
        let net = common::random_ring_network(&mut rng, 8, 6);
        let od = common::random_od(&mut rng, &net, 0);
        let costs: Vec<f64> = (0..net.num_links()).map(|_| rng.gen_range(0.1..10.0)).collect();

        let best = shortest_route(&net, &costs, &od).unwrap();
        let all = enumerate_routes(&net, &od, 10_000).unwrap();
        prop_assert!(!all.is_empty());
        let min_cost = all.iter().map(|r| r.cost(&costs)).fold(f64::INFINITY, f64::min);
        let got = best.cost(&costs);
        prop_assert!(
            (got - min_cost).abs() <= 1e-9 * (1.0 + min_cost),
            "shortest {got} vs enumerated minimum {min_cost}"
        );
    }

    /// Unit demand along any enumerated route satisfies node conservation.
    #[test]
    fn route_incidence_identity(seed in 0u64..200) {
        let mut rng = StdRng::seed_from_u64(seed ^ 0xfeed);
        let net = common::random_ring_network(&mut rng, 6, 4);
        let od = common::random_od(&mut rng, &net, 0);
        let demands = DemandVector::new(vec![od], vec![1.0]).unwrap();
        let target = demands.node_vector(&net, 0).unwrap();
        for route in enumerate_routes(&net, &od, 50).unwrap() {
            let mut flow = vec![0.0; net.num_links()];
            for &p in route.link_positions() {
                flow[p] = 1.0;
            }
            let inc = net.incidence();
            for v in 0..net.num_nodes() {
                let balance: f64 = (0..net.num_links()).map(|a| inc[(v, a)] * flow[a]).sum();
                prop_assert!((balance - target[v]).abs() < 1e-12);
            }
        }
    }
}
