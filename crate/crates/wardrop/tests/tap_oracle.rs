//! Equilibrium solver against the brute-force route-simplex oracle, and the
//! potential against quadrature.

mod common;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use wardrop::latency::{f_eval, link_travel_time, potential, LatencyCoefficients};
use wardrop::netcore::{enumerate_routes, DemandVector, FlowVector};
use wardrop::tap::{solve_tap, TapConfig};

/// Seeded generator for small instances with at most three routes per OD
/// pair, rejecting unsuitable topologies.
fn small_instance(
    seed: u64,
) -> Option<(wardrop::netcore::Network, DemandVector, LatencyCoefficients)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let net = common::random_ring_network(&mut rng, 8, 5);
    let n_od = rng.gen_range(1..=2);
    let mut pairs = Vec::new();
    for i in 0..n_od {
        let od = common::random_od(&mut rng, &net, i);
        let routes = enumerate_routes(&net, &od, 4).ok()?;
        if routes.is_empty() || routes.len() > 3 {
            return None;
        }
        pairs.push(od);
    }
    let values = (0..n_od).map(|_| rng.gen_range(10.0..300.0)).collect::<Vec<_>>();
    let demands = DemandVector::new(pairs, values).ok()?;
    let beta = vec![
        1.0,
        rng.gen_range(0.2..1.5),
        rng.gen_range(0.0..0.5),
        rng.gen_range(0.0..0.3),
    ];
    let coeffs = LatencyCoefficients::new(beta).ok()?;
    Some((net, demands, coeffs))
}

#[test]
fn equilibrium_matches_brute_force_on_seeded_networks() {
    let mut tested = 0;
    let mut seed = 0u64;
    while tested < 50 {
        seed += 1;
        let Some((net, demands, coeffs)) = small_instance(seed) else { continue };
        let cfg = TapConfig { gap_tolerance: 1e-9, record_trace: true, ..TapConfig::default() };
        let sol = solve_tap(&net, &coeffs, &demands, &cfg).unwrap();
        assert!(sol.converged, "seed {seed} did not converge");

        // Exact line search keeps the potential nonincreasing.
        for pair in sol.trace.windows(2) {
            assert!(
                pair[1].potential <= pair[0].potential * (1.0 + 1e-12),
                "seed {seed}: potential increased"
            );
        }

        let reference = common::brute_force_equilibrium(&net, &coeffs, &demands, 3);
        let scale = demands.total();
        for a in 0..net.num_links() {
            let err = (sol.flow.get(a) - reference.get(a)).abs();
            assert!(
                err <= 0.005 * scale.max(reference.get(a)),
                "seed {seed} link {a}: solver {} vs oracle {}",
                sol.flow.get(a),
                reference.get(a)
            );
        }
        tested += 1;
    }
}

#[test]
fn potential_matches_adaptive_quadrature() {
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..20 {
        let net = common::random_ring_network(&mut rng, 5, 3);
        let coeffs = LatencyCoefficients::new(vec![
            1.0,
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..0.5),
            rng.gen_range(0.0..0.25),
        ])
        .unwrap();
        let flow =
            FlowVector::new((0..net.num_links()).map(|_| rng.gen_range(0.0..400.0)).collect());
        let exact = potential(&net, &coeffs, &flow).unwrap();
        let mut quad = 0.0;
        for (pos, link) in net.links().iter().enumerate() {
            let t0 = link.free_flow_time;
            let m = link.capacity;
            let c = coeffs.clone();
            let f = move |s: f64| t0 * f_eval(&c, s / m).unwrap();
            quad += common::adaptive_simpson(&f, 0.0, flow.get(pos), 1e-12);
        }
        assert!(
            (exact - quad).abs() <= 1e-8 * (1.0 + exact.abs()),
            "closed form {exact} vs quadrature {quad}"
        );
    }
}

#[test]
fn travel_time_is_potential_gradient_on_random_instances() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..10 {
        let net = common::random_ring_network(&mut rng, 5, 3);
        let coeffs =
            LatencyCoefficients::new(vec![1.0, rng.gen_range(0.1..1.0), rng.gen_range(0.0..0.4)])
                .unwrap();
        let flow =
            FlowVector::new((0..net.num_links()).map(|_| rng.gen_range(1.0..300.0)).collect());
        let times = link_travel_time(&net, &coeffs, &flow).unwrap();
        for a in 0..net.num_links() {
            let h = 1e-4 * (1.0 + flow.get(a));
            let mut up = flow.clone();
            up.set(a, flow.get(a) + h);
            let mut dn = flow.clone();
            dn.set(a, flow.get(a) - h);
            let fd = (potential(&net, &coeffs, &up).unwrap()
                - potential(&net, &coeffs, &dn).unwrap())
                / (2.0 * h);
            assert!(
                (fd - times[a]).abs() <= 1e-6 * times[a],
                "link {a}: {fd} vs {}",
                times[a]
            );
        }
    }
}
