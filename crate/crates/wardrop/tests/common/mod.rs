//! Shared helpers for the integration suites: seeded random networks and
//! independent brute-force oracles. Everything here is deliberately naive;
//! the point is to check the real implementations against unsophisticated
//! arithmetic.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

use wardrop::latency::{potential, LatencyCoefficients};
use wardrop::netcore::{enumerate_routes, DemandVector, FlowVector, Network, NodeId, OdPair, Route};

/// Random strongly connected network: a directed ring over 2..=n nodes plus
/// random chord links, with random positive parameters.
pub fn random_ring_network(rng: &mut StdRng, max_nodes: u32, max_chords: usize) -> Network {
    let n = rng.gen_range(2..=max_nodes);
    let mut links = Vec::new();
    for v in 1..=n {
        let next = if v == n { 1 } else { v + 1 };
        links.push((v, next, rng.gen_range(1.0..20.0), rng.gen_range(50.0..500.0)));
    }
    let chords = rng.gen_range(0..=max_chords);
    for _ in 0..chords {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if a != b {
            links.push((a, b, rng.gen_range(1.0..20.0), rng.gen_range(50.0..500.0)));
        }
    }
    Network::build(&links).expect("ring networks are connected")
}

/// Random OD pair over a network's nodes.
pub fn random_od(rng: &mut StdRng, net: &Network, index: usize) -> OdPair {
    loop {
        let nodes = net.nodes();
        let o = nodes[rng.gen_range(0..nodes.len())];
        let d = nodes[rng.gen_range(0..nodes.len())];
        if o != d {
            return OdPair::new(o, d, index).unwrap();
        }
    }
}

/// Route-flow vector to link-flow vector.
pub fn route_flows_to_links(net: &Network, routes: &[Route], h: &[f64]) -> FlowVector {
    let mut flow = FlowVector::zeros(net.num_links());
    for (route, &volume) in routes.iter().zip(h.iter()) {
        for &p in route.link_positions() {
            flow.set(p, flow.get(p) + volume);
        }
    }
    flow
}

/// Brute-force equilibrium: minimizes the potential over the route-flow
/// simplex product by iteratively refined grid search. Only valid on
/// networks with few routes per OD pair; convexity of the potential makes
/// the zoomed grid reliable.
pub fn brute_force_equilibrium(
    net: &Network,
    coeffs: &LatencyCoefficients,
    demands: &DemandVector,
    max_routes: usize,
) -> FlowVector {
    let mut all_routes: Vec<Route> = Vec::new();
    let mut blocks: Vec<(usize, usize, f64)> = Vec::new(); // (start, len, demand)
    for (w, od) in demands.pairs().iter().enumerate() {
        let routes = enumerate_routes(net, od, max_routes).unwrap();
        assert!(!routes.is_empty(), "OD pair {w} has no route");
        blocks.push((all_routes.len(), routes.len(), demands.values()[w]));
        all_routes.extend(routes);
    }

    // Per-block simplex coordinates: fractions of demand per route.
    let mut center: Vec<Vec<f64>> =
        blocks.iter().map(|&(_, len, _)| vec![1.0 / len as f64; len]).collect();
    let mut radius = 1.0_f64;

    let eval = |fractions: &[Vec<f64>]| -> f64 {
        let mut h = vec![0.0; all_routes.len()];
        for (b, &(start, len, demand)) in blocks.iter().enumerate() {
            for i in 0..len {
                h[start + i] = fractions[b][i] * demand;
            }
        }
        let flow = route_flows_to_links(net, &all_routes, &h);
        potential(net, coeffs, &flow).unwrap()
    };

    const GRID: usize = 7;
    for _level in 0..24 {
        // Refine each block's simplex point in turn against the others.
        for b in 0..blocks.len() {
            let len = blocks[b].1;
            if len == 1 {
                continue;
            }
            let mut best = center.clone();
            let mut best_value = eval(&center);
            // Grid over the first len-1 coordinates around the center.
            let mut idx = vec![0usize; len - 1];
            loop {
                let mut candidate = center[b].clone();
                let mut acc = 0.0;
                let mut ok = true;
                for i in 0..len - 1 {
                    let step = (idx[i] as f64 / (GRID - 1) as f64) * 2.0 - 1.0;
                    let v = (center[b][i] + step * radius).clamp(0.0, 1.0);
                    candidate[i] = v;
                    acc += v;
                    if acc > 1.0 + 1e-12 {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    candidate[len - 1] = (1.0 - acc).max(0.0);
                    let mut trial = center.clone();
                    trial[b] = candidate;
                    let value = eval(&trial);
                    if value < best_value {
                        best_value = value;
                        best = trial;
                    }
                }
                // Advance the odometer.
                let mut carry = 0;
                loop {
                    idx[carry] += 1;
                    if idx[carry] < GRID {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                    if carry == len - 1 {
                        break;
                    }
                }
                if carry == len - 1 && idx.iter().all(|&v| v == 0) {
                    break;
                }
            }
            center = best;
        }
        radius *= 0.45;
    }

    let mut h = vec![0.0; all_routes.len()];
    for (b, &(start, len, demand)) in blocks.iter().enumerate() {
        for i in 0..len {
            h[start + i] = center[b][i] * demand;
        }
    }
    route_flows_to_links(net, &all_routes, &h)
}

/// Adaptive Simpson quadrature, the independent integral oracle.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    recurse(f, a, b, simpson(f, a, b), tol, 40)
}

/// Braess fixture with demand attached, used across the suites.
pub fn braess_setup(demand: f64) -> (Network, DemandVector) {
    (wardrop::fixtures::braess_network(), DemandVector::single(NodeId(1), NodeId(2), demand).unwrap())
}
