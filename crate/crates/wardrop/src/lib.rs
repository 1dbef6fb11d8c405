//! Traffic network equilibrium and inverse estimation toolkit.
//!
//! The crate solves three related problems on congested road networks:
//!
//! * the forward traffic assignment problem (user equilibrium) for a network
//!   with polynomial link latency functions ([`tap`]),
//! * the inverse problem of recovering the latency function from observed
//!   equilibrium flows, posed as a quadratic program ([`invvi`]),
//! * the joint estimation of origin-destination demands and latency
//!   coefficients from flow observations, via an iterative feasible-direction
//!   method on the KKT reduction of the bilevel program ([`bilevel`]).
//!
//! Supporting layers: [`netcore`] (graphs, shortest paths, network loading),
//! [`latency`] (the polynomial latency family and its potential), and
//! [`solver`] (a dense primal-dual interior-point method for the convex
//! subproblems).

pub mod bilevel;
pub mod fixtures;
pub mod invvi;
pub mod latency;
pub mod netcore;
pub mod solver;
pub mod tap;

pub use latency::{KernelConfig, LatencyCoefficients};
pub use netcore::{DemandVector, FlowVector, Network, OdPair, Route};
pub use tap::{TapConfig, TapSolution};
