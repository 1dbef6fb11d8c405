//! Directed-network substrate: incidence algebra, shortest routes, route
//! enumeration, and all-or-nothing loading.
//!
//! Link ordering is insertion order and is the canonical ordering for every
//! flow vector and matrix in the crate. Node ordering is ascending by node id.

mod parse;

pub use parse::{parse_demand_file, parse_flows_file, parse_network_file, write_flows_file};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network has no links")]
    EmptyNetwork,
    #[error("duplicate link id {0}")]
    DuplicateLink(u32),
    #[error("link {link}: {what} must be strictly positive, got {value}")]
    NonpositiveParameter { link: u32, what: &'static str, value: f64 },
    #[error("link {0} is a self-loop")]
    SelfLoop(u32),
    #[error("graph is disconnected: node {0} is not weakly connected to node {1}")]
    DisconnectedGraph(u32, u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("origin equals destination ({0})")]
    DegenerateOdPair(u32),
    #[error("no path from {origin} to {destination}")]
    NoPath { origin: u32, destination: u32 },
    #[error("negative cost {cost} on link {link}")]
    NegativeCost { link: u32, cost: f64 },
    #[error("negative demand {demand} for OD pair {index}")]
    NegativeDemand { index: usize, demand: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("route for OD pair {od}: {reason}")]
    InvalidRoute { od: usize, reason: String },
    #[error("route enumeration exceeded cap of {0} routes")]
    RouteEnumerationExceeded(usize),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// External node identifier as it appears in data files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// External link identifier; unique within a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct LinkId(pub u32);

impl std::fmt::Display for LinkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed link with free-flow travel time and flow capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    pub free_flow_time: f64,
    pub capacity: f64,
}

/// Immutable directed network with its node-link incidence matrix.
///
/// The incidence matrix has one row per node (ascending id) and one column
/// per link (insertion order); each column holds +1 at the head node and -1
/// at the tail node.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<NodeId>,
    node_pos: BTreeMap<NodeId, usize>,
    links: Vec<Link>,
    /// Outgoing link positions per node, sorted by link id.
    out_links: Vec<Vec<usize>>,
    /// Incoming link positions per node, sorted by link id.
    in_links: Vec<Vec<usize>>,
    incidence: DMatrix<f64>,
    strongly_connected: bool,
}

impl Network {
    /// Builds a network from `(tail, head, free_flow_time, capacity)` tuples,
    /// assigning link ids 1..=n in insertion order.
    pub fn build(links: &[(u32, u32, f64, f64)]) -> Result<Self, NetError> {
        let links = links
            .iter()
            .enumerate()
            .map(|(i, &(tail, head, t0, cap))| Link {
                id: LinkId(i as u32 + 1),
                tail: NodeId(tail),
                head: NodeId(head),
                free_flow_time: t0,
                capacity: cap,
            })
            .collect();
        Self::from_links(links)
    }

    /// Builds a network from fully specified links, validating invariants.
    ///
    /// The graph must be weakly connected. Strong connectivity is recorded
    /// but not required: standard test networks (and any network whose OD
    /// pairs are all reachable) are usable without return links, and
    /// unreachable OD pairs surface as [`NetError::NoPath`] at routing time.
    pub fn from_links(links: Vec<Link>) -> Result<Self, NetError> {
        if links.is_empty() {
            return Err(NetError::EmptyNetwork);
        }
        let mut seen_ids = BTreeMap::new();
        for link in &links {
            if link.tail == link.head {
                return Err(NetError::SelfLoop(link.id.0));
            }
            if link.free_flow_time <= 0.0 || !link.free_flow_time.is_finite() {
                return Err(NetError::NonpositiveParameter {
                    link: link.id.0,
                    what: "free_flow_time",
                    value: link.free_flow_time,
                });
            }
            if link.capacity <= 0.0 || !link.capacity.is_finite() {
                return Err(NetError::NonpositiveParameter {
                    link: link.id.0,
                    what: "capacity",
                    value: link.capacity,
                });
            }
            if seen_ids.insert(link.id, ()).is_some() {
                return Err(NetError::DuplicateLink(link.id.0));
            }
        }

        let mut node_set: Vec<NodeId> = links.iter().flat_map(|l| [l.tail, l.head]).collect();
        node_set.sort();
        node_set.dedup();
        let node_pos: BTreeMap<NodeId, usize> =
            node_set.iter().enumerate().map(|(i, &n)| (n, i)).collect();

        let n_nodes = node_set.len();
        let n_links = links.len();
        let mut out_links = vec![Vec::new(); n_nodes];
        let mut in_links = vec![Vec::new(); n_nodes];
        let mut incidence = DMatrix::zeros(n_nodes, n_links);
        for (pos, link) in links.iter().enumerate() {
            let t = node_pos[&link.tail];
            let h = node_pos[&link.head];
            out_links[t].push(pos);
            in_links[h].push(pos);
            incidence[(t, pos)] = -1.0;
            incidence[(h, pos)] = 1.0;
        }
        for list in out_links.iter_mut().chain(in_links.iter_mut()) {
            list.sort_by_key(|&p| links[p].id);
        }

        let net = Network {
            nodes: node_set,
            node_pos,
            links,
            out_links,
            in_links,
            incidence,
            strongly_connected: false,
        };
        net.check_weak_connectivity()?;
        let strongly_connected = net.check_strong_connectivity();
        Ok(Network { strongly_connected, ..net })
    }

    fn check_weak_connectivity(&self) -> Result<(), NetError> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &p in self.out_links[u].iter().chain(self.in_links[u].iter()) {
                let link = &self.links[p];
                for v in [self.node_pos[&link.tail], self.node_pos[&link.head]] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(v) => Err(NetError::DisconnectedGraph(self.nodes[v].0, self.nodes[0].0)),
            None => Ok(()),
        }
    }

    fn check_strong_connectivity(&self) -> bool {
        let n = self.nodes.len();
        let reach = |forward: bool| -> usize {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = stack.pop() {
                let list = if forward { &self.out_links[u] } else { &self.in_links[u] };
                for &p in list {
                    let link = &self.links[p];
                    let v = if forward {
                        self.node_pos[&link.head]
                    } else {
                        self.node_pos[&link.tail]
                    };
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        stack.push(v);
                    }
                }
            }
            count
        };
        reach(true) == n && reach(false) == n
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, pos: usize) -> &Link {
        &self.links[pos]
    }

    /// Position of a node in the canonical (ascending id) node ordering.
    pub fn node_index(&self, node: NodeId) -> Result<usize, NetError> {
        self.node_pos.get(&node).copied().ok_or(NetError::UnknownNode(node.0))
    }

    /// Position of a link in the canonical (insertion) link ordering.
    pub fn link_position(&self, id: LinkId) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    /// Node-link incidence matrix over {0, 1, -1}.
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected
    }

    pub fn free_flow_times(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.free_flow_time).collect()
    }

    fn validate_costs(&self, costs: &[f64]) -> Result<(), NetError> {
        if costs.len() != self.links.len() {
            return Err(NetError::DimensionMismatch(format!(
                "{} link costs for {} links",
                costs.len(),
                self.links.len()
            )));
        }
        for (pos, &c) in costs.iter().enumerate() {
            if c < 0.0 || !c.is_finite() {
                return Err(NetError::NegativeCost { link: self.links[pos].id.0, cost: c });
            }
        }
        Ok(())
    }
}

/// An origin-destination pair together with its position in the OD set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
    pub index: usize,
}

impl OdPair {
    pub fn new(origin: NodeId, destination: NodeId, index: usize) -> Result<Self, NetError> {
        if origin == destination {
            return Err(NetError::DegenerateOdPair(origin.0));
        }
        Ok(OdPair { origin, destination, index })
    }
}

/// Nonnegative flow demand per OD pair, aligned with the OD set ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandVector {
    pairs: Vec<OdPair>,
    values: Vec<f64>,
}

impl DemandVector {
    pub fn new(pairs: Vec<OdPair>, values: Vec<f64>) -> Result<Self, NetError> {
        if pairs.len() != values.len() {
            return Err(NetError::DimensionMismatch(format!(
                "{} OD pairs but {} demand values",
                pairs.len(),
                values.len()
            )));
        }
        for (i, &d) in values.iter().enumerate() {
            if d < 0.0 || !d.is_finite() {
                return Err(NetError::NegativeDemand { index: i, demand: d });
            }
        }
        Ok(DemandVector { pairs, values })
    }

    /// Single OD pair helper.
    pub fn single(origin: NodeId, destination: NodeId, demand: f64) -> Result<Self, NetError> {
        Self::new(vec![OdPair::new(origin, destination, 0)?], vec![demand])
    }

    pub fn pairs(&self) -> &[OdPair] {
        &self.pairs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Returns a copy with the demand values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, NetError> {
        Self::new(self.pairs.clone(), values)
    }

    /// Node-expanded demand vector for pair `index`: -d at the origin, +d at
    /// the destination, zero elsewhere.
    pub fn node_vector(&self, net: &Network, index: usize) -> Result<Vec<f64>, NetError> {
        let pair = &self.pairs[index];
        let mut v = vec![0.0; net.num_nodes()];
        v[net.node_index(pair.origin)?] = -self.values[index];
        v[net.node_index(pair.destination)?] = self.values[index];
        Ok(v)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// A simple directed route for one OD pair, stored as link positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub od_index: usize,
    link_positions: Vec<usize>,
}

impl Route {
    /// Validates that the link sequence forms a simple origin-to-destination path.
    pub fn new(
        net: &Network,
        od: &OdPair,
        link_positions: Vec<usize>,
    ) -> Result<Self, NetError> {
        if link_positions.is_empty() {
            return Err(NetError::InvalidRoute { od: od.index, reason: "empty link sequence".into() });
        }
        let first = net.link(link_positions[0]);
        if first.tail != od.origin {
            return Err(NetError::InvalidRoute {
                od: od.index,
                reason: format!("first link {} does not leave the origin", first.id),
            });
        }
        let last = net.link(*link_positions.last().unwrap());
        if last.head != od.destination {
            return Err(NetError::InvalidRoute {
                od: od.index,
                reason: format!("last link {} does not enter the destination", last.id),
            });
        }
        let mut visited = vec![od.origin];
        for w in link_positions.windows(2) {
            let (a, b) = (net.link(w[0]), net.link(w[1]));
            if a.head != b.tail {
                return Err(NetError::InvalidRoute {
                    od: od.index,
                    reason: format!("links {} and {} do not share a node", a.id, b.id),
                });
            }
        }
        for &p in &link_positions {
            let head = net.link(p).head;
            if visited.contains(&head) {
                return Err(NetError::InvalidRoute {
                    od: od.index,
                    reason: format!("node {head} repeats; route must be a simple path"),
                });
            }
            visited.push(head);
        }
        Ok(Route { od_index: od.index, link_positions })
    }

    pub fn link_positions(&self) -> &[usize] {
        &self.link_positions
    }

    pub fn link_ids(&self, net: &Network) -> Vec<LinkId> {
        self.link_positions.iter().map(|&p| net.link(p).id).collect()
    }

    /// 1 if the route uses the link at `pos`, else 0.
    pub fn indicator(&self, pos: usize) -> f64 {
        if self.link_positions.contains(&pos) {
            1.0
        } else {
            0.0
        }
    }

    pub fn cost(&self, costs: &[f64]) -> f64 {
        self.link_positions.iter().map(|&p| costs[p]).sum()
    }
}

/// Per-link flow aligned with the canonical link ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVector(Vec<f64>);

impl FlowVector {
    pub fn new(values: Vec<f64>) -> Self {
        FlowVector(values)
    }

    pub fn zeros(n: usize) -> Self {
        FlowVector(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, pos: usize) -> f64 {
        self.0[pos]
    }

    pub fn set(&mut self, pos: usize, v: f64) {
        self.0[pos] = v;
    }

    pub fn add_assign_scaled(&mut self, other: &FlowVector, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += scale * b;
        }
    }

    /// Convex combination `(1 - alpha) * self + alpha * other`.
    pub fn blend(&self, other: &FlowVector, alpha: f64) -> FlowVector {
        FlowVector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                .collect(),
        )
    }

    pub fn dot(&self, costs: &[f64]) -> f64 {
        self.0.iter().zip(costs.iter()).map(|(x, c)| x * c).sum()
    }
}

impl std::ops::Index<usize> for FlowVector {
    type Output = f64;
    fn index(&self, pos: usize) -> &f64 {
        &self.0[pos]
    }
}

/// Shortest-path state from one Dijkstra sweep.
struct DijkstraResult {
    dist: Vec<f64>,
}

fn dijkstra(net: &Network, costs: &[f64], source: usize, forward: bool) -> DijkstraResult {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }

    let n = net.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse(Entry(0.0, source)));
    while let Some(Reverse(Entry(d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        let list = if forward { &net.out_links[u] } else { &net.in_links[u] };
        for &p in list {
            let link = &net.links[p];
            let v = if forward {
                net.node_pos[&link.head]
            } else {
                net.node_pos[&link.tail]
            };
            let nd = d + costs[p];
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse(Entry(nd, v)));
            }
        }
    }
    DijkstraResult { dist }
}

/// Relative tolerance for deciding that a link lies on a shortest path. Ties
/// at this resolution are broken lexicographically by link-id sequence.
const SHORTEST_PATH_TIE_TOL: f64 = 1e-12;

/// Returns the minimum-cost route for `od`, breaking ties by the
/// lexicographically smallest link-id sequence.
pub fn shortest_route(net: &Network, costs: &[f64], od: &OdPair) -> Result<Route, NetError> {
    net.validate_costs(costs)?;
    let s = net.node_index(od.origin)?;
    let t = net.node_index(od.destination)?;
    let fwd = dijkstra(net, costs, s, true);
    if !fwd.dist[t].is_finite() {
        return Err(NetError::NoPath { origin: od.origin.0, destination: od.destination.0 });
    }
    let bwd = dijkstra(net, costs, t, false);
    let total = fwd.dist[t];
    let tol = SHORTEST_PATH_TIE_TOL * (1.0 + total.abs());

    // Depth-first walk over links that lie on some shortest path, taking
    // smallest link ids first; backtracking only triggers on degenerate
    // zero-cost cycles where the greedy choice dead-ends.
    let mut path: Vec<usize> = Vec::new();
    let mut visited = vec![false; net.num_nodes()];
    fn walk(
        net: &Network,
        costs: &[f64],
        fwd: &[f64],
        bwd: &[f64],
        total: f64,
        tol: f64,
        u: usize,
        t: usize,
        visited: &mut [bool],
        path: &mut Vec<usize>,
    ) -> bool {
        if u == t {
            return true;
        }
        visited[u] = true;
        for &p in &net.out_links[u] {
            let link = &net.links[p];
            let v = net.node_pos[&link.head];
            if visited[v] {
                continue;
            }
            if (fwd[u] + costs[p] + bwd[v] - total).abs() <= tol {
                path.push(p);
                if walk(net, costs, fwd, bwd, total, tol, v, t, visited, path) {
                    visited[u] = false;
                    return true;
                }
                path.pop();
            }
        }
        visited[u] = false;
        false
    }
    let found = walk(net, costs, &fwd.dist, &bwd.dist, total, tol, s, t, &mut visited, &mut path);
    debug_assert!(found, "walk must succeed when the destination is reachable");
    if !found {
        return Err(NetError::NoPath { origin: od.origin.0, destination: od.destination.0 });
    }
    Route::new(net, od, path)
}

/// Loads each OD pair's full demand onto its current shortest route.
/// Returns the total flow and the per-OD flow components.
pub fn all_or_nothing_per_od(
    net: &Network,
    costs: &[f64],
    demands: &DemandVector,
) -> Result<(FlowVector, Vec<FlowVector>), NetError> {
    let mut total = FlowVector::zeros(net.num_links());
    let mut per_od = Vec::with_capacity(demands.len());
    for (i, od) in demands.pairs().iter().enumerate() {
        let mut flow = FlowVector::zeros(net.num_links());
        let d = demands.values()[i];
        if d > 0.0 {
            let route = shortest_route(net, costs, od)?;
            for &p in route.link_positions() {
                flow.set(p, flow.get(p) + d);
            }
        }
        total.add_assign_scaled(&flow, 1.0);
        per_od.push(flow);
    }
    Ok((total, per_od))
}

/// All-or-nothing assignment: total flow only.
pub fn all_or_nothing(
    net: &Network,
    costs: &[f64],
    demands: &DemandVector,
) -> Result<FlowVector, NetError> {
    all_or_nothing_per_od(net, costs, demands).map(|(total, _)| total)
}

/// Enumerates simple routes for `od`, ordered by ascending free-flow time
/// (ties by lexicographic link-id sequence), truncated to `max_routes`.
pub fn enumerate_routes(net: &Network, od: &OdPair, max_routes: usize) -> Result<Vec<Route>, NetError> {
    assert!(max_routes >= 1, "max_routes must be at least 1");
    let s = net.node_index(od.origin)?;
    let t = net.node_index(od.destination)?;
    let mut routes = Vec::new();
    let mut visited = vec![false; net.num_nodes()];
    let mut stack: Vec<usize> = Vec::new();
    fn dfs(
        net: &Network,
        u: usize,
        t: usize,
        visited: &mut [bool],
        stack: &mut Vec<usize>,
        routes: &mut Vec<Vec<usize>>,
    ) {
        if u == t {
            routes.push(stack.clone());
            return;
        }
        visited[u] = true;
        for &p in &net.out_links[u] {
            let v = net.node_pos[&net.links[p].head];
            if !visited[v] {
                stack.push(p);
                dfs(net, v, t, visited, stack, routes);
                stack.pop();
            }
        }
        visited[u] = false;
    }
    if s == t {
        return Err(NetError::DegenerateOdPair(od.origin.0));
    }
    let mut raw = Vec::new();
    dfs(net, s, t, &mut visited, &mut stack, &mut raw);
    let t0: Vec<f64> = net.free_flow_times();
    raw.sort_by(|a, b| {
        let ca: f64 = a.iter().map(|&p| t0[p]).sum();
        let cb: f64 = b.iter().map(|&p| t0[p]).sum();
        ca.total_cmp(&cb).then_with(|| {
            let ia: Vec<u32> = a.iter().map(|&p| net.links[p].id.0).collect();
            let ib: Vec<u32> = b.iter().map(|&p| net.links[p].id.0).collect();
            ia.cmp(&ib)
        })
    });
    raw.truncate(max_routes);
    for positions in raw {
        routes.push(Route::new(net, od, positions)?);
    }
    Ok(routes)
}

/// Checks flow feasibility: `flow` equals the sum of per-OD components, each
/// component satisfies node conservation for its demand, and all flows are
/// nonnegative, within absolute tolerance `tol`.
pub fn assert_feasible(
    net: &Network,
    demands: &DemandVector,
    flow: &FlowVector,
    per_od: &[FlowVector],
    tol: f64,
) -> Result<bool, NetError> {
    if flow.len() != net.num_links() {
        return Err(NetError::DimensionMismatch(format!(
            "flow has {} entries for {} links",
            flow.len(),
            net.num_links()
        )));
    }
    if per_od.len() != demands.len() {
        return Err(NetError::DimensionMismatch(format!(
            "{} per-OD flows for {} OD pairs",
            per_od.len(),
            demands.len()
        )));
    }
    for component in per_od {
        if component.len() != net.num_links() {
            return Err(NetError::DimensionMismatch(
                "per-OD flow length differs from link count".into(),
            ));
        }
    }

    for a in 0..net.num_links() {
        if flow.get(a) < -tol {
            return Ok(false);
        }
        let sum: f64 = per_od.iter().map(|c| c.get(a)).sum();
        if (sum - flow.get(a)).abs() > tol {
            return Ok(false);
        }
    }
    let incidence = net.incidence();
    for (w, component) in per_od.iter().enumerate() {
        let target = demands.node_vector(net, w)?;
        for v in 0..net.num_nodes() {
            let mut balance = 0.0;
            for a in 0..net.num_links() {
                balance += incidence[(v, a)] * component.get(a);
            }
            if (balance - target[v]).abs() > tol {
                return Ok(false);
            }
        }
        for a in 0..net.num_links() {
            if component.get(a) < -tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
