//! Line-oriented text formats for networks, demands, and flows.
//!
//! All three formats share the same conventions: `#`-prefixed header or
//! comment lines, blank lines ignored, comma-separated fields. Malformed
//! lines abort parsing with the offending path and 1-based line number.
//!
//! * network file: `link_id, tail, head, free_flow_time, capacity`
//! * demand file: `origin, destination, demand`
//! * flows file: `link_id, flow`

use std::path::Path;

use super::{DemandVector, FlowVector, Link, LinkId, NetError, Network, NodeId, OdPair};

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, NetError> {
    let text = std::fs::read_to_string(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> NetError {
    NetError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn split_fields<'a>(
    path: &Path,
    line_no: usize,
    line: &'a str,
    expected: usize,
) -> Result<Vec<&'a str>, NetError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(parse_err(
            path,
            line_no,
            format!("expected {expected} comma-separated fields, found {}", fields.len()),
        ));
    }
    Ok(fields)
}

fn parse_u32(path: &Path, line: usize, field: &str, what: &str) -> Result<u32, NetError> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{field}`")))
}

fn parse_f64(path: &Path, line: usize, field: &str, what: &str) -> Result<f64, NetError> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{field}`")))
}

/// Parses a network file into a validated [`Network`].
pub fn parse_network_file(path: impl AsRef<Path>) -> Result<Network, NetError> {
    let path = path.as_ref();
    let mut links = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let f = split_fields(path, line_no, &line, 5)?;
        links.push(Link {
            id: LinkId(parse_u32(path, line_no, f[0], "link id")?),
            tail: NodeId(parse_u32(path, line_no, f[1], "tail node")?),
            head: NodeId(parse_u32(path, line_no, f[2], "head node")?),
            free_flow_time: parse_f64(path, line_no, f[3], "free-flow time")?,
            capacity: parse_f64(path, line_no, f[4], "capacity")?,
        });
    }
    Network::from_links(links)
}

/// Parses a demand file; OD ordering follows file order.
pub fn parse_demand_file(path: impl AsRef<Path>, net: &Network) -> Result<DemandVector, NetError> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    let mut values = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let f = split_fields(path, line_no, &line, 3)?;
        let origin = NodeId(parse_u32(path, line_no, f[0], "origin")?);
        let destination = NodeId(parse_u32(path, line_no, f[1], "destination")?);
        let demand = parse_f64(path, line_no, f[2], "demand")?;
        net.node_index(origin)
            .map_err(|_| parse_err(path, line_no, format!("unknown origin node {origin}")))?;
        net.node_index(destination)
            .map_err(|_| parse_err(path, line_no, format!("unknown destination node {destination}")))?;
        if pairs
            .iter()
            .any(|p: &OdPair| p.origin == origin && p.destination == destination)
        {
            return Err(parse_err(path, line_no, format!("duplicate OD pair {origin} -> {destination}")));
        }
        let index = pairs.len();
        pairs.push(
            OdPair::new(origin, destination, index)
                .map_err(|e| parse_err(path, line_no, e.to_string()))?,
        );
        values.push(demand);
    }
    DemandVector::new(pairs, values)
}

/// Parses a flows file aligned against `net`'s link set. Every link of the
/// network must appear exactly once.
pub fn parse_flows_file(path: impl AsRef<Path>, net: &Network) -> Result<FlowVector, NetError> {
    let path = path.as_ref();
    let mut values = vec![f64::NAN; net.num_links()];
    for (line_no, line) in read_lines(path)? {
        let f = split_fields(path, line_no, &line, 2)?;
        let id = LinkId(parse_u32(path, line_no, f[0], "link id")?);
        let flow = parse_f64(path, line_no, f[1], "flow")?;
        let pos = net
            .link_position(id)
            .ok_or_else(|| parse_err(path, line_no, format!("unknown link id {id}")))?;
        if !values[pos].is_nan() {
            return Err(parse_err(path, line_no, format!("duplicate flow entry for link {id}")));
        }
        if flow < 0.0 {
            return Err(parse_err(path, line_no, format!("negative flow {flow} on link {id}")));
        }
        values[pos] = flow;
    }
    if let Some(pos) = values.iter().position(|v| v.is_nan()) {
        return Err(parse_err(
            path,
            0,
            format!("missing flow entry for link {}", net.link(pos).id),
        ));
    }
    Ok(FlowVector::new(values))
}

/// Writes a flows file with optional `#` header lines.
pub fn write_flows_file(
    path: impl AsRef<Path>,
    net: &Network,
    flow: &FlowVector,
    header_lines: &[String],
) -> Result<(), NetError> {
    let path = path.as_ref();
    let mut out = String::new();
    for h in header_lines {
        out.push_str(&format!("# {h}\n"));
    }
    out.push_str("# link_id, flow\n");
    for (pos, link) in net.links().iter().enumerate() {
        out.push_str(&format!("{}, {}\n", link.id, flow.get(pos)));
    }
    std::fs::write(path, out).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })
}
