//! Traffic patterns, routing and relay-load accounting.
//!
//! Flows are routed along BFS shortest paths. Among equal-length next hops
//! the smallest node id wins, so routing is a pure function of the graph and
//! the flow set. Per-flow capacity is the time-sharing bound: a node that
//! transmits or receives for `m` flows gives each of them at most `1/m` of its
//! unit rate, and a flow gets the minimum of that over its path.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::invalid;
use crate::rng::{self, SimRng};
use crate::topology::{
    self, connectivity_radius_with, ClusterAssignment, ConnectivityGraph, Dim, NodeId, Point,
    Regime, Topology,
};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    UnicastPairs,
    MultipointToPoint,
    Multicast,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flow {
    pub id: usize,
    pub source: NodeId,
    pub destinations: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowSet {
    pub kind: FlowKind,
    pub flows: Vec<Flow>,
    pub seed: u64,
}

impl FlowSet {
    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }
}

/// One flow per node; destinations form a uniformly random derangement.
pub fn sample_unicast_pairs(n: usize, seed: u64) -> Result<FlowSet> {
    if n < 2 {
        return Err(invalid("unicast pairing needs n >= 2"));
    }
    let mut rng = rng::stream(seed, rng::tag::PAIRING, 0);
    let perm = random_derangement(n, &mut rng);
    let flows = perm
        .into_iter()
        .enumerate()
        .map(|(source, dest)| Flow {
            id: source,
            source,
            destinations: vec![dest],
        })
        .collect();
    Ok(FlowSet {
        kind: FlowKind::UnicastPairs,
        flows,
        seed,
    })
}

/// Rejection sampling over uniform permutations; every derangement is equally
/// likely. Expected number of shuffles is about e.
pub(crate) fn random_derangement(n: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// Every node other than `sink` sends one flow to `sink`.
pub fn multipoint_to_point(node_count: usize, sink: NodeId) -> Result<FlowSet> {
    if sink >= node_count {
        return Err(invalid("sink id out of range"));
    }
    if node_count < 2 {
        return Err(invalid("multipoint-to-point needs at least one source"));
    }
    let flows = (0..node_count)
        .filter(|&s| s != sink)
        .enumerate()
        .map(|(id, source)| Flow {
            id,
            source,
            destinations: vec![sink],
        })
        .collect();
    Ok(FlowSet {
        kind: FlowKind::MultipointToPoint,
        flows,
        seed: 0,
    })
}

/// Every node multicasts to a common group holding `round(group_fraction * n)`
/// nodes (at least one); a fraction of 1 is broadcast. A node never counts
/// itself as a destination.
pub fn multicast_to_group(n: usize, group_fraction: f64, seed: u64) -> Result<FlowSet> {
    if n < 2 {
        return Err(invalid("multicast needs n >= 2"));
    }
    if !(group_fraction > 0.0 && group_fraction <= 1.0) {
        return Err(invalid("group fraction must lie in (0, 1]"));
    }
    let size = ((group_fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = rng::stream(seed, rng::tag::MULTICAST_GROUP, 0);
    let mut all: Vec<NodeId> = (0..n).collect();
    all.shuffle(&mut rng);
    let mut group = all[..size].to_vec();
    group.sort_unstable();
    let flows = (0..n)
        .filter_map(|source| {
            let destinations: Vec<NodeId> =
                group.iter().copied().filter(|&d| d != source).collect();
            (!destinations.is_empty()).then_some((source, destinations))
        })
        .enumerate()
        .map(|(id, (source, destinations))| Flow {
            id,
            source,
            destinations,
        })
        .collect();
    Ok(FlowSet {
        kind: FlowKind::Multicast,
        flows,
        seed,
    })
}

/// A routed flow: one path per destination, source first, destination last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutedFlow {
    pub flow_id: usize,
    pub branches: Vec<Vec<NodeId>>,
}

impl RoutedFlow {
    /// Path to the first (for unicast, only) destination.
    pub fn path(&self) -> &[NodeId] {
        &self.branches[0]
    }

    pub fn hops(&self) -> usize {
        self.path().len() - 1
    }

    fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.branches.iter().flatten().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutedFlows {
    pub node_count: usize,
    pub routes: Vec<RoutedFlow>,
}

impl RoutedFlows {
    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn hop_counts(&self) -> Vec<usize> {
        self.routes.iter().map(RoutedFlow::hops).collect()
    }

    pub fn mean_hops(&self) -> f64 {
        let total: usize = self.routes.iter().map(RoutedFlow::hops).sum();
        total as f64 / self.routes.len().max(1) as f64
    }

    /// `flow_id,hop_index,node_id`, one row per path node. A multicast flow
    /// writes its branches in order, each restarting at hop index 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "flow_id,hop_index,node_id")?;
        for route in &self.routes {
            for branch in &route.branches {
                for (hop, node) in branch.iter().enumerate() {
                    writeln!(w, "{},{hop},{node}", route.flow_id)?;
                }
            }
        }
        Ok(())
    }
}

/// Shortest path from each request's source to its destination. Requests are
/// grouped by destination so each distinct destination costs one BFS, cut off
/// as soon as every source in its group is labelled.
fn shortest_paths(graph: &ConnectivityGraph, requests: &[(NodeId, NodeId)]) -> Vec<Option<Vec<NodeId>>> {
    let mut groups: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, &(_, dst)) in requests.iter().enumerate() {
        groups.entry(dst).or_default().push(i);
    }
    let groups: Vec<(NodeId, Vec<usize>)> = groups.into_iter().collect();
    let solved = par::map(&groups, |(dst, members)| {
        let sources: Vec<NodeId> = members.iter().map(|&i| requests[i].0).collect();
        let dist = bfs_until(graph, *dst, &sources);
        members
            .iter()
            .map(|&i| (i, walk_down(graph, &dist, requests[i].0)))
            .collect::<Vec<_>>()
    });
    let mut out = vec![None; requests.len()];
    for (i, path) in solved.into_iter().flatten() {
        out[i] = path;
    }
    out
}

/// BFS from `root` that stops once all `targets` have a label.
fn bfs_until(graph: &ConnectivityGraph, root: NodeId, targets: &[NodeId]) -> Vec<u32> {
    let mut dist = vec![u32::MAX; graph.node_count()];
    let mut pending = vec![false; graph.node_count()];
    let mut remaining = 0usize;
    for &t in targets {
        if !pending[t] && t != root {
            pending[t] = true;
            remaining += 1;
        }
    }
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    while remaining > 0 {
        let Some(u) = queue.pop_front() else { break };
        let d = dist[u] + 1;
        for &v in graph.neighbors(u) {
            if dist[v] == u32::MAX {
                dist[v] = d;
                queue.push_back(v);
                if pending[v] {
                    pending[v] = false;
                    remaining -= 1;
                }
            }
        }
    }
    dist
}

/// Greedy descent along the distance field: always step to the smallest-id
/// neighbor one hop closer to the root.
fn walk_down(graph: &ConnectivityGraph, dist: &[u32], source: NodeId) -> Option<Vec<NodeId>> {
    if dist[source] == u32::MAX {
        return None;
    }
    let mut path = Vec::with_capacity(dist[source] as usize + 1);
    let mut u = source;
    path.push(u);
    while dist[u] > 0 {
        let want = dist[u] - 1;
        u = *graph.neighbors(u).iter().find(|&&v| dist[v] == want)?;
        path.push(u);
    }
    Some(path)
}

/// Route every flow (each destination of a multicast flow separately) along
/// BFS shortest paths with smallest-id tie-breaking.
pub fn route_all(graph: &ConnectivityGraph, flows: &FlowSet) -> Result<RoutedFlows> {
    let mut requests = Vec::new();
    for flow in &flows.flows {
        check_endpoints(graph.node_count(), flow)?;
        for &d in &flow.destinations {
            requests.push((flow.source, d));
        }
    }
    let mut paths = shortest_paths(graph, &requests).into_iter();
    let mut routes = Vec::with_capacity(flows.len());
    for flow in &flows.flows {
        let mut branches = Vec::with_capacity(flow.destinations.len());
        for &d in &flow.destinations {
            match paths.next().flatten() {
                Some(p) => branches.push(p),
                None => {
                    return Err(Error::Unreachable {
                        flow_id: flow.id,
                        source_node: flow.source,
                        destination: d,
                    })
                }
            }
        }
        routes.push(RoutedFlow {
            flow_id: flow.id,
            branches,
        });
    }
    Ok(RoutedFlows {
        node_count: graph.node_count(),
        routes,
    })
}

fn check_endpoints(node_count: usize, flow: &Flow) -> Result<()> {
    if flow.destinations.is_empty() {
        return Err(invalid(format!("flow {} has no destination", flow.id)));
    }
    if flow.source >= node_count || flow.destinations.iter().any(|&d| d >= node_count) {
        return Err(invalid(format!("flow {} has an endpoint outside the graph", flow.id)));
    }
    Ok(())
}

/// Per-node relay load.
///
/// `tx[v]` counts flows for which `v` transmits (as source or relay), `rx[v]`
/// flows for which it receives (as relay or destination). In a multicast tree
/// a node transmits once per flow however many branches it serves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadMap {
    pub tx: Vec<u32>,
    pub rx: Vec<u32>,
}

impl LoadMap {
    /// The node's bottleneck count: `max(tx, rx)`.
    pub fn load(&self, v: NodeId) -> u32 {
        self.tx[v].max(self.rx[v])
    }

    pub fn total_tx(&self) -> u64 {
        self.tx.iter().map(|&x| u64::from(x)).sum()
    }

    pub fn total_rx(&self) -> u64 {
        self.rx.iter().map(|&x| u64::from(x)).sum()
    }

    pub fn max_tx_over(&self, nodes: &[NodeId]) -> u32 {
        nodes.iter().map(|&v| self.tx[v]).max().unwrap_or(0)
    }

    /// `node_id,tx_load,rx_load`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node_id,tx_load,rx_load")?;
        for (v, (t, r)) in self.tx.iter().zip(&self.rx).enumerate() {
            writeln!(w, "{v},{t},{r}")?;
        }
        Ok(())
    }
}

pub fn compute_loads(routed: &RoutedFlows) -> LoadMap {
    let n = routed.node_count;
    let mut tx = vec![0u32; n];
    let mut rx = vec![0u32; n];
    let mut senders = Vec::new();
    let mut receivers = Vec::new();
    for route in &routed.routes {
        if let [path] = route.branches.as_slice() {
            for &v in &path[..path.len() - 1] {
                tx[v] += 1;
            }
            for &v in &path[1..] {
                rx[v] += 1;
            }
            continue;
        }
        senders.clear();
        receivers.clear();
        for branch in &route.branches {
            senders.extend_from_slice(&branch[..branch.len() - 1]);
            receivers.extend_from_slice(&branch[1..]);
        }
        senders.sort_unstable();
        senders.dedup();
        receivers.sort_unstable();
        receivers.dedup();
        for &v in &senders {
            tx[v] += 1;
        }
        for &v in &receivers {
            rx[v] += 1;
        }
    }
    LoadMap { tx, rx }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerFlowCapacity {
    /// Indexed like `RoutedFlows::routes`.
    pub capacity: Vec<f64>,
}

/// `1 / max over path nodes of max(tx, rx)` for every flow.
pub fn per_flow_capacity(loads: &LoadMap, routed: &RoutedFlows) -> PerFlowCapacity {
    let capacity = routed
        .routes
        .iter()
        .map(|route| {
            let worst = route.nodes().map(|v| loads.load(v)).max().unwrap_or(1).max(1);
            1.0 / f64::from(worst)
        })
        .collect();
    PerFlowCapacity { capacity }
}

/// Leader-to-leader reach in units of the mean cell side. A leader links to
/// the leaders of adjacent cells, so inter-cluster paths take on the order of
/// `sqrt(K)` backbone hops.
pub const LEADER_REACH_CELLS: f64 = 1.5;

/// Connectivity graph restricted to cluster leaders (non-leaders have no
/// edges). The radius starts at `comm_radius` when every node leads its own
/// cluster, otherwise at the larger of `comm_radius` and the neighbour-cell
/// reach, and grows by 25% until the leaders are connected.
pub fn leader_backbone(
    topology: &Topology,
    assignment: &ClusterAssignment,
    comm_radius: f64,
) -> Result<ConnectivityGraph> {
    if !(comm_radius > 0.0) {
        return Err(invalid("comm_radius must be positive"));
    }
    let n = topology.len();
    let leaders = assignment.leaders();
    let k = leaders.len();
    let mut radius = if k == n {
        comm_radius
    } else {
        let dim = topology.dim();
        let cell = topology.region_radius()
            * match dim {
                Dim::Two => (dim.unit_ball_volume() / k as f64).sqrt(),
                Dim::Three => (dim.unit_ball_volume() / k as f64).cbrt(),
            };
        comm_radius.max(LEADER_REACH_CELLS * cell)
    };
    let positions: Vec<Point> = leaders.iter().map(|&l| *topology.position(l)).collect();
    for _ in 0..64 {
        let sub = topology::unit_disk_graph(&positions, radius);
        if sub.is_connected() {
            let edges: Vec<(NodeId, NodeId)> =
                sub.edges().map(|(a, b)| (leaders[a], leaders[b])).collect();
            return ConnectivityGraph::from_edges(n, &edges, radius);
        }
        radius *= 1.25;
    }
    Err(Error::DisconnectedBackbone)
}

/// Route through cluster leaders.
///
/// Members talk to their own leader directly. An intra-cluster flow goes
/// source, leader, destination. An inter-cluster flow goes source, own leader,
/// shortest leader-to-leader path on `leader_graph`, destination's leader,
/// destination. Repeated endpoints (a leader that is itself the source or the
/// destination) appear once.
pub fn route_via_leaders(
    assignment: &ClusterAssignment,
    leader_graph: &ConnectivityGraph,
    flows: &FlowSet,
) -> Result<RoutedFlows> {
    let n = leader_graph.node_count();
    let mut requests = Vec::new();
    for flow in &flows.flows {
        check_endpoints(n, flow)?;
        for &d in &flow.destinations {
            let (ls, ld) = (assignment.leader_of(flow.source), assignment.leader_of(d));
            if ls != ld {
                requests.push((ls, ld));
            }
        }
    }
    let mut backbone = shortest_paths(leader_graph, &requests).into_iter();
    let mut routes = Vec::with_capacity(flows.len());
    for flow in &flows.flows {
        let s = flow.source;
        let ls = assignment.leader_of(s);
        let mut branches = Vec::with_capacity(flow.destinations.len());
        for &d in &flow.destinations {
            let ld = assignment.leader_of(d);
            let middle = if ls == ld {
                vec![ls]
            } else {
                backbone.next().flatten().ok_or(Error::DisconnectedBackbone)?
            };
            let mut path = Vec::with_capacity(middle.len() + 2);
            if s != ls {
                path.push(s);
            }
            path.extend_from_slice(&middle);
            if d != ld {
                path.push(d);
            }
            branches.push(path);
        }
        routes.push(RoutedFlow {
            flow_id: flow.id,
            branches,
        });
    }
    Ok(RoutedFlows {
        node_count: n,
        routes,
    })
}

/// Two half-disk populations joined only through a set of bridge nodes.
#[derive(Clone, Debug)]
pub struct Dumbbell {
    pub topology: Topology,
    pub graph: ConnectivityGraph,
    pub flows: FlowSet,
    /// Bridge node ids (`n..n + B`).
    pub bridges: Vec<NodeId>,
    /// Per flow: whether its endpoints sit on opposite sides.
    pub crossing: Vec<bool>,
    /// Fraction of flows that cross.
    pub fraction: f64,
}

impl Dumbbell {
    /// `B / (f n)`: the share each crossing flow gets when the crossing flows
    /// split evenly over the bridges.
    pub fn crossing_bound(&self) -> f64 {
        self.bridges.len() as f64 / (self.fraction * self.flows.len() as f64)
    }

    pub fn crossing_flows(&self) -> usize {
        self.crossing.iter().filter(|&&c| c).count()
    }
}

const DUMBBELL_ATTEMPTS: u64 = 500;
const BRIDGE_SPAN: f64 = 1.6;

/// Construct a dumbbell of `n` endpoint nodes (`n/2` per side, ids `0..n`)
/// and `bridges` bridge nodes (ids `n..n+B`) on the gap between the halves.
///
/// Each half is a unit half-disk with the same node density as `n` nodes in a
/// unit disk, connected at the standard connectivity radius. The halves are
/// more than one radius apart, so only bridges connect them. Exactly
/// `round(f n)` flows cross, split across the sides and spread over the bridges
/// as evenly as possible: every crossing flow is given a destination whose
/// shortest paths all pass through its assigned bridge. Remaining flows pick a
/// random destination on their own side. Sampling is retried until every
/// bridge touches both halves and each half is connected.
pub fn build_dumbbell(n: usize, bridges: usize, fraction: f64, seed: u64) -> Result<Dumbbell> {
    if bridges == 0 {
        return Err(invalid("dumbbell needs at least one bridge"));
    }
    if bridges > n {
        return Err(Error::InfeasibleGeometry(format!(
            "{bridges} bridges for {n} nodes"
        )));
    }
    if n < 4 || !n.is_multiple_of(2) {
        return Err(invalid("dumbbell needs an even n >= 4"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid("crossing fraction must lie in (0, 1]"));
    }
    let half = n / 2;
    let radius = connectivity_radius_with(n, Dim::Two, 1.0, topology::CONNECTIVITY_CONSTANT_2D)?;
    let gap = 0.55 * radius;
    if bridges > 1 && BRIDGE_SPAN / bridges as f64 <= radius {
        return Err(Error::InfeasibleGeometry(format!(
            "{bridges} bridges cannot be spaced more than one radius ({radius:.3}) apart"
        )));
    }
    let bridge_pos: Vec<Point> = (0..bridges)
        .map(|j| {
            let y = -BRIDGE_SPAN / 2.0 + BRIDGE_SPAN * (j as f64 + 0.5) / bridges as f64;
            [0.0, y, 0.0]
        })
        .collect();
    let bridge_ids: Vec<NodeId> = (n..n + bridges).collect();
    let outer = 1.0 + gap;

    for attempt in 0..DUMBBELL_ATTEMPTS {
        let mut rng = rng::stream(seed, rng::tag::DUMBBELL, attempt);
        let mut positions = Vec::with_capacity(n + bridges);
        for side in [-1.0, 1.0] {
            for _ in 0..half {
                let p = loop {
                    let x: f64 = rng.gen_range(0.0..=1.0);
                    let y: f64 = rng.gen_range(-1.0..=1.0);
                    if x * x + y * y <= 1.0 {
                        break [side * (x + gap), y, 0.0];
                    }
                };
                positions.push(p);
            }
        }
        positions.extend_from_slice(&bridge_pos);
        let topology = Topology::from_positions(positions, Dim::Two, Regime::Dense, outer, seed)?;
        let graph = topology::build_graph(&topology, radius)?;
        if !dumbbell_well_formed(&graph, half, &bridge_ids) {
            continue;
        }
        let (flows, crossing) = dumbbell_flows(&graph, n, &bridge_ids, fraction, seed)?;
        return Ok(Dumbbell {
            topology,
            graph,
            flows,
            bridges: bridge_ids,
            crossing,
            fraction,
        });
    }
    Err(Error::InfeasibleGeometry(format!(
        "no well-formed dumbbell after {DUMBBELL_ATTEMPTS} attempts"
    )))
}

fn dumbbell_well_formed(graph: &ConnectivityGraph, half: usize, bridges: &[NodeId]) -> bool {
    let touches_both = bridges.iter().all(|&b| {
        let nb = graph.neighbors(b);
        nb.iter().any(|&v| v < half) && nb.iter().any(|&v| v >= half && v < 2 * half)
    });
    if !touches_both {
        return false;
    }
    let label = graph.components_excluding(bridges);
    label[..half].iter().all(|&l| l == label[0])
        && label[half..2 * half].iter().all(|&l| l == label[half])
}

fn dumbbell_flows(
    graph: &ConnectivityGraph,
    n: usize,
    bridges: &[NodeId],
    fraction: f64,
    seed: u64,
) -> Result<(FlowSet, Vec<bool>)> {
    let half = n / 2;
    let b = bridges.len();
    let crossing_total = ((fraction * n as f64).round() as usize).min(n);
    let want = [crossing_total.div_ceil(2), crossing_total / 2];
    let mut quota: Vec<usize> = (0..b)
        .map(|j| crossing_total / b + usize::from(j < crossing_total % b))
        .collect();
    let dist: Vec<Vec<u32>> = bridges.iter().map(|&br| graph.bfs_distances(br)).collect();
    let via = |j: usize, s: NodeId, d: NodeId| u64::from(dist[j][s]) + u64::from(dist[j][d]);

    let mut rng = rng::stream(seed, rng::tag::DUMBBELL_FLOWS, 0);
    let mut dest = vec![usize::MAX; n];
    let mut crossing = vec![false; n];
    let sides = [0..half, half..n];
    for side in 0..2 {
        let mut order: Vec<NodeId> = sides[side].clone().collect();
        order.shuffle(&mut rng);
        let other = sides[1 - side].clone();
        let mut done = 0;
        for &s in &order {
            if done == want[side] {
                break;
            }
            let mut by_quota: Vec<usize> = (0..b).filter(|&j| quota[j] > 0).collect();
            by_quota.sort_by(|&x, &y| quota[y].cmp(&quota[x]).then(x.cmp(&y)));
            for j in by_quota {
                let candidates: Vec<NodeId> = other
                    .clone()
                    .filter(|&d| {
                        let mine = via(j, s, d);
                        (0..b).all(|k| k == j || via(k, s, d) > mine)
                    })
                    .collect();
                if let Some(&d) = candidates.choose(&mut rng) {
                    dest[s] = d;
                    crossing[s] = true;
                    quota[j] -= 1;
                    done += 1;
                    break;
                }
            }
        }
        if done < want[side] {
            return Err(Error::InfeasibleGeometry(format!(
                "could only route {done} of {} crossing flows through distinct bridges",
                want[side]
            )));
        }
    }
    for s in 0..n {
        if !crossing[s] {
            let side = &sides[usize::from(s >= half)];
            let pick = rng.gen_range(0..side.len() - 1);
            let d = side.start + pick;
            dest[s] = if d >= s { d + 1 } else { d };
        }
    }
    let flows = (0..n)
        .map(|s| Flow {
            id: s,
            source: s,
            destinations: vec![dest[s]],
        })
        .collect();
    Ok((
        FlowSet {
            kind: FlowKind::UnicastPairs,
            flows,
            seed,
        },
        crossing,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_graph, form_clusters, place_nodes};

    fn line(n: usize) -> ConnectivityGraph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        ConnectivityGraph::from_edges(n, &edges, 1.0).unwrap()
    }

    fn unicast(pairs: &[(NodeId, NodeId)]) -> FlowSet {
        FlowSet {
            kind: FlowKind::UnicastPairs,
            flows: pairs
                .iter()
                .enumerate()
                .map(|(id, &(s, d))| Flow {
                    id,
                    source: s,
                    destinations: vec![d],
                })
                .collect(),
            seed: 0,
        }
    }

    #[test]
    fn two_node_derangement() {
        let f = sample_unicast_pairs(2, 123).unwrap();
        assert_eq!(f.flows[0].destinations, vec![1]);
        assert_eq!(f.flows[1].destinations, vec![0]);
        assert!(sample_unicast_pairs(1, 0).is_err());
    }

    #[test]
    fn three_node_derangements_have_no_fixed_points() {
        for seed in 0..50 {
            let f = sample_unicast_pairs(3, seed).unwrap();
            let perm: Vec<_> = f.flows.iter().map(|fl| fl.destinations[0]).collect();
            assert!(perm == vec![1, 2, 0] || perm == vec![2, 0, 1], "{perm:?}");
        }
    }

    #[test]
    fn adjacent_pair_is_one_hop() {
        let g = line(3);
        let r = route_all(&g, &unicast(&[(1, 2)])).unwrap();
        assert_eq!(r.routes[0].path(), &[1, 2]);
    }

    #[test]
    fn line_end_to_end_is_four_hops() {
        let g = line(5);
        let r = route_all(&g, &unicast(&[(0, 4), (4, 0)])).unwrap();
        assert_eq!(r.routes[0].path(), &[0, 1, 2, 3, 4]);
        assert_eq!(r.routes[1].hops(), 4);
    }

    #[test]
    fn tie_break_prefers_smallest_id() {
        // Square 0-1-3, 0-2-3: both paths 0->3 have two hops.
        let g = ConnectivityGraph::from_edges(4, &[(0, 2), (2, 3), (0, 1), (1, 3)], 1.0).unwrap();
        let r = route_all(&g, &unicast(&[(0, 3), (3, 0)])).unwrap();
        assert_eq!(r.routes[0].path(), &[0, 1, 3]);
        assert_eq!(r.routes[1].path(), &[3, 1, 0]);
    }

    #[test]
    fn unreachable_names_the_flow() {
        let g = ConnectivityGraph::from_edges(4, &[(0, 1), (2, 3)], 1.0).unwrap();
        let err = route_all(&g, &unicast(&[(0, 1), (1, 3)])).unwrap_err();
        match err {
            Error::Unreachable {
                flow_id,
                source_node,
                destination,
            } => assert_eq!((flow_id, source_node, destination), (1, 1, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_hop_loads() {
        let g = line(4);
        let r = route_all(&g, &unicast(&[(1, 2)])).unwrap();
        let l = compute_loads(&r);
        assert_eq!(l.tx, vec![0, 1, 0, 0]);
        assert_eq!(l.rx, vec![0, 0, 1, 0]);
        let c = per_flow_capacity(&l, &r);
        assert_eq!(c.capacity, vec![1.0]);
    }

    #[test]
    fn shared_relay_carries_both() {
        // Star centred at 0.
        let g = ConnectivityGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], 1.0).unwrap();
        let r = route_all(&g, &unicast(&[(1, 2), (3, 4)])).unwrap();
        let l = compute_loads(&r);
        assert_eq!(l.tx[0], 2);
        assert_eq!(l.rx[0], 2);
        assert_eq!(per_flow_capacity(&l, &r).capacity, vec![0.5, 0.5]);
    }

    #[test]
    fn sink_shares_reception_evenly() {
        let n = 12;
        let t = place_nodes(n, Dim::Two, Regime::Dense, 4).unwrap();
        let g = build_graph(&t, 3.0).unwrap();
        let flows = multipoint_to_point(n, 0).unwrap();
        assert_eq!(flows.len(), n - 1);
        let r = route_all(&g, &flows).unwrap();
        let l = compute_loads(&r);
        assert_eq!(l.rx[0], (n - 1) as u32);
        let c = per_flow_capacity(&l, &r);
        assert!(c.capacity.iter().all(|&x| x == 1.0 / (n - 1) as f64));
    }

    #[test]
    fn broadcast_tree_counts_each_transmitter_once() {
        // 0 - 1 - {2, 3}: node 1 serves both branches with one transmission.
        let g = ConnectivityGraph::from_edges(4, &[(0, 1), (1, 2), (1, 3)], 1.0).unwrap();
        let flows = FlowSet {
            kind: FlowKind::Multicast,
            flows: vec![Flow {
                id: 0,
                source: 0,
                destinations: vec![2, 3],
            }],
            seed: 0,
        };
        let r = route_all(&g, &flows).unwrap();
        let l = compute_loads(&r);
        assert_eq!(l.tx, vec![1, 1, 0, 0]);
        assert_eq!(l.rx, vec![0, 1, 1, 1]);
    }

    #[test]
    fn multicast_group_every_receiver_hears_everyone() {
        let n = 30;
        let flows = multicast_to_group(n, 1.0, 3).unwrap();
        assert_eq!(flows.len(), n);
        let t = place_nodes(n, Dim::Two, Regime::Dense, 3).unwrap();
        let g = build_graph(&t, t.connectivity_radius().unwrap()).unwrap();
        let r = route_all(&g, &flows).unwrap();
        let l = compute_loads(&r);
        assert!(l.rx.iter().all(|&x| x == (n - 1) as u32));
        let c = per_flow_capacity(&l, &r);
        assert!(c.capacity.iter().all(|&x| x <= 1.0 / (n - 1) as f64));
        let partial = multicast_to_group(n, 0.2, 3).unwrap();
        let mut group: Vec<_> = partial.flows.iter().flat_map(|f| f.destinations.clone()).collect();
        group.sort_unstable();
        group.dedup();
        assert_eq!(group.len(), 6);
    }

    #[test]
    fn intra_cluster_flow_stays_home() {
        let t = place_nodes(64, Dim::Two, Regime::Dense, 9).unwrap();
        let a = form_clusters(&t, 0.5).unwrap();
        let r = t.connectivity_radius().unwrap();
        let lg = leader_backbone(&t, &a, r).unwrap();
        let c = &a.clusters()[0];
        let others: Vec<_> = c.members.iter().copied().filter(|&m| m != c.leader).collect();
        let flows = unicast(&[(others[0], others[1])]);
        let routed = route_via_leaders(&a, &lg, &flows).unwrap();
        assert_eq!(routed.routes[0].path(), &[others[0], c.leader, others[1]]);
        let foreign: Vec<_> = a.leaders().into_iter().filter(|&l| l != c.leader).collect();
        assert!(routed.routes[0].path().iter().all(|v| !foreign.contains(v)));
    }

    #[test]
    fn leader_routing_at_g0_matches_plain_routing() {
        let t = place_nodes(150, Dim::Two, Regime::Dense, 12).unwrap();
        let r = t.connectivity_radius().unwrap();
        let g = build_graph(&t, r).unwrap();
        let a = form_clusters(&t, 0.0).unwrap();
        let lg = leader_backbone(&t, &a, r).unwrap();
        assert_eq!(lg, g);
        let flows = sample_unicast_pairs(150, 12).unwrap();
        assert_eq!(route_via_leaders(&a, &lg, &flows).unwrap(), route_all(&g, &flows).unwrap());
    }

    #[test]
    fn single_bridge_carries_everything() {
        let d = build_dumbbell(10, 1, 1.0, 5).unwrap();
        assert_eq!(d.crossing_flows(), 10);
        let r = route_all(&d.graph, &d.flows).unwrap();
        let l = compute_loads(&r);
        assert_eq!(l.tx[d.bridges[0]], 10);
        let c = per_flow_capacity(&l, &r);
        assert!(c.capacity.iter().all(|&x| x <= 0.1));
    }

    #[test]
    fn two_bridges_split_evenly() {
        let d = build_dumbbell(100, 2, 0.5, 8).unwrap();
        assert_eq!(d.crossing_flows(), 50);
        let r = route_all(&d.graph, &d.flows).unwrap();
        let l = compute_loads(&r);
        let busiest = l.max_tx_over(&d.bridges);
        assert!(busiest >= 25);
        let c = per_flow_capacity(&l, &r);
        for (i, &cross) in d.crossing.iter().enumerate() {
            if cross {
                assert!(c.capacity[i] <= d.crossing_bound(), "flow {i}: {}", c.capacity[i]);
            }
        }
    }

    #[test]
    fn dumbbell_rejects_bad_input() {
        assert!(build_dumbbell(10, 11, 0.5, 0).is_err());
        assert!(build_dumbbell(11, 1, 0.5, 0).is_err());
        assert!(build_dumbbell(10, 0, 0.5, 0).is_err());
        assert!(build_dumbbell(10, 1, 0.0, 0).is_err());
    }

    #[test]
    fn csv_layouts() {
        let g = line(3);
        let r = route_all(&g, &unicast(&[(0, 2)])).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "flow_id,hop_index,node_id\n0,0,0\n0,1,1\n0,2,2\n"
        );
        let mut buf = Vec::new();
        compute_loads(&r).write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node_id,tx_load,rx_load\n0,1,0\n1,1,1\n2,0,1\n"
        );
    }
}
