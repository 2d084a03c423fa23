//! Directed communication topologies.
//!
//! Nodes are indexed from zero internally through [`NodeId`]; every textual
//! form (files, CSV, `Display`) uses the one-based labels `1..=n`.
//!
//! An edge is stored as the ordered pair `(receiver, sender)`: the receiver
//! can hear the sender, not the other way around.

use std::collections::VecDeque;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Zero-based node index. Displays one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub const fn new(index: usize) -> Self {
        NodeId(index)
    }

    /// Converts a one-based label. Returns `None` for label 0.
    pub fn from_label(label: usize) -> Option<Self> {
        label.checked_sub(1).map(NodeId)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn label(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.label())
    }
}

/// A simple digraph without self-edges or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    in_neighbors: Vec<Vec<NodeId>>,
    out_neighbors: Vec<Vec<NodeId>>,
}

impl Digraph {
    /// Builds a digraph from one-based `(receiver, sender)` pairs.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut zero_based = Vec::with_capacity(edges.len());
        for &(receiver, sender) in edges {
            for label in [receiver, sender] {
                if label == 0 || label > n {
                    return Err(Error::NodeOutOfRange { node: label, n });
                }
            }
            zero_based.push((NodeId(receiver - 1), NodeId(sender - 1)));
        }
        Self::from_ids(n, zero_based)
    }

    pub(crate) fn from_ids(n: usize, mut edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        for &(receiver, sender) in &edges {
            for id in [receiver, sender] {
                if id.0 >= n {
                    return Err(Error::NodeOutOfRange {
                        node: id.label(),
                        n,
                    });
                }
            }
            if receiver == sender {
                return Err(Error::SelfEdge(receiver.label()));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge {
                receiver: w[0].0.label(),
                sender: w[0].1.label(),
            });
        }

        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        for &(receiver, sender) in &edges {
            in_neighbors[receiver.0].push(sender);
            out_neighbors[sender.0].push(receiver);
        }
        for list in in_neighbors.iter_mut().chain(out_neighbors.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Digraph {
            n,
            edges,
            in_neighbors,
            out_neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n).map(NodeId)
    }

    /// Edges as `(receiver, sender)`, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn has_edge(&self, receiver: NodeId, sender: NodeId) -> bool {
        self.edges.binary_search(&(receiver, sender)).is_ok()
    }

    /// Nodes that can transmit to `node`, ascending.
    pub fn in_neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.in_neighbors[node.0]
    }

    /// Nodes `node` can transmit to, ascending.
    pub fn out_neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.out_neighbors[node.0]
    }

    pub fn in_degree(&self, node: NodeId) -> usize {
        self.in_neighbors[node.0].len()
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.out_neighbors[node.0].len()
    }

    /// True iff every node reaches every other node along directed paths.
    pub fn is_strongly_connected(&self) -> bool {
        let reach = |adjacency: &[Vec<NodeId>]| {
            let mut seen = vec![false; self.n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = queue.pop_front() {
                for v in &adjacency[u] {
                    if !seen[v.0] {
                        seen[v.0] = true;
                        count += 1;
                        queue.push_back(v.0);
                    }
                }
            }
            count == self.n
        };
        reach(&self.out_neighbors) && reach(&self.in_neighbors)
    }

    /// Errors with [`Error::NotStronglyConnected`] unless strongly connected.
    pub fn require_strongly_connected(&self) -> Result<()> {
        if self.is_strongly_connected() {
            Ok(())
        } else {
            Err(Error::NotStronglyConnected)
        }
    }

    /// Directed cycle `v1 -> v2 -> ... -> vn -> v1`.
    pub fn ring_directed(n: usize) -> Result<Self> {
        let edges = (0..n)
            .map(|i| (NodeId((i + 1) % n.max(1)), NodeId(i)))
            .collect();
        Self::from_ids(n, edges)
    }

    /// Cycle with both directions on every edge.
    pub fn ring_undirected(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        let mut edges = Vec::with_capacity(2 * n);
        for i in 0..n {
            let next = NodeId((i + 1) % n);
            edges.push((next, NodeId(i)));
            edges.push((NodeId(i), next));
        }
        edges.sort_unstable();
        edges.dedup();
        Self::from_ids(n, edges)
    }

    /// A random directed Hamiltonian cycle over a shuffled node order, plus
    /// every other ordered pair independently with probability
    /// `extra_edge_prob`. Strongly connected by construction and fully
    /// determined by `(n, extra_edge_prob, seed)`.
    pub fn random_strongly_connected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        if !(0.0..=1.0).contains(&extra_edge_prob) {
            return Err(Error::InvalidEdgeProbability(extra_edge_prob));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut on_cycle = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for i in 0..n {
            let sender = order[i];
            let receiver = order[(i + 1) % n];
            on_cycle[receiver][sender] = true;
            edges.push((NodeId(receiver), NodeId(sender)));
        }
        for (receiver, row) in on_cycle.iter().enumerate() {
            for (sender, &cycle_edge) in row.iter().enumerate() {
                if receiver == sender || cycle_edge {
                    continue;
                }
                if rng.gen_bool(extra_edge_prob) {
                    edges.push((NodeId(receiver), NodeId(sender)));
                }
            }
        }
        Self::from_ids(n, edges)
    }

    /// Parses the plain-text graph format: a header `n m`, then `m` lines of
    /// one-based `receiver sender`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header line `n m`"))?;
        let [n, m] = parse_fields::<2>(line_no, header)?;
        let mut edges = Vec::with_capacity(m);
        for (line_no, line) in lines {
            if edges.len() == m {
                return Err(Error::parse(line_no, format!("more than {m} edge lines")));
            }
            let [receiver, sender] = parse_fields::<2>(line_no, line)?;
            edges.push((receiver, sender));
        }
        if edges.len() != m {
            return Err(Error::parse(
                0,
                format!("header announces {m} edges, found {}", edges.len()),
            ));
        }
        Self::new(n, &edges)
    }

    /// Renders the graph in the format accepted by [`Digraph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for (receiver, sender) in &self.edges {
            out.push_str(&format!("{} {}\n", receiver.label(), sender.label()));
        }
        out
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_fields<const N: usize>(line_no: usize, line: &str) -> Result<[usize; N]> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != N {
        return Err(Error::parse(
            line_no,
            format!("expected {N} fields, found {}", parts.len()),
        ));
    }
    let mut out = [0usize; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part.parse().map_err(|_| {
            Error::parse(line_no, format!("`{part}` is not a non-negative integer"))
        })?;
    }
    Ok(out)
}

/// How out-going edges are ordered for round-robin transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriorityPolicy {
    /// Order 0 goes to the smallest out-neighbor id, and so on.
    ByNodeIndex,
    /// Explicit one-based `(node, neighbor, order)` triples covering every node.
    FromList(Vec<(usize, usize, usize)>),
}

/// Per node, its out-neighbors listed by assigned order: entry `p` of
/// `order(j)` is the neighbor with priority `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityMap {
    orders: Vec<Vec<NodeId>>,
}

impl PriorityMap {
    pub fn assign(graph: &Digraph, policy: &PriorityPolicy) -> Result<Self> {
        match policy {
            PriorityPolicy::ByNodeIndex => Ok(PriorityMap {
                orders: graph
                    .nodes()
                    .map(|j| graph.out_neighbors(j).to_vec())
                    .collect(),
            }),
            PriorityPolicy::FromList(entries) => Self::from_list(graph, entries),
        }
    }

    fn from_list(graph: &Digraph, entries: &[(usize, usize, usize)]) -> Result<Self> {
        let n = graph.node_count();
        let mut slots: Vec<Vec<Option<NodeId>>> = graph
            .nodes()
            .map(|j| vec![None; graph.out_degree(j)])
            .collect();
        for &(node, neighbor, order) in entries {
            let j = NodeId::from_label(node)
                .filter(|j| j.0 < n)
                .ok_or(Error::NodeOutOfRange { node, n })?;
            let l = NodeId::from_label(neighbor)
                .filter(|l| l.0 < n)
                .ok_or(Error::NodeOutOfRange { node: neighbor, n })?;
            let invalid = |reason: String| Error::InvalidPriorities { node, reason };
            if !graph.has_edge(l, j) {
                return Err(invalid(format!("v{neighbor} is not an out-neighbor")));
            }
            let degree = graph.out_degree(j);
            let slot = slots[j.0]
                .get_mut(order)
                .ok_or_else(|| invalid(format!("order {order} outside 0..{degree}")))?;
            if slot.is_some() {
                return Err(invalid(format!("order {order} assigned twice")));
            }
            *slot = Some(l);
        }
        let mut orders = Vec::with_capacity(n);
        for (j, node_slots) in slots.into_iter().enumerate() {
            let mut order = Vec::with_capacity(node_slots.len());
            for (p, slot) in node_slots.into_iter().enumerate() {
                let l = slot.ok_or_else(|| Error::InvalidPriorities {
                    node: j + 1,
                    reason: format!("order {p} is missing"),
                })?;
                if order.contains(&l) {
                    return Err(Error::InvalidPriorities {
                        node: j + 1,
                        reason: format!("{l} listed more than once"),
                    });
                }
                order.push(l);
            }
            orders.push(order);
        }
        Ok(PriorityMap { orders })
    }

    /// Out-neighbors of `node` in priority order.
    pub fn order(&self, node: NodeId) -> &[NodeId] {
        &self.orders[node.0]
    }

    /// The neighbor holding priority `position` at `node`.
    pub fn target(&self, node: NodeId, position: usize) -> NodeId {
        self.orders[node.0][position]
    }

    pub fn node_count(&self) -> usize {
        self.orders.len()
    }

    /// Parses lines of one-based `node neighbor order`.
    pub fn parse(graph: &Digraph, text: &str) -> Result<Self> {
        let entries = content_lines(text)
            .map(|(line_no, line)| parse_fields::<3>(line_no, line).map(|[a, b, c]| (a, b, c)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_list(graph, &entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (j, order) in self.orders.iter().enumerate() {
            for (p, l) in order.iter().enumerate() {
                out.push_str(&format!("{} {} {}\n", j + 1, l.label(), p));
            }
        }
        out
    }
}

/// Exact transmission probabilities. For node `j` the entries cover
/// `N_j^+ ∪ {j}` sorted by target id; the self entry means "keep the mass".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilityAssignment {
    entries: Vec<Vec<(NodeId, Ratio<u64>)>>,
    denominators: Vec<u64>,
}

impl ProbabilityAssignment {
    /// `1 / (1 + D_j^+)` on every out-edge and on the virtual self-edge.
    pub fn uniform(graph: &Digraph) -> Self {
        let entries = graph
            .nodes()
            .map(|j| {
                let share = Ratio::new(1, graph.out_degree(j) as u64 + 1);
                let mut targets: Vec<NodeId> = graph.out_neighbors(j).to_vec();
                targets.push(j);
                targets.sort_unstable();
                targets.into_iter().map(|l| (l, share)).collect()
            })
            .collect();
        Self::with_denominators(entries)
    }

    /// Validates an explicit assignment: every out-neighbor and the node
    /// itself receive a probability strictly inside (0, 1) and the
    /// probabilities of each node sum to exactly one.
    pub fn new(graph: &Digraph, per_node: Vec<Vec<(NodeId, Ratio<u64>)>>) -> Result<Self> {
        if per_node.len() != graph.node_count() {
            return Err(Error::Config(format!(
                "probabilities given for {} nodes, graph has {}",
                per_node.len(),
                graph.node_count()
            )));
        }
        let mut entries = Vec::with_capacity(per_node.len());
        for (j, mut list) in per_node.into_iter().enumerate() {
            let node = NodeId(j);
            let invalid = |reason: String| Error::InvalidProbabilities {
                node: j + 1,
                reason,
            };
            list.sort_unstable_by_key(|(l, _)| *l);
            let mut expected: Vec<NodeId> = graph.out_neighbors(node).to_vec();
            expected.push(node);
            expected.sort_unstable();
            let targets: Vec<NodeId> = list.iter().map(|(l, _)| *l).collect();
            if targets != expected {
                return Err(invalid(
                    "targets must be exactly the out-neighbors plus the node itself".into(),
                ));
            }
            let one = Ratio::from_integer(1u64);
            let zero = Ratio::from_integer(0u64);
            let mut total = zero;
            for (l, b) in &list {
                if *b <= zero || *b >= one {
                    return Err(invalid(format!("b for {l} is {b}, outside (0, 1)")));
                }
                total += *b;
            }
            if total != one {
                return Err(invalid(format!("probabilities sum to {total}")));
            }
            entries.push(list);
        }
        Ok(Self::with_denominators(entries))
    }

    fn with_denominators(entries: Vec<Vec<(NodeId, Ratio<u64>)>>) -> Self {
        let denominators = entries
            .iter()
            .map(|list| list.iter().fold(1u64, |acc, (_, b)| acc.lcm(b.denom())))
            .collect();
        ProbabilityAssignment {
            entries,
            denominators,
        }
    }

    pub fn entries(&self, node: NodeId) -> &[(NodeId, Ratio<u64>)] {
        &self.entries[node.0]
    }

    /// Probability that `node` sends towards `target` (`target == node` is
    /// the self-transmission). Zero for non-neighbors.
    pub fn probability(&self, node: NodeId, target: NodeId) -> Ratio<u64> {
        self.entries[node.0]
            .iter()
            .find(|(l, _)| *l == target)
            .map(|(_, b)| *b)
            .unwrap_or_else(|| Ratio::from_integer(0))
    }

    /// Draws a destination for `node`: one integer uniform on
    /// `0..lcm(denominators)` compared against exact cumulative thresholds.
    pub fn sample<R: Rng + ?Sized>(&self, node: NodeId, rng: &mut R) -> NodeId {
        let denom = self.denominators[node.0];
        let draw = rng.gen_range(0..denom);
        let mut cumulative = 0u64;
        let list = &self.entries[node.0];
        for (l, b) in list {
            cumulative += b.numer() * (denom / b.denom());
            if draw < cumulative {
                return *l;
            }
        }
        list.last().expect("every node has a self entry").0
    }
}

/// Where a run's topology comes from; random sources are re-drawn per seed
/// in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Fixed(Digraph),
    RingDirected(usize),
    RingUndirected(usize),
    Random { n: usize, extra_edge_prob: f64 },
}

impl GraphSource {
    pub fn build(&self, seed: u64) -> Result<Digraph> {
        match self {
            GraphSource::Fixed(g) => Ok(g.clone()),
            GraphSource::RingDirected(n) => Digraph::ring_directed(*n),
            GraphSource::RingUndirected(n) => Digraph::ring_undirected(*n),
            GraphSource::Random { n, extra_edge_prob } => {
                Digraph::random_strongly_connected(*n, *extra_edge_prob, seed)
            }
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, GraphSource::Random { .. })
    }
}
