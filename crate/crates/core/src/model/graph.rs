//! Labeled constraining graphs and admissible walks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub label: usize,
}

impl Edge {
    pub fn new(tail: NodeId, head: NodeId, label: usize) -> Self {
        Edge { tail, head, label }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.tail, self.head, self.label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphViolation {
    NoNodes,
    ZeroLabels,
    InvalidNodeId,
    UnknownNode { edge: usize, node: NodeId },
    LabelOutOfRange { edge: usize, label: usize },
    DuplicateEdge(Edge),
    NoIncoming(NodeId),
    NoOutgoing(NodeId),
    UnusedLabel(usize),
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphViolation::NoNodes => write!(f, "graph has no nodes"),
            GraphViolation::ZeroLabels => write!(f, "num_labels must be at least 1"),
            GraphViolation::InvalidNodeId => write!(f, "node ids must be positive integers"),
            GraphViolation::UnknownNode { edge, node } => write!(f, "edge {edge} references unknown node {node}"),
            GraphViolation::LabelOutOfRange { edge, label } => write!(f, "edge {edge} has label {label} outside 1..m"),
            GraphViolation::DuplicateEdge(e) => write!(f, "duplicate edge {e}"),
            GraphViolation::NoIncoming(n) => write!(f, "node {n} lacks incoming edge"),
            GraphViolation::NoOutgoing(n) => write!(f, "node {n} lacks outgoing edge"),
            GraphViolation::UnusedLabel(l) => write!(f, "label {l} appears on no edge"),
        }
    }
}

/// Directed graph with labeled edges. Label `l` selects the subsystem used
/// while traversing the edge.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainingGraph {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    num_labels: usize,
    out: BTreeMap<NodeId, Vec<usize>>,
}

impl ConstrainingGraph {
    /// Stores the graph without judging it; see [`validate_graph`].
    pub fn new(nodes: impl IntoIterator<Item = NodeId>, edges: Vec<Edge>, num_labels: usize) -> Self {
        let nodes: Vec<NodeId> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut out: BTreeMap<NodeId, Vec<usize>> = nodes.iter().map(|&n| (n, Vec::new())).collect();
        for (k, e) in edges.iter().enumerate() {
            out.entry(e.tail).or_default().push(k);
        }
        ConstrainingGraph { nodes, edges, num_labels, out }
    }

    /// Like [`ConstrainingGraph::new`] but rejects graphs with violations.
    pub fn checked(nodes: impl IntoIterator<Item = NodeId>, edges: Vec<Edge>, num_labels: usize) -> Result<Self> {
        let g = Self::new(nodes, edges, num_labels);
        let report = validate_graph(&g);
        if report.is_empty() {
            Ok(g)
        } else {
            let msg: Vec<String> = report.iter().map(|v| v.to_string()).collect();
            Err(Error::Invalid(msg.join("; ")))
        }
    }

    /// Parses edges given as `(tail, head, label)` triples.
    pub fn from_triples(triples: &[(NodeId, NodeId, usize)], num_labels: usize) -> Result<Self> {
        let nodes: BTreeSet<NodeId> = triples.iter().flat_map(|&(t, h, _)| [t, h]).collect();
        let edges = triples.iter().map(|&(t, h, l)| Edge::new(t, h, l)).collect();
        Self::checked(nodes, edges, num_labels)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &Edge {
        &self.edges[k]
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Indices of edges leaving `node`, ascending.
    pub fn out_edges(&self, node: NodeId) -> &[usize] {
        self.out.get(&node).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Distinct (tail, label) pairs occurring on edges.
    pub fn node_label_pairs(&self) -> BTreeSet<(NodeId, usize)> {
        self.edges.iter().map(|e| (e.tail, e.label)).collect()
    }

    /// Node-to-node edge count matrix in the order of [`Self::nodes`].
    pub fn adjacency_counts(&self) -> Vec<Vec<u64>> {
        let pos: BTreeMap<NodeId, usize> = self.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut m = vec![vec![0u64; self.nodes.len()]; self.nodes.len()];
        for e in &self.edges {
            if let (Some(&i), Some(&j)) = (pos.get(&e.tail), pos.get(&e.head)) {
                m[i][j] += 1;
            }
        }
        m
    }

    /// Single-node graph with one self-loop per label.
    pub fn self_loops(num_labels: usize) -> Self {
        let edges = (1..=num_labels).map(|l| Edge::new(1, 1, l)).collect();
        Self::new([1], edges, num_labels)
    }
}

pub fn validate_graph(g: &ConstrainingGraph) -> Vec<GraphViolation> {
    let mut v = Vec::new();
    if g.nodes.is_empty() {
        v.push(GraphViolation::NoNodes);
    }
    if g.num_labels == 0 {
        v.push(GraphViolation::ZeroLabels);
    }
    if g.nodes.contains(&0) {
        v.push(GraphViolation::InvalidNodeId);
    }
    let nodes: BTreeSet<NodeId> = g.nodes.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut has_in = BTreeSet::new();
    let mut has_out = BTreeSet::new();
    let mut labels = BTreeSet::new();
    for (k, e) in g.edges.iter().enumerate() {
        for n in [e.tail, e.head] {
            if !nodes.contains(&n) {
                v.push(GraphViolation::UnknownNode { edge: k, node: n });
            }
        }
        if e.label == 0 || e.label > g.num_labels {
            v.push(GraphViolation::LabelOutOfRange { edge: k, label: e.label });
        }
        if !seen.insert(*e) {
            v.push(GraphViolation::DuplicateEdge(*e));
        }
        has_out.insert(e.tail);
        has_in.insert(e.head);
        labels.insert(e.label);
    }
    for &n in &g.nodes {
        if !has_out.contains(&n) {
            v.push(GraphViolation::NoOutgoing(n));
        }
        if !has_in.contains(&n) {
            v.push(GraphViolation::NoIncoming(n));
        }
    }
    for l in 1..=g.num_labels {
        if !labels.contains(&l) {
            v.push(GraphViolation::UnusedLabel(l));
        }
    }
    v
}

/// Sequence of edge indices with head(e_t) = tail(e_{t+1}).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeWalk(Vec<usize>);

impl EdgeWalk {
    pub fn new(g: &ConstrainingGraph, edges: Vec<usize>) -> Result<Self> {
        for (t, &k) in edges.iter().enumerate() {
            if k >= g.edges.len() {
                return Err(Error::Invalid(format!("edge index {k} out of range")));
            }
            if t > 0 && g.edges[edges[t - 1]].head != g.edges[k].tail {
                return Err(Error::Invalid(format!("walk is not admissible at step {t}")));
            }
        }
        Ok(EdgeWalk(edges))
    }

    pub fn edges(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self, g: &ConstrainingGraph) -> Vec<usize> {
        self.0.iter().map(|&k| g.edges[k].label).collect()
    }
}

pub const DEFAULT_WALK_CAP: usize = 1_000_000;

/// All admissible walks of `length` edges from `start`, in lexicographic
/// edge-index order.
pub fn enumerate_walks(g: &ConstrainingGraph, start: NodeId, length: usize, cap: usize) -> Result<Vec<EdgeWalk>> {
    if length == 0 {
        return Err(Error::Invalid("walk length must be at least 1".into()));
    }
    if !g.nodes.contains(&start) {
        return Err(Error::Invalid(format!("unknown start node {start}")));
    }
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::with_capacity(length);
    fn rec(g: &ConstrainingGraph, node: NodeId, length: usize, cap: usize, stack: &mut Vec<usize>, out: &mut Vec<EdgeWalk>) -> Result<()> {
        if stack.len() == length {
            if out.len() >= cap {
                return Err(Error::WalkBudget(cap));
            }
            out.push(EdgeWalk(stack.clone()));
            return Ok(());
        }
        for &k in g.out_edges(node) {
            stack.push(k);
            rec(g, g.edges[k].head, length, cap, stack, out)?;
            stack.pop();
        }
        Ok(())
    }
    rec(g, start, length, cap, &mut stack, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> ConstrainingGraph {
        ConstrainingGraph::from_triples(&[(1, 1, 1), (1, 2, 2), (2, 1, 1)], 2).unwrap()
    }

    #[test]
    fn example_graph_is_valid() {
        assert!(validate_graph(&example()).is_empty());
        assert!(validate_graph(&ConstrainingGraph::self_loops(1)).is_empty());
    }

    #[test]
    fn degree_violations() {
        let g = ConstrainingGraph::new([1, 2], vec![Edge::new(1, 2, 1)], 1);
        let v = validate_graph(&g);
        assert!(v.contains(&GraphViolation::NoOutgoing(2)));
        assert!(v.contains(&GraphViolation::NoIncoming(1)));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn duplicate_and_label_violations() {
        let g = ConstrainingGraph::new([1], vec![Edge::new(1, 1, 1), Edge::new(1, 1, 1), Edge::new(1, 1, 3)], 3);
        let v = validate_graph(&g);
        assert!(v.contains(&GraphViolation::DuplicateEdge(Edge::new(1, 1, 1))));
        assert!(v.contains(&GraphViolation::UnusedLabel(2)));
    }

    #[test]
    fn walks_of_example() {
        let g = example();
        let w = enumerate_walks(&g, 1, 2, DEFAULT_WALK_CAP).unwrap();
        let got: Vec<Vec<usize>> = w.iter().map(|w| w.edges().to_vec()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![1, 2]]);
        let w2 = enumerate_walks(&g, 2, 1, DEFAULT_WALK_CAP).unwrap();
        assert_eq!(w2.len(), 1);
        assert_eq!(w2[0].edges(), &[2]);
        assert_eq!(enumerate_walks(&ConstrainingGraph::self_loops(1), 1, 7, 10).unwrap().len(), 1);
    }

    #[test]
    fn walk_budget() {
        let g = example();
        assert!(matches!(enumerate_walks(&g, 1, 10, 5), Err(Error::WalkBudget(5))));
    }

    #[test]
    fn walk_admissibility() {
        let g = example();
        assert!(EdgeWalk::new(&g, vec![1, 2, 0]).is_ok());
        assert!(EdgeWalk::new(&g, vec![1, 1]).is_err());
    }
}
