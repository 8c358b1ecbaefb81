//! Directed acyclic dependency structure over the stochastic variables.
//!
//! Nodes are partitioned into the modeled stochastic set (V_x) and the
//! exogenous conditioning set (V_s, the deterministic variables). Edges may
//! point from either partition into V_x, never into V_s. Search moves only
//! rewire V_x→V_x pairs: the conditioning context already contains every
//! deterministic variable, so explicit V_s edges exist solely when the seed
//! elicitation proposes them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ObservationSchema, Stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagNode {
    pub id: String,
    pub stream: Stream,
}

#[derive(Debug, Error, PartialEq)]
pub enum DagError {
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("edge references unknown node {0:?}")]
    UnknownNode(String),
    #[error("edge ({0:?}, {1:?}) points into a conditioning-only node")]
    EdgeIntoConditioning(String, String),
    #[error("self edge on {0:?}")]
    SelfEdge(String),
    #[error("edge set contains a cycle")]
    Cyclic,
    #[error("unparseable dag file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagStructure {
    nodes: Vec<DagNode>,
    edges: BTreeSet<(String, String)>,
}

impl DagStructure {
    pub fn new(
        nodes: Vec<DagNode>,
        edges: BTreeSet<(String, String)>,
    ) -> Result<DagStructure, DagError> {
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(DagError::DuplicateNode(n.id.clone()));
            }
        }
        let dag = DagStructure { nodes, edges };
        for (p, c) in &dag.edges {
            if p == c {
                return Err(DagError::SelfEdge(p.clone()));
            }
            for end in [p, c] {
                if dag.node(end).is_none() {
                    return Err(DagError::UnknownNode(end.clone()));
                }
            }
            if dag.node(c).map(|n| n.stream) != Some(Stream::Stochastic) {
                return Err(DagError::EdgeIntoConditioning(p.clone(), c.clone()));
            }
        }
        if !dag.is_acyclic() {
            return Err(DagError::Cyclic);
        }
        Ok(dag)
    }

    /// Edge-free structure whose node partition mirrors the schema streams.
    pub fn from_schema(schema: &ObservationSchema) -> DagStructure {
        let nodes = schema
            .variables
            .iter()
            .map(|v| DagNode {
                id: v.name.clone(),
                stream: v.stream,
            })
            .collect();
        DagStructure {
            nodes,
            edges: BTreeSet::new(),
        }
    }

    fn node(&self, id: &str) -> Option<&DagNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = &(String, String)> {
        self.edges.iter()
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        self.edges
            .contains(&(parent.to_string(), child.to_string()))
    }

    /// Stochastic (modeled) node ids, in insertion order.
    pub fn vx_nodes(&self) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.stream == Stream::Stochastic)
            .map(|n| n.id.clone())
            .collect()
    }

    /// Conditioning-only node ids.
    pub fn vs_nodes(&self) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.stream == Stream::Deterministic)
            .map(|n| n.id.clone())
            .collect()
    }

    /// All parents of `child`, sorted.
    pub fn parents(&self, child: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .edges
            .iter()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.clone())
            .collect();
        out.sort();
        out
    }

    /// Parents of `child` restricted to stochastic nodes — the same-step
    /// conditioning inputs of its distribution model.
    pub fn vx_parents(&self, child: &str) -> Vec<String> {
        self.parents(child)
            .into_iter()
            .filter(|p| self.node(p).map(|n| n.stream) == Some(Stream::Stochastic))
            .collect()
    }

    /// Map from every stochastic node to its stochastic parents.
    pub fn vx_parent_map(&self) -> BTreeMap<String, Vec<String>> {
        self.vx_nodes()
            .into_iter()
            .map(|n| {
                let ps = self.vx_parents(&n);
                (n, ps)
            })
            .collect()
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order_vx().is_some()
    }

    /// Kahn's algorithm over the stochastic subgraph (conditioning nodes
    /// have no incoming edges, so they cannot participate in cycles).
    /// Deterministic: ready nodes are taken in insertion order.
    pub fn topo_order_vx(&self) -> Option<Vec<String>> {
        let vx = self.vx_nodes();
        let mut indegree: BTreeMap<&str, usize> = vx.iter().map(|n| (n.as_str(), 0)).collect();
        for (p, c) in &self.edges {
            if indegree.contains_key(p.as_str()) {
                if let Some(d) = indegree.get_mut(c.as_str()) {
                    *d += 1;
                }
            }
        }
        let mut queue: VecDeque<&str> = vx
            .iter()
            .map(String::as_str)
            .filter(|n| indegree[n] == 0)
            .collect();
        let mut order = Vec::with_capacity(vx.len());
        while let Some(n) = queue.pop_front() {
            order.push(n.to_string());
            for (p, c) in &self.edges {
                if p == n {
                    if let Some(d) = indegree.get_mut(c.as_str()) {
                        *d -= 1;
                        if *d == 0 {
                            queue.push_back(c.as_str());
                        }
                    }
                }
            }
        }
        (order.len() == vx.len()).then_some(order)
    }

    /// Canonical text key for the edge set, used to memoize whole-graph
    /// prior queries.
    pub fn canonical_key(&self) -> String {
        let parts: Vec<String> = self.edges.iter().map(|(p, c)| format!("{p}->{c}")).collect();
        parts.join(";")
    }

    fn with_edges(&self, edges: BTreeSet<(String, String)>) -> DagStructure {
        DagStructure {
            nodes: self.nodes.clone(),
            edges,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("dag serializes")
    }

    pub fn from_json_str(text: &str) -> Result<DagStructure, DagError> {
        let raw: DagStructure =
            serde_json::from_str(text).map_err(|e| DagError::Parse(e.to_string()))?;
        DagStructure::new(raw.nodes, raw.edges)
    }
}

/// One step of local graph rewiring: uniformly pick among the move types
/// that currently have candidates (add / remove / flip over stochastic
/// pairs), then a uniform candidate. A draw that would create a cycle is
/// redrawn up to ten times before giving up and returning the input
/// unchanged.
pub fn propose_move<R: Rng>(dag: &DagStructure, rng: &mut R) -> DagStructure {
    const MAX_REDRAWS: usize = 10;
    let vx = dag.vx_nodes();
    if vx.len() < 2 {
        return dag.clone();
    }
    let vx_edges: Vec<(String, String)> = dag
        .edges()
        .filter(|(p, _)| vx.contains(p))
        .cloned()
        .collect();
    let absent: Vec<(String, String)> = vx
        .iter()
        .flat_map(|p| vx.iter().map(move |c| (p.clone(), c.clone())))
        .filter(|(p, c)| p != c && !dag.has_edge(p, c))
        .collect();

    for _ in 0..MAX_REDRAWS {
        let mut kinds = Vec::new();
        if !absent.is_empty() {
            kinds.push("add");
        }
        if !vx_edges.is_empty() {
            kinds.push("remove");
            kinds.push("flip");
        }
        if kinds.is_empty() {
            return dag.clone();
        }
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let mut edges: BTreeSet<(String, String)> = dag.edges().cloned().collect();
        match kind {
            "add" => {
                let (p, c) = absent[rng.gen_range(0..absent.len())].clone();
                edges.insert((p, c));
            }
            "remove" => {
                let (p, c) = vx_edges[rng.gen_range(0..vx_edges.len())].clone();
                edges.remove(&(p, c));
            }
            _ => {
                let (p, c) = vx_edges[rng.gen_range(0..vx_edges.len())].clone();
                edges.remove(&(p.clone(), c.clone()));
                edges.insert((c, p));
            }
        }
        let candidate = dag.with_edges(edges);
        if candidate.is_acyclic() {
            return candidate;
        }
    }
    dag.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nodes(vx: &[&str], vs: &[&str]) -> Vec<DagNode> {
        let mut out = Vec::new();
        for id in vs {
            out.push(DagNode {
                id: id.to_string(),
                stream: Stream::Deterministic,
            });
        }
        for id in vx {
            out.push(DagNode {
                id: id.to_string(),
                stream: Stream::Stochastic,
            });
        }
        out
    }

    fn edges(pairs: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        pairs
            .iter()
            .map(|(p, c)| (p.to_string(), c.to_string()))
            .collect()
    }

    #[test]
    fn validation_rejects_cycles_and_edges_into_conditioning() {
        let ns = nodes(&["a", "b"], &["s"]);
        assert_eq!(
            DagStructure::new(ns.clone(), edges(&[("a", "b"), ("b", "a")])),
            Err(DagError::Cyclic)
        );
        assert_eq!(
            DagStructure::new(ns.clone(), edges(&[("a", "s")])),
            Err(DagError::EdgeIntoConditioning("a".into(), "s".into()))
        );
        assert_eq!(
            DagStructure::new(ns.clone(), edges(&[("a", "a")])),
            Err(DagError::SelfEdge("a".into()))
        );
        assert!(DagStructure::new(ns, edges(&[("s", "a"), ("a", "b")])).is_ok());
    }

    #[test]
    fn topological_order_respects_edges() {
        let dag = DagStructure::new(
            nodes(&["a", "b", "c"], &[]),
            edges(&[("a", "b"), ("b", "c")]),
        )
        .expect("valid chain");
        assert_eq!(dag.topo_order_vx(), Some(vec!["a".into(), "b".into(), "c".into()]));
    }

    #[test]
    fn parent_queries_split_streams() {
        let dag = DagStructure::new(
            nodes(&["a", "b"], &["s"]),
            edges(&[("s", "b"), ("a", "b")]),
        )
        .expect("valid");
        assert_eq!(dag.parents("b"), vec!["a".to_string(), "s".to_string()]);
        assert_eq!(dag.vx_parents("b"), vec!["a".to_string()]);
        assert!(dag.vx_parents("a").is_empty());
    }

    #[test]
    fn flip_that_creates_cycle_is_rejected_by_redraw() {
        // Triangle a→b, a→c, b→c: flipping (a,b) yields b→a which combined
        // with a→c, b→c stays acyclic; flipping (a,c) yields c→a which with
        // a→b, b→c forms a cycle. Every proposed move must stay acyclic.
        let dag = DagStructure::new(
            nodes(&["a", "b", "c"], &[]),
            edges(&[("a", "b"), ("a", "c"), ("b", "c")]),
        )
        .expect("valid triangle");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let moved = propose_move(&dag, &mut rng);
            assert!(moved.is_acyclic());
        }
    }

    #[test]
    fn empty_edge_set_only_adds() {
        let dag = DagStructure::new(nodes(&["a", "b"], &[]), BTreeSet::new()).expect("valid");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let moved = propose_move(&dag, &mut rng);
            assert_eq!(moved.edge_count(), 1, "only additions are possible");
        }
    }

    #[test]
    fn single_node_returns_unchanged() {
        let dag = DagStructure::new(nodes(&["a"], &["s"]), BTreeSet::new()).expect("valid");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(propose_move(&dag, &mut rng), dag);
    }

    #[test]
    fn moves_never_touch_conditioning_sourced_edges() {
        let dag = DagStructure::new(nodes(&["a", "b"], &["s"]), edges(&[("s", "a")]))
            .expect("valid");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let moved = propose_move(&dag, &mut rng);
            assert!(moved.has_edge("s", "a"), "exogenous edge is untouchable");
        }
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let dag = DagStructure::new(
            nodes(&["a", "b"], &["s"]),
            edges(&[("s", "b"), ("a", "b")]),
        )
        .expect("valid");
        let text = dag.to_json_pretty();
        let back = DagStructure::from_json_str(&text).expect("parses");
        assert_eq!(dag, back);
        assert!(text.contains("\"edges\""), "named edge list in file");
    }

    #[test]
    fn canonical_key_is_stable_and_order_free() {
        let a = DagStructure::new(
            nodes(&["a", "b", "c"], &[]),
            edges(&[("a", "b"), ("b", "c")]),
        )
        .expect("valid");
        let b = DagStructure::new(
            nodes(&["a", "b", "c"], &[]),
            edges(&[("b", "c"), ("a", "b")]),
        )
        .expect("valid");
        assert_eq!(a.canonical_key(), b.canonical_key());
        assert_eq!(a.canonical_key(), "a->b;b->c");
    }
}
