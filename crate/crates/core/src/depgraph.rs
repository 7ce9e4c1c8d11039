//! Theorem dependencies.
//!
//! Nodes are axioms (kernel rules, construction principles, declared
//! postulates), checked theorems, and declared results whose proofs live
//! outside the corpus. An edge `a -> b` means `a` uses `b`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{CheckReport, Tag};
use crate::proofscript::{Elaborated, ItemKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Axiom,
    Theorem,
    Declared,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub tags: BTreeSet<Tag>,
}

impl Node {
    pub fn new(name: impl Into<String>, kind: NodeKind, tags: impl IntoIterator<Item = Tag>) -> Self {
        Node { name: name.into(), kind, tags: tags.into_iter().collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Neutral,
    EuclideanOnly,
    Cyclic,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Neutral => "NEUTRAL",
            Classification::EuclideanOnly => "EUCLIDEAN_ONLY",
            Classification::Cyclic => "CYCLIC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DepError {
    #[error("node {0} registered twice with different contents")]
    DuplicateNode(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("axiom {0} cannot use other nodes")]
    AxiomWithUses(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    node: Node,
    /// Created because something used the name before it was registered.
    placeholder: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepGraph {
    nodes: BTreeMap<String, Entry>,
    edges: BTreeMap<String, BTreeSet<String>>,
}

impl DepGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `node` with edges to `uses`. Unknown used names become
    /// placeholder declared nodes, replaced when registered for real.
    pub fn register(&mut self, node: Node, uses: &[String]) -> Result<(), DepError> {
        if node.kind == NodeKind::Axiom && !uses.is_empty() {
            return Err(DepError::AxiomWithUses(node.name));
        }
        let uses: BTreeSet<String> = uses.iter().cloned().collect();
        if let Some(prev) = self.nodes.get(&node.name) {
            if !prev.placeholder {
                let same_edges = self.edges.get(&node.name).cloned().unwrap_or_default() == uses;
                return if prev.node == node && same_edges {
                    Ok(())
                } else {
                    Err(DepError::DuplicateNode(node.name))
                };
            }
        }
        for u in &uses {
            if !self.nodes.contains_key(u) && *u != node.name {
                self.nodes.insert(
                    u.clone(),
                    Entry { node: Node::new(u.clone(), NodeKind::Declared, []), placeholder: true },
                );
            }
        }
        let name = node.name.clone();
        self.nodes.insert(name.clone(), Entry { node, placeholder: false });
        if !uses.is_empty() {
            self.edges.insert(name, uses);
        }
        Ok(())
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.get(name).map(|e| &e.node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().map(|e| &e.node)
    }

    pub fn is_placeholder(&self, name: &str) -> bool {
        self.nodes.get(name).is_some_and(|e| e.placeholder)
    }

    pub fn uses(&self, name: &str) -> impl Iterator<Item = &str> {
        self.edges.get(name).into_iter().flatten().map(String::as_str)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Strongly connected components with at least two nodes, plus
    /// self-loops. Names within a cycle and the cycles themselves are sorted.
    pub fn detect_cycles(&self) -> Vec<Vec<String>> {
        let mut g = DiGraph::<&str, ()>::new();
        let idx: BTreeMap<&str, _> =
            self.nodes.keys().map(|n| (n.as_str(), g.add_node(n.as_str()))).collect();
        for (from, tos) in &self.edges {
            for to in tos {
                g.add_edge(idx[from.as_str()], idx[to.as_str()], ());
            }
        }
        let mut cycles: Vec<Vec<String>> = tarjan_scc(&g)
            .into_iter()
            .filter(|scc| scc.len() > 1 || g.contains_edge(scc[0], scc[0]))
            .map(|scc| {
                let mut names: Vec<String> = scc.iter().map(|&i| g[i].to_owned()).collect();
                names.sort();
                names
            })
            .collect();
        cycles.sort();
        cycles
    }

    /// Every node reachable from `name`, including itself.
    pub fn reachable(&self, name: &str) -> Result<BTreeSet<String>, DepError> {
        if !self.nodes.contains_key(name) {
            return Err(DepError::UnknownNode(name.to_owned()));
        }
        let mut seen = BTreeSet::from([name.to_owned()]);
        let mut stack = vec![name.to_owned()];
        while let Some(n) = stack.pop() {
            for u in self.uses(&n) {
                if seen.insert(u.to_owned()) {
                    stack.push(u.to_owned());
                }
            }
        }
        Ok(seen)
    }

    pub fn axiom_basis(&self, name: &str) -> Result<BTreeSet<String>, DepError> {
        Ok(self
            .reachable(name)?
            .into_iter()
            .filter(|n| self.nodes[n].node.kind == NodeKind::Axiom)
            .collect())
    }

    pub fn classify(&self, name: &str) -> Result<Classification, DepError> {
        let cyclic: BTreeSet<String> = self.detect_cycles().into_iter().flatten().collect();
        self.classify_with(name, &cyclic)
    }

    fn classify_with(
        &self,
        name: &str,
        cyclic: &BTreeSet<String>,
    ) -> Result<Classification, DepError> {
        let reach = self.reachable(name)?;
        if reach.iter().any(|n| cyclic.contains(n)) {
            return Ok(Classification::Cyclic);
        }
        let euclidean = reach.iter().any(|n| {
            let node = &self.nodes[n].node;
            node.kind == NodeKind::Axiom && node.tags.contains(&Tag::Euclidean)
        });
        Ok(if euclidean { Classification::EuclideanOnly } else { Classification::Neutral })
    }

    pub fn emit_dot(&self) -> String {
        let cyclic: BTreeSet<String> = self.detect_cycles().into_iter().flatten().collect();
        let mut out = String::from("digraph deps {\n");
        if !self.nodes.is_empty() {
            out.push_str("  node [shape=box];\n");
        }
        for entry in self.nodes.values() {
            let node = &entry.node;
            let mut attrs = Vec::new();
            match node.kind {
                NodeKind::Axiom => attrs.push("shape=ellipse"),
                NodeKind::Declared => attrs.push("style=dashed"),
                NodeKind::Theorem => {}
            }
            if node.kind == NodeKind::Axiom && node.tags.contains(&Tag::Euclidean) {
                attrs.push("style=filled");
                attrs.push("fillcolor=lightblue");
            }
            if cyclic.contains(&node.name) {
                attrs.push("color=red");
                attrs.push("penwidth=2");
            }
            if attrs.is_empty() {
                let _ = writeln!(out, "  {};", dot_id(&node.name));
            } else {
                let _ = writeln!(out, "  {} [{}];", dot_id(&node.name), attrs.join(", "));
            }
        }
        for (from, tos) in &self.edges {
            for to in tos {
                let _ = writeln!(out, "  {} -> {};", dot_id(from), dot_id(to));
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn report(&self) -> GraphReport {
        let cycles = self.detect_cycles();
        let cyclic: BTreeSet<String> = cycles.iter().flatten().cloned().collect();
        let nodes = self
            .nodes
            .values()
            .map(|e| NodeReport {
                name: e.node.name.clone(),
                kind: e.node.kind,
                tags: e.node.tags.clone(),
                classification: self.classify_with(&e.node.name, &cyclic).expect("node exists"),
                cycles: cycles
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.contains(&e.node.name))
                    .map(|(i, _)| i)
                    .collect(),
                uses: self.uses(&e.node.name).map(str::to_owned).collect(),
            })
            .collect();
        GraphReport { nodes, cycles }
    }
}

fn dot_id(name: &str) -> String {
    let plain = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        name.to_owned()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeReport {
    pub name: String,
    pub kind: NodeKind,
    pub tags: BTreeSet<Tag>,
    pub classification: Classification,
    /// Indices into [`GraphReport::cycles`].
    pub cycles: Vec<usize>,
    pub uses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphReport {
    pub nodes: Vec<NodeReport>,
    pub cycles: Vec<Vec<String>>,
}

/// Builds the graph for elaborated items. A proved theorem uses what its
/// check report recorded; declare blocks use what they list; conjectures
/// and declare blocks without `uses` are axioms.
pub fn build(
    items: &[Elaborated],
    reports: &BTreeMap<String, CheckReport>,
) -> Result<DepGraph, DepError> {
    let mut g = DepGraph::new();
    for item in items {
        if let Some(report) = reports.get(item.name()) {
            for ax in &report.axioms {
                g.register(Node::new(ax.clone(), NodeKind::Axiom, [Tag::Neutral]), &[])?;
            }
        }
    }
    for item in items {
        let st = &item.statement;
        let tags = st.tags.iter().copied();
        match item.kind {
            ItemKind::Theorem => {
                let uses: Vec<String> = reports
                    .get(item.name())
                    .map(|r| r.axioms.iter().chain(&r.lemma_uses).cloned().collect())
                    .unwrap_or_default();
                g.register(Node::new(st.name.clone(), NodeKind::Theorem, tags), &uses)?;
            }
            ItemKind::Declared => {
                g.register(Node::new(st.name.clone(), NodeKind::Declared, tags), &item.uses)?;
            }
            ItemKind::Conjecture | ItemKind::Axiom => {
                g.register(Node::new(st.name.clone(), NodeKind::Axiom, tags), &[])?;
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn chain(edges: &[(&str, &str)]) -> DepGraph {
        let mut by_src: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for (a, b) in edges {
            by_src.entry(a).or_default().push(b.to_string());
            by_src.entry(b).or_default();
        }
        let mut g = DepGraph::new();
        for (a, uses) in by_src {
            g.register(Node::new(a, NodeKind::Declared, []), &uses).unwrap();
        }
        g
    }

    #[test]
    fn register_pons_with_one_axiom() {
        let mut g = DepGraph::new();
        g.register(Node::new("SAS_ORD", NodeKind::Axiom, [Tag::Neutral]), &[]).unwrap();
        g.register(Node::new("pons", NodeKind::Theorem, [Tag::Neutral]), &names(&["SAS_ORD"]))
            .unwrap();
        assert_eq!((g.len(), g.edge_count()), (2, 1));
    }

    #[test]
    fn reregistration() {
        let mut g = DepGraph::new();
        let node = Node::new("t", NodeKind::Theorem, [Tag::Neutral]);
        g.register(node.clone(), &names(&["x"])).unwrap();
        let before = g.clone();
        g.register(node.clone(), &names(&["x"])).unwrap();
        assert_eq!(g, before);
        assert_eq!(
            g.register(node.clone(), &names(&["y"])),
            Err(DepError::DuplicateNode("t".into()))
        );
        assert!(g.is_placeholder("x"));
        g.register(Node::new("x", NodeKind::Axiom, [Tag::Euclidean]), &[]).unwrap();
        assert!(!g.is_placeholder("x"));
        assert_eq!(g.classify("t"), Ok(Classification::EuclideanOnly));
    }

    #[test]
    fn axioms_cannot_use() {
        let mut g = DepGraph::new();
        let err = g.register(Node::new("a", NodeKind::Axiom, []), &names(&["b"]));
        assert_eq!(err, Err(DepError::AxiomWithUses("a".into())));
    }

    #[test]
    fn cycles_on_small_graphs() {
        assert!(chain(&[("a", "b"), ("b", "c")]).detect_cycles().is_empty());
        assert_eq!(chain(&[("a", "a")]).detect_cycles(), vec![names(&["a"])]);
        let g = chain(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "d"), ("d", "c")]);
        assert_eq!(g.detect_cycles(), vec![names(&["a", "b"]), names(&["c", "d"])]);
    }

    #[test]
    fn classification_and_basis() {
        let mut g = DepGraph::new();
        g.register(Node::new("ax", NodeKind::Axiom, [Tag::Neutral]), &[]).unwrap();
        g.register(Node::new("eu", NodeKind::Axiom, [Tag::Euclidean]), &[]).unwrap();
        g.register(Node::new("t1", NodeKind::Theorem, []), &names(&["ax"])).unwrap();
        g.register(Node::new("t2", NodeKind::Theorem, []), &names(&["t1", "eu"])).unwrap();
        g.register(Node::new("t3", NodeKind::Declared, []), &names(&["t4", "t1"])).unwrap();
        g.register(Node::new("t4", NodeKind::Declared, []), &names(&["t3"])).unwrap();
        g.register(Node::new("t5", NodeKind::Theorem, []), &names(&["t3"])).unwrap();
        assert_eq!(g.classify("t1"), Ok(Classification::Neutral));
        assert_eq!(g.classify("t2"), Ok(Classification::EuclideanOnly));
        assert_eq!(g.classify("t3"), Ok(Classification::Cyclic));
        assert_eq!(g.classify("t5"), Ok(Classification::Cyclic));
        assert_eq!(g.axiom_basis("t2").unwrap(), ["ax", "eu"].map(String::from).into());
        assert_eq!(g.axiom_basis("ax").unwrap(), ["ax"].map(String::from).into());
        assert_eq!(g.classify("nope"), Err(DepError::UnknownNode("nope".into())));
    }

    #[test]
    fn dot_output() {
        assert_eq!(DepGraph::new().emit_dot(), "digraph deps {\n}\n");
        let g = chain(&[("a", "b"), ("b", "a"), ("a", "c")]);
        let dot = g.emit_dot();
        assert!(dot.starts_with("digraph deps {"));
        assert!(dot.contains("  a -> b;\n"));
        assert!(dot.contains("  a [style=dashed, color=red, penwidth=2];\n"));
        assert!(dot.contains("  c [style=dashed];\n"));
        assert_eq!(dot, g.clone().emit_dot());
    }
}
