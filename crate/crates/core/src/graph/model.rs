//! Heterogeneous graph data model.
//!
//! A graph holds typed node sets, directed relations with edge lists, dense
//! per-type feature matrices, and a labelled target (a node type for
//! classification or a relation for link prediction). Everything is immutable
//! after construction, so graphs can be shared freely across evaluator
//! threads.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parse error at {file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One node type: its name, node count and dense feature matrix
/// (`count x feature_dim`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeType {
    pub name: String,
    pub count: usize,
    pub features: Array2<f64>,
}

/// A directed relation between two node types with an explicit edge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    /// Index into `HeteroGraph::node_types`.
    pub src: usize,
    pub dst: usize,
    /// `(source local index, target local index)` pairs.
    pub edges: Vec<(u32, u32)>,
    /// Set when this relation was materialized as the transpose of another.
    pub derived_from: Option<usize>,
    /// Index of this relation's reverse, once derived.
    pub reverse: Option<usize>,
}

/// What the downstream task predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// Node classification over the given node-type index.
    Node(usize),
    /// Link prediction over the given relation index.
    Link(usize),
}

/// Disjoint train/validation/test node sets (local indices in the target type).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl Split {
    pub fn is_empty(&self) -> bool {
        self.train.is_empty() && self.val.is_empty() && self.test.is_empty()
    }
}

/// A type-consistent chain of relation names. Steps may name a real relation
/// or the self channel of a type (`self-T`), which behaves as an identity
/// adjacency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPath {
    pub steps: Vec<String>,
}

impl MetaPath {
    pub fn new<S: Into<String>>(steps: Vec<S>) -> Self {
        MetaPath {
            steps: steps.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Positive and sampled negative endpoint pairs for a link-prediction task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSample {
    pub relation: String,
    pub train: Vec<LabeledPair>,
    pub val: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub src: u32,
    pub dst: u32,
    pub positive: bool,
}

/// Name of the identity self channel for a node type.
pub fn self_relation_name(type_name: &str) -> String {
    format!("self-{type_name}")
}

/// A directed message channel: either a stored relation or a type's identity
/// self channel. This is what architecture slots ultimately point at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Relation(usize),
    SelfLoop(usize),
}

impl Channel {
    pub fn src_dst(&self, g: &HeteroGraph) -> (usize, usize) {
        match *self {
            Channel::Relation(r) => (g.relations[r].src, g.relations[r].dst),
            Channel::SelfLoop(t) => (t, t),
        }
    }

    pub fn name(&self, g: &HeteroGraph) -> String {
        match *self {
            Channel::Relation(r) => g.relations[r].name.clone(),
            Channel::SelfLoop(t) => self_relation_name(&g.node_types[t].name),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeteroGraph {
    pub name: String,
    pub node_types: Vec<NodeType>,
    pub relations: Vec<Relation>,
    pub target: Target,
    /// Class per target-type node; empty for link-prediction targets.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
}

impl HeteroGraph {
    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t.name == name)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    /// Resolve a channel name: a relation name or `self-<type>`.
    pub fn resolve_channel(&self, name: &str) -> Option<Channel> {
        if let Some(r) = self.relation_index(name) {
            return Some(Channel::Relation(r));
        }
        let t = name.strip_prefix("self-")?;
        self.type_index(t).map(Channel::SelfLoop)
    }

    /// Number of relations that were declared in the input (not derived).
    pub fn declared_relation_count(&self) -> usize {
        self.relations
            .iter()
            .filter(|r| r.derived_from.is_none())
            .count()
    }

    pub fn target_type(&self) -> Option<usize> {
        match self.target {
            Target::Node(t) => Some(t),
            Target::Link(_) => None,
        }
    }

    /// Edge endpoints of a channel; self loops materialize `(i, i)` pairs.
    pub fn channel_edges(&self, c: Channel) -> Vec<(u32, u32)> {
        match c {
            Channel::Relation(r) => self.relations[r].edges.clone(),
            Channel::SelfLoop(t) => (0..self.node_types[t].count as u32)
                .map(|i| (i, i))
                .collect(),
        }
    }

    pub fn out_degrees(&self, rel: &Relation) -> Vec<usize> {
        let mut d = vec![0usize; self.node_types[rel.src].count];
        for &(s, _) in &rel.edges {
            d[s as usize] += 1;
        }
        d
    }

    pub fn in_degrees(&self, rel: &Relation) -> Vec<usize> {
        let mut d = vec![0usize; self.node_types[rel.dst].count];
        for &(_, t) in &rel.edges {
            d[t as usize] += 1;
        }
        d
    }

    /// Check every structural invariant; returns the first violation.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut names = HashSet::new();
        for t in &self.node_types {
            if !names.insert(t.name.clone()) {
                return Err(GraphError::Schema(format!(
                    "duplicate node type {}",
                    t.name
                )));
            }
            if t.features.nrows() != t.count {
                return Err(GraphError::Validation(format!(
                    "feature rows for type {} ({}) do not match node count ({})",
                    t.name,
                    t.features.nrows(),
                    t.count
                )));
            }
        }
        let mut rel_names = HashSet::new();
        for r in &self.relations {
            if !rel_names.insert(r.name.clone()) {
                return Err(GraphError::Schema(format!(
                    "duplicate relation {}",
                    r.name
                )));
            }
            if r.src >= self.node_types.len() || r.dst >= self.node_types.len() {
                return Err(GraphError::Schema(format!(
                    "relation {} references an unknown node type",
                    r.name
                )));
            }
            let (ns, nd) = (
                self.node_types[r.src].count,
                self.node_types[r.dst].count,
            );
            for &(s, d) in &r.edges {
                if s as usize >= ns || d as usize >= nd {
                    return Err(GraphError::Validation(format!(
                        "relation {} has edge ({s},{d}) outside {}x{}",
                        r.name, ns, nd
                    )));
                }
            }
        }
        if self.node_types.len() + self.declared_relation_count() <= 2 {
            return Err(GraphError::Validation(format!(
                "graph is not heterogeneous: {} node types + {} relations <= 2",
                self.node_types.len(),
                self.declared_relation_count()
            )));
        }
        match self.target {
            Target::Node(t) => {
                if t >= self.node_types.len() {
                    return Err(GraphError::Schema("target type out of range".into()));
                }
                let n = self.node_types[t].count;
                if self.labels.len() != n {
                    return Err(GraphError::Validation(format!(
                        "expected {n} labels for target type {}, got {}",
                        self.node_types[t].name,
                        self.labels.len()
                    )));
                }
                if let Some(&bad) = self.labels.iter().find(|&&c| c >= self.num_classes) {
                    return Err(GraphError::Validation(format!(
                        "label {bad} outside 0..{}",
                        self.num_classes
                    )));
                }
                self.check_split_disjoint()?;
                for set in [&self.split.train, &self.split.val, &self.split.test] {
                    if let Some(&bad) = set.iter().find(|&&i| i as usize >= n) {
                        return Err(GraphError::Validation(format!(
                            "split id {bad} outside target type of size {n}"
                        )));
                    }
                }
            }
            Target::Link(r) => {
                if r >= self.relations.len() {
                    return Err(GraphError::Schema("target relation out of range".into()));
                }
            }
        }
        Ok(())
    }

    fn check_split_disjoint(&self) -> Result<(), GraphError> {
        let mut seen: HashMap<u32, &'static str> = HashMap::new();
        for (ids, part) in [
            (&self.split.train, "train"),
            (&self.split.val, "val"),
            (&self.split.test, "test"),
        ] {
            for &id in ids {
                if let Some(prev) = seen.insert(id, part) {
                    return Err(GraphError::Validation(format!(
                        "node {id} appears in both {prev} and {part} splits"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resolve and validate a meta-path against this graph: every step must
    /// name a channel and consecutive steps must chain type-consistently.
    pub fn resolve_meta_path(&self, mp: &MetaPath) -> Result<Vec<Channel>, GraphError> {
        let mut channels = Vec::with_capacity(mp.steps.len());
        let mut prev_dst: Option<usize> = None;
        for step in &mp.steps {
            let ch = self.resolve_channel(step).ok_or_else(|| {
                GraphError::Schema(format!("meta-path step {step} is not a known channel"))
            })?;
            let (src, dst) = ch.src_dst(self);
            if let Some(p) = prev_dst {
                if p != src {
                    return Err(GraphError::Validation(format!(
                        "meta-path step {step} starts at {} but the previous step ended at {}",
                        self.node_types[src].name, self.node_types[p].name
                    )));
                }
            }
            prev_dst = Some(dst);
            channels.push(ch);
        }
        Ok(channels)
    }

    /// Ensure every relation has its transposed counterpart. The reverse of
    /// `X-Y` is named `Y-X` when the name follows that convention, otherwise
    /// `<name>-rev`. Idempotent: existing reverses are linked, not duplicated.
    pub fn derive_reverse_relations(mut self) -> HeteroGraph {
        let n = self.relations.len();
        for i in 0..n {
            if self.relations[i].reverse.is_some() {
                continue;
            }
            let (src, dst) = (self.relations[i].src, self.relations[i].dst);
            let rev_name = self.reverse_name(i);
            if let Some(j) = self
                .relations
                .iter()
                .position(|r| r.name == rev_name && r.src == dst && r.dst == src)
            {
                if i != j {
                    self.relations[i].reverse = Some(j);
                    self.relations[j].reverse = Some(i);
                    continue;
                }
            }
            let edges: Vec<(u32, u32)> =
                self.relations[i].edges.iter().map(|&(s, d)| (d, s)).collect();
            let j = self.relations.len();
            self.relations.push(Relation {
                name: rev_name,
                src: dst,
                dst: src,
                edges,
                derived_from: Some(i),
                reverse: Some(i),
            });
            self.relations[i].reverse = Some(j);
        }
        self
    }

    fn reverse_name(&self, rel: usize) -> String {
        let r = &self.relations[rel];
        let (sn, dn) = (
            &self.node_types[r.src].name,
            &self.node_types[r.dst].name,
        );
        if r.name == format!("{sn}-{dn}") && r.src != r.dst {
            format!("{dn}-{sn}")
        } else {
            format!("{}-rev", r.name)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy() -> HeteroGraph {
        HeteroGraph {
            name: "toy".into(),
            node_types: vec![
                NodeType {
                    name: "A".into(),
                    count: 2,
                    features: Array2::zeros((2, 3)),
                },
                NodeType {
                    name: "P".into(),
                    count: 3,
                    features: Array2::zeros((3, 3)),
                },
            ],
            relations: vec![Relation {
                name: "A-P".into(),
                src: 0,
                dst: 1,
                edges: vec![(0, 0), (0, 1), (1, 2)],
                derived_from: None,
                reverse: None,
            }],
            target: Target::Node(1),
            labels: vec![0, 1, 0],
            num_classes: 2,
            split: Split {
                train: vec![0],
                val: vec![1],
                test: vec![2],
            },
        }
    }

    #[test]
    fn reverse_derivation_transposes() {
        let g = toy().derive_reverse_relations();
        assert_eq!(g.relations.len(), 2);
        let rev = &g.relations[1];
        assert_eq!(rev.name, "P-A");
        assert_eq!((rev.src, rev.dst), (1, 0));
        assert_eq!(rev.edges, vec![(0, 0), (1, 0), (2, 1)]);
        assert_eq!(rev.edges.len(), g.relations[0].edges.len());
    }

    #[test]
    fn reverse_derivation_is_idempotent() {
        let g1 = toy().derive_reverse_relations();
        let g2 = g1.clone().derive_reverse_relations();
        assert_eq!(g1.relations.len(), g2.relations.len());
        assert_eq!(
            serde_json::to_string(&g1.relations).unwrap(),
            serde_json::to_string(&g2.relations).unwrap()
        );
    }

    #[test]
    fn reverse_is_involution_on_adjacency() {
        let g = toy().derive_reverse_relations();
        let fwd: std::collections::HashSet<_> = g.relations[0].edges.iter().copied().collect();
        let back: std::collections::HashSet<_> = g.relations[1]
            .edges
            .iter()
            .map(|&(s, d)| (d, s))
            .collect();
        assert_eq!(fwd, back);
    }

    #[test]
    fn overlapping_splits_rejected() {
        let mut g = toy();
        g.split.val.push(0);
        let err = g.validate().unwrap_err();
        assert!(err.to_string().contains("node 0"), "{err}");
    }

    #[test]
    fn heterogeneity_condition_enforced() {
        let mut g = toy();
        g.node_types.pop();
        g.relations[0].dst = 0;
        g.target = Target::Node(0);
        g.labels = vec![0, 1];
        g.split = Split {
            train: vec![0],
            val: vec![1],
            test: vec![],
        };
        g.relations[0].edges = vec![(0, 1)];
        assert!(matches!(g.validate(), Err(GraphError::Validation(_))));
    }

    #[test]
    fn meta_path_resolution_checks_chain() {
        let g = toy().derive_reverse_relations();
        let ok = MetaPath::new(vec!["P-A", "A-P"]);
        assert_eq!(g.resolve_meta_path(&ok).unwrap().len(), 2);
        let self_step = MetaPath::new(vec!["self-A", "A-P"]);
        assert_eq!(g.resolve_meta_path(&self_step).unwrap().len(), 2);
        let broken = MetaPath::new(vec!["A-P", "A-P"]);
        assert!(g.resolve_meta_path(&broken).is_err());
    }
}
