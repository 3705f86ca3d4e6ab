//! Influence diagram construction and validation.
//!
//! A diagram is assembled through [`DiagramBuilder`] and turned into an
//! immutable [`InfluenceDiagram`] by [`DiagramBuilder::freeze`]. Freezing fixes
//! the topological order of the chance and decision nodes, which in turn fixes
//! the coordinate layout of every path.
//!
//! Tensor layout: the information states of a node are indexed row-major over
//! its information set in declared order (the last parent varies fastest), and
//! every index is 0-based.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a state within a node's state space.
pub type StateIndex = u16;

/// Absolute tolerance on the row sums of a conditional probability table.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("DuplicateName: node `{0}` is already declared")]
    DuplicateName(String),
    #[error("SelfReference: node `{0}` lists itself in its information set")]
    SelfReference(String),
    #[error("UnknownParent: node `{node}` references undeclared node `{parent}`")]
    UnknownParent { node: String, parent: String },
    #[error("DuplicateParent: node `{node}` lists `{parent}` twice")]
    DuplicateParent { node: String, parent: String },
    #[error("ValueParent: node `{node}` has value node `{parent}` in its information set")]
    ValueParent { node: String, parent: String },
    #[error("EmptyStates: node `{0}` needs at least one state")]
    EmptyStates(String),
    #[error("ValueNodeStates: value node `{0}` must not declare states")]
    ValueNodeStates(String),
    #[error("DuplicateState: node `{node}` declares state `{state}` twice")]
    DuplicateState { node: String, state: String },
    #[error("TooManyStates: node `{node}` declares {count} states")]
    TooManyStates { node: String, count: usize },
    #[error("UnknownNode: `{0}`")]
    UnknownNode(String),
    #[error("UnknownState: node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },
    #[error("WrongKind: node `{node}` is not a {expected} node")]
    WrongKind { node: String, expected: NodeKind },
    #[error("DimensionMismatch at {node}: expected {expected}, found {found}")]
    DimensionMismatch { node: String, expected: String, found: String },
    #[error("NotNormalized at {node},{info_state} (row sum {sum})")]
    NotNormalized { node: String, info_state: String, sum: f64 },
    #[error("NegativeProbability at {node},{info_state}: {value}")]
    NegativeProbability { node: String, info_state: String, value: f64 },
    #[error("IncompleteUtilities at {node}: {found} of {expected} information states defined")]
    IncompleteUtilities { node: String, expected: usize, found: usize },
    #[error("NonFiniteUtility at {node},{info_state}")]
    NonFiniteUtility { node: String, info_state: String },
    #[error("CycleDetected: directed cycle through {}", .0.join(", "))]
    CycleDetected(Vec<String>),
    #[error("MissingTensor: node `{0}` has no table attached")]
    MissingTensor(String),
}

pub type Result<T, E = DiagramError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    #[serde(alias = "Chance")]
    Chance,
    #[serde(alias = "Decision")]
    Decision,
    #[serde(alias = "Value")]
    Value,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Value => "value",
        })
    }
}

/// Declaration of a node as supplied by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default)]
    pub info_set: Vec<String>,
}

impl Node {
    pub fn chance<S: Into<String>>(name: S, states: &[&str], info_set: &[&str]) -> Self {
        Self::new(name, NodeKind::Chance, states, info_set)
    }

    pub fn decision<S: Into<String>>(name: S, states: &[&str], info_set: &[&str]) -> Self {
        Self::new(name, NodeKind::Decision, states, info_set)
    }

    pub fn value<S: Into<String>>(name: S, info_set: &[&str]) -> Self {
        Self::new(name, NodeKind::Value, &[], info_set)
    }

    pub fn new<S: Into<String>>(name: S, kind: NodeKind, states: &[&str], info_set: &[&str]) -> Self {
        Node {
            name: name.into(),
            kind,
            states: states.iter().map(|s| s.to_string()).collect(),
            info_set: info_set.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Conditional probability table: one row per information state, one column
/// per state of the owner.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTensor {
    rows: Vec<Vec<f64>>,
}

impl ProbabilityTensor {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        ProbabilityTensor { rows }
    }

    /// Splits a row-major flat table into rows of `n_states` entries. A
    /// trailing partial row is kept so that the dimension check reports it.
    pub fn from_flat(values: &[f64], n_states: usize) -> Self {
        let rows = if n_states == 0 {
            vec![values.to_vec()]
        } else {
            values.chunks(n_states).map(|c| c.to_vec()).collect()
        };
        ProbabilityTensor { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Utility table of a value node, one entry per information state.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTensor {
    values: Vec<f64>,
}

impl UtilityTensor {
    pub fn new(values: Vec<f64>) -> Self {
        UtilityTensor { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DiagramWarning {
    /// No directed path leads from the node to any value node.
    RedundantNode(String),
}

impl fmt::Display for DiagramWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagramWarning::RedundantNode(n) => {
                write!(f, "RedundantNodeWarning: `{n}` does not influence any value node")
            }
        }
    }
}

/// Identifier of a node: its position in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq)]
struct Declared {
    name: String,
    kind: NodeKind,
    states: Vec<String>,
    info_set: Vec<String>,
}

/// Mutable, single-writer construction of an influence diagram.
#[derive(Debug, Clone, Default)]
pub struct DiagramBuilder {
    nodes: Vec<Declared>,
    index: HashMap<String, usize>,
    probabilities: Vec<Option<Vec<f64>>>,
    utilities: Vec<Option<Vec<f64>>>,
}

impl DiagramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one node. Every member of its information set must already be
    /// declared.
    pub fn add_node(&mut self, node: Node) -> Result<NodeId> {
        self.check_local(&node)?;
        for parent in &node.info_set {
            self.check_parent(&node.name, parent)?;
        }
        Ok(self.push(node))
    }

    /// Adds a batch of nodes whose information sets may refer to any node in
    /// the batch, regardless of order. Cycles introduced this way are reported
    /// by [`DiagramBuilder::freeze`].
    pub fn add_nodes(&mut self, nodes: Vec<Node>) -> Result<Vec<NodeId>> {
        let mut seen: HashSet<&str> = HashSet::new();
        for node in &nodes {
            self.check_local(node)?;
            if !seen.insert(node.name.as_str()) {
                return Err(DiagramError::DuplicateName(node.name.clone()));
            }
        }
        let batch: HashMap<&str, NodeKind> = nodes.iter().map(|n| (n.name.as_str(), n.kind)).collect();
        for node in &nodes {
            for parent in &node.info_set {
                match batch.get(parent.as_str()) {
                    Some(NodeKind::Value) => {
                        return Err(DiagramError::ValueParent { node: node.name.clone(), parent: parent.clone() })
                    }
                    Some(_) => {}
                    None => self.check_parent(&node.name, parent)?,
                }
            }
        }
        Ok(nodes.into_iter().map(|n| self.push(n)).collect())
    }

    fn check_local(&self, node: &Node) -> Result<()> {
        if self.index.contains_key(&node.name) {
            return Err(DiagramError::DuplicateName(node.name.clone()));
        }
        if node.info_set.iter().any(|p| p == &node.name) {
            return Err(DiagramError::SelfReference(node.name.clone()));
        }
        let mut parents = HashSet::new();
        for p in &node.info_set {
            if !parents.insert(p) {
                return Err(DiagramError::DuplicateParent { node: node.name.clone(), parent: p.clone() });
            }
        }
        match node.kind {
            NodeKind::Value if !node.states.is_empty() => {
                return Err(DiagramError::ValueNodeStates(node.name.clone()))
            }
            NodeKind::Chance | NodeKind::Decision if node.states.is_empty() => {
                return Err(DiagramError::EmptyStates(node.name.clone()))
            }
            _ => {}
        }
        if node.states.len() > StateIndex::MAX as usize {
            return Err(DiagramError::TooManyStates { node: node.name.clone(), count: node.states.len() });
        }
        let mut states = HashSet::new();
        for s in &node.states {
            if !states.insert(s) {
                return Err(DiagramError::DuplicateState { node: node.name.clone(), state: s.clone() });
            }
        }
        Ok(())
    }

    fn check_parent(&self, node: &str, parent: &str) -> Result<()> {
        match self.index.get(parent) {
            None => Err(DiagramError::UnknownParent { node: node.to_string(), parent: parent.to_string() }),
            Some(&i) if self.nodes[i].kind == NodeKind::Value => {
                Err(DiagramError::ValueParent { node: node.to_string(), parent: parent.to_string() })
            }
            Some(_) => Ok(()),
        }
    }

    fn push(&mut self, node: Node) -> NodeId {
        let id = self.nodes.len();
        self.index.insert(node.name.clone(), id);
        self.nodes.push(Declared { name: node.name, kind: node.kind, states: node.states, info_set: node.info_set });
        self.probabilities.push(None);
        self.utilities.push(None);
        NodeId(id)
    }

    fn lookup(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| DiagramError::UnknownNode(name.to_string()))
    }

    fn parent_sizes(&self, id: usize) -> Vec<usize> {
        self.nodes[id].info_set.iter().map(|p| self.nodes[self.index[p]].states.len()).collect()
    }

    fn info_label(&self, id: usize, row: usize) -> String {
        let parents: Vec<&Declared> = self.nodes[id].info_set.iter().map(|p| &self.nodes[self.index[p]]).collect();
        let sizes: Vec<usize> = parents.iter().map(|p| p.states.len()).collect();
        let digits = decode_row_major(row, &sizes);
        let names: Vec<&str> = parents.iter().zip(digits).map(|(p, d)| p.states[d].as_str()).collect();
        format!("({})", names.join(","))
    }

    pub fn set_probabilities(&mut self, owner: &str, tensor: ProbabilityTensor) -> Result<()> {
        let id = self.lookup(owner)?;
        let node = &self.nodes[id];
        if node.kind != NodeKind::Chance {
            return Err(DiagramError::WrongKind { node: owner.to_string(), expected: NodeKind::Chance });
        }
        let n_states = node.states.len();
        let n_rows: usize = self.parent_sizes(id).iter().product();
        let rows = tensor.rows;
        if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_states) {
            let widths: Vec<usize> = rows.iter().map(Vec::len).collect();
            let found = match widths.iter().min() {
                Some(&lo) if widths.iter().all(|&w| w == lo) => format!("{} x {}", rows.len(), lo),
                Some(_) => format!("{} ragged rows", rows.len()),
                None => "0 rows".to_string(),
            };
            return Err(DiagramError::DimensionMismatch {
                node: owner.to_string(),
                expected: format!("{n_rows} x {n_states}"),
                found,
            });
        }
        for (r, row) in rows.iter().enumerate() {
            if let Some(&value) = row.iter().find(|v| **v < 0.0) {
                return Err(DiagramError::NegativeProbability {
                    node: owner.to_string(),
                    info_state: self.info_label(id, r),
                    value,
                });
            }
            let sum: f64 = row.iter().sum();
            if !sum.is_finite() || (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(DiagramError::NotNormalized {
                    node: owner.to_string(),
                    info_state: self.info_label(id, r),
                    sum,
                });
            }
        }
        self.probabilities[id] = Some(rows.into_iter().flatten().collect());
        Ok(())
    }

    pub fn set_utilities(&mut self, owner: &str, tensor: UtilityTensor) -> Result<()> {
        let id = self.lookup(owner)?;
        if self.nodes[id].kind != NodeKind::Value {
            return Err(DiagramError::WrongKind { node: owner.to_string(), expected: NodeKind::Value });
        }
        let expected: usize = self.parent_sizes(id).iter().product();
        let found = tensor.values.len();
        if found < expected {
            return Err(DiagramError::IncompleteUtilities { node: owner.to_string(), expected, found });
        }
        if found > expected {
            return Err(DiagramError::DimensionMismatch {
                node: owner.to_string(),
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
        if let Some(r) = tensor.values.iter().position(|u| !u.is_finite()) {
            return Err(DiagramError::NonFiniteUtility { node: owner.to_string(), info_state: self.info_label(id, r) });
        }
        self.utilities[id] = Some(tensor.values);
        Ok(())
    }

    /// Validates the structure, fixes the topological order and produces the
    /// immutable diagram. Redundant nodes are reported as warnings.
    pub fn freeze(&self) -> Result<InfluenceDiagram> {
        let n = self.nodes.len();
        let parents: Vec<Vec<usize>> =
            self.nodes.iter().map(|d| d.info_set.iter().map(|p| self.index[p]).collect()).collect();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(j);
            }
        }

        // Kahn's algorithm; ties go to the earliest declared node.
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).filter(|&i| indegree[i] > 0).map(|i| self.nodes[i].name.clone()).collect();
            return Err(DiagramError::CycleDetected(stuck));
        }

        for (i, d) in self.nodes.iter().enumerate() {
            let missing = match d.kind {
                NodeKind::Chance => self.probabilities[i].is_none(),
                NodeKind::Value => self.utilities[i].is_none(),
                NodeKind::Decision => false,
            };
            if missing {
                return Err(DiagramError::MissingTensor(d.name.clone()));
            }
        }

        // Ancestors of value nodes; everything else is redundant.
        let mut useful = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| self.nodes[i].kind == NodeKind::Value).collect();
        while let Some(i) = stack.pop() {
            for &p in &parents[i] {
                if !useful[p] {
                    useful[p] = true;
                    stack.push(p);
                }
            }
        }
        let mut warnings = Vec::new();
        for &i in &order {
            if self.nodes[i].kind != NodeKind::Value && !useful[i] {
                let w = DiagramWarning::RedundantNode(self.nodes[i].name.clone());
                log::warn!("{w}");
                warnings.push(w);
            }
        }

        let path_order: Vec<NodeId> =
            order.iter().copied().filter(|&i| self.nodes[i].kind != NodeKind::Value).map(NodeId).collect();
        let mut position = vec![None; n];
        for (pos, id) in path_order.iter().enumerate() {
            position[id.0] = Some(pos);
        }

        let infos = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let sizes: Vec<usize> = parents[i].iter().map(|&p| self.nodes[p].states.len()).collect();
                let mut strides = vec![1usize; sizes.len()];
                for k in (0..sizes.len().saturating_sub(1)).rev() {
                    strides[k] = strides[k + 1] * sizes[k + 1];
                }
                NodeInfo {
                    name: d.name.clone(),
                    kind: d.kind,
                    states: d.states.clone(),
                    info_set: parents[i].iter().copied().map(NodeId).collect(),
                    parent_positions: parents[i].iter().map(|&p| position[p].expect("parents are path nodes")).collect(),
                    strides,
                    info_states: sizes.iter().product(),
                }
            })
            .collect();

        let pick = |k: NodeKind| -> Vec<NodeId> {
            path_order.iter().copied().filter(|id| self.nodes[id.0].kind == k).collect()
        };
        Ok(InfluenceDiagram {
            decisions: pick(NodeKind::Decision),
            chances: pick(NodeKind::Chance),
            values: (0..n).filter(|&i| self.nodes[i].kind == NodeKind::Value).map(NodeId).collect(),
            nodes: infos,
            index: self.index.iter().map(|(k, &v)| (k.clone(), NodeId(v))).collect(),
            path_order,
            position,
            probabilities: self.probabilities.iter().map(|p| p.clone().unwrap_or_default()).collect(),
            utilities: self.utilities.iter().map(|u| u.clone().unwrap_or_default()).collect(),
            warnings,
        })
    }
}

/// A node of a frozen diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    name: String,
    kind: NodeKind,
    states: Vec<String>,
    info_set: Vec<NodeId>,
    parent_positions: Vec<usize>,
    strides: Vec<usize>,
    info_states: usize,
}

impl NodeInfo {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn info_set(&self) -> &[NodeId] {
        &self.info_set
    }

    /// |S_I(j)|, the number of information states.
    pub fn info_state_count(&self) -> usize {
        self.info_states
    }

    pub fn state_index(&self, name: &str) -> Option<StateIndex> {
        self.states.iter().position(|s| s == name).map(|i| i as StateIndex)
    }
}

/// A frozen, immutable influence diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceDiagram {
    nodes: Vec<NodeInfo>,
    index: HashMap<String, NodeId>,
    path_order: Vec<NodeId>,
    position: Vec<Option<usize>>,
    decisions: Vec<NodeId>,
    chances: Vec<NodeId>,
    values: Vec<NodeId>,
    probabilities: Vec<Vec<f64>>,
    utilities: Vec<Vec<f64>>,
    warnings: Vec<DiagramWarning>,
}

impl InfluenceDiagram {
    /// Returns a builder holding the same declarations and tables.
    pub fn to_builder(&self) -> DiagramBuilder {
        let mut b = DiagramBuilder::new();
        for (i, info) in self.nodes.iter().enumerate() {
            b.index.insert(info.name.clone(), i);
            b.nodes.push(Declared {
                name: info.name.clone(),
                kind: info.kind,
                states: info.states.clone(),
                info_set: info.info_set.iter().map(|p| self.nodes[p.0].name.clone()).collect(),
            });
            b.probabilities.push((info.kind == NodeKind::Chance).then(|| self.probabilities[i].clone()));
            b.utilities.push((info.kind == NodeKind::Value).then(|| self.utilities[i].clone()));
        }
        b
    }

    /// Freezing an already frozen diagram yields an identical diagram.
    pub fn freeze(&self) -> Self {
        self.clone()
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &NodeInfo {
        &self.nodes[id.0]
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<NodeId> {
        self.id(name).ok_or_else(|| DiagramError::UnknownNode(name.to_string()))
    }

    /// Chance and decision nodes in topological order; this is the path layout.
    pub fn path_nodes(&self) -> &[NodeId] {
        &self.path_order
    }

    pub fn path_len(&self) -> usize {
        self.path_order.len()
    }

    /// Coordinate of a chance or decision node within a path.
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.position[id.0]
    }

    /// Decision nodes in topological order.
    pub fn decision_nodes(&self) -> &[NodeId] {
        &self.decisions
    }

    /// Chance nodes in topological order.
    pub fn chance_nodes(&self) -> &[NodeId] {
        &self.chances
    }

    /// Value nodes in declaration order.
    pub fn value_nodes(&self) -> &[NodeId] {
        &self.values
    }

    pub fn warnings(&self) -> &[DiagramWarning] {
        &self.warnings
    }

    /// |S| = product of the state counts over chance and decision nodes.
    pub fn path_count(&self) -> u128 {
        self.path_order
            .iter()
            .map(|id| self.nodes[id.0].states.len() as u128)
            .fold(1u128, |acc, s| acc.saturating_mul(s))
    }

    /// Row-major information-state index of `id` read off a full path.
    pub fn info_state_of(&self, id: NodeId, path: &[StateIndex]) -> usize {
        let info = &self.nodes[id.0];
        info.parent_positions.iter().zip(&info.strides).map(|(&pos, &stride)| path[pos] as usize * stride).sum()
    }

    /// Parent state indices of information state `row` of node `id`.
    pub fn info_state_digits(&self, id: NodeId, row: usize) -> Vec<StateIndex> {
        let sizes: Vec<usize> = self.nodes[id.0].info_set.iter().map(|p| self.nodes[p.0].states.len()).collect();
        decode_row_major(row, &sizes).into_iter().map(|d| d as StateIndex).collect()
    }

    /// Parent state names of information state `row` of node `id`.
    pub fn info_state_names(&self, id: NodeId, row: usize) -> Vec<&str> {
        let info = &self.nodes[id.0];
        info.info_set
            .iter()
            .zip(self.info_state_digits(id, row))
            .map(|(p, d)| self.nodes[p.0].states[d as usize].as_str())
            .collect()
    }

    /// Inverse of [`InfluenceDiagram::info_state_digits`].
    pub fn info_state_from_digits(&self, id: NodeId, digits: &[StateIndex]) -> usize {
        self.nodes[id.0].strides.iter().zip(digits).map(|(&s, &d)| s * d as usize).sum()
    }

    /// P(X_j = state | X_I(j) = info state `row`).
    pub fn probability(&self, id: NodeId, row: usize, state: StateIndex) -> f64 {
        self.probabilities[id.0][row * self.nodes[id.0].states.len() + state as usize]
    }

    /// Flattened, row-major probability table of a chance node.
    pub fn probability_table(&self, id: NodeId) -> &[f64] {
        &self.probabilities[id.0]
    }

    pub fn utility(&self, id: NodeId, row: usize) -> f64 {
        self.utilities[id.0][row]
    }

    pub fn utility_table(&self, id: NodeId) -> &[f64] {
        &self.utilities[id.0]
    }

    /// Returns a copy with every utility table entry replaced by `f(node, value)`.
    pub(crate) fn map_utilities(&self, mut f: impl FnMut(NodeId, f64) -> f64) -> Self {
        let mut out = self.clone();
        for &v in &self.values {
            for u in out.utilities[v.0].iter_mut() {
                *u = f(v, *u);
            }
        }
        out
    }
}

pub(crate) fn decode_row_major(mut row: usize, sizes: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; sizes.len()];
    for k in (0..sizes.len()).rev() {
        digits[k] = row % sizes[k];
        row /= sizes[k];
    }
    digits
}
