//! Path enumeration, path probabilities and utilities, locally compatible
//! path sets and the Γ coefficients of the strengthened formulation.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::diagram::{InfluenceDiagram, NodeId, NodeKind, StateIndex};

/// Default upper bound on the number of paths that may be enumerated.
pub const DEFAULT_PATH_CAP: u128 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("PathExplosion: {paths} paths exceed the cap of {cap}")]
    PathExplosion { paths: u128, cap: u128 },
    #[error("EmptyPattern: a forbidden pattern needs at least one node")]
    EmptyPattern,
    #[error("NotPathNode: `{0}` is not a chance or decision node")]
    NotPathNode(String),
    #[error("InvalidState: node `{node}` has no state {state}")]
    InvalidState { node: String, state: String },
    #[error("UnknownNode: `{0}`")]
    UnknownNode(String),
    #[error("NotDecision: `{0}` is not a decision node")]
    NotDecision(String),
}

/// A partial assignment; a path matches when, for every listed node, its
/// state lies in the listed set.
#[derive(Debug, Clone, PartialEq)]
pub struct ForbiddenPattern {
    groups: Vec<(NodeId, Vec<StateIndex>)>,
    // (path coordinate, membership mask) per group
    masks: Vec<(usize, Vec<bool>)>,
}

impl ForbiddenPattern {
    pub fn new(diagram: &InfluenceDiagram, groups: Vec<(NodeId, Vec<StateIndex>)>) -> Result<Self, PathError> {
        if groups.is_empty() {
            return Err(PathError::EmptyPattern);
        }
        let mut masks = Vec::with_capacity(groups.len());
        for (id, states) in &groups {
            let node = diagram.node(*id);
            let pos = diagram.position(*id).ok_or_else(|| PathError::NotPathNode(node.name().to_string()))?;
            let mut mask = vec![false; node.num_states()];
            for &s in states {
                *mask.get_mut(s as usize).ok_or_else(|| PathError::InvalidState {
                    node: node.name().to_string(),
                    state: s.to_string(),
                })? = true;
            }
            masks.push((pos, mask));
        }
        Ok(ForbiddenPattern { groups, masks })
    }

    /// Builds a pattern from node and state names.
    pub fn from_names(diagram: &InfluenceDiagram, groups: &[(&str, &[&str])]) -> Result<Self, PathError> {
        let mut resolved = Vec::with_capacity(groups.len());
        for (name, states) in groups {
            let id = diagram.id(name).ok_or_else(|| PathError::UnknownNode(name.to_string()))?;
            let node = diagram.node(id);
            let idx = states
                .iter()
                .map(|s| {
                    node.state_index(s)
                        .ok_or_else(|| PathError::InvalidState { node: name.to_string(), state: s.to_string() })
                })
                .collect::<Result<Vec<_>, _>>()?;
            resolved.push((id, idx));
        }
        Self::new(diagram, resolved)
    }

    pub fn groups(&self) -> &[(NodeId, Vec<StateIndex>)] {
        &self.groups
    }

    pub fn matches(&self, path: &[StateIndex]) -> bool {
        self.masks.iter().all(|(pos, mask)| mask[path[*pos] as usize])
    }
}

/// Filters and limits applied while enumerating paths.
#[derive(Debug, Clone)]
pub struct EnumerationOptions {
    pub forbidden: Vec<ForbiddenPattern>,
    /// Nodes pinned to a single state ("fixed subpaths").
    pub fixed: Vec<(NodeId, StateIndex)>,
    /// Maximum number of candidate paths (after pins) to walk.
    pub cap: u128,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { forbidden: Vec::new(), fixed: Vec::new(), cap: DEFAULT_PATH_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PathWarning {
    /// Forbidden patterns removed paths that carry positive probability; the
    /// remaining probabilities are not renormalized.
    ForbiddenPositiveProbability { paths: usize, mass: f64 },
}

impl fmt::Display for PathWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathWarning::ForbiddenPositiveProbability { paths, mass } => write!(
                f,
                "ForbiddenPositiveProbability: {paths} forbidden paths carry total probability {mass}"
            ),
        }
    }
}

/// The effective paths S* of a diagram together with p(s) and U(s).
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    width: usize,
    states: Vec<StateIndex>,
    probabilities: Vec<f64>,
    utilities: Vec<f64>,
    decisions: Vec<NodeId>,
    /// Row-major: information-state index of decision k on path i at i * |D| + k.
    decision_info: Vec<u32>,
    // CSR index of locally compatible paths per decision, keyed by
    // info_state * |S_j| + s_j.
    lcp_starts: Vec<Vec<usize>>,
    lcp_paths: Vec<Vec<u32>>,
    total_paths: u128,
    filtered: bool,
    warnings: Vec<PathWarning>,
}

/// p(s): product of the conditional probabilities of the chance nodes, taken
/// in topological order. Decision nodes contribute no factor.
pub fn path_probability(diagram: &InfluenceDiagram, path: &[StateIndex]) -> f64 {
    let mut p = 1.0;
    for &c in diagram.chance_nodes() {
        let pos = diagram.position(c).expect("chance nodes are path nodes");
        p *= diagram.probability(c, diagram.info_state_of(c, path), path[pos]);
    }
    p
}

/// U(s): sum of the value-node utilities in declaration order.
pub fn path_utility(diagram: &InfluenceDiagram, path: &[StateIndex]) -> f64 {
    let mut u = 0.0;
    for &v in diagram.value_nodes() {
        u += diagram.utility(v, diagram.info_state_of(v, path));
    }
    u
}

/// Enumerates S* in lexicographic order of the topological state vector.
pub fn enumerate_paths(diagram: &InfluenceDiagram, opts: &EnumerationOptions) -> Result<PathTable, PathError> {
    let width = diagram.path_len();
    let mut lo = vec![0 as StateIndex; width];
    let mut hi: Vec<StateIndex> =
        diagram.path_nodes().iter().map(|&id| diagram.node(id).num_states() as StateIndex).collect();
    for &(id, state) in &opts.fixed {
        let node = diagram.node(id);
        let pos = diagram.position(id).ok_or_else(|| PathError::NotPathNode(node.name().to_string()))?;
        if state as usize >= node.num_states() || state < lo[pos] || state >= hi[pos] {
            // an out-of-range pin, or two conflicting pins on one node
            return Err(PathError::InvalidState { node: node.name().to_string(), state: state.to_string() });
        }
        lo[pos] = state;
        hi[pos] = state + 1;
    }
    let candidates = lo.iter().zip(&hi).map(|(&l, &h)| (h - l) as u128).fold(1u128, |a, b| a.saturating_mul(b));
    if candidates > opts.cap {
        return Err(PathError::PathExplosion { paths: candidates, cap: opts.cap });
    }

    let decisions = diagram.decision_nodes().to_vec();
    let mut states = Vec::with_capacity(candidates as usize * width);
    let mut probabilities = Vec::with_capacity(candidates as usize);
    let mut utilities = Vec::with_capacity(candidates as usize);
    let mut decision_info = Vec::with_capacity(candidates as usize * decisions.len());
    let mut removed = 0usize;
    let mut removed_mass = 0.0;

    let mut path = lo.clone();
    'walk: loop {
        if opts.forbidden.iter().any(|f| f.matches(&path)) {
            let p = path_probability(diagram, &path);
            if p > 0.0 {
                removed += 1;
                removed_mass += p;
            }
        } else {
            states.extend_from_slice(&path);
            probabilities.push(path_probability(diagram, &path));
            utilities.push(path_utility(diagram, &path));
            decision_info.extend(decisions.iter().map(|&d| diagram.info_state_of(d, &path) as u32));
        }
        // odometer, last coordinate fastest
        let mut k = width;
        loop {
            if k == 0 {
                break 'walk;
            }
            k -= 1;
            path[k] += 1;
            if path[k] < hi[k] {
                break;
            }
            path[k] = lo[k];
        }
    }

    let mut warnings = Vec::new();
    if removed > 0 {
        let w = PathWarning::ForbiddenPositiveProbability { paths: removed, mass: removed_mass };
        log::warn!("{w}");
        warnings.push(w);
    }

    let n_paths = probabilities.len();
    let n_dec = decisions.len();
    let mut lcp_starts = Vec::with_capacity(n_dec);
    let mut lcp_paths = Vec::with_capacity(n_dec);
    for (k, &d) in decisions.iter().enumerate() {
        let node = diagram.node(d);
        let n_states = node.num_states();
        let pos = diagram.position(d).unwrap();
        let n_keys = node.info_state_count() * n_states;
        let key = |i: usize| decision_info[i * n_dec + k] as usize * n_states + states[i * width + pos] as usize;
        let mut counts = vec![0usize; n_keys + 1];
        for i in 0..n_paths {
            counts[key(i) + 1] += 1;
        }
        for c in 1..=n_keys {
            counts[c] += counts[c - 1];
        }
        let mut fill = counts.clone();
        let mut members = vec![0u32; n_paths];
        for i in 0..n_paths {
            let slot = &mut fill[key(i)];
            members[*slot] = i as u32;
            *slot += 1;
        }
        lcp_starts.push(counts);
        lcp_paths.push(members);
    }

    Ok(PathTable {
        width,
        states,
        probabilities,
        utilities,
        decisions,
        decision_info,
        lcp_starts,
        lcp_paths,
        total_paths: diagram.path_count(),
        filtered: !opts.forbidden.is_empty() || !opts.fixed.is_empty(),
        warnings,
    })
}

impl PathTable {
    /// |S*|
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// |S|, the unfiltered number of paths of the diagram.
    pub fn total_paths(&self) -> u128 {
        self.total_paths
    }

    /// Whether forbidden patterns or pins were applied.
    pub fn is_filtered(&self) -> bool {
        self.filtered
    }

    pub fn warnings(&self) -> &[PathWarning] {
        &self.warnings
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// State vector of path `index` (its lexicographic rank among S*).
    pub fn path(&self, index: usize) -> &[StateIndex] {
        &self.states[index * self.width..(index + 1) * self.width]
    }

    pub fn paths(&self) -> impl ExactSizeIterator<Item = &[StateIndex]> + '_ {
        (0..self.len()).map(move |i| self.path(i))
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    pub fn utility(&self, index: usize) -> f64 {
        self.utilities[index]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    /// Decision nodes in topological order; `slot` arguments index this list.
    pub fn decisions(&self) -> &[NodeId] {
        &self.decisions
    }

    pub fn decision_slot(&self, id: NodeId) -> Option<usize> {
        self.decisions.iter().position(|&d| d == id)
    }

    /// Information-state index of decision `slot` on path `index`.
    pub fn decision_info(&self, index: usize, slot: usize) -> usize {
        self.decision_info[index * self.decisions.len() + slot] as usize
    }

    /// S*_{s_j | s_I(j)} for the decision in `slot`.
    pub fn lcp_by_slot(&self, slot: usize, key: usize) -> &[u32] {
        let starts = &self.lcp_starts[slot];
        &self.lcp_paths[slot][starts[key]..starts[key + 1]]
    }
}

fn decision_slot(diagram: &InfluenceDiagram, table: &PathTable, j: NodeId) -> Result<usize, PathError> {
    if diagram.node(j).kind() != NodeKind::Decision {
        return Err(PathError::NotDecision(diagram.node(j).name().to_string()));
    }
    table.decision_slot(j).ok_or_else(|| PathError::NotDecision(diagram.node(j).name().to_string()))
}

/// Indices of the effective paths containing the pair (s_I(j), s_j).
pub fn locally_compatible_paths<'t>(
    diagram: &InfluenceDiagram,
    table: &'t PathTable,
    j: NodeId,
    info_state: usize,
    state: StateIndex,
) -> Result<&'t [u32], PathError> {
    let slot = decision_slot(diagram, table, j)?;
    let n_states = diagram.node(j).num_states();
    Ok(table.lcp_by_slot(slot, info_state * n_states + state as usize))
}

/// Γ(s_j | s_I(j)) = min{|S*_{s_j|s_I(j)}|, |S_{s_j|s_I(j)}| / Π_{k ∈ D \ ({j} ∪ I(j))} |S_k|}.
///
/// The second term equals the product of the state counts of the chance
/// nodes outside I(j).
pub fn gamma(
    diagram: &InfluenceDiagram,
    table: &PathTable,
    j: NodeId,
    state: StateIndex,
    info_state: usize,
) -> Result<u64, PathError> {
    let effective = locally_compatible_paths(diagram, table, j, info_state, state)?.len() as u64;
    let info_set = diagram.node(j).info_set();
    let active: u128 = diagram
        .chance_nodes()
        .iter()
        .filter(|c| !info_set.contains(c))
        .map(|&c| diagram.node(c).num_states() as u128)
        .fold(1u128, |a, b| a.saturating_mul(b));
    Ok(effective.min(active.min(u64::MAX as u128) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{DiagramBuilder, Node, ProbabilityTensor, UtilityTensor};

    fn binary_pair() -> InfluenceDiagram {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C1", &["a", "b"], &[])).unwrap();
        b.add_node(Node::chance("C2", &["a", "b"], &["C1"])).unwrap();
        b.add_node(Node::value("V", &["C2"])).unwrap();
        b.set_probabilities("C1", ProbabilityTensor::from_rows(vec![vec![0.4, 0.6]])).unwrap();
        b.set_probabilities("C2", ProbabilityTensor::from_rows(vec![vec![0.7, 0.3], vec![0.2, 0.8]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![100.0, 0.0])).unwrap();
        b.freeze().unwrap()
    }

    #[test]
    fn chain_probability_is_product_of_lookups() {
        let d = binary_pair();
        assert!((path_probability(&d, &[0, 0]) - 0.28).abs() < 1e-15);
        assert_eq!(path_utility(&d, &[1, 0]), 100.0);
    }

    #[test]
    fn single_root_factor() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["a", "b"], &[])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.4, 0.6]])).unwrap();
        let d = b.freeze().unwrap();
        assert_eq!(path_probability(&d, &[0]), 0.4);
    }

    #[test]
    fn forbidding_one_pair_leaves_three_paths() {
        let d = binary_pair();
        let f = ForbiddenPattern::from_names(&d, &[("C1", &["a"]), ("C2", &["a"])]).unwrap();
        let t = enumerate_paths(&d, &EnumerationOptions { forbidden: vec![f], ..Default::default() }).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.path(0), &[0, 1]);
        assert_eq!(t.warnings().len(), 1);
    }

    #[test]
    fn pins_restrict_enumeration() {
        let d = binary_pair();
        let c1 = d.id("C1").unwrap();
        let t = enumerate_paths(&d, &EnumerationOptions { fixed: vec![(c1, 1)], ..Default::default() }).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.paths().all(|p| p[0] == 1));
        assert!(t.is_filtered());
    }

    #[test]
    fn cap_is_enforced() {
        let d = binary_pair();
        let err = enumerate_paths(&d, &EnumerationOptions { cap: 3, ..Default::default() }).unwrap_err();
        assert_eq!(err, PathError::PathExplosion { paths: 4, cap: 3 });
    }

    #[test]
    fn value_nodes_cannot_be_pinned_or_forbidden() {
        let d = binary_pair();
        let v = d.id("V").unwrap();
        assert!(matches!(ForbiddenPattern::new(&d, vec![(v, vec![0])]), Err(PathError::NotPathNode(_))));
        assert_eq!(ForbiddenPattern::new(&d, vec![]), Err(PathError::EmptyPattern));
    }

    #[test]
    fn decision_only_diagram() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::decision("D", &["x", "y"], &[])).unwrap();
        b.add_node(Node::value("V", &["D"])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![1.0, 2.0])).unwrap();
        let d = b.freeze().unwrap();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        assert!(t.probabilities().iter().all(|&p| p == 1.0));
        let j = d.id("D").unwrap();
        assert_eq!(locally_compatible_paths(&d, &t, j, 0, 0).unwrap(), &[0]);
        assert_eq!(locally_compatible_paths(&d, &t, j, 0, 1).unwrap(), &[1]);
        // empty product
        assert_eq!(gamma(&d, &t, j, 0, 0).unwrap(), 1);
    }

    #[test]
    fn gamma_is_zero_when_everything_is_forbidden() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["a", "b"], &[])).unwrap();
        b.add_node(Node::decision("D", &["x", "y"], &["C"])).unwrap();
        b.add_node(Node::value("V", &["D"])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.5, 0.5]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![1.0, 2.0])).unwrap();
        let d = b.freeze().unwrap();
        let f = ForbiddenPattern::from_names(&d, &[("D", &["x"])]).unwrap();
        let t = enumerate_paths(&d, &EnumerationOptions { forbidden: vec![f], ..Default::default() }).unwrap();
        let j = d.id("D").unwrap();
        assert_eq!(gamma(&d, &t, j, 0, 0).unwrap(), 0);
        assert_eq!(gamma(&d, &t, j, 1, 0).unwrap(), 1);
    }

    #[test]
    fn gamma_rejects_chance_nodes() {
        let d = binary_pair();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        assert!(matches!(gamma(&d, &t, d.id("C1").unwrap(), 0, 0), Err(PathError::NotDecision(_))));
    }
}
