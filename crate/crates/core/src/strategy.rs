//! Deterministic decision strategies, path compatibility and expected utility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::diagram::{InfluenceDiagram, NodeId, StateIndex};
use crate::paths::PathTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("strategy covers {found} decision nodes, diagram has {expected}")]
    WrongNodeCount { expected: usize, found: usize },
    #[error("local strategy for `{found}` given where `{expected}` was expected")]
    WrongNode { expected: String, found: String },
    #[error("local strategy of `{node}` defines {found} of {expected} information states")]
    NotTotal { node: String, expected: usize, found: usize },
    #[error("local strategy of `{node}` chooses state {state}, which does not exist")]
    InvalidChoice { node: String, state: usize },
    #[error("unknown decision node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no information state `{key}`")]
    UnknownInfoState { node: String, key: String },
    #[error("node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },
    #[error("malformed strategy JSON: {0}")]
    Malformed(String),
}

/// Z_j: one chosen alternative per information state of decision node j.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalStrategy {
    node: NodeId,
    choices: Vec<StateIndex>,
}

impl LocalStrategy {
    pub fn new(node: NodeId, choices: Vec<StateIndex>) -> Self {
        LocalStrategy { node, choices }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn choices(&self) -> &[StateIndex] {
        &self.choices
    }

    pub fn choice(&self, info_state: usize) -> StateIndex {
        self.choices[info_state]
    }
}

/// Z = (Z_j) over all decision nodes, kept in topological order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Strategy {
    locals: Vec<LocalStrategy>,
}

impl Strategy {
    /// Validates totality and ranges against the diagram.
    pub fn new(diagram: &InfluenceDiagram, locals: Vec<LocalStrategy>) -> Result<Self, StrategyError> {
        let decisions = diagram.decision_nodes();
        if locals.len() != decisions.len() {
            return Err(StrategyError::WrongNodeCount { expected: decisions.len(), found: locals.len() });
        }
        for (local, &j) in locals.iter().zip(decisions) {
            let node = diagram.node(j);
            if local.node != j {
                return Err(StrategyError::WrongNode {
                    expected: node.name().to_string(),
                    found: diagram.node(local.node).name().to_string(),
                });
            }
            if local.choices.len() != node.info_state_count() {
                return Err(StrategyError::NotTotal {
                    node: node.name().to_string(),
                    expected: node.info_state_count(),
                    found: local.choices.len(),
                });
            }
            if let Some(&bad) = local.choices.iter().find(|&&c| c as usize >= node.num_states()) {
                return Err(StrategyError::InvalidChoice { node: node.name().to_string(), state: bad as usize });
            }
        }
        Ok(Strategy { locals })
    }

    /// Builds a strategy from per-decision choice vectors in topological order.
    pub fn from_choices(diagram: &InfluenceDiagram, choices: Vec<Vec<StateIndex>>) -> Result<Self, StrategyError> {
        let expected = diagram.decision_nodes().len();
        if choices.len() != expected {
            return Err(StrategyError::WrongNodeCount { expected, found: choices.len() });
        }
        let locals =
            diagram.decision_nodes().iter().zip(choices).map(|(&j, c)| LocalStrategy::new(j, c)).collect();
        Self::new(diagram, locals)
    }

    /// The strategy choosing the first alternative everywhere.
    pub fn first_alternatives(diagram: &InfluenceDiagram) -> Self {
        let locals = diagram
            .decision_nodes()
            .iter()
            .map(|&j| LocalStrategy::new(j, vec![0; diagram.node(j).info_state_count()]))
            .collect();
        Strategy { locals }
    }

    pub fn locals(&self) -> &[LocalStrategy] {
        &self.locals
    }

    /// Z_j(s_I(j)) for the decision at `slot` in topological order.
    pub fn choice(&self, slot: usize, info_state: usize) -> StateIndex {
        self.locals[slot].choices[info_state]
    }

    pub(crate) fn set_choice(&mut self, slot: usize, info_state: usize, state: StateIndex) {
        self.locals[slot].choices[info_state] = state;
    }

    /// Concatenated choices; the lexicographic order on this vector is the
    /// tie-breaking order of exhaustive search.
    pub fn encoding(&self) -> Vec<StateIndex> {
        self.locals.iter().flat_map(|l| l.choices.iter().copied()).collect()
    }

    /// JSON object `node -> {"parent1,parent2" -> state}` using state names.
    pub fn to_json(&self, diagram: &InfluenceDiagram) -> Value {
        let mut out = Map::new();
        for local in &self.locals {
            let node = diagram.node(local.node);
            let mut table = Map::new();
            for (info, &c) in local.choices.iter().enumerate() {
                table.insert(
                    diagram.info_state_names(local.node, info).join(","),
                    Value::String(node.states()[c as usize].clone()),
                );
            }
            out.insert(node.name().to_string(), Value::Object(table));
        }
        Value::Object(out)
    }

    pub fn from_json(diagram: &InfluenceDiagram, value: &Value) -> Result<Self, StrategyError> {
        let obj = value.as_object().ok_or_else(|| StrategyError::Malformed("expected an object".into()))?;
        for name in obj.keys() {
            match diagram.id(name) {
                Some(id) if diagram.decision_nodes().contains(&id) => {}
                _ => return Err(StrategyError::UnknownNode(name.clone())),
            }
        }
        let mut locals = Vec::new();
        for &j in diagram.decision_nodes() {
            let node = diagram.node(j);
            let table = obj
                .get(node.name())
                .and_then(Value::as_object)
                .ok_or_else(|| StrategyError::NotTotal {
                    node: node.name().to_string(),
                    expected: node.info_state_count(),
                    found: 0,
                })?;
            let keys: Vec<String> =
                (0..node.info_state_count()).map(|i| diagram.info_state_names(j, i).join(",")).collect();
            for k in table.keys() {
                if !keys.contains(k) {
                    return Err(StrategyError::UnknownInfoState { node: node.name().to_string(), key: k.clone() });
                }
            }
            let mut choices = Vec::with_capacity(keys.len());
            for key in &keys {
                let chosen = table.get(key).and_then(Value::as_str).ok_or_else(|| StrategyError::NotTotal {
                    node: node.name().to_string(),
                    expected: keys.len(),
                    found: table.len(),
                })?;
                let idx = node.state_index(chosen).ok_or_else(|| StrategyError::UnknownState {
                    node: node.name().to_string(),
                    state: chosen.to_string(),
                })?;
                choices.push(idx);
            }
            locals.push(LocalStrategy::new(j, choices));
        }
        Strategy::new(diagram, locals)
    }
}

/// Z is compatible with s when Z_j(s_I(j)) = s_j for every decision node j.
pub fn is_compatible(diagram: &InfluenceDiagram, strategy: &Strategy, path: &[StateIndex]) -> bool {
    diagram.decision_nodes().iter().enumerate().all(|(slot, &j)| {
        let pos = diagram.position(j).expect("decisions are path nodes");
        strategy.choice(slot, diagram.info_state_of(j, path)) == path[pos]
    })
}

/// Compatibility of a tabulated path, using the table's cached information states.
pub(crate) fn is_compatible_indexed(
    positions: &[usize],
    table: &PathTable,
    strategy: &Strategy,
    index: usize,
) -> bool {
    let path = table.path(index);
    positions
        .iter()
        .enumerate()
        .all(|(slot, &pos)| strategy.choice(slot, table.decision_info(index, slot)) == path[pos])
}

pub(crate) fn decision_positions(diagram: &InfluenceDiagram) -> Vec<usize> {
    diagram.decision_nodes().iter().map(|&j| diagram.position(j).unwrap()).collect()
}

/// Σ p(s)·U(s) over the effective paths compatible with the strategy,
/// accumulated in path-index order.
pub fn expected_utility(diagram: &InfluenceDiagram, table: &PathTable, strategy: &Strategy) -> f64 {
    let positions = decision_positions(diagram);
    let mut eu = 0.0;
    for i in 0..table.len() {
        if is_compatible_indexed(&positions, table, strategy, i) {
            eu += table.probability(i) * table.utility(i);
        }
    }
    eu
}

/// Σ p(s) over the effective paths compatible with the strategy.
pub fn compatible_probability(diagram: &InfluenceDiagram, table: &PathTable, strategy: &Strategy) -> f64 {
    let positions = decision_positions(diagram);
    (0..table.len()).filter(|&i| is_compatible_indexed(&positions, table, strategy, i)).map(|i| table.probability(i)).sum()
}

/// Independently uniform choice per (decision, information state).
pub fn random_strategy(diagram: &InfluenceDiagram, seed: u64) -> Strategy {
    random_strategy_stream(diagram, seed, 0)
}

/// Like [`random_strategy`], drawing from ChaCha stream `stream` of the seed.
/// Stream 0 reproduces [`random_strategy`].
pub fn random_strategy_stream(diagram: &InfluenceDiagram, seed: u64, stream: u64) -> Strategy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let locals = diagram
        .decision_nodes()
        .iter()
        .map(|&j| {
            let node = diagram.node(j);
            let n = node.num_states() as StateIndex;
            LocalStrategy::new(j, (0..node.info_state_count()).map(|_| rng.gen_range(0..n)).collect())
        })
        .collect();
    Strategy { locals }
}

/// Every strategy of the diagram in lexicographic order of [`Strategy::encoding`].
pub fn all_strategies(diagram: &InfluenceDiagram) -> AllStrategies {
    let radices = diagram
        .decision_nodes()
        .iter()
        .flat_map(|&j| {
            let node = diagram.node(j);
            std::iter::repeat(node.num_states() as StateIndex).take(node.info_state_count())
        })
        .collect();
    AllStrategies { next: Some(Strategy::first_alternatives(diagram)), radices }
}

/// Iterator returned by [`all_strategies`].
pub struct AllStrategies {
    next: Option<Strategy>,
    radices: Vec<StateIndex>,
}

impl Iterator for AllStrategies {
    type Item = Strategy;

    fn next(&mut self) -> Option<Strategy> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut coords: Vec<(usize, usize)> = Vec::with_capacity(self.radices.len());
        for (slot, l) in succ.locals.iter().enumerate() {
            coords.extend((0..l.choices.len()).map(|k| (slot, k)));
        }
        for (&(slot, k), &radix) in coords.iter().zip(&self.radices).rev() {
            let c = &mut succ.locals[slot].choices[k];
            *c += 1;
            if *c < radix {
                self.next = Some(succ);
                return Some(current);
            }
            *c = 0;
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{DiagramBuilder, Node, ProbabilityTensor, UtilityTensor};
    use crate::paths::enumerate_paths;

    /// C (0.4/0.6) -> D(I={C}) -> V(I={C,D}) rewarding D matching C.
    fn matching_game() -> InfluenceDiagram {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["c0", "c1"], &[])).unwrap();
        b.add_node(Node::decision("D", &["d0", "d1"], &["C"])).unwrap();
        b.add_node(Node::value("V", &["C", "D"])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.4, 0.6]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![1.0, 0.0, 0.0, 1.0])).unwrap();
        b.freeze().unwrap()
    }

    #[test]
    fn matching_strategy_has_unit_expected_utility() {
        let d = matching_game();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        let best = Strategy::from_choices(&d, vec![vec![0, 1]]).unwrap();
        let worst = Strategy::from_choices(&d, vec![vec![1, 0]]).unwrap();
        assert_eq!(expected_utility(&d, &t, &best), 1.0);
        assert_eq!(expected_utility(&d, &t, &worst), 0.0);
    }

    #[test]
    fn no_decisions_means_everything_is_compatible() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["a", "b"], &[])).unwrap();
        b.add_node(Node::value("V", &[])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.3, 0.7]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![4.25])).unwrap();
        let d = b.freeze().unwrap();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        let z = Strategy::from_choices(&d, vec![]).unwrap();
        assert!(t.paths().all(|p| is_compatible(&d, &z, p)));
        assert!((expected_utility(&d, &t, &z) - 4.25).abs() < 1e-12);
    }

    #[test]
    fn single_choice_excludes_other_alternative() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::decision("D", &["x", "y"], &[])).unwrap();
        b.add_node(Node::value("V", &["D"])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![1.0, 2.0])).unwrap();
        let d = b.freeze().unwrap();
        let z = Strategy::from_choices(&d, vec![vec![0]]).unwrap();
        assert!(is_compatible(&d, &z, &[0]));
        assert!(!is_compatible(&d, &z, &[1]));
    }

    #[test]
    fn validation_rejects_partial_or_out_of_range() {
        let d = matching_game();
        assert!(matches!(Strategy::from_choices(&d, vec![vec![0]]), Err(StrategyError::NotTotal { .. })));
        assert!(matches!(Strategy::from_choices(&d, vec![vec![0, 2]]), Err(StrategyError::InvalidChoice { .. })));
        assert!(matches!(Strategy::from_choices(&d, vec![]), Err(StrategyError::WrongNodeCount { .. })));
    }

    #[test]
    fn json_round_trip() {
        let d = matching_game();
        let z = Strategy::from_choices(&d, vec![vec![0, 1]]).unwrap();
        let json = z.to_json(&d);
        assert_eq!(json, serde_json::json!({"D": {"c0": "d0", "c1": "d1"}}));
        assert_eq!(Strategy::from_json(&d, &json).unwrap(), z);
        let bad = serde_json::json!({"D": {"c0": "d0"}});
        assert!(matches!(Strategy::from_json(&d, &bad), Err(StrategyError::NotTotal { .. })));
    }

    #[test]
    fn random_strategy_is_seeded() {
        let d = matching_game();
        assert_eq!(random_strategy(&d, 11), random_strategy(&d, 11));
        assert_eq!(random_strategy(&d, 11), random_strategy_stream(&d, 11, 0));
    }

    #[test]
    fn single_state_decision_is_forced() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["a", "b", "c"], &[])).unwrap();
        b.add_node(Node::decision("D", &["only"], &["C"])).unwrap();
        b.add_node(Node::value("V", &["D"])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.2, 0.3, 0.5]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![1.0])).unwrap();
        let d = b.freeze().unwrap();
        for seed in 0..20 {
            assert_eq!(random_strategy(&d, seed).locals()[0].choices(), &[0, 0, 0]);
        }
    }

    #[test]
    fn random_choices_are_fair() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::decision("D", &["x", "y"], &[])).unwrap();
        b.add_node(Node::value("V", &["D"])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![0.0, 0.0])).unwrap();
        let d = b.freeze().unwrap();
        let draws = 10_000;
        let ones = (0..draws).filter(|&s| random_strategy(&d, s).choice(0, 0) == 1).count();
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn all_strategies_in_encoding_order() {
        let mut b = crate::diagram::DiagramBuilder::new();
        b.add_node(crate::diagram::Node::chance("C", &["a", "b"], &[])).unwrap();
        b.add_node(crate::diagram::Node::decision("D", &["x", "y", "z"], &["C"])).unwrap();
        b.set_probabilities("C", crate::diagram::ProbabilityTensor::from_rows(vec![vec![0.5, 0.5]])).unwrap();
        let d = b.freeze().unwrap();
        let all: Vec<Vec<StateIndex>> = all_strategies(&d).map(|z| z.encoding()).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[8], vec![2, 2]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }
}
