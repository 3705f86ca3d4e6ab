//! The JSON diagram document read and written by the command-line tool.
//!
//! ```json
//! {
//!   "nodes": [{"name": "C", "kind": "chance", "states": ["a", "b"], "info_set": []}, ...],
//!   "probabilities": {"C": [0.4, 0.6]},
//!   "utilities": {"V": [1, 0, 0, 1]},
//!   "forbidden": [[{"node": "T1", "states": ["TRS"]}, {"node": "T2", "states": ["TRS"]}]],
//!   "fixed": [{"node": "R0", "state": "r2"}],
//!   "family": {"name": "pigfarm", "n": 3}
//! }
//! ```
//!
//! Probability tables nest one array level per parent, in information-set
//! order, with the owner's distribution innermost. Any nesting that flattens
//! to the right length is accepted on input.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::diagram::{DiagramBuilder, DiagramError, InfluenceDiagram, Node, NodeId, NodeKind, ProbabilityTensor, StateIndex, UtilityTensor};
use crate::paths::{EnumerationOptions, ForbiddenPattern, PathError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("ParseError: {0}")]
    Parse(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Paths(#[from] PathError),
}

/// Benchmark family a document was generated from; enables closed-form
/// size predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroupJson {
    node: String,
    states: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PinJson {
    node: String,
    state: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocumentJson {
    nodes: Vec<Node>,
    #[serde(default)]
    probabilities: Map<String, Value>,
    #[serde(default)]
    utilities: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    forbidden: Vec<Vec<GroupJson>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    fixed: Vec<PinJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<Family>,
}

/// A diagram plus the enumeration settings stored alongside it.
#[derive(Debug, Clone)]
pub struct DiagramDocument {
    pub diagram: InfluenceDiagram,
    pub forbidden: Vec<ForbiddenPattern>,
    pub fixed: Vec<(NodeId, StateIndex)>,
    pub family: Option<Family>,
}

impl DiagramDocument {
    pub fn new(diagram: InfluenceDiagram) -> Self {
        DiagramDocument { diagram, forbidden: Vec::new(), fixed: Vec::new(), family: None }
    }

    pub fn with_family(mut self, name: &str, n: usize) -> Self {
        self.family = Some(Family { name: name.to_string(), n });
        self
    }

    pub fn enumeration_options(&self, cap: u128) -> EnumerationOptions {
        EnumerationOptions { forbidden: self.forbidden.clone(), fixed: self.fixed.clone(), cap }
    }

    pub fn from_json_str(text: &str) -> Result<Self, IoError> {
        let doc: DocumentJson = serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
        let mut b = DiagramBuilder::new();
        b.add_nodes(doc.nodes.clone())?;
        for (name, value) in &doc.probabilities {
            let node = doc
                .nodes
                .iter()
                .find(|n| &n.name == name)
                .ok_or_else(|| DiagramError::UnknownNode(name.clone()))?;
            let flat = flatten(name, value)?;
            b.set_probabilities(name, ProbabilityTensor::from_flat(&flat, node.states.len().max(1)))?;
        }
        for (name, value) in &doc.utilities {
            b.set_utilities(name, UtilityTensor::new(flatten(name, value)?))?;
        }
        let diagram = b.freeze()?;

        let mut forbidden = Vec::with_capacity(doc.forbidden.len());
        for groups in &doc.forbidden {
            let named: Vec<(&str, Vec<&str>)> =
                groups.iter().map(|g| (g.node.as_str(), g.states.iter().map(String::as_str).collect())).collect();
            let refs: Vec<(&str, &[&str])> = named.iter().map(|(n, s)| (*n, s.as_slice())).collect();
            forbidden.push(ForbiddenPattern::from_names(&diagram, &refs)?);
        }
        let mut fixed = Vec::with_capacity(doc.fixed.len());
        for pin in &doc.fixed {
            let id = diagram.require(&pin.node)?;
            let state = diagram
                .node(id)
                .state_index(&pin.state)
                .ok_or_else(|| DiagramError::UnknownState { node: pin.node.clone(), state: pin.state.clone() })?;
            fixed.push((id, state));
        }
        Ok(DiagramDocument { diagram, forbidden, fixed, family: doc.family })
    }

    pub fn to_json(&self) -> Value {
        let d = &self.diagram;
        let name = |id: NodeId| d.node(id).name().to_string();
        let nodes = d
            .nodes()
            .iter()
            .map(|n| Node {
                name: n.name().to_string(),
                kind: n.kind(),
                states: n.states().to_vec(),
                info_set: n.info_set().iter().map(|&p| name(p)).collect(),
            })
            .collect();
        let mut probabilities = Map::new();
        let mut utilities = Map::new();
        for (i, n) in d.nodes().iter().enumerate() {
            let id = NodeId(i);
            match n.kind() {
                NodeKind::Chance => {
                    let mut dims: Vec<usize> = n.info_set().iter().map(|&p| d.node(p).num_states()).collect();
                    dims.push(n.num_states());
                    probabilities.insert(n.name().to_string(), nest(d.probability_table(id), &dims));
                }
                NodeKind::Value => {
                    utilities.insert(n.name().to_string(), Value::from(d.utility_table(id).to_vec()));
                }
                NodeKind::Decision => {}
            }
        }
        let forbidden = self
            .forbidden
            .iter()
            .map(|f| {
                f.groups()
                    .iter()
                    .map(|(id, states)| GroupJson {
                        node: name(*id),
                        states: states.iter().map(|&s| d.node(*id).states()[s as usize].clone()).collect(),
                    })
                    .collect()
            })
            .collect();
        let fixed = self
            .fixed
            .iter()
            .map(|&(id, s)| PinJson { node: name(id), state: d.node(id).states()[s as usize].clone() })
            .collect();
        serde_json::to_value(DocumentJson { nodes, probabilities, utilities, forbidden, fixed, family: self.family.clone() })
            .expect("document serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("document serializes") + "\n"
    }
}

fn flatten(owner: &str, value: &Value) -> Result<Vec<f64>, IoError> {
    fn walk(v: &Value, out: &mut Vec<f64>) -> bool {
        match v {
            Value::Array(items) => items.iter().all(|x| walk(x, out)),
            Value::Number(n) => n.as_f64().map(|x| out.push(x)).is_some(),
            _ => false,
        }
    }
    let mut out = Vec::new();
    if walk(value, &mut out) {
        Ok(out)
    } else {
        Err(IoError::Parse(format!("table of `{owner}` must contain only numbers and arrays")))
    }
}

fn nest(values: &[f64], dims: &[usize]) -> Value {
    match dims {
        [] | [_] => Value::from(values.to_vec()),
        [first, rest @ ..] => {
            let chunk = values.len() / first.max(&1);
            Value::Array(values.chunks(chunk.max(1)).map(|c| nest(c, rest)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MATCHING: &str = r#"{
      "nodes": [
        {"name": "C", "kind": "chance", "states": ["c0", "c1"]},
        {"name": "D", "kind": "decision", "states": ["d0", "d1"], "info_set": ["C"]},
        {"name": "V", "kind": "value", "info_set": ["C", "D"]}
      ],
      "probabilities": {"C": [0.4, 0.6]},
      "utilities": {"V": [[1, 0], [0, 1]]},
      "forbidden": [[{"node": "C", "states": ["c1"]}, {"node": "D", "states": ["d0"]}]]
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let doc = DiagramDocument::from_json_str(MATCHING).unwrap();
        assert_eq!(doc.diagram.utility_table(doc.diagram.id("V").unwrap()), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(doc.forbidden.len(), 1);
        let again = DiagramDocument::from_json_str(&doc.to_json_string()).unwrap();
        assert_eq!(again.diagram, doc.diagram);
        assert_eq!(again.forbidden, doc.forbidden);
    }

    #[test]
    fn nested_tables_follow_parents() {
        let d = crate::benchmarks::gen_pigfarm(1, 0, false);
        let doc = DiagramDocument::new(d.clone()).with_family("pigfarm", 1);
        let json = doc.to_json();
        assert_eq!(json["probabilities"]["H2"][0][1], serde_json::json!([0.9, 0.09999999999999998]));
        let back = DiagramDocument::from_json_str(&json.to_string()).unwrap();
        assert_eq!(back.diagram, d);
        assert_eq!(back.family, Some(Family { name: "pigfarm".into(), n: 1 }));
    }

    #[test]
    fn forward_references_reach_cycle_detection() {
        let text = r#"{"nodes": [
            {"name": "A", "kind": "chance", "states": ["x", "y"], "info_set": ["B"]},
            {"name": "B", "kind": "chance", "states": ["x", "y"], "info_set": ["A"]}
        ], "probabilities": {"A": [[0.5, 0.5], [0.5, 0.5]], "B": [[0.5, 0.5], [0.5, 0.5]]}}"#;
        let err = DiagramDocument::from_json_str(text).unwrap_err();
        assert!(err.to_string().starts_with("CycleDetected"), "{err}");
    }

    #[test]
    fn bad_json_is_a_parse_error() {
        assert!(matches!(DiagramDocument::from_json_str("{"), Err(IoError::Parse(_))));
        let text = MATCHING.replace("[0.4, 0.6]", "[0.4, \"x\"]");
        assert!(matches!(DiagramDocument::from_json_str(&text), Err(IoError::Parse(_))));
    }
}
