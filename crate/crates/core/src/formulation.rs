//! Deterministic-equivalent MILP formulations of an influence diagram.
//!
//! Two formulations are compiled into a solver-agnostic [`ModelIR`]:
//!
//! * the path-probability form, with continuous π(s) ∈ [0, p(s)], one
//!   `π(s) ≤ z(s_j | s_I(j))` row per decision and path, and the optional lower
//!   bound `π(s) ≥ p(s) + Σ_j z(s_j | s_I(j)) − |D|`;
//! * the locally-compatible-path form, with x(s) ∈ [0, 1] standing for
//!   π(s) = p(s)·x(s), one `Σ x(s) ≤ Γ·z` row per (j, s_I(j), s_j) and the
//!   probability row `Σ p(s)·x(s) = 1`.
//!
//! Both share the one-hot rows `Σ_{s_j} z(s_j | s_I(j)) = 1` and the binary
//! z-variables. The z-variables always come first in the variable list, one
//! per (decision in topological order, information state, alternative),
//! followed by one path variable per effective path.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::diagram::{InfluenceDiagram, NodeId, StateIndex};
use crate::paths::{gamma, PathTable};
use crate::strategy::{decision_positions, is_compatible_indexed, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("EmptyPathTable: no effective paths to formulate")]
    EmptyPathTable,
    #[error("NameCollision: `{0}` is produced twice after sanitization")]
    NameCollision(String),
    #[error("ModelMismatch: {0}")]
    ModelMismatch(String),
    #[error("NonPositiveScale: scale factor {0} must be positive")]
    NonPositiveScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Original,
    Improved,
}

impl std::fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormulationKind::Original => "original",
            FormulationKind::Improved => "improved",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableDef {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowFamily {
    /// Σ_{s_j} z(s_j | s_I(j)) = 1
    OneHot,
    /// π(s) ≤ z, or Σ x(s) ≤ Γ z
    LocalCompatibility,
    /// π(s) ≥ p(s) + Σ z − |D|
    LowerBound,
    /// Σ π(s) = 1, or Σ p(s) x(s) = 1
    ProbabilityCut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub name: String,
    /// (variable index, coefficient); coefficients are never zero.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub family: RowFamily,
}

/// Whether the π lower-bound rows are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LowerBoundMode {
    /// Only when some path utility is negative.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OriginalOptions {
    pub lower_bound: LowerBoundMode,
    pub probability_cut: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImprovedOptions {
    pub probability_cut: bool,
}

impl Default for ImprovedOptions {
    fn default() -> Self {
        ImprovedOptions { probability_cut: true }
    }
}

/// Options as resolved when the model was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResolvedOptions {
    pub lower_bound: bool,
    pub probability_cut: bool,
}

/// Meaning of a z-variable: (decision slot, information state, alternative).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ZKey {
    pub slot: usize,
    pub info_state: usize,
    pub state: StateIndex,
}

/// Solver-agnostic MILP, always a maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelIR {
    kind: FormulationKind,
    options: ResolvedOptions,
    variables: Vec<VariableDef>,
    constraints: Vec<LinearConstraint>,
    z_keys: Vec<ZKey>,
    // per decision slot: offset of its first z-variable
    z_offsets: Vec<usize>,
    decisions: Vec<NodeId>,
    decision_states: Vec<usize>,
    n_paths: usize,
    index: HashMap<String, usize>,
}

/// Replaces every character outside `[A-Za-z0-9_]` by `_`.
pub fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

struct Builder<'a> {
    diagram: &'a InfluenceDiagram,
    variables: Vec<VariableDef>,
    constraints: Vec<LinearConstraint>,
    z_keys: Vec<ZKey>,
    z_offsets: Vec<usize>,
    var_names: HashSet<String>,
    row_names: HashSet<String>,
}

impl<'a> Builder<'a> {
    fn new(diagram: &'a InfluenceDiagram) -> Self {
        Builder {
            diagram,
            variables: Vec::new(),
            constraints: Vec::new(),
            z_keys: Vec::new(),
            z_offsets: Vec::new(),
            var_names: HashSet::new(),
            row_names: HashSet::new(),
        }
    }

    fn info_label(&self, j: NodeId, info: usize) -> String {
        self.diagram.info_state_names(j, info).iter().map(|s| sanitize(s)).collect::<Vec<_>>().join("_")
    }

    fn var(&mut self, v: VariableDef) -> Result<usize, FormulationError> {
        if !self.var_names.insert(v.name.clone()) {
            return Err(FormulationError::NameCollision(v.name));
        }
        self.variables.push(v);
        Ok(self.variables.len() - 1)
    }

    fn row(&mut self, mut c: LinearConstraint) -> Result<(), FormulationError> {
        if !self.row_names.insert(c.name.clone()) {
            return Err(FormulationError::NameCollision(c.name));
        }
        c.terms.retain(|&(_, a)| a != 0.0);
        self.constraints.push(c);
        Ok(())
    }

    fn z_vars(&mut self) -> Result<(), FormulationError> {
        let d = self.diagram;
        for (slot, &j) in d.decision_nodes().iter().enumerate() {
            self.z_offsets.push(self.variables.len());
            let node = d.node(j);
            for info in 0..node.info_state_count() {
                let label = self.info_label(j, info);
                for (s, state) in node.states().iter().enumerate() {
                    let name = format!("z_{}__{}__{}", sanitize(node.name()), label, sanitize(state));
                    self.var(VariableDef { name, kind: VarKind::Binary, lower: 0.0, upper: 1.0, objective: 0.0 })?;
                    self.z_keys.push(ZKey { slot, info_state: info, state: s as StateIndex });
                }
            }
        }
        Ok(())
    }

    fn z_index(&self, slot: usize, info: usize, state: usize) -> usize {
        let n_states = self.diagram.node(self.diagram.decision_nodes()[slot]).num_states();
        self.z_offsets[slot] + info * n_states + state
    }

    fn one_hot_rows(&mut self) -> Result<(), FormulationError> {
        let d = self.diagram;
        for (slot, &j) in d.decision_nodes().iter().enumerate() {
            let node = d.node(j);
            for info in 0..node.info_state_count() {
                let terms = (0..node.num_states()).map(|s| (self.z_index(slot, info, s), 1.0)).collect();
                self.row(LinearConstraint {
                    name: format!("onehot_{}__{}", sanitize(node.name()), self.info_label(j, info)),
                    terms,
                    sense: Sense::Eq,
                    rhs: 1.0,
                    family: RowFamily::OneHot,
                })?;
            }
        }
        Ok(())
    }

    fn finish(self, kind: FormulationKind, options: ResolvedOptions, n_paths: usize) -> ModelIR {
        let d = self.diagram;
        let index = self.variables.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        ModelIR {
            kind,
            options,
            variables: self.variables,
            constraints: self.constraints,
            z_keys: self.z_keys,
            z_offsets: self.z_offsets,
            decisions: d.decision_nodes().to_vec(),
            decision_states: d.decision_nodes().iter().map(|&j| d.node(j).num_states()).collect(),
            n_paths,
            index,
        }
    }
}

/// Path-probability formulation with π-variables.
pub fn build_original(
    diagram: &InfluenceDiagram,
    table: &PathTable,
    opts: OriginalOptions,
) -> Result<ModelIR, FormulationError> {
    if table.is_empty() {
        return Err(FormulationError::EmptyPathTable);
    }
    let lower_bound = match opts.lower_bound {
        LowerBoundMode::On => true,
        LowerBoundMode::Off => false,
        LowerBoundMode::Auto => table.utilities().iter().any(|&u| u < 0.0),
    };
    let mut b = Builder::new(diagram);
    b.z_vars()?;
    let first_path = b.variables.len();
    for i in 0..table.len() {
        b.var(VariableDef {
            name: format!("pi_p{i}"),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: table.probability(i),
            objective: table.utility(i),
        })?;
    }
    b.one_hot_rows()?;
    let positions = decision_positions(diagram);
    for (slot, &j) in diagram.decision_nodes().iter().enumerate() {
        let name = sanitize(diagram.node(j).name());
        for i in 0..table.len() {
            let z = b.z_index(slot, table.decision_info(i, slot), table.path(i)[positions[slot]] as usize);
            b.row(LinearConstraint {
                name: format!("lcp_{name}__p{i}"),
                terms: vec![(first_path + i, 1.0), (z, -1.0)],
                sense: Sense::Le,
                rhs: 0.0,
                family: RowFamily::LocalCompatibility,
            })?;
        }
    }
    if lower_bound {
        let n_dec = diagram.decision_nodes().len() as f64;
        for i in 0..table.len() {
            let mut terms = vec![(first_path + i, 1.0)];
            for slot in 0..positions.len() {
                let z = b.z_index(slot, table.decision_info(i, slot), table.path(i)[positions[slot]] as usize);
                terms.push((z, -1.0));
            }
            b.row(LinearConstraint {
                name: format!("lb_p{i}"),
                terms,
                sense: Sense::Ge,
                rhs: table.probability(i) - n_dec,
                family: RowFamily::LowerBound,
            })?;
        }
    }
    if opts.probability_cut {
        b.row(LinearConstraint {
            name: "probcut".into(),
            terms: (0..table.len()).map(|i| (first_path + i, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
            family: RowFamily::ProbabilityCut,
        })?;
    }
    let options = ResolvedOptions { lower_bound, probability_cut: opts.probability_cut };
    Ok(b.finish(FormulationKind::Original, options, table.len()))
}

/// Locally-compatible-path formulation with x-variables and Γ coefficients.
pub fn build_improved(
    diagram: &InfluenceDiagram,
    table: &PathTable,
    opts: ImprovedOptions,
) -> Result<ModelIR, FormulationError> {
    if table.is_empty() {
        return Err(FormulationError::EmptyPathTable);
    }
    let mut b = Builder::new(diagram);
    b.z_vars()?;
    let first_path = b.variables.len();
    for i in 0..table.len() {
        b.var(VariableDef {
            name: format!("x_p{i}"),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: 1.0,
            objective: table.utility(i) * table.probability(i),
        })?;
    }
    b.one_hot_rows()?;
    for (slot, &j) in diagram.decision_nodes().iter().enumerate() {
        let node = diagram.node(j);
        for info in 0..node.info_state_count() {
            let label = b.info_label(j, info);
            for s in 0..node.num_states() {
                let members = table.lcp_by_slot(slot, info * node.num_states() + s);
                let g = gamma(diagram, table, j, s as StateIndex, info).expect("decision node");
                let mut terms: Vec<(usize, f64)> = members.iter().map(|&p| (first_path + p as usize, 1.0)).collect();
                terms.push((b.z_index(slot, info, s), -(g as f64)));
                b.row(LinearConstraint {
                    name: format!("lcp_{}__{}__{}", sanitize(node.name()), label, sanitize(&node.states()[s])),
                    terms,
                    sense: Sense::Le,
                    rhs: 0.0,
                    family: RowFamily::LocalCompatibility,
                })?;
            }
        }
    }
    if opts.probability_cut {
        b.row(LinearConstraint {
            name: "probcut".into(),
            terms: (0..table.len()).map(|i| (first_path + i, table.probability(i))).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
            family: RowFamily::ProbabilityCut,
        })?;
    }
    let options = ResolvedOptions { lower_bound: false, probability_cut: opts.probability_cut };
    Ok(b.finish(FormulationKind::Improved, options, table.len()))
}

/// Size accounting of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FormulationStats {
    pub n_binary: usize,
    pub n_continuous: usize,
    /// Linear rows, variable bounds excluded.
    pub n_constraints: usize,
    /// Two bounds per path variable.
    pub n_bounds: usize,
    pub one_hot_rows: usize,
    pub local_rows: usize,
    pub lower_bound_rows: usize,
    pub probability_cut_rows: usize,
    /// Constraint count under the closed-form convention: one-hot rows, local
    /// compatibility rows, lower-bound rows and path-variable bounds. The
    /// probability row is not part of this total.
    pub headline_total: usize,
}

pub fn stats(model: &ModelIR) -> FormulationStats {
    let count = |f: RowFamily| model.constraints.iter().filter(|c| c.family == f).count();
    let n_binary = model.variables.iter().filter(|v| v.kind == VarKind::Binary).count();
    let n_continuous = model.variables.len() - n_binary;
    let one_hot_rows = count(RowFamily::OneHot);
    let local_rows = count(RowFamily::LocalCompatibility);
    let lower_bound_rows = count(RowFamily::LowerBound);
    let n_bounds = 2 * n_continuous;
    FormulationStats {
        n_binary,
        n_continuous,
        n_constraints: model.constraints.len(),
        n_bounds,
        one_hot_rows,
        local_rows,
        lower_bound_rows,
        probability_cut_rows: count(RowFamily::ProbabilityCut),
        headline_total: one_hot_rows + local_rows + lower_bound_rows + n_bounds,
    }
}

/// (3 + |D|)|S| + Σ_j |S_I(j)|, the size of the π-form with lower bounds.
pub fn predicted_original(diagram: &InfluenceDiagram) -> u128 {
    let info: u128 = diagram.decision_nodes().iter().map(|&j| diagram.node(j).info_state_count() as u128).sum();
    (3 + diagram.decision_nodes().len() as u128) * diagram.path_count() + info
}

/// 2|S| + Σ_j (1 + |S_j|)|S_I(j)|, the size of the x-form.
pub fn predicted_improved(diagram: &InfluenceDiagram) -> u128 {
    let rows: u128 = diagram
        .decision_nodes()
        .iter()
        .map(|&j| {
            let n = diagram.node(j);
            (1 + n.num_states() as u128) * n.info_state_count() as u128
        })
        .sum();
    2 * diagram.path_count() + rows
}

/// A violated row or bound found by [`ModelIR::check_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub name: String,
    pub activity: f64,
    pub bound: f64,
}

impl ModelIR {
    pub fn kind(&self) -> FormulationKind {
        self.kind
    }

    pub fn options(&self) -> ResolvedOptions {
        self.options
    }

    pub fn variables(&self) -> &[VariableDef] {
        &self.variables
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_z(&self) -> usize {
        self.z_keys.len()
    }

    /// Meaning of z-variable `var`, if it is one.
    pub fn z_key(&self, var: usize) -> Option<ZKey> {
        self.z_keys.get(var).copied()
    }

    pub fn z_var(&self, slot: usize, info_state: usize, state: StateIndex) -> usize {
        self.z_offsets[slot] + info_state * self.decision_states[slot] + state as usize
    }

    /// Variable of effective path `index`.
    pub fn path_var(&self, index: usize) -> usize {
        self.z_keys.len() + index
    }

    /// Path index of variable `var`, if it is a path variable.
    pub fn path_of_var(&self, var: usize) -> Option<usize> {
        (var >= self.z_keys.len() && var < self.variables.len()).then(|| var - self.z_keys.len())
    }

    pub fn decisions(&self) -> &[NodeId] {
        &self.decisions
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.variables.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Checks bounds, integrality of binaries and every row within `tol`.
    pub fn check_feasible(&self, values: &[f64], tol: f64) -> Result<(), Violation> {
        for (v, &x) in self.variables.iter().zip(values) {
            if x < v.lower - tol {
                return Err(Violation { name: v.name.clone(), activity: x, bound: v.lower });
            }
            if x > v.upper + tol {
                return Err(Violation { name: v.name.clone(), activity: x, bound: v.upper });
            }
            if v.kind == VarKind::Binary && (x - x.round()).abs() > tol {
                return Err(Violation { name: v.name.clone(), activity: x, bound: x.round() });
            }
        }
        for c in &self.constraints {
            let activity: f64 = c.terms.iter().map(|&(i, a)| a * values[i]).sum();
            let ok = match c.sense {
                Sense::Le => activity <= c.rhs + tol,
                Sense::Ge => activity >= c.rhs - tol,
                Sense::Eq => (activity - c.rhs).abs() <= tol,
            };
            if !ok {
                return Err(Violation { name: c.name.clone(), activity, bound: c.rhs });
            }
        }
        Ok(())
    }

    fn check_matches(&self, diagram: &InfluenceDiagram, table: &PathTable) -> Result<(), FormulationError> {
        if self.n_paths != table.len() {
            return Err(FormulationError::ModelMismatch(format!(
                "model has {} path variables, table has {} paths",
                self.n_paths,
                table.len()
            )));
        }
        let states: Vec<usize> = diagram.decision_nodes().iter().map(|&j| diagram.node(j).num_states()).collect();
        if self.decisions != diagram.decision_nodes() || self.decision_states != states {
            return Err(FormulationError::ModelMismatch("decision nodes differ".into()));
        }
        let expected_z: usize = diagram
            .decision_nodes()
            .iter()
            .map(|&j| diagram.node(j).num_states() * diagram.node(j).info_state_count())
            .sum();
        if expected_z != self.z_keys.len() {
            return Err(FormulationError::ModelMismatch("z-variable layout differs".into()));
        }
        Ok(())
    }
}

/// Variable values encoding a strategy: z from the local strategies, and the
/// path variable at p(s) (π-form) or 1 (x-form) on compatible paths, else 0.
pub fn strategy_to_assignment(
    model: &ModelIR,
    diagram: &InfluenceDiagram,
    table: &PathTable,
    strategy: &Strategy,
) -> Result<Vec<f64>, FormulationError> {
    model.check_matches(diagram, table)?;
    if strategy.locals().len() != model.decisions.len()
        || strategy.locals().iter().zip(&model.decisions).any(|(l, &j)| l.node() != j)
    {
        return Err(FormulationError::ModelMismatch("strategy covers different decision nodes".into()));
    }
    let mut values = vec![0.0; model.variables.len()];
    for (slot, local) in strategy.locals().iter().enumerate() {
        for (info, &c) in local.choices().iter().enumerate() {
            values[model.z_var(slot, info, c)] = 1.0;
        }
    }
    let positions = decision_positions(diagram);
    for i in 0..table.len() {
        if is_compatible_indexed(&positions, table, strategy, i) {
            values[model.path_var(i)] = match model.kind {
                FormulationKind::Original => table.probability(i),
                FormulationKind::Improved => 1.0,
            };
        }
    }
    Ok(values)
}

/// How utilities were transformed: U' = scale·U + shift on every path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityTransform {
    pub scale: f64,
    pub shift: f64,
}

impl UtilityTransform {
    /// Maps an expected utility of the transformed diagram back. Exact for
    /// strategies whose compatible paths carry total probability one.
    pub fn to_original(&self, eu: f64) -> f64 {
        (eu - self.shift) / self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    /// Shift each value node's table so its minimum is zero (never upward).
    ShiftNonnegative,
    /// U → a·U + b; the shift b is applied to the first value node.
    Affine { scale: f64, shift: f64 },
}

/// Rewrites the utility tables and records the transform for mapping results back.
pub fn scale_utilities(
    diagram: &InfluenceDiagram,
    mode: ScaleMode,
) -> Result<(InfluenceDiagram, UtilityTransform), FormulationError> {
    match mode {
        ScaleMode::ShiftNonnegative => {
            let shifts: HashMap<NodeId, f64> = diagram
                .value_nodes()
                .iter()
                .map(|&v| {
                    let min = diagram.utility_table(v).iter().copied().fold(f64::INFINITY, f64::min);
                    (v, if min < 0.0 { -min } else { 0.0 })
                })
                .collect();
            let total: f64 = diagram.value_nodes().iter().map(|v| shifts[v]).sum();
            let out = diagram.map_utilities(|v, u| u + shifts[&v]);
            Ok((out, UtilityTransform { scale: 1.0, shift: total }))
        }
        ScaleMode::Affine { scale, shift } => {
            if !(scale > 0.0) {
                return Err(FormulationError::NonPositiveScale(scale));
            }
            let first = diagram.value_nodes().first().copied();
            let out = diagram.map_utilities(|v, u| if Some(v) == first { scale * u + shift } else { scale * u });
            let applied = if first.is_some() { shift } else { 0.0 };
            Ok((out, UtilityTransform { scale, shift: applied }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{DiagramBuilder, Node, ProbabilityTensor, UtilityTensor};
    use crate::paths::enumerate_paths;

    fn single_decision(utilities: Vec<f64>) -> InfluenceDiagram {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["a", "b"], &[])).unwrap();
        b.add_node(Node::decision("D", &["x", "y", "z"], &[])).unwrap();
        b.add_node(Node::value("V", &["C", "D"])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.25, 0.75]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(utilities)).unwrap();
        b.freeze().unwrap()
    }

    #[test]
    fn single_info_state_row_counts() {
        let d = single_decision(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        let m = build_improved(&d, &t, ImprovedOptions::default()).unwrap();
        let s = stats(&m);
        assert_eq!((s.one_hot_rows, s.local_rows, s.probability_cut_rows), (1, 3, 1));
        assert_eq!(s.n_binary, 3);
        assert_eq!(s.n_continuous, 6);
        assert_eq!(s.headline_total as u128, predicted_improved(&d));
    }

    #[test]
    fn lower_bound_auto_follows_utility_sign() {
        let pos = single_decision(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = enumerate_paths(&pos, &Default::default()).unwrap();
        let auto = build_original(&pos, &t, OriginalOptions::default()).unwrap();
        let on = build_original(&pos, &t, OriginalOptions { lower_bound: LowerBoundMode::On, ..Default::default() })
            .unwrap();
        assert_eq!(stats(&auto).lower_bound_rows, 0);
        assert_eq!(stats(&on).n_constraints - stats(&auto).n_constraints, t.len());
        assert_eq!(stats(&on).headline_total as u128, predicted_original(&pos));

        let neg = single_decision(vec![1.0, -2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = enumerate_paths(&neg, &Default::default()).unwrap();
        assert!(build_original(&neg, &t, OriginalOptions::default()).unwrap().options().lower_bound);
    }

    #[test]
    fn names_are_canonical() {
        let d = single_decision(vec![0.0; 6]);
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        let m = build_improved(&d, &t, ImprovedOptions::default()).unwrap();
        let names: Vec<&str> = m.variables().iter().map(|v| v.name.as_str()).take(4).collect();
        assert_eq!(names, ["z_D____x", "z_D____y", "z_D____z", "x_p0"]);
        let rows: Vec<&str> = m.constraints().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(rows, ["onehot_D__", "lcp_D____x", "lcp_D____y", "lcp_D____z", "probcut"]);
    }

    #[test]
    fn sanitized_collision_is_an_error() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::decision("D", &["a b", "a-b"], &[])).unwrap();
        b.add_node(Node::value("V", &["D"])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![1.0, 2.0])).unwrap();
        let d = b.freeze().unwrap();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        assert_eq!(
            build_improved(&d, &t, ImprovedOptions::default()),
            Err(FormulationError::NameCollision("z_D____a_b".into()))
        );
    }

    #[test]
    fn chance_only_diagram_assignment() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["a", "b"], &[])).unwrap();
        b.add_node(Node::value("V", &["C"])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.25, 0.75]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![4.0, 8.0])).unwrap();
        let d = b.freeze().unwrap();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        let m = build_improved(&d, &t, ImprovedOptions::default()).unwrap();
        let z = Strategy::from_choices(&d, vec![]).unwrap();
        let x = strategy_to_assignment(&m, &d, &t, &z).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
        assert_eq!(m.objective_value(&x), 7.0);
        m.check_feasible(&x, 1e-9).unwrap();
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let d = single_decision(vec![0.0; 6]);
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        let m = build_improved(&d, &t, ImprovedOptions::default()).unwrap();
        let other = enumerate_paths(&d, &crate::paths::EnumerationOptions {
            fixed: vec![(d.id("C").unwrap(), 0)],
            ..Default::default()
        })
        .unwrap();
        let z = Strategy::first_alternatives(&d);
        assert!(matches!(strategy_to_assignment(&m, &d, &other, &z), Err(FormulationError::ModelMismatch(_))));
    }

    #[test]
    fn shift_nonnegative_records_offset() {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["a", "b"], &[])).unwrap();
        b.add_node(Node::value("V", &["C"])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.5, 0.5]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![-5.0, 3.0])).unwrap();
        let d = b.freeze().unwrap();
        let (shifted, record) = scale_utilities(&d, ScaleMode::ShiftNonnegative).unwrap();
        let v = shifted.id("V").unwrap();
        assert_eq!(shifted.utility_table(v), &[0.0, 8.0]);
        assert_eq!(record, UtilityTransform { scale: 1.0, shift: 5.0 });
        let (same, record) = scale_utilities(&shifted, ScaleMode::ShiftNonnegative).unwrap();
        assert_eq!(same, shifted);
        assert_eq!(record.shift, 0.0);
        assert_eq!(
            scale_utilities(&d, ScaleMode::Affine { scale: 0.0, shift: 1.0 }),
            Err(FormulationError::NonPositiveScale(0.0))
        );
    }
}
