//! LP and MPS writers for [`ModelIR`], and the `name value` solution format
//! used to bring external solver results back as strategies.

use std::collections::HashSet;
use std::fmt::Write;

use thiserror::Error;

use crate::diagram::{InfluenceDiagram, StateIndex};
use crate::formulation::{ModelIR, Sense, VarKind};
use crate::paths::PathTable;
use crate::strategy::{expected_utility, LocalStrategy, Strategy};

/// Longest line, and longest name, written to LP and MPS files.
pub const MAX_LINE: usize = 255;

/// Deviation from 0/1 above which a z-value is reported as fractional.
pub const FRACTIONAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmitError {
    #[error("NameCollision: `{0}` names two entities")]
    NameCollision(String),
    #[error("NameTooLong: `{0}` exceeds {MAX_LINE} characters")]
    NameTooLong(String),
    #[error("UnknownVariable: `{name}` on line {line}")]
    UnknownVariable { name: String, line: usize },
    #[error("malformed solution line {line}: `{text}`")]
    Malformed { line: usize, text: String },
    #[error("NotOneHot: {node} at {info_state} has {chosen} chosen alternatives")]
    NotOneHot { node: String, info_state: String, chosen: usize },
    #[error("ModelMismatch: {0}")]
    ModelMismatch(String),
}

/// Shortest decimal that round-trips to the same double; integers without
/// a fractional part.
pub fn format_number(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

/// Accumulates tokens into lines no longer than [`MAX_LINE`].
struct Wrapper<'a> {
    out: &'a mut String,
    line: usize,
}

impl<'a> Wrapper<'a> {
    fn start(out: &'a mut String, head: &str) -> Self {
        out.push_str(head);
        let line = head.len();
        Wrapper { out, line }
    }

    fn token(&mut self, tok: &str) {
        if self.line + 1 + tok.len() > MAX_LINE && self.line > 1 {
            self.out.push('\n');
            self.line = 0;
        }
        self.out.push(' ');
        self.out.push_str(tok);
        self.line += 1 + tok.len();
    }

    fn end(self) {
        self.out.push('\n');
    }
}

fn linear_tokens(terms: impl Iterator<Item = (f64, String)>) -> Vec<String> {
    let mut toks = Vec::new();
    for (coef, name) in terms {
        let mag = coef.abs();
        let sign = if coef < 0.0 { "-" } else { "+" };
        if toks.is_empty() {
            if coef < 0.0 {
                toks.push("-".to_string());
            }
        } else {
            toks.push(sign.to_string());
        }
        if mag != 1.0 {
            toks.push(format_number(mag));
        }
        toks.push(name);
    }
    toks
}

/// CPLEX-dialect LP text.
pub fn write_lp(model: &ModelIR) -> String {
    let vars = model.variables();
    let mut out = String::new();
    let _ = writeln!(out, "\\ limid {} formulation", model.kind());
    out.push_str("Maximize\n");
    let mut toks = linear_tokens(vars.iter().filter(|v| v.objective != 0.0).map(|v| (v.objective, v.name.clone())));
    if toks.is_empty() {
        toks = vec!["0".into(), vars[0].name.clone()];
    }
    let mut w = Wrapper::start(&mut out, " obj:");
    for t in &toks {
        w.token(t);
    }
    w.end();

    out.push_str("Subject To\n");
    for c in model.constraints() {
        let mut toks = linear_tokens(c.terms.iter().map(|&(i, a)| (a, vars[i].name.clone())));
        if toks.is_empty() {
            toks = vec!["0".into(), vars[0].name.clone()];
        }
        toks.push(
            match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            }
            .to_string(),
        );
        toks.push(format_number(c.rhs));
        let mut w = Wrapper::start(&mut out, &format!(" {}:", c.name));
        for t in &toks {
            w.token(t);
        }
        w.end();
    }

    out.push_str("Bounds\n");
    for v in vars.iter().filter(|v| v.kind == VarKind::Continuous) {
        let _ = writeln!(out, " {} <= {} <= {}", format_number(v.lower), v.name, format_number(v.upper));
    }
    out.push_str("Binary\n");
    for v in vars.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

fn check_names(model: &ModelIR) -> Result<(), EmitError> {
    let mut rows: HashSet<&str> = HashSet::from(["obj"]);
    for c in model.constraints() {
        if c.name.len() > MAX_LINE {
            return Err(EmitError::NameTooLong(c.name.clone()));
        }
        if !rows.insert(&c.name) {
            return Err(EmitError::NameCollision(c.name.clone()));
        }
    }
    let mut cols = HashSet::new();
    for v in model.variables() {
        if v.name.len() > MAX_LINE {
            return Err(EmitError::NameTooLong(v.name.clone()));
        }
        if !cols.insert(v.name.as_str()) {
            return Err(EmitError::NameCollision(v.name.clone()));
        }
    }
    Ok(())
}

/// Fixed-layout MPS text. Fields sit in the standard columns; names longer
/// than a field push the remaining fields right, as free MPS readers accept.
pub fn write_mps(model: &ModelIR) -> Result<String, EmitError> {
    check_names(model)?;
    let vars = model.variables();
    let mut out = String::new();
    let _ = writeln!(out, "NAME          limid_{}", model.kind());
    out.push_str("OBJSENSE\n    MAX\n");
    out.push_str("ROWS\n N  obj\n");
    for c in model.constraints() {
        let tag = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {tag}  {}", c.name);
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vars.len()];
    for (r, c) in model.constraints().iter().enumerate() {
        for &(i, a) in &c.terms {
            columns[i].push((r, a));
        }
    }
    out.push_str("COLUMNS\n");
    let entry = |out: &mut String, col: &str, row: &str, val: f64| {
        let _ = writeln!(out, "    {col:<8}  {row:<8}  {:>12}", format_number(val));
    };
    for (i, v) in vars.iter().enumerate() {
        if v.objective != 0.0 || columns[i].is_empty() {
            entry(&mut out, &v.name, "obj", v.objective);
        }
        for &(r, a) in &columns[i] {
            entry(&mut out, &v.name, &model.constraints()[r].name, a);
        }
    }

    out.push_str("RHS\n");
    for c in model.constraints().iter().filter(|c| c.rhs != 0.0) {
        entry(&mut out, "RHS", &c.name, c.rhs);
    }

    out.push_str("BOUNDS\n");
    for v in vars {
        match v.kind {
            VarKind::Binary => {
                let _ = writeln!(out, " BV BND       {}", v.name);
            }
            VarKind::Continuous => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " LO BND       {:<8}  {:>12}", v.name, format_number(v.lower));
                }
                let _ = writeln!(out, " UP BND       {:<8}  {:>12}", v.name, format_number(v.upper));
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

/// `name value` lines for every variable, preceded by `=obj=` when given.
pub fn write_solution(model: &ModelIR, values: &[f64], objective: Option<f64>) -> String {
    let mut out = String::from("# limid solution\n");
    if let Some(obj) = objective {
        let _ = writeln!(out, "=obj= {}", format_number(obj));
    }
    for (v, &x) in model.variables().iter().zip(values) {
        let _ = writeln!(out, "{} {}", v.name, format_number(x));
    }
    out
}

/// Strategy recovered from a solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub strategy: Strategy,
    /// Objective stated in the file (`=obj=` line), if any.
    pub file_objective: Option<f64>,
    /// Expected utility of the recovered strategy, recomputed from the paths.
    pub expected_utility: f64,
    pub warnings: Vec<String>,
}

/// Parses a solution file, rounds the z-values at 0.5 and rebuilds the
/// strategy. Variables missing from the file count as 0.
pub fn read_solution(
    model: &ModelIR,
    diagram: &InfluenceDiagram,
    table: &PathTable,
    text: &str,
) -> Result<SolutionReport, EmitError> {
    if model.decisions() != diagram.decision_nodes() || model.n_paths() != table.len() {
        return Err(EmitError::ModelMismatch("model was not built from this diagram and path table".into()));
    }
    let mut z = vec![0.0; model.n_z()];
    let mut file_objective = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(EmitError::Malformed { line: n + 1, text: raw.to_string() });
        };
        let value: f64 =
            value.parse().map_err(|_| EmitError::Malformed { line: n + 1, text: raw.to_string() })?;
        if name == "=obj=" {
            file_objective = Some(value);
            continue;
        }
        let var = model.var_index(name).ok_or_else(|| EmitError::UnknownVariable { name: name.to_string(), line: n + 1 })?;
        if var < z.len() {
            z[var] = value;
        }
    }

    let mut warnings = Vec::new();
    let mut locals = Vec::new();
    for (slot, &j) in diagram.decision_nodes().iter().enumerate() {
        let node = diagram.node(j);
        let mut choices = Vec::with_capacity(node.info_state_count());
        for info in 0..node.info_state_count() {
            let mut chosen = Vec::new();
            for s in 0..node.num_states() {
                let var = model.z_var(slot, info, s as StateIndex);
                let v = z[var];
                if (v - v.round()).abs() > FRACTIONAL_TOLERANCE {
                    warnings.push(format!("fractional value {v} for {}", model.variables()[var].name));
                }
                if v >= 0.5 {
                    chosen.push(s as StateIndex);
                }
            }
            if chosen.len() != 1 {
                return Err(EmitError::NotOneHot {
                    node: node.name().to_string(),
                    info_state: format!("({})", diagram.info_state_names(j, info).join(",")),
                    chosen: chosen.len(),
                });
            }
            choices.push(chosen[0]);
        }
        locals.push(LocalStrategy::new(j, choices));
    }
    let strategy = Strategy::new(diagram, locals).map_err(|e| EmitError::ModelMismatch(e.to_string()))?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(SolutionReport {
        expected_utility: expected_utility(diagram, table, &strategy),
        strategy,
        file_objective,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{DiagramBuilder, Node, ProbabilityTensor, UtilityTensor};
    use crate::formulation::{build_improved, build_original, strategy_to_assignment, ImprovedOptions, OriginalOptions};
    use crate::paths::enumerate_paths;

    fn matching_game() -> (InfluenceDiagram, PathTable) {
        let mut b = DiagramBuilder::new();
        b.add_node(Node::chance("C", &["c0", "c1"], &[])).unwrap();
        b.add_node(Node::decision("D", &["d0", "d1"], &["C"])).unwrap();
        b.add_node(Node::value("V", &["C", "D"])).unwrap();
        b.set_probabilities("C", ProbabilityTensor::from_rows(vec![vec![0.4, 0.6]])).unwrap();
        b.set_utilities("V", UtilityTensor::new(vec![1.0, 0.0, 0.0, 1.0])).unwrap();
        let d = b.freeze().unwrap();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        (d, t)
    }

    #[test]
    fn number_formatting_round_trips() {
        for x in [0.28, 1.0 / 3.0, 1e-7, -2.5, 1e300, 0.1 + 0.2] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-3.0), "-3");
        assert_eq!(format_number(0.28), "0.28");
    }

    #[test]
    fn lp_sections_for_matching_game() {
        let (d, t) = matching_game();
        let m = build_improved(&d, &t, ImprovedOptions::default()).unwrap();
        let lp = write_lp(&m);
        let section = |name: &str, next: &str| -> Vec<String> {
            let start = lp.find(&format!("{name}\n")).unwrap() + name.len() + 1;
            let end = lp.find(&format!("{next}\n")).unwrap();
            lp[start..end].lines().map(str::to_string).collect()
        };
        assert_eq!(section("Binary", "End").len(), 4);
        let bounds = section("Bounds", "Binary");
        assert_eq!(bounds.len(), 4);
        assert!(bounds.iter().all(|b| b.starts_with(" 0 <= x_p") && b.ends_with(" <= 1")));
        // U(s)·p(s) on compatible-path variables
        assert!(lp.contains(" obj: 0.4 x_p0 + 0.6 x_p3\n"));
        assert!(lp.contains(" probcut: 0.4 x_p0 + 0.4 x_p1 + 0.6 x_p2 + 0.6 x_p3 = 1\n"));
        assert_eq!(lp, write_lp(&m));
        assert!(lp.lines().all(|l| l.len() <= MAX_LINE));
    }

    #[test]
    fn long_rows_wrap() {
        let mut b = DiagramBuilder::new();
        let states: Vec<String> = (0..200).map(|i| format!("s{i}")).collect();
        let refs: Vec<&str> = states.iter().map(String::as_str).collect();
        b.add_node(Node::decision("D", &refs, &[])).unwrap();
        b.add_node(Node::value("V", &["D"])).unwrap();
        b.set_utilities("V", UtilityTensor::new((0..200).map(|i| i as f64 + 0.5).collect())).unwrap();
        let d = b.freeze().unwrap();
        let t = enumerate_paths(&d, &Default::default()).unwrap();
        let lp = write_lp(&build_improved(&d, &t, ImprovedOptions::default()).unwrap());
        assert!(lp.lines().all(|l| l.len() <= MAX_LINE));
        assert!(lp.lines().count() > 200 * 3);
    }

    #[test]
    fn mps_sections() {
        let (d, t) = matching_game();
        let m = build_improved(&d, &t, ImprovedOptions::default()).unwrap();
        let mps = write_mps(&m).unwrap();
        assert_eq!(mps, write_mps(&m).unwrap());
        let rhs: Vec<&str> = mps.lines().filter(|l| l.starts_with("    RHS")).collect();
        // two one-hot rows and the probability row
        assert_eq!(rhs.len(), 3);
        assert_eq!(mps.lines().filter(|l| l.starts_with(" UP BND")).count(), 4);
        assert!(mps.lines().filter(|l| l.starts_with(" UP BND")).all(|l| l.ends_with(" 1")));
        assert_eq!(mps.lines().filter(|l| l.starts_with(" BV BND")).count(), 4);
        assert!(mps.ends_with("ENDATA\n"));
    }

    #[test]
    fn solution_round_trip_and_rounding() {
        let (d, t) = matching_game();
        let m = build_original(&d, &t, OriginalOptions::default()).unwrap();
        let z = Strategy::from_choices(&d, vec![vec![0, 1]]).unwrap();
        let values = strategy_to_assignment(&m, &d, &t, &z).unwrap();
        let text = write_solution(&m, &values, Some(m.objective_value(&values)));
        let report = read_solution(&m, &d, &t, &text).unwrap();
        assert_eq!(report.strategy, z);
        assert_eq!(report.file_objective, Some(1.0));
        assert_eq!(report.expected_utility, 1.0);
        assert!(report.warnings.is_empty());

        let fractional = "z_D__c0__d0 0.3\nz_D__c0__d1 0.7\nz_D__c1__d1 1\n";
        let report = read_solution(&m, &d, &t, fractional).unwrap();
        assert_eq!(report.strategy.choice(0, 0), 1);
        assert_eq!(report.warnings.len(), 2);

        let missing = "# only one\nz_D__c0__d0 1\n";
        assert!(matches!(read_solution(&m, &d, &t, missing), Err(EmitError::NotOneHot { chosen: 0, .. })));
        assert!(matches!(
            read_solution(&m, &d, &t, "bogus 1\n"),
            Err(EmitError::UnknownVariable { line: 1, .. })
        ));
        assert!(matches!(read_solution(&m, &d, &t, "z_D__c0__d0\n"), Err(EmitError::Malformed { .. })));
    }
}
