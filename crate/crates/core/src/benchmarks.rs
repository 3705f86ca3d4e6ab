//! Instance generators: the pig-farm and N-monitoring families, random small
//! diagrams for property tests, and the coronary heart disease (CHD) testing
//! model with its Bayes risk update.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagram::{
    decode_row_major, DiagramBuilder, InfluenceDiagram, Node, NodeId, NodeKind, ProbabilityTensor, StateIndex,
    UtilityTensor,
};
use crate::paths::{enumerate_paths, EnumerationOptions, ForbiddenPattern, PathError};
use crate::solvers::{brute_force, spu_multistart, SolverError, DEFAULT_STRATEGY_CAP};
use crate::strategy::{compatible_probability, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
    #[error("DegenerateTest: the result has probability zero under the prior")]
    DegenerateTest,
    #[error(transparent)]
    Paths(#[from] PathError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How a generator fills in probabilities and utilities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Parameters {
    /// The documented constants of each family.
    #[default]
    Default,
    /// Uniform-Dirichlet conditional distributions and uniform utilities on
    /// [0, 1], or on [-1, 1] when `signed`.
    Random { seed: u64, signed: bool },
}

impl Parameters {
    pub fn from_flag(seed: u64, randomize: bool) -> Self {
        if randomize {
            Parameters::Random { seed, signed: false }
        } else {
            Parameters::Default
        }
    }
}

/// Draws tables for a randomized instance.
struct Sampler {
    rng: ChaCha8Rng,
    signed: bool,
}

impl Sampler {
    fn new(seed: u64, signed: bool) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), signed }
    }

    fn distribution(&mut self, n: usize) -> Vec<f64> {
        Dirichlet::new_with_size(1.0, n).expect("at least two states").sample(&mut self.rng)
    }

    fn rows(&mut self, n_rows: usize, n_states: usize) -> ProbabilityTensor {
        ProbabilityTensor::from_rows((0..n_rows).map(|_| self.distribution(n_states)).collect())
    }

    fn utilities(&mut self, n: usize) -> UtilityTensor {
        let lo = if self.signed { -1.0 } else { 0.0 };
        UtilityTensor::new((0..n).map(|_| self.rng.gen_range(lo..=1.0)).collect())
    }
}

/// Calls `f` with the parent digits of every row of a table over `sizes`.
fn table_rows<T>(sizes: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Vec<T> {
    let n: usize = sizes.iter().product();
    (0..n).map(|r| f(&decode_row_major(r, sizes))).collect()
}

/// Fills every table of a builder whose nodes are already declared, either
/// from `fixed` or from the sampler.
fn fill_tables(
    b: &mut DiagramBuilder,
    nodes: &[Node],
    params: Parameters,
    mut fixed: impl FnMut(&Node, &[usize]) -> Vec<f64>,
) {
    let mut sampler = match params {
        Parameters::Random { seed, signed } => Some(Sampler::new(seed, signed)),
        Parameters::Default => None,
    };
    let size = |name: &str| nodes.iter().find(|n| n.name == name).map_or(0, |n| n.states.len());
    for node in nodes {
        let sizes: Vec<usize> = node.info_set.iter().map(|p| size(p)).collect();
        let rows: usize = sizes.iter().product();
        match (node.kind, sampler.as_mut()) {
            (NodeKind::Decision, _) => {}
            (NodeKind::Chance, Some(s)) => {
                b.set_probabilities(&node.name, s.rows(rows, node.states.len())).unwrap();
            }
            (NodeKind::Value, Some(s)) => {
                b.set_utilities(&node.name, s.utilities(rows)).unwrap();
            }
            (NodeKind::Chance, None) => {
                let t = table_rows(&sizes, |d| fixed(node, d));
                b.set_probabilities(&node.name, ProbabilityTensor::from_rows(t)).unwrap();
            }
            (NodeKind::Value, None) => {
                let t = table_rows(&sizes, |d| fixed(node, d)[0]);
                b.set_utilities(&node.name, UtilityTensor::new(t)).unwrap();
            }
        }
    }
}

fn build(nodes: &[Node], params: Parameters, fixed: impl FnMut(&Node, &[usize]) -> Vec<f64>) -> InfluenceDiagram {
    let mut b = DiagramBuilder::new();
    for n in nodes {
        b.add_node(n.clone()).expect("generator declares parents first");
    }
    fill_tables(&mut b, nodes, params, fixed);
    b.freeze().expect("generated diagrams are valid")
}

/// Documented constants of the default pig-farm instance.
pub mod pigfarm_defaults {
    /// P(ill) in the first month.
    pub const INITIAL_ILL: f64 = 0.1;
    /// P(positive test | ill), P(positive test | healthy).
    pub const TEST_POSITIVE: [f64; 2] = [0.8, 0.1];
    /// P(ill next month | state, treatment) for (ill, treat), (ill, pass),
    /// (healthy, treat), (healthy, pass).
    pub const TRANSITION_ILL: [f64; 4] = [0.5, 0.9, 0.1, 0.2];
    pub const TREATMENT_COST: f64 = -100.0;
    /// Selling price of an ill and of a healthy pig.
    pub const SELL_PRICE: [f64; 2] = [300.0, 1000.0];
}

/// Pig farm over `n` months: health H1..H(n+1), tests T1..Tn, treatment
/// decisions D1..Dn that only see the current test, treatment costs C1..Cn
/// and the selling price P.
pub fn pigfarm(n: usize, params: Parameters) -> InfluenceDiagram {
    use pigfarm_defaults::*;
    assert!(n >= 1, "pig farm needs at least one month");
    let mut nodes = Vec::new();
    for t in 1..=n {
        let h_info = if t == 1 { vec![] } else { vec![format!("H{}", t - 1), format!("D{}", t - 1)] };
        let h_info: Vec<&str> = h_info.iter().map(String::as_str).collect();
        nodes.push(Node::chance(format!("H{t}"), &["ill", "healthy"], &h_info));
        nodes.push(Node::chance(format!("T{t}"), &["positive", "negative"], &[&format!("H{t}")]));
        nodes.push(Node::decision(format!("D{t}"), &["treat", "pass"], &[&format!("T{t}")]));
    }
    nodes.push(Node::chance(format!("H{}", n + 1), &["ill", "healthy"], &[&format!("H{n}"), &format!("D{n}")]));
    for t in 1..=n {
        nodes.push(Node::value(format!("C{t}"), &[&format!("D{t}")]));
    }
    nodes.push(Node::value("P", &[&format!("H{}", n + 1)]));

    build(&nodes, params, |node, d| {
        let two = |p: f64| vec![p, 1.0 - p];
        match node.name.chars().next().unwrap() {
            'H' if d.is_empty() => two(INITIAL_ILL),
            'H' => two(TRANSITION_ILL[d[0] * 2 + d[1]]),
            'T' => two(TEST_POSITIVE[d[0]]),
            'C' => vec![if d[0] == 0 { TREATMENT_COST } else { 0.0 }],
            _ => vec![SELL_PRICE[d[0]]],
        }
    })
}

pub fn gen_pigfarm(n: usize, seed: u64, randomize: bool) -> InfluenceDiagram {
    pigfarm(n, Parameters::from_flag(seed, randomize))
}

/// Documented constants of the default N-monitoring instance.
pub mod nmonitoring_defaults {
    pub const HIGH_LOAD: f64 = 0.4;
    /// P(report high | load high), P(report high | load low).
    pub const REPORT_HIGH: [f64; 2] = [0.8, 0.25];
    /// Failure probability without fortification under high and low load.
    pub const BASE_FAILURE: [f64; 2] = [0.6, 0.1];
    /// Factor applied to the failure probability per fortification.
    pub const FORTIFICATION_FACTOR: f64 = 0.5;
    pub const FORTIFICATION_COST: f64 = 15.0;
    pub const SUCCESS_VALUE: f64 = 100.0;
}

/// N-monitoring: load L, reports R1..Rn, fortification decisions A1..An
/// that each see only their own report, failure F and target value T.
pub fn nmonitoring(n: usize, params: Parameters) -> InfluenceDiagram {
    use nmonitoring_defaults::*;
    assert!(n >= 1, "N-monitoring needs at least one agent");
    let mut nodes = vec![Node::chance("L", &["high", "low"], &[])];
    for i in 1..=n {
        nodes.push(Node::chance(format!("R{i}"), &["high", "low"], &["L"]));
    }
    for i in 1..=n {
        nodes.push(Node::decision(format!("A{i}"), &["yes", "no"], &[&format!("R{i}")]));
    }
    let actions: Vec<String> = (1..=n).map(|i| format!("A{i}")).collect();
    let mut f_info = vec!["L"];
    f_info.extend(actions.iter().map(String::as_str));
    nodes.push(Node::chance("F", &["failure", "success"], &f_info));
    f_info[0] = "F";
    nodes.push(Node::value("T", &f_info));

    build(&nodes, params, |node, d| {
        let fortified = d.iter().skip(1).filter(|&&a| a == 0).count();
        match node.name.as_str() {
            "L" => vec![HIGH_LOAD, 1.0 - HIGH_LOAD],
            "F" => {
                let p = BASE_FAILURE[d[0]] * FORTIFICATION_FACTOR.powi(fortified as i32);
                vec![p, 1.0 - p]
            }
            "T" => vec![if d[0] == 1 { SUCCESS_VALUE } else { 0.0 } - FORTIFICATION_COST * fortified as f64],
            _ => vec![REPORT_HIGH[d[0]], 1.0 - REPORT_HIGH[d[0]]],
        }
    })
}

pub fn gen_nmonitoring(n: usize, seed: u64, randomize: bool) -> InfluenceDiagram {
    nmonitoring(n, Parameters::from_flag(seed, randomize))
}

/// Closed-form constraint count of a benchmark family instance, in the
/// convention of [`crate::formulation::FormulationStats::headline_total`]. The
/// original form is counted with its lower-bound rows.
pub fn family_closed_form(family: &str, n: usize, kind: crate::formulation::FormulationKind) -> Option<u128> {
    use crate::formulation::FormulationKind::*;
    let (n, m) = (n as u128, n as u32);
    match (family, kind) {
        ("pigfarm", Original) => Some((3 + n) * (1u128 << (3 * m + 1)) + 2 * n),
        ("pigfarm", Improved) => Some((1u128 << (3 * m + 2)) + 6 * n),
        ("nmonitoring", Original) => Some((3 + n) * (1u128 << (2 * m + 2)) + 2 * n),
        ("nmonitoring", Improved) => Some((1u128 << (2 * m + 3)) + 6 * n),
        _ => None,
    }
}

/// Shape limits for [`random_diagram`].
#[derive(Debug, Clone, Copy)]
pub struct RandomDiagramOptions {
    pub max_path_nodes: usize,
    pub max_states: usize,
    pub max_parents: usize,
    pub max_value_nodes: usize,
    pub max_paths: u128,
    pub max_strategies: u128,
    pub signed_utilities: bool,
}

impl Default for RandomDiagramOptions {
    fn default() -> Self {
        RandomDiagramOptions {
            max_path_nodes: 5,
            max_states: 3,
            max_parents: 2,
            max_value_nodes: 2,
            max_paths: 1024,
            max_strategies: 4096,
            signed_utilities: false,
        }
    }
}

/// A random valid LIMID with at least one decision node, small enough for
/// exhaustive strategy search.
pub fn random_diagram(seed: u64, opts: RandomDiagramOptions) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=opts.max_path_nodes.max(2));
        let mut nodes: Vec<Node> = Vec::new();
        for i in 0..n {
            let kind = if rng.gen_bool(0.4) || (i == n - 1 && !nodes.iter().any(|x| x.kind == NodeKind::Decision)) {
                NodeKind::Decision
            } else {
                NodeKind::Chance
            };
            let k = rng.gen_range(2..=opts.max_states.max(2));
            let states: Vec<String> = (0..k).map(|s| format!("s{s}")).collect();
            let n_parents = rng.gen_range(0..=i.min(opts.max_parents));
            let parents = rand::seq::index::sample(&mut rng, i, n_parents).into_vec();
            let mut parents: Vec<usize> = parents;
            parents.sort_unstable();
            nodes.push(Node {
                name: format!("N{i}"),
                kind,
                states,
                info_set: parents.iter().map(|p| format!("N{p}")).collect(),
            });
        }
        for v in 0..rng.gen_range(1..=opts.max_value_nodes.max(1)) {
            let k = rng.gen_range(1..=n.min(2));
            let mut parents = rand::seq::index::sample(&mut rng, n, k).into_vec();
            parents.sort_unstable();
            nodes.push(Node {
                name: format!("V{v}"),
                kind: NodeKind::Value,
                states: vec![],
                info_set: parents.iter().map(|p| format!("N{p}")).collect(),
            });
        }
        let seed = rng.gen();
        let d = build(&nodes, Parameters::Random { seed, signed: opts.signed_utilities }, |_, _| unreachable!());
        if d.path_count() <= opts.max_paths && crate::solvers::strategy_count(&d) <= opts.max_strategies {
            return d;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestResult {
    Positive,
    Negative,
}

/// Posterior probability of disease after a test result.
pub fn bayes_update(prior: f64, sensitivity: f64, specificity: f64, result: TestResult) -> Result<f64, BenchmarkError> {
    for (name, x) in [("prior", prior), ("sensitivity", sensitivity), ("specificity", specificity)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(BenchmarkError::InvalidParams(format!("{name} = {x} is not a probability")));
        }
    }
    let (sick, healthy) = match result {
        TestResult::Positive => (sensitivity * prior, (1.0 - specificity) * (1.0 - prior)),
        TestResult::Negative => ((1.0 - sensitivity) * prior, specificity * (1.0 - prior)),
    };
    let denominator = sick + healthy;
    if denominator <= 0.0 {
        return Err(BenchmarkError::DegenerateTest);
    }
    Ok(sick / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestCharacteristics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub cost: f64,
}

/// Parameters of the CHD model. The defaults are synthetic placeholders,
/// not clinical data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChdParams {
    pub risk_levels: usize,
    pub trs: TestCharacteristics,
    pub grs: TestCharacteristics,
    /// Health benefit indexed by [CHD, no CHD] x [treat, no treat].
    pub health_benefit: [[f64; 2]; 2],
}

impl Default for ChdParams {
    fn default() -> Self {
        ChdParams {
            risk_levels: 6,
            trs: TestCharacteristics { sensitivity: 0.85, specificity: 0.75, cost: 0.05 },
            grs: TestCharacteristics { sensitivity: 0.7, specificity: 0.85, cost: 0.1 },
            health_benefit: [[7.0, 5.0], [9.8, 10.0]],
        }
    }
}

impl ChdParams {
    fn validate(&self) -> Result<(), BenchmarkError> {
        let bad = |m: String| Err(BenchmarkError::InvalidParams(m));
        if self.risk_levels < 2 {
            return bad(format!("risk_levels = {} must be at least 2", self.risk_levels));
        }
        if self.risk_levels > StateIndex::MAX as usize {
            return bad(format!("risk_levels = {} is too many", self.risk_levels));
        }
        for (name, t) in [("TRS", self.trs), ("GRS", self.grs)] {
            if !(0.0..=1.0).contains(&t.sensitivity) || !(0.0..=1.0).contains(&t.specificity) {
                return bad(format!("{name} sensitivity and specificity must lie in [0, 1]"));
            }
            if !t.cost.is_finite() || t.cost < 0.0 {
                return bad(format!("{name} cost must be finite and non-negative"));
            }
        }
        if self.health_benefit.iter().flatten().any(|u| !u.is_finite()) {
            return bad("health benefits must be finite".into());
        }
        Ok(())
    }

    /// Grid level k as a probability.
    pub fn level(&self, k: usize) -> f64 {
        k as f64 / (self.risk_levels - 1) as f64
    }

    fn nearest_level(&self, p: f64) -> usize {
        (p * (self.risk_levels - 1) as f64).round() as usize
    }
}

/// A generated CHD model and what is needed to enumerate it.
#[derive(Debug, Clone)]
pub struct ChdModel {
    pub diagram: InfluenceDiagram,
    pub forbidden: Vec<ForbiddenPattern>,
    pub fixed: Vec<(NodeId, StateIndex)>,
    /// Constant added to the health benefit so that every path utility is at
    /// least 1. Losing probability mass to a forbidden test sequence can then
    /// never raise the expected utility.
    pub utility_offset: f64,
}

impl ChdModel {
    pub fn enumeration_options(&self) -> EnumerationOptions {
        EnumerationOptions { forbidden: self.forbidden.clone(), fixed: self.fixed.clone(), ..Default::default() }
    }
}

const TESTS: [&str; 3] = ["TRS", "GRS", "none"];

/// The CHD testing model. With `prior_level`, R0 is a point mass at that grid
/// level and is also pinned during enumeration; otherwise R0 is uniform over
/// the grid.
pub fn gen_chd(params: &ChdParams, prior_level: Option<usize>) -> Result<ChdModel, BenchmarkError> {
    params.validate()?;
    let k = params.risk_levels;
    if let Some(level) = prior_level {
        if level >= k {
            return Err(BenchmarkError::InvalidParams(format!("prior level {level} outside 0..{k}")));
        }
    }
    let names: Vec<String> = (0..k).map(|i| format!("r{i}")).collect();
    let levels: Vec<&str> = names.iter().map(String::as_str).collect();
    let nodes = vec![
        Node::chance("R0", &levels, &[]),
        Node::chance("H", &["CHD", "no_CHD"], &["R0"]),
        Node::decision("T1", &TESTS, &["R0"]),
        Node::chance("R1", &levels, &["R0", "H", "T1"]),
        Node::decision("T2", &TESTS, &["R1"]),
        Node::chance("R2", &levels, &["R1", "H", "T2"]),
        Node::decision("TD", &["treat", "no_treat"], &["R2"]),
        Node::value("TC", &["T1", "T2"]),
        Node::value("HB", &["H", "TD"]),
    ];
    let mut b = DiagramBuilder::new();
    for n in &nodes {
        b.add_node(n.clone()).expect("parents are declared first");
    }

    let r0 = match prior_level {
        Some(level) => (0..k).map(|i| if i == level { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0 / k as f64; k],
    };
    b.set_probabilities("R0", ProbabilityTensor::from_rows(vec![r0])).unwrap();
    let h = (0..k).map(|i| vec![params.level(i), 1.0 - params.level(i)]).collect();
    b.set_probabilities("H", ProbabilityTensor::from_rows(h)).unwrap();

    // Rows over (prior level, H, test): the result distribution given H,
    // each result moving the risk to its rounded posterior.
    let update = table_rows(&[k, 2, 3], |d| {
        let (level, chd, test) = (d[0], d[1] == 0, d[2]);
        let mut row = vec![0.0; k];
        let spec = match test {
            0 => params.trs,
            1 => params.grs,
            _ => {
                row[level] = 1.0;
                return row;
            }
        };
        let prior = params.level(level);
        let positive = if chd { spec.sensitivity } else { 1.0 - spec.specificity };
        for (result, mass) in [(TestResult::Positive, positive), (TestResult::Negative, 1.0 - positive)] {
            let to = bayes_update(prior, spec.sensitivity, spec.specificity, result)
                .map_or(level, |post| params.nearest_level(post));
            row[to] += mass;
        }
        row
    });
    b.set_probabilities("R1", ProbabilityTensor::from_rows(update.clone())).unwrap();
    b.set_probabilities("R2", ProbabilityTensor::from_rows(update)).unwrap();

    let cost = |t: usize| match t {
        0 => params.trs.cost,
        1 => params.grs.cost,
        _ => 0.0,
    };
    let tc = table_rows(&[3, 3], |d| -(cost(d[0]) + cost(d[1])));
    let worst_cost = tc.iter().copied().fold(f64::INFINITY, f64::min);
    let worst_benefit = params.health_benefit.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let utility_offset = (1.0 - worst_cost - worst_benefit).max(0.0);
    b.set_utilities("TC", UtilityTensor::new(tc)).unwrap();
    let hb = table_rows(&[2, 2], |d| params.health_benefit[d[0]][d[1]] + utility_offset);
    b.set_utilities("HB", UtilityTensor::new(hb)).unwrap();

    let diagram = b.freeze().expect("CHD model is valid");
    let forbidden = [("TRS", "TRS"), ("GRS", "GRS"), ("none", "TRS"), ("none", "GRS")]
        .iter()
        .map(|&(a, c)| ForbiddenPattern::from_names(&diagram, &[("T1", &[a]), ("T2", &[c])]))
        .collect::<Result<Vec<_>, _>>()?;
    let fixed = prior_level.map(|l| vec![(diagram.id("R0").unwrap(), l as StateIndex)]).unwrap_or_default();
    Ok(ChdModel { diagram, forbidden, fixed, utility_offset })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ChdSolver {
    BruteForce,
    Spu { restarts: u64, seed: u64 },
}

/// Optimal first action for one prior risk level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorLevelResult {
    pub level: usize,
    pub risk: f64,
    pub first_test: String,
    /// Expected utility in model units, offset included.
    pub expected_utility: f64,
    /// Expected utility with the offset removed.
    pub net_expected_utility: f64,
    #[serde(skip)]
    pub strategy: Strategy,
}

/// Solves the model once per pinned prior level, in parallel, ordered by level.
pub fn solve_per_prior(params: &ChdParams, solver: ChdSolver) -> Result<Vec<PriorLevelResult>, BenchmarkError> {
    params.validate()?;
    (0..params.risk_levels)
        .into_par_iter()
        .map(|level| {
            let model = gen_chd(params, Some(level))?;
            let d = &model.diagram;
            let table = enumerate_paths(d, &model.enumeration_options())?;
            let (strategy, eu) = match solver {
                ChdSolver::BruteForce => {
                    let r = brute_force(d, &table, DEFAULT_STRATEGY_CAP)?;
                    (r.strategy, r.expected_utility)
                }
                ChdSolver::Spu { restarts, seed } => {
                    let r = spu_multistart(d, &table, restarts, seed)?.best;
                    (r.strategy, r.expected_utility)
                }
            };
            let mass = compatible_probability(d, &table, &strategy);
            Ok(PriorLevelResult {
                level,
                risk: params.level(level),
                first_test: TESTS[strategy.choice(0, level) as usize].to_string(),
                expected_utility: eu,
                net_expected_utility: eu - model.utility_offset * mass,
                strategy,
            })
        })
        .collect()
}
