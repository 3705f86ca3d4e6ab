//! Exact strategy enumeration and single policy update (SPU).
//!
//! Both solvers share [`Engine`], which keeps for every effective path the
//! number of decisions on which the path disagrees with the current
//! strategy. A path counts towards the expected utility exactly when that
//! number is zero, so changing one entry Z_j(s_I(j)) only touches the paths
//! grouped under (j, s_I(j)).

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagram::{InfluenceDiagram, StateIndex};
use crate::paths::PathTable;
use crate::strategy::{decision_positions, expected_utility, random_strategy_stream, Strategy};

/// Default ceiling on the number of strategies brute force will walk.
pub const DEFAULT_STRATEGY_CAP: u128 = 1 << 22;

/// Relative margin an alternative must beat to count as an improvement.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("StrategySpaceTooLarge: {strategies} strategies to examine exceed the cap of {cap}")]
    StrategySpaceTooLarge { strategies: u128, cap: u128 },
    #[error("path table does not belong to this diagram")]
    TableMismatch,
}

struct Engine<'a> {
    table: &'a PathTable,
    n_states: Vec<usize>,
    weights: Vec<f64>,
    mismatch: Vec<u16>,
    strategy: Strategy,
    eu: f64,
    tolerance: f64,
}

impl<'a> Engine<'a> {
    fn new(diagram: &InfluenceDiagram, table: &'a PathTable, strategy: Strategy) -> Result<Self, SolverError> {
        if table.decisions() != diagram.decision_nodes() || table.width() != diagram.path_len() {
            return Err(SolverError::TableMismatch);
        }
        let positions = decision_positions(diagram);
        let weights: Vec<f64> = (0..table.len()).map(|i| table.probability(i) * table.utility(i)).collect();
        let mismatch: Vec<u16> = (0..table.len())
            .map(|i| {
                let path = table.path(i);
                positions
                    .iter()
                    .enumerate()
                    .filter(|&(slot, &pos)| strategy.choice(slot, table.decision_info(i, slot)) != path[pos])
                    .count() as u16
            })
            .collect();
        let scale = weights.iter().map(|w| w.abs()).sum::<f64>().max(1.0);
        let mut engine = Engine {
            table,
            n_states: diagram.decision_nodes().iter().map(|&j| diagram.node(j).num_states()).collect(),
            weights,
            mismatch,
            strategy,
            eu: 0.0,
            tolerance: IMPROVEMENT_TOLERANCE * scale,
        };
        engine.eu = engine.exact_eu();
        Ok(engine)
    }

    /// Same summation order as [`expected_utility`].
    fn exact_eu(&self) -> f64 {
        let mut eu = 0.0;
        for (i, &m) in self.mismatch.iter().enumerate() {
            if m == 0 {
                eu += self.weights[i];
            }
        }
        eu
    }

    fn group(&self, slot: usize, info: usize, state: usize) -> &'a [u32] {
        self.table.lcp_by_slot(slot, info * self.n_states[slot] + state)
    }

    /// Contribution of the paths under (slot, info) if Z_slot(info) were set
    /// to each alternative, everything else fixed.
    fn alternatives(&self, slot: usize, info: usize) -> Vec<f64> {
        let current = self.strategy.choice(slot, info) as usize;
        (0..self.n_states[slot])
            .map(|s| {
                let need = u16::from(s != current);
                self.group(slot, info, s)
                    .iter()
                    .filter(|&&i| self.mismatch[i as usize] == need)
                    .map(|&i| self.weights[i as usize])
                    .sum()
            })
            .collect()
    }

    fn apply(&mut self, slot: usize, info: usize, to: usize) {
        let from = self.strategy.choice(slot, info) as usize;
        if from == to {
            return;
        }
        for &i in self.group(slot, info, from) {
            let m = &mut self.mismatch[i as usize];
            *m += 1;
            if *m == 1 {
                self.eu -= self.weights[i as usize];
            }
        }
        for &i in self.group(slot, info, to) {
            let m = &mut self.mismatch[i as usize];
            *m -= 1;
            if *m == 0 {
                self.eu += self.weights[i as usize];
            }
        }
        self.strategy.set_choice(slot, info, to as StateIndex);
    }

    /// Best strictly improving alternative at (slot, info), lowest index on ties.
    fn best_move(&self, slot: usize, info: usize) -> Option<(usize, f64)> {
        let values = self.alternatives(slot, info);
        let current = self.strategy.choice(slot, info) as usize;
        let mut best = 0;
        for (s, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = s;
            }
        }
        (values[best] > values[current] + self.tolerance).then(|| (best, values[best] - values[current]))
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.strategy
            .locals()
            .iter()
            .enumerate()
            .flat_map(|(slot, l)| (0..l.choices().len()).map(move |info| (slot, info)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    #[serde(skip)]
    pub strategy: Strategy,
    pub expected_utility: f64,
    /// Strategies actually walked.
    pub examined: u128,
    /// Size of the full strategy space Π_j |S_j|^{|S_I(j)|}.
    pub total: u128,
}

/// Size of the full strategy space, saturating at `u128::MAX`.
pub fn strategy_count(diagram: &InfluenceDiagram) -> u128 {
    diagram.decision_nodes().iter().fold(1u128, |acc, &j| {
        let node = diagram.node(j);
        let per = (node.num_states() as u128).checked_pow(node.info_state_count() as u32).unwrap_or(u128::MAX);
        acc.saturating_mul(per)
    })
}

/// Information states of each decision that occur on some effective path
/// with positive probability. Choices elsewhere never change the expected
/// utility.
fn relevant_info_states(table: &PathTable, strategy: &Strategy) -> Vec<Vec<usize>> {
    strategy
        .locals()
        .iter()
        .enumerate()
        .map(|(slot, l)| {
            let mut seen = vec![false; l.choices().len()];
            for i in 0..table.len() {
                if table.probability(i) > 0.0 {
                    seen[table.decision_info(i, slot)] = true;
                }
            }
            (0..seen.len()).filter(|&k| seen[k]).collect()
        })
        .collect()
}

/// Exact maximizer of the expected utility, ties going to the
/// lexicographically smallest strategy encoding.
///
/// Entries of the strategy at information states that no positive-probability
/// path reaches are held at the first alternative, which is what the
/// tie-breaking rule picks for them anyway; `cap` applies to the remaining
/// space.
pub fn brute_force(diagram: &InfluenceDiagram, table: &PathTable, cap: u128) -> Result<BruteForceResult, SolverError> {
    let start = Strategy::first_alternatives(diagram);
    let relevant = relevant_info_states(table, &start);
    let coords: Vec<(usize, usize)> =
        relevant.iter().enumerate().flat_map(|(slot, infos)| infos.iter().map(move |&k| (slot, k))).collect();
    let n_states: Vec<usize> = diagram.decision_nodes().iter().map(|&j| diagram.node(j).num_states()).collect();
    let space = coords
        .iter()
        .fold(1u128, |acc, &(slot, _)| acc.saturating_mul(n_states[slot] as u128));
    if space > cap {
        return Err(SolverError::StrategySpaceTooLarge { strategies: space, cap });
    }

    let mut engine = Engine::new(diagram, table, start)?;
    let mut best = engine.strategy.clone();
    let mut best_eu = engine.eu;
    let mut examined = 1u128;
    'walk: loop {
        let mut k = coords.len();
        loop {
            if k == 0 {
                break 'walk;
            }
            k -= 1;
            let (slot, info) = coords[k];
            let next = engine.strategy.choice(slot, info) as usize + 1;
            if next < n_states[slot] {
                engine.apply(slot, info, next);
                break;
            }
            engine.apply(slot, info, 0);
        }
        examined += 1;
        // The running sum drifts; only candidates near the incumbent are
        // re-summed exactly before comparing.
        if engine.eu > best_eu - engine.tolerance {
            let exact = engine.exact_eu();
            if exact > best_eu + engine.tolerance {
                best_eu = exact;
                best = engine.strategy.clone();
            }
        }
    }
    Ok(BruteForceResult {
        expected_utility: expected_utility(diagram, table, &best),
        strategy: best,
        examined,
        total: strategy_count(diagram),
    })
}

/// One accepted SPU move.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpuMove {
    pub node: String,
    pub info_state: usize,
    pub from: StateIndex,
    pub to: StateIndex,
    pub old_eu: f64,
    pub new_eu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpuResult {
    #[serde(skip)]
    pub strategy: Strategy,
    pub expected_utility: f64,
    pub trace: Vec<SpuMove>,
    /// Full sweeps, the last one making no change.
    pub sweeps: usize,
}

/// Single policy update from `initial` until a whole sweep makes no change.
pub fn spu(diagram: &InfluenceDiagram, table: &PathTable, initial: Strategy) -> Result<SpuResult, SolverError> {
    let mut engine = Engine::new(diagram, table, initial)?;
    let pairs: Vec<(usize, usize)> = engine.pairs().collect();
    let mut trace = Vec::new();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for &(slot, info) in &pairs {
            if let Some((to, gain)) = engine.best_move(slot, info) {
                let from = engine.strategy.choice(slot, info);
                let old_eu = engine.eu;
                engine.apply(slot, info, to);
                trace.push(SpuMove {
                    node: diagram.node(diagram.decision_nodes()[slot]).name().to_string(),
                    info_state: info,
                    from,
                    to: to as StateIndex,
                    old_eu,
                    new_eu: old_eu + gain,
                });
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(SpuResult { expected_utility: expected_utility(diagram, table, &engine.strategy), strategy: engine.strategy, trace, sweeps })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub restart: u64,
    pub initial_eu: f64,
    pub final_eu: f64,
    pub moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultistartResult {
    pub best: SpuResult,
    pub best_restart: u64,
    pub restarts: Vec<RestartSummary>,
}

/// SPU from `restarts` random strategies; restart r starts from ChaCha
/// stream r of `seed`, so restart 0 is `random_strategy(seed)`. Restarts run
/// in parallel and the best is chosen by EU, then by lowest restart index.
pub fn spu_multistart(
    diagram: &InfluenceDiagram,
    table: &PathTable,
    restarts: u64,
    seed: u64,
) -> Result<MultistartResult, SolverError> {
    let restarts = restarts.max(1);
    let runs: Vec<(f64, SpuResult)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let initial = random_strategy_stream(diagram, seed, r);
            let initial_eu = expected_utility(diagram, table, &initial);
            spu(diagram, table, initial).map(|res| (initial_eu, res))
        })
        .collect::<Result<_, _>>()?;
    let summaries = runs
        .iter()
        .enumerate()
        .map(|(r, (init, res))| RestartSummary {
            restart: r as u64,
            initial_eu: *init,
            final_eu: res.expected_utility,
            moves: res.trace.len(),
        })
        .collect();
    let mut best = 0;
    for (r, (_, res)) in runs.iter().enumerate() {
        if res.expected_utility > runs[best].1.expected_utility {
            best = r;
        }
    }
    let (_, best_result) = runs.into_iter().nth(best).expect("at least one restart");
    Ok(MultistartResult { best: best_result, best_restart: best as u64, restarts: summaries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovingPair {
    pub node: String,
    pub info_state: usize,
    pub from: StateIndex,
    pub to: StateIndex,
    pub gain: f64,
}

/// `None` when no single reassignment Z_j(s_I(j)) strictly increases the
/// expected utility, otherwise the first improving pair in sweep order.
pub fn local_optimality_check(
    diagram: &InfluenceDiagram,
    table: &PathTable,
    strategy: &Strategy,
) -> Result<Option<ImprovingPair>, SolverError> {
    let engine = Engine::new(diagram, table, strategy.clone())?;
    for (slot, info) in engine.pairs() {
        if let Some((to, gain)) = engine.best_move(slot, info) {
            return Ok(Some(ImprovingPair {
                node: diagram.node(diagram.decision_nodes()[slot]).name().to_string(),
                info_state: info,
                from: strategy.choice(slot, info),
                to: to as StateIndex,
                gain,
            }));
        }
    }
    Ok(None)
}
