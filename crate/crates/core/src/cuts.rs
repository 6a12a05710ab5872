//! Cut loop for arc-primal/path-dual complementary slackness (VFCS).
//!
//! Those blocks only carry slackness rows for listed paths. After each solve
//! the flow chosen by every VFCS block is decomposed into an origin to
//! destination path and cycles; an unlisted path gets its slackness row, a
//! cycle gets `sum of its arc variables <= |C| - 1`. The model is re-solved
//! until no cut is added.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use crate::bigm::BigMParams;
use crate::enumeration::Path;
use crate::fixed::Fixed;
use crate::formulation::{add_arc_path_row, var_x, var_y, Block, BlockRole, HybridModel};
use crate::model::{ModelIr, Sense};
use crate::solver::{solve, MilpBackend, SolveResult, SolverError};

pub const DEFAULT_MAX_ROUNDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cut {
    /// An origin-destination path (working-graph arc ids) with no slackness
    /// row yet.
    Path(Path),
    /// A cycle of selected arcs.
    Cycle(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct CutLoopOutcome {
    pub result: SolveResult,
    /// Number of solves performed.
    pub rounds: usize,
    pub path_cuts: usize,
    pub cycle_cuts: usize,
    /// False when the round cap or budget stopped the loop with cuts pending.
    pub converged: bool,
}

fn selected_arcs(block: &Block, result: &SolveResult) -> Vec<usize> {
    let net = &block.graph.network;
    (0..net.arc_count())
        .filter(|&a| {
            let name = if net.arc(a).tolled { var_x(block.k, a) } else { var_y(block.k, a) };
            result.value(&name).is_some_and(|v| v > 0.5)
        })
        .collect()
}

/// Breadth-first origin-destination path over the selected arcs.
fn od_path(block: &Block, selected: &[usize]) -> Option<Vec<usize>> {
    let net = &block.graph.network;
    let mut out: HashMap<usize, Vec<usize>> = HashMap::new();
    for &a in selected {
        out.entry(net.arc(a).tail).or_default().push(a);
    }
    let (o, d) = (block.commodity.origin, block.commodity.destination);
    let mut via: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::from([o]);
    let mut seen = BTreeSet::from([o]);
    while let Some(node) = queue.pop_front() {
        if node == d {
            let mut arcs = Vec::new();
            let mut cur = d;
            while cur != o {
                let a = via[&cur];
                arcs.push(a);
                cur = net.arc(a).tail;
            }
            arcs.reverse();
            return Some(arcs);
        }
        for &a in out.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            let head = net.arc(a).head;
            if seen.insert(head) {
                via.insert(head, a);
                queue.push_back(head);
            }
        }
    }
    None
}

/// Splits arcs left after removing the path into cycles.
fn cycles(block: &Block, mut rest: BTreeSet<usize>) -> Vec<Vec<usize>> {
    let net = &block.graph.network;
    let mut found = Vec::new();
    while let Some(&start) = rest.iter().next() {
        let mut walk = vec![start];
        let mut position: HashMap<usize, usize> = HashMap::from([(net.arc(start).tail, 0)]);
        let mut closed = None;
        loop {
            let node = net.arc(*walk.last().unwrap()).head;
            if let Some(&i) = position.get(&node) {
                closed = Some(walk[i..].to_vec());
                break;
            }
            position.insert(node, walk.len());
            match rest.iter().find(|&&a| net.arc(a).tail == node && !walk.contains(&a)) {
                Some(&a) => walk.push(a),
                None => break,
            }
        }
        match closed {
            Some(cycle) => {
                for a in &cycle {
                    rest.remove(a);
                }
                found.push(cycle);
            }
            // An open walk means the flow is not a circulation; drop its
            // first arc so the loop terminates.
            None => {
                rest.remove(&start);
            }
        }
    }
    found
}

/// Cuts violated by the block's current flow.
pub fn vfcs_feasibility_cuts(block: &Block, result: &SolveResult) -> Vec<Cut> {
    let net = &block.graph.network;
    let selected = selected_arcs(block, result);
    let mut cuts = Vec::new();
    let Some(path) = od_path(block, &selected) else {
        return cuts;
    };
    if !block.paths.iter().any(|p| p.arcs == path) {
        cuts.push(Cut::Path(Path::new_unchecked(net, path.clone())));
    }
    let rest: BTreeSet<usize> = selected.into_iter().filter(|a| !path.contains(a)).collect();
    cuts.extend(cycles(block, rest).into_iter().map(Cut::Cycle));
    cuts
}

fn add_cut(model: &mut ModelIr, block: &mut Block, cut: Cut, bigm: &BigMParams, serial: usize) -> Result<(), SolverError> {
    let k = block.k;
    let build = |e: crate::formulation::BuildError| SolverError::Backend {
        message: "cannot add cut".into(),
        output: e.to_string(),
    };
    match cut {
        Cut::Path(path) => {
            let tolled = path.tolled.iter().filter_map(|&a| block.graph.original_tolled(a));
            let s = bigm.s_for(k, path.base_cost, tolled);
            add_arc_path_row(model, block, &path, s, format!("lin-cs-ap[{k},{}]", block.paths.len()))
                .map_err(build)?;
            block.paths.push(path);
            block.path_s.push(s);
        }
        Cut::Cycle(arcs) => {
            let net = &block.graph.network;
            let terms: Vec<(Fixed, usize)> = arcs
                .iter()
                .map(|&a| {
                    let name = if net.arc(a).tolled { var_x(k, a) } else { var_y(k, a) };
                    (Fixed::ONE, model.var(&name).expect("arc variable exists"))
                })
                .collect();
            let rhs = Fixed::from_int(arcs.len() as i64 - 1);
            model
                .add_constraint(format!("vfcs-cycle[{k},{serial}]"), terms, Sense::Le, rhs)
                .map_err(|e| build(e.into()))?;
        }
    }
    Ok(())
}

/// Solves `hybrid`, adding VFCS cuts until none is violated, `max_rounds`
/// solves have been made, or `budget` is spent. Models without VFCS blocks
/// are solved once.
pub fn solve_with_vfcs_cuts(
    hybrid: &mut HybridModel,
    bigm: &BigMParams,
    budget: Duration,
    backend: &dyn MilpBackend,
    max_rounds: usize,
) -> Result<CutLoopOutcome, SolverError> {
    let start = Instant::now();
    let (mut path_cuts, mut cycle_cuts) = (0, 0);
    let mut rounds = 0;
    loop {
        let remaining = budget.saturating_sub(start.elapsed());
        let mut result = solve(&hybrid.model, remaining, backend)?;
        rounds += 1;
        result.wall_time = start.elapsed();
        if !result.has_incumbent() {
            return Ok(CutLoopOutcome {
                result,
                rounds,
                path_cuts,
                cycle_cuts,
                converged: false,
            });
        }
        let mut added = 0;
        for block in hybrid.blocks.iter_mut() {
            if !(block.kind.needs_cut_loop() && block.role == BlockRole::Main) {
                continue;
            }
            for cut in vfcs_feasibility_cuts(block, &result) {
                match cut {
                    Cut::Path(_) => path_cuts += 1,
                    Cut::Cycle(_) => cycle_cuts += 1,
                }
                add_cut(&mut hybrid.model, block, cut, bigm, cycle_cuts)?;
                added += 1;
            }
        }
        let converged = added == 0;
        if converged || rounds >= max_rounds || start.elapsed() >= budget {
            return Ok(CutLoopOutcome {
                result,
                rounds,
                path_cuts,
                cycle_cuts,
                converged,
            });
        }
    }
}
