//! Enumeration of candidate bilevel-feasible paths in nondecreasing base
//! cost, the subset-dominance filter, and cost perturbation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fixed::Fixed;
use crate::network::{Commodity, Network};
use crate::shortest_path::{shortest_path, shortest_path_with, ExclusionSet, TollRegime};

/// Cap value meaning "enumerate until the toll-free stopping path".
pub const UNBOUNDED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerationError {
    #[error("perturbation magnitude must be positive, got {0}")]
    NonPositiveMagnitude(Fixed),
    #[error("paths are not sorted by base cost (position {0})")]
    Unsorted(usize),
    #[error("arc sequence is not a simple path: {0}")]
    InvalidPath(String),
}

/// A simple path given by its arc ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub arcs: Vec<usize>,
    pub base_cost: Fixed,
    /// Tolled arc ids on the path, sorted ascending.
    pub tolled: Vec<usize>,
}

impl Path {
    /// Builds a path, checking that arcs chain head-to-tail and that no node
    /// repeats.
    pub fn from_arcs(network: &Network, arcs: Vec<usize>) -> Result<Path, EnumerationError> {
        if arcs.is_empty() {
            return Err(EnumerationError::InvalidPath("empty".into()));
        }
        for &a in &arcs {
            if a >= network.arc_count() {
                return Err(EnumerationError::InvalidPath(format!("unknown arc {a}")));
            }
        }
        for pair in arcs.windows(2) {
            if network.arc(pair[0]).head != network.arc(pair[1]).tail {
                return Err(EnumerationError::InvalidPath(format!(
                    "arcs {} and {} do not connect",
                    pair[0], pair[1]
                )));
            }
        }
        let nodes = network.path_nodes(&arcs);
        let distinct: BTreeSet<_> = nodes.iter().collect();
        if distinct.len() != nodes.len() {
            return Err(EnumerationError::InvalidPath("repeated node".into()));
        }
        Ok(Self::new_unchecked(network, arcs))
    }

    pub(crate) fn new_unchecked(network: &Network, arcs: Vec<usize>) -> Path {
        let base_cost = arcs.iter().map(|&a| network.arc(a).cost).sum();
        let mut tolled: Vec<usize> = arcs
            .iter()
            .copied()
            .filter(|&a| network.arc(a).tolled)
            .collect();
        tolled.sort_unstable();
        Path {
            arcs,
            base_cost,
            tolled,
        }
    }

    pub fn is_toll_free(&self) -> bool {
        self.tolled.is_empty()
    }

    pub fn nodes(&self, network: &Network) -> Vec<usize> {
        network.path_nodes(&self.arcs)
    }

    pub fn contains_arc(&self, arc: usize) -> bool {
        self.arcs.contains(&arc)
    }

    /// Toll-inclusive cost of the path for a toll vector indexed by arc id.
    pub fn cost_with_tolls(&self, tolls: &[Fixed]) -> Fixed {
        self.base_cost + self.tolled.iter().map(|&a| tolls[a]).sum::<Fixed>()
    }

    fn tolled_subset_of(&self, other: &Path) -> bool {
        let mut it = other.tolled.iter();
        self.tolled.iter().all(|a| it.any(|b| b == a))
    }
}

/// A path waiting in the candidate pool together with its subproblem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePath {
    pub path: Path,
    pub spur_node: usize,
    pub excluded_tolled: Vec<usize>,
}

impl Ord for CandidatePath {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed so that BinaryHeap pops the cheapest, then lexicographically smallest
        other
            .path
            .base_cost
            .cmp(&self.path.base_cost)
            .then_with(|| other.path.arcs.cmp(&self.path.arcs))
    }
}

impl PartialOrd for CandidatePath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Output of [`enumerate_paths`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub paths: Vec<Path>,
    pub stopped_at_toll_free: bool,
}

/// Emits paths for one commodity in nondecreasing base cost until the first
/// toll-free path is emitted or `cap` paths have been emitted.
///
/// For each emitted path only the subproblems that drop one of its tolled
/// arcs after the spur node are explored; the others are dominated.
pub fn enumerate_paths(network: &Network, commodity: &Commodity, cap: usize) -> Enumeration {
    let (o, d) = (commodity.origin, commodity.destination);
    let mut pool = BinaryHeap::new();
    if let Some((arcs, _)) = shortest_path(network, o, d, TollRegime::Zero, &ExclusionSet::new()) {
        pool.push(CandidatePath {
            path: Path::new_unchecked(network, arcs),
            spur_node: o,
            excluded_tolled: Vec::new(),
        });
    }
    let mut paths = Vec::new();
    let mut stopped = false;
    while paths.len() < cap {
        let Some(candidate) = pool.pop() else { break };
        let CandidatePath {
            path,
            spur_node,
            excluded_tolled,
        } = candidate;
        if path.is_toll_free() {
            paths.push(path);
            stopped = true;
            break;
        }
        let nodes = path.nodes(network);
        let spur_pos = nodes
            .iter()
            .position(|&n| n == spur_node)
            .expect("spur node lies on its path");
        let mut spur_pos_hat = spur_pos;
        for (offset, &a) in path.arcs[spur_pos..].iter().enumerate() {
            if !network.arc(a).tolled {
                continue;
            }
            let spur_hat = nodes[spur_pos_hat];
            let mut excluded = excluded_tolled.clone();
            excluded.push(a);
            let excl = ExclusionSet {
                arcs: excluded.iter().copied().collect(),
                nodes: nodes[..spur_pos_hat].iter().copied().collect(),
            };
            if let Some((tail, _)) = shortest_path(network, spur_hat, d, TollRegime::Zero, &excl) {
                let mut arcs = path.arcs[..spur_pos_hat].to_vec();
                arcs.extend(tail);
                pool.push(CandidatePath {
                    path: Path::new_unchecked(network, arcs),
                    spur_node: spur_hat,
                    excluded_tolled: excluded,
                });
            }
            spur_pos_hat = spur_pos + offset + 1;
        }
        paths.push(path);
    }
    Enumeration {
        paths,
        stopped_at_toll_free: stopped,
    }
}

/// Removes every path whose tolled set contains the tolled set of a
/// strictly cheaper path. Among paths with equal cost and equal tolled set
/// only the first is kept.
pub fn dominance_filter(paths: &[Path]) -> Result<Vec<Path>, EnumerationError> {
    if let Some(i) = paths
        .windows(2)
        .position(|w| w[0].base_cost > w[1].base_cost)
    {
        return Err(EnumerationError::Unsorted(i + 1));
    }
    let mut survivors: Vec<Path> = Vec::new();
    for q in paths {
        // A dominated survivor would itself be dominated by its dominator, so
        // checking survivors only is enough.
        let dominated = survivors.iter().any(|p| {
            p.tolled_subset_of(q)
                && (p.base_cost < q.base_cost || p.tolled == q.tolled)
        });
        if !dominated {
            survivors.push(q.clone());
        }
    }
    Ok(survivors)
}

/// Bilevel-feasible paths of one commodity, cheapest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilevelFeasibleSet {
    pub commodity: usize,
    pub paths: Vec<Path>,
    /// True when enumeration reached the toll-free stopping path, so that
    /// `paths` holds every bilevel-feasible path.
    pub exhaustive: bool,
}

impl BilevelFeasibleSet {
    pub fn from_enumeration(commodity: usize, enumeration: &Enumeration) -> Self {
        let paths = dominance_filter(&enumeration.paths)
            .expect("enumeration emits paths in nondecreasing cost");
        BilevelFeasibleSet {
            commodity,
            paths,
            exhaustive: enumeration.stopped_at_toll_free,
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// The shortest toll-free path, present when the set is exhaustive.
    pub fn toll_free_path(&self) -> Option<&Path> {
        self.paths.last().filter(|p| p.is_toll_free())
    }
}

/// Enumerates and filters every commodity with the same cap.
pub fn enumerate_all(
    network: &Network,
    commodities: &[Commodity],
    cap: usize,
) -> Vec<BilevelFeasibleSet> {
    commodities
        .iter()
        .enumerate()
        .map(|(k, c)| BilevelFeasibleSet::from_enumeration(k, &enumerate_paths(network, c, cap)))
        .collect()
}

/// Checks that `path` is a cheapest route when its own tolled arcs are free
/// and every other tolled arc is closed.
pub fn is_bilevel_feasible(network: &Network, commodity: &Commodity, path: &Path) -> bool {
    let best = shortest_path_with(
        network,
        commodity.origin,
        commodity.destination,
        &ExclusionSet::new(),
        |arc| (!arc.tolled || path.tolled.binary_search(&arc.id).is_ok()).then_some(arc.cost),
    );
    best.is_some_and(|(_, cost)| cost == path.base_cost)
}

/// Adds an independent uniform draw from (0, magnitude] to every arc cost.
/// Reversed twins (same endpoints swapped, same cost) get the same draw.
pub fn perturb_costs(
    network: &Network,
    magnitude: Fixed,
    seed: u64,
) -> Result<Network, EnumerationError> {
    if !magnitude.is_positive() {
        return Err(EnumerationError::NonPositiveMagnitude(magnitude));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waiting: HashMap<(usize, usize, Fixed, bool), Vec<Fixed>> = HashMap::new();
    let mut costs = Vec::with_capacity(network.arc_count());
    for arc in network.arcs() {
        let twin_key = (arc.head, arc.tail, arc.cost, arc.tolled);
        let draw = match waiting.get_mut(&twin_key).and_then(|v| v.pop()) {
            Some(shared) => shared,
            None => {
                let draw = Fixed::from_raw(rng.random_range(1..=magnitude.raw()));
                waiting
                    .entry((arc.tail, arc.head, arc.cost, arc.tolled))
                    .or_default()
                    .insert(0, draw);
                draw
            }
        };
        costs.push(arc.cost + draw);
    }
    Ok(network.with_costs(&costs))
}

/// Default perturbation size: 1e-9 times the smallest arc cost.
pub fn default_perturbation(network: &Network) -> Option<Fixed> {
    let min = network.min_cost()?;
    let size = min.mul_truncated(Fixed::from_raw(1_000_000_000));
    size.is_positive().then_some(size)
}
