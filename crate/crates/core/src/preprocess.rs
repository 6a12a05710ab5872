//! Per-commodity graph reduction: keep only arcs on bilevel-feasible paths
//! and compress toll-free chains, or eliminate toll-free-only nodes (SPGM).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::enumeration::{BilevelFeasibleSet, Path};
use crate::fixed::Fixed;
use crate::network::{ArcSpec, Commodity, Network};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("commodity {0}: path set is not exhaustive, reduction would drop feasible paths")]
    NotExhaustive(usize),
    #[error("commodity {0}: path set is empty")]
    Empty(usize),
}

/// A commodity's working graph together with the maps back to the
/// original network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedGraph {
    pub network: Network,
    /// Original arc ids behind each reduced arc, in travel order.
    pub arc_origin: Vec<Vec<usize>>,
    /// Original node id of each reduced node.
    pub node_origin: Vec<usize>,
}

/// Arc under construction: endpoints in original node ids.
#[derive(Debug, Clone)]
struct WorkArc {
    tail: usize,
    head: usize,
    cost: Fixed,
    tolled: bool,
    origin: Vec<usize>,
}

impl ReducedGraph {
    /// The original network, unchanged.
    pub fn identity(network: &Network) -> ReducedGraph {
        ReducedGraph {
            network: network.clone(),
            arc_origin: (0..network.arc_count()).map(|a| vec![a]).collect(),
            node_origin: (0..network.node_count()).collect(),
        }
    }

    fn from_work(mut arcs: Vec<WorkArc>, mut nodes: Vec<usize>) -> ReducedGraph {
        arcs.sort_by(|a, b| a.origin.cmp(&b.origin));
        nodes.sort_unstable();
        nodes.dedup();
        let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let specs = arcs
            .iter()
            .map(|a| ArcSpec::new(index[&a.tail], index[&a.head], a.cost, a.tolled));
        let network = Network::new(nodes.len(), specs).expect("reduced arcs stay within kept nodes");
        ReducedGraph {
            network,
            arc_origin: arcs.into_iter().map(|a| a.origin).collect(),
            node_origin: nodes,
        }
    }

    /// Reduced node id of an original node, if it was kept.
    pub fn node(&self, original: usize) -> Option<usize> {
        self.node_origin.binary_search(&original).ok()
    }

    /// The commodity expressed in reduced node ids.
    pub fn commodity(&self, commodity: &Commodity) -> Option<Commodity> {
        Some(Commodity::new(
            self.node(commodity.origin)?,
            self.node(commodity.destination)?,
            commodity.demand,
        ))
    }

    /// The original tolled arc behind a reduced tolled arc.
    pub fn original_tolled(&self, reduced_arc: usize) -> Option<usize> {
        self.network
            .arc(reduced_arc)
            .tolled
            .then(|| self.arc_origin[reduced_arc][0])
    }

    /// Expands reduced arcs into original arcs.
    pub fn lift(&self, reduced_arcs: &[usize]) -> Vec<usize> {
        reduced_arcs
            .iter()
            .flat_map(|&a| self.arc_origin[a].iter().copied())
            .collect()
    }

    /// Expresses an original arc sequence with reduced arcs, if every
    /// segment is represented.
    pub fn project(&self, original_arcs: &[usize]) -> Option<Vec<usize>> {
        let mut by_first: HashMap<usize, Vec<usize>> = HashMap::new();
        for (r, origin) in self.arc_origin.iter().enumerate() {
            by_first.entry(origin[0]).or_default().push(r);
        }
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < original_arcs.len() {
            let rest = &original_arcs[pos..];
            let r = *by_first
                .get(&rest[0])?
                .iter()
                .find(|&&r| rest.starts_with(&self.arc_origin[r]))?;
            out.push(r);
            pos += self.arc_origin[r].len();
        }
        Some(out)
    }

    /// Projects a path onto this graph.
    pub fn project_path(&self, path: &Path) -> Option<Path> {
        let arcs = self.project(&path.arcs)?;
        Some(Path::new_unchecked(&self.network, arcs))
    }

    pub fn tolled_originals(&self) -> BTreeSet<usize> {
        (0..self.network.arc_count())
            .filter_map(|a| self.original_tolled(a))
            .collect()
    }
}

/// Keeps the arcs and nodes used by the commodity's bilevel-feasible paths,
/// then merges toll-free chains through nodes with one kept arc in and one
/// out. Origin and destination are never merged away.
pub fn path_based_reduce(
    network: &Network,
    commodity: &Commodity,
    bfset: &BilevelFeasibleSet,
) -> Result<ReducedGraph, PreprocessError> {
    if !bfset.exhaustive {
        return Err(PreprocessError::NotExhaustive(bfset.commodity));
    }
    if bfset.is_empty() {
        return Err(PreprocessError::Empty(bfset.commodity));
    }
    let kept: BTreeSet<usize> = bfset.paths.iter().flat_map(|p| p.arcs.iter().copied()).collect();
    let mut indeg: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut outdeg: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &a in &kept {
        let arc = network.arc(a);
        outdeg.entry(arc.tail).or_default().push(a);
        indeg.entry(arc.head).or_default().push(a);
    }
    let nodes: BTreeSet<usize> = indeg.keys().chain(outdeg.keys()).copied().collect();
    let compressible = |n: usize| -> bool {
        if n == commodity.origin || n == commodity.destination {
            return false;
        }
        match (indeg.get(&n).map(Vec::as_slice), outdeg.get(&n).map(Vec::as_slice)) {
            (Some([i]), Some([o])) => {
                let (i, o) = (network.arc(*i), network.arc(*o));
                !i.tolled && !o.tolled && i.tail != o.head
            }
            _ => false,
        }
    };

    let mut arcs = Vec::new();
    let mut merged = BTreeSet::new();
    for &a in &kept {
        if compressible(network.arc(a).tail) {
            continue;
        }
        let mut chain = vec![a];
        let mut head = network.arc(a).head;
        while compressible(head) {
            let next = outdeg[&head][0];
            chain.push(next);
            head = network.arc(next).head;
        }
        let first = network.arc(chain[0]);
        if chain.len() > 1 && first.tail != head {
            merged.extend(chain[1..].iter().map(|&c| network.arc(c).tail));
        } else if chain.len() > 1 {
            // merging would create a self-loop; keep the pieces
            for &c in &chain {
                let arc = network.arc(c);
                arcs.push(WorkArc { tail: arc.tail, head: arc.head, cost: arc.cost, tolled: arc.tolled, origin: vec![c] });
            }
            continue;
        }
        arcs.push(WorkArc {
            tail: first.tail,
            head,
            cost: chain.iter().map(|&c| network.arc(c).cost).sum(),
            tolled: first.tolled,
            origin: chain,
        });
    }
    let kept_nodes: Vec<usize> = nodes.into_iter().filter(|n| !merged.contains(n)).collect();
    Ok(ReducedGraph::from_work(arcs, kept_nodes))
}

/// Eliminates, in id order, every node that touches no tolled arc and is
/// not the commodity's origin or destination. Each (in, out) arc pair at an
/// eliminated node becomes one toll-free shortcut; parallel toll-free arcs
/// keep only the cheapest. Lifted paths of the result can revisit an
/// eliminated node when two shortcuts share it.
pub fn spgm_transform(network: &Network, commodity: &Commodity) -> ReducedGraph {
    let mut arcs: Vec<Option<WorkArc>> = network
        .arcs()
        .iter()
        .map(|a| {
            Some(WorkArc {
                tail: a.tail,
                head: a.head,
                cost: a.cost,
                tolled: a.tolled,
                origin: vec![a.id],
            })
        })
        .collect();
    let touches_toll: BTreeSet<usize> = network
        .tolled_arcs()
        .flat_map(|a| [a.tail, a.head])
        .collect();
    let mut alive_nodes = Vec::new();
    for node in 0..network.node_count() {
        if touches_toll.contains(&node) || node == commodity.origin || node == commodity.destination {
            alive_nodes.push(node);
            continue;
        }
        let incoming: Vec<WorkArc> = arcs.iter().flatten().filter(|a| a.head == node).cloned().collect();
        let outgoing: Vec<WorkArc> = arcs.iter().flatten().filter(|a| a.tail == node).cloned().collect();
        for slot in arcs.iter_mut() {
            if slot.as_ref().is_some_and(|a| a.tail == node || a.head == node) {
                *slot = None;
            }
        }
        for i in &incoming {
            for o in &outgoing {
                if i.tail == o.head {
                    continue;
                }
                let mut origin = i.origin.clone();
                origin.extend(&o.origin);
                arcs.push(Some(WorkArc {
                    tail: i.tail,
                    head: o.head,
                    cost: i.cost + o.cost,
                    tolled: false,
                    origin,
                }));
            }
        }
        dedup_toll_free(&mut arcs);
    }
    dedup_toll_free(&mut arcs);
    ReducedGraph::from_work(arcs.into_iter().flatten().collect(), alive_nodes)
}

fn dedup_toll_free(arcs: &mut [Option<WorkArc>]) {
    let mut best: HashMap<(usize, usize), usize> = HashMap::new();
    for idx in 0..arcs.len() {
        let Some(arc) = &arcs[idx] else { continue };
        if arc.tolled {
            continue;
        }
        let key = (arc.tail, arc.head);
        match best.get(&key) {
            Some(&other) if arcs[other].as_ref().unwrap().cost <= arc.cost => arcs[idx] = None,
            Some(&other) => {
                arcs[other] = None;
                best.insert(key, idx);
            }
            None => {
                best.insert(key, idx);
            }
        }
    }
}

/// Node, arc and tolled-arc counts of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphSize {
    pub nodes: usize,
    pub arcs: usize,
    pub tolled: usize,
}

impl GraphSize {
    pub fn of(network: &Network) -> GraphSize {
        GraphSize {
            nodes: network.node_count(),
            arcs: network.arc_count(),
            tolled: network.tolled_count(),
        }
    }
}
