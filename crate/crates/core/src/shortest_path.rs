//! Dijkstra over positive arc costs with arc/node exclusions and three ways
//! of pricing tolled arcs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::fixed::Fixed;
use crate::network::{Arc, Network};

/// How tolled arcs are priced during a search.
#[derive(Debug, Clone, Copy)]
pub enum TollRegime<'a> {
    /// Tolls are zero: tolled arcs cost `c_a`.
    Zero,
    /// Tolled arc `a` costs `c_a + caps[a]` (indexed by arc id).
    Capped(&'a [Fixed]),
    /// Tolled arcs are removed.
    Infinite,
}

impl TollRegime<'_> {
    pub fn arc_cost(&self, arc: &Arc) -> Option<Fixed> {
        if !arc.tolled {
            return Some(arc.cost);
        }
        match self {
            TollRegime::Zero => Some(arc.cost),
            TollRegime::Capped(caps) => Some(arc.cost + caps[arc.id]),
            TollRegime::Infinite => None,
        }
    }
}

/// Arcs and nodes ignored by a search. Excluding a node excludes every arc
/// touching it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSet {
    pub arcs: HashSet<usize>,
    pub nodes: HashSet<usize>,
}

impl ExclusionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_arcs(arcs: impl IntoIterator<Item = usize>) -> Self {
        ExclusionSet {
            arcs: arcs.into_iter().collect(),
            nodes: HashSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty() && self.nodes.is_empty()
    }

    fn allows(&self, arc: &Arc) -> bool {
        !self.arcs.contains(&arc.id)
            && !self.nodes.contains(&arc.tail)
            && !self.nodes.contains(&arc.head)
    }
}

/// Distance from every node to `target` (None when `target` is unreachable)
/// under an arbitrary per-arc pricing. `cost` returns None for removed arcs.
pub fn distances_with<F>(
    network: &Network,
    target: usize,
    excl: &ExclusionSet,
    cost: F,
) -> Vec<Option<Fixed>>
where
    F: Fn(&Arc) -> Option<Fixed>,
{
    let mut dist: Vec<Option<Fixed>> = vec![None; network.node_count()];
    if excl.nodes.contains(&target) {
        return dist;
    }
    let mut done = vec![false; network.node_count()];
    let mut heap = BinaryHeap::new();
    dist[target] = Some(Fixed::ZERO);
    heap.push(Reverse((Fixed::ZERO, target)));
    while let Some(Reverse((d, node))) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        for &a in network.incoming(node) {
            let arc = network.arc(a);
            if !excl.allows(arc) {
                continue;
            }
            let Some(c) = cost(arc) else { continue };
            let candidate = d + c;
            if dist[arc.tail].is_none_or(|old| candidate < old) {
                dist[arc.tail] = Some(candidate);
                heap.push(Reverse((candidate, arc.tail)));
            }
        }
    }
    dist
}

/// Shortest-path distances from every node to `destination`.
pub fn distances_to(
    network: &Network,
    destination: usize,
    regime: TollRegime<'_>,
) -> Vec<Option<Fixed>> {
    distances_with(network, destination, &ExclusionSet::new(), |a| {
        regime.arc_cost(a)
    })
}

/// Minimum-cost path from `source` to `target` under an arbitrary pricing,
/// returning the lexicographically smallest arc-id sequence among ties.
pub fn shortest_path_with<F>(
    network: &Network,
    source: usize,
    target: usize,
    excl: &ExclusionSet,
    cost: F,
) -> Option<(Vec<usize>, Fixed)>
where
    F: Fn(&Arc) -> Option<Fixed>,
{
    if excl.nodes.contains(&source) {
        return None;
    }
    let dist = distances_with(network, target, excl, &cost);
    let total = dist[source]?;
    let mut arcs = Vec::new();
    let mut node = source;
    while node != target {
        let here = dist[node].expect("walk stays on reachable nodes");
        // Arc lists are in id order, so the first tight arc is the smallest.
        let next = network
            .outgoing(node)
            .iter()
            .map(|&a| network.arc(a))
            .find(|arc| {
                excl.allows(arc)
                    && match (cost(arc), dist[arc.head]) {
                        (Some(c), Some(h)) => c + h == here,
                        _ => false,
                    }
            })
            .expect("a tight arc leaves every reachable node");
        arcs.push(next.id);
        node = next.head;
    }
    Some((arcs, total))
}

/// Minimum-cost simple path from `source` to `target` under `regime`,
/// ignoring excluded arcs and nodes.
pub fn shortest_path(
    network: &Network,
    source: usize,
    target: usize,
    regime: TollRegime<'_>,
    excl: &ExclusionSet,
) -> Option<(Vec<usize>, Fixed)> {
    shortest_path_with(network, source, target, excl, |a| regime.arc_cost(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{parse_instance, ArcSpec};
    use proptest::prelude::*;

    const TOY5: &str = "npp 5 7 1\narc 0 1 1 T\narc 1 2 1 T\narc 2 4 1 T\narc 2 3 2 F\narc 3 4 2 F\narc 1 4 3 F\narc 0 4 10 F\ncommodity 0 4 1\n";
    const O: usize = 0;
    const U: usize = 1;
    const V: usize = 2;
    const W: usize = 3;
    const D: usize = 4;

    fn toy5() -> Network {
        parse_instance(TOY5).unwrap().network
    }

    fn ints(values: &[Option<Fixed>]) -> Vec<Option<i64>> {
        values
            .iter()
            .map(|v| v.map(|f| (f.raw() / crate::fixed::SCALE) as i64))
            .collect()
    }

    #[test]
    fn zero_regime_shortest_path() {
        let net = toy5();
        let (arcs, cost) = shortest_path(&net, O, D, TollRegime::Zero, &ExclusionSet::new()).unwrap();
        assert_eq!(net.path_nodes(&arcs), vec![O, U, V, D]);
        assert_eq!(cost, Fixed::from_int(3));
    }

    #[test]
    fn infinite_regime_shortest_path() {
        let net = toy5();
        let (arcs, cost) =
            shortest_path(&net, O, D, TollRegime::Infinite, &ExclusionSet::new()).unwrap();
        assert_eq!(net.path_nodes(&arcs), vec![O, D]);
        assert_eq!(cost, Fixed::from_int(10));
    }

    #[test]
    fn excluded_arc_forces_detour() {
        let net = toy5();
        let excl = ExclusionSet::with_arcs([1]);
        let (arcs, cost) = shortest_path(&net, O, D, TollRegime::Zero, &excl).unwrap();
        assert_eq!(net.path_nodes(&arcs), vec![O, U, D]);
        assert_eq!(cost, Fixed::from_int(4));
    }

    #[test]
    fn distances_in_toy5() {
        let net = toy5();
        let mut expected = vec![None; 5];
        for (node, d) in [(D, 0), (W, 2), (V, 1), (U, 2), (O, 3)] {
            expected[node] = Some(d);
        }
        assert_eq!(ints(&distances_to(&net, D, TollRegime::Zero)), expected);
        for (node, d) in [(D, 0), (W, 2), (V, 4), (U, 3), (O, 10)] {
            expected[node] = Some(d);
        }
        assert_eq!(ints(&distances_to(&net, D, TollRegime::Infinite)), expected);
    }

    #[test]
    fn capped_regime_adds_caps_on_tolled_arcs() {
        let net = toy5();
        let caps = vec![Fixed::from_int(7); net.arc_count()];
        let dist = distances_to(&net, D, TollRegime::Capped(&caps));
        // v: min(1+7, 2+2) = 4; u: min(8+4, 3) = 3; o: min(8+3, 10) = 10
        assert_eq!(ints(&dist), vec![Some(10), Some(3), Some(4), Some(2), Some(0)]);
    }

    #[test]
    fn disconnected_is_none() {
        let net = Network::new(3, [ArcSpec::new(0, 1, Fixed::ONE, false)]).unwrap();
        assert!(shortest_path(&net, 0, 2, TollRegime::Zero, &ExclusionSet::new()).is_none());
        assert_eq!(distances_to(&net, 2, TollRegime::Zero)[0], None);
    }

    #[test]
    fn ties_pick_smallest_arc_sequence() {
        // two equal routes 0->1->3 (arcs 2,3) and 0->2->3 (arcs 0,1)
        let c = Fixed::ONE;
        let net = Network::new(
            4,
            [
                ArcSpec::new(0, 2, c, false),
                ArcSpec::new(2, 3, c, false),
                ArcSpec::new(0, 1, c, false),
                ArcSpec::new(1, 3, c, false),
            ],
        )
        .unwrap();
        let (arcs, _) = shortest_path(&net, 0, 3, TollRegime::Zero, &ExclusionSet::new()).unwrap();
        assert_eq!(arcs, vec![0, 1]);
    }

    fn arb_network() -> impl Strategy<Value = Network> {
        (2usize..8).prop_flat_map(|n| {
            let arc = (0..n, 1..n, 1i64..20, any::<bool>())
                .prop_map(move |(t, off, c, tol)| ArcSpec::new(t, (t + off) % n, Fixed::from_int(c), tol));
            prop::collection::vec(arc, 1..24).prop_map(move |arcs| Network::new(n, arcs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn relaxation_fixpoint(net in arb_network(), target_seed in 0usize..8) {
            let target = target_seed % net.node_count();
            let caps = vec![Fixed::from_int(3); net.arc_count()];
            for regime in [TollRegime::Zero, TollRegime::Capped(&caps), TollRegime::Infinite] {
                let dist = distances_to(&net, target, regime);
                prop_assert_eq!(dist[target], Some(Fixed::ZERO));
                for arc in net.arcs() {
                    if let (Some(c), Some(dh)) = (regime.arc_cost(arc), dist[arc.head]) {
                        let dt = dist[arc.tail];
                        prop_assert!(dt.is_some_and(|dt| dt <= c + dh));
                    }
                }
            }
        }

        #[test]
        fn path_cost_matches_distance(net in arb_network(), s in 0usize..8, t in 0usize..8) {
            let (s, t) = (s % net.node_count(), t % net.node_count());
            let dist = distances_to(&net, t, TollRegime::Zero);
            let found = shortest_path(&net, s, t, TollRegime::Zero, &ExclusionSet::new());
            prop_assert_eq!(found.as_ref().map(|f| f.1), dist[s]);
            if let Some((arcs, cost)) = found {
                let sum: Fixed = arcs.iter().map(|&a| net.arc(a).cost).sum();
                prop_assert_eq!(sum, cost);
                let nodes = net.path_nodes(&arcs);
                let unique: HashSet<_> = nodes.iter().collect();
                prop_assert_eq!(unique.len(), nodes.len());
            }
        }

        #[test]
        fn exclusions_never_decrease_cost(
            net in arb_network(),
            s in 0usize..8,
            t in 0usize..8,
            drop_arcs in prop::collection::vec(0usize..24, 0..4),
            drop_node in 0usize..8,
        ) {
            let (s, t) = (s % net.node_count(), t % net.node_count());
            let small = ExclusionSet::with_arcs(drop_arcs.iter().map(|a| a % net.arc_count()));
            let mut large = small.clone();
            let node = drop_node % net.node_count();
            if node != s && node != t {
                large.nodes.insert(node);
            }
            let base = shortest_path(&net, s, t, TollRegime::Zero, &ExclusionSet::new()).map(|f| f.1);
            let a = shortest_path(&net, s, t, TollRegime::Zero, &small).map(|f| f.1);
            let b = shortest_path(&net, s, t, TollRegime::Zero, &large).map(|f| f.1);
            let le = |x: Option<Fixed>, y: Option<Fixed>| match (x, y) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(x), Some(y)) => x <= y,
            };
            prop_assert!(le(base, a));
            prop_assert!(le(a, b));
        }
    }
}
