//! Test-side oracles and instance pools shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use npp_core::enumeration::{BilevelFeasibleSet, Path};
use npp_core::generator::{generate, GenConfig, Topology};
use npp_core::network::{validate_instance, ArcSpec, Commodity, Network, ProblemInstance};
use npp_core::Fixed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOY5: &str = include_str!("../../../../instances/toy5.npp");

/// Every simple origin-destination path, by depth-first search.
pub fn all_simple_paths(network: &Network, commodity: &Commodity) -> Vec<Path> {
    fn dfs(net: &Network, node: usize, target: usize, on: &mut Vec<bool>, arcs: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node == target {
            out.push(arcs.clone());
            return;
        }
        for &a in net.outgoing(node) {
            let head = net.arc(a).head;
            if !on[head] {
                on[head] = true;
                arcs.push(a);
                dfs(net, head, target, on, arcs, out);
                arcs.pop();
                on[head] = false;
            }
        }
    }
    let mut on = vec![false; network.node_count()];
    on[commodity.origin] = true;
    let mut out = Vec::new();
    dfs(network, commodity.origin, commodity.destination, &mut on, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|arcs| Path::from_arcs(network, arcs).expect("dfs yields simple paths"))
        .collect()
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    let b: BTreeSet<_> = b.iter().collect();
    a.iter().all(|x| b.contains(x))
}

/// Subset dominance written independently of the library: `q` goes when a
/// path with a subset of its tolls is cheaper, or equally cheap and either a
/// strict subset or earlier in (cost, arcs) order.
pub fn dominance_reference(paths: &[Path]) -> Vec<Path> {
    let mut sorted = paths.to_vec();
    sorted.sort_by(|a, b| a.base_cost.cmp(&b.base_cost).then_with(|| a.arcs.cmp(&b.arcs)));
    let keep: Vec<bool> = sorted
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            !sorted.iter().enumerate().any(|(pi, p)| {
                pi != qi
                    && subset(&p.tolled, &q.tolled)
                    && (p.base_cost < q.base_cost
                        || (p.base_cost == q.base_cost && (p.tolled.len() < q.tolled.len() || pi < qi)))
            })
        })
        .collect();
    sorted.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect()
}

/// Bilevel-feasible sets from DFS plus the reference dominance rule.
pub fn reference_bfsets(instance: &ProblemInstance) -> Vec<BilevelFeasibleSet> {
    instance
        .commodities
        .iter()
        .enumerate()
        .map(|(k, c)| BilevelFeasibleSet {
            commodity: k,
            paths: dominance_reference(&all_simple_paths(&instance.network, c)),
            exhaustive: true,
        })
        .collect()
}

pub fn arc_sequences(paths: &[Path]) -> BTreeSet<Vec<usize>> {
    paths.iter().map(|p| p.arcs.clone()).collect()
}

/// A random connected digraph with generic costs (six random decimals per
/// cost) and a toll-free route for every commodity.
pub fn random_instance(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(5..=12);
        let mut specs = Vec::new();
        let mut pairs = BTreeSet::new();
        let cost = |rng: &mut ChaCha8Rng| {
            Fixed::from_raw(rng.random_range(1_000_000i128..20_000_000) * 1_000_000_000_000)
        };
        // spanning path in a random order keeps the graph connected
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for w in order.windows(2) {
            pairs.insert((w[0], w[1]));
            pairs.insert((w[1], w[0]));
        }
        let extra = rng.random_range(2 * n..=4 * n);
        for _ in 0..extra {
            let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
            if u != v {
                pairs.insert((u, v));
            }
        }
        for (u, v) in pairs {
            let tolled = rng.random_bool(0.35);
            specs.push(ArcSpec::new(u, v, cost(&mut rng), tolled));
        }
        let network = Network::new(n, specs).unwrap();
        let commodities: Vec<Commodity> = (0..rng.random_range(1..=2))
            .map(|_| {
                let o = rng.random_range(0..n);
                let mut d = rng.random_range(0..n);
                while d == o {
                    d = rng.random_range(0..n);
                }
                Commodity::new(o, d, Fixed::from_int(rng.random_range(1..=5)))
            })
            .collect();
        let inst = ProblemInstance::new(network, commodities, format!("random{seed}")).unwrap();
        if validate_instance(&inst).is_empty() {
            return inst;
        }
    }
}

/// 25 generated grid instances (at most 5x5, at most 3 commodities) whose
/// path-assignment product stays within 10^4.
pub fn agreement_pool() -> Vec<ProblemInstance> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 25 {
        let rows = 4 + (seed % 2) as usize;
        let cols = 4 + ((seed / 2) % 2) as usize;
        let commodities = 2 + ((seed / 4) % 2) as usize;
        let config = GenConfig::new(Topology::Grid { rows, cols }, commodities, seed);
        seed += 1;
        let Ok(inst) = generate(&config) else { continue };
        let sets = reference_bfsets(&inst);
        let product: u128 = sets.iter().map(|s| s.len() as u128).product();
        if product <= 10_000 && sets.iter().any(|s| s.len() > 1) {
            out.push(inst);
        }
    }
    out
}
