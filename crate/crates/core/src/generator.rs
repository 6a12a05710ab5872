//! Random instances on grid, Delaunay and Voronoi topologies.
//!
//! Every undirected edge becomes a pair of opposite arcs sharing cost and
//! toll status. Tolls go first to the arcs most used by the commodities'
//! zero-toll shortest paths, the rest at random, never removing a
//! commodity's last toll-free path.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fixed::Fixed;
use crate::network::{ArcSpec, Commodity, Network, ProblemInstance};
use crate::shortest_path::{shortest_path, ExclusionSet, TollRegime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Grid { rows: usize, cols: usize },
    Delaunay { points: usize },
    Voronoi { points: usize },
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Grid { rows, cols } => write!(f, "grid:{rows}x{cols}"),
            Topology::Delaunay { points } => write!(f, "delaunay:{points}"),
            Topology::Voronoi { points } => write!(f, "voronoi:{points}"),
        }
    }
}

impl FromStr for Topology {
    type Err = GenError;
    /// `grid:RxC`, `delaunay:N` or `voronoi:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GenError::Topology(s.to_string());
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "grid" => {
                let (r, c) = arg.split_once(['x', 'X']).ok_or_else(bad)?;
                Ok(Topology::Grid {
                    rows: r.trim().parse().map_err(|_| bad())?,
                    cols: c.trim().parse().map_err(|_| bad())?,
                })
            }
            "delaunay" => Ok(Topology::Delaunay {
                points: arg.trim().parse().map_err(|_| bad())?,
            }),
            "voronoi" => Ok(Topology::Voronoi {
                points: arg.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("unrecognized topology `{0}` (expected grid:RxC, delaunay:N or voronoi:N)")]
    Topology(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("only {available} origin-destination pairs at distance >= 2, {requested} requested")]
    TooFewPairs { available: usize, requested: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub topology: Topology,
    pub num_commodities: usize,
    pub toll_ratio: f64,
    pub cost_low: i64,
    pub cost_high: i64,
    pub high_cost_fraction: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(topology: Topology, num_commodities: usize, seed: u64) -> Self {
        GenConfig {
            topology,
            num_commodities,
            toll_ratio: 0.20,
            cost_low: 5,
            cost_high: 35,
            high_cost_fraction: 0.20,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let err = |m: &str| Err(GenError::Config(m.to_string()));
        if !(self.toll_ratio > 0.0 && self.toll_ratio < 1.0) {
            return err("toll ratio must lie strictly between 0 and 1");
        }
        if !(0.0..=1.0).contains(&self.high_cost_fraction) {
            return err("high-cost fraction must lie in [0, 1]");
        }
        if self.cost_low <= 0 || self.cost_high < self.cost_low {
            return err("costs need 0 < low <= high");
        }
        if self.num_commodities == 0 {
            return err("at least one commodity is required");
        }
        match self.topology {
            Topology::Grid { rows, cols } if rows * cols < 4 || rows == 0 || cols == 0 => {
                err("grid needs rows * cols >= 4")
            }
            Topology::Delaunay { points } | Topology::Voronoi { points } if points < 3 => {
                err("triangulations need at least 3 points")
            }
            _ => Ok(()),
        }
    }
}

/// Undirected edges `(u, v)` with `u < v`.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                edges.push((id, id + 1));
            }
            if r + 1 < rows {
                edges.push((id, id + cols));
            }
        }
    }
    edges
}

type Point = (f64, f64);

/// Twice the signed area of `abc`, positive when counter-clockwise.
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Strictly inside the circumcircle of the counter-clockwise triangle
/// `abc`. Cocircular points count as outside, which keeps the
/// triangulation well defined.
fn in_circumcircle(a: Point, b: Point, c: Point, p: Point) -> bool {
    let (ax, ay) = (a.0 - p.0, a.1 - p.1);
    let (bx, by) = (b.0 - p.0, b.1 - p.1);
    let (cx, cy) = (c.0 - p.0, c.1 - p.1);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    det > 0.0
}

/// Triangles (counter-clockwise index triples) of the Delaunay
/// triangulation, by incremental Bowyer-Watson.
pub fn delaunay_triangles(points: &[Point]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in points {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1e-9);
    let (mx, my) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let mut pts = points.to_vec();
    pts.push((mx - 20.0 * span, my - 10.0 * span));
    pts.push((mx + 20.0 * span, my - 10.0 * span));
    pts.push((mx, my + 20.0 * span));
    let mut triangles: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    for i in 0..n {
        let p = pts[i];
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = triangles
            .into_iter()
            .partition(|t| in_circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], p));
        // Boundary of the cavity: edges used by exactly one bad triangle.
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &bad {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        triangles = keep;
        for t in &bad {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if count[&(a.min(b), a.max(b))] == 1 {
                    triangles.push([a, b, i]);
                }
            }
        }
    }
    triangles.retain(|t| t.iter().all(|&v| v < n));
    for t in triangles.iter_mut() {
        if orient(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0 {
            t.swap(1, 2);
        }
    }
    triangles.sort();
    triangles
}

fn triangle_edges(triangles: &[[usize; 3]]) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for t in triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    edges
}

/// Delaunay edges of `points`.
pub fn delaunay_edges(points: &[Point]) -> Vec<(usize, usize)> {
    triangle_edges(&delaunay_triangles(points)).into_iter().collect()
}

/// Delaunay triangulation of `n` uniform points in the unit square.
pub fn delaunay_points(n: usize, seed: u64) -> (Vec<Point>, Vec<(usize, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let edges = delaunay_edges(&points);
    (points, edges)
}

/// Voronoi graph: one node per Delaunay triangle (its circumcenter), an
/// edge between triangles sharing a side. Returns the node count and edges.
pub fn voronoi_edges(points: &[Point]) -> (usize, Vec<(usize, usize)>) {
    let triangles = delaunay_triangles(points);
    let mut side: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, t) in triangles.iter().enumerate() {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            side.entry((a.min(b), a.max(b))).or_default().push(i);
        }
    }
    let mut edges: Vec<(usize, usize)> = side
        .values()
        .filter(|v| v.len() == 2)
        .map(|v| (v[0].min(v[1]), v[0].max(v[1])))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    (triangles.len(), edges)
}

fn hop_distances(n: usize, adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; n];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Builds an instance. Deterministic in the configuration.
pub fn generate(config: &GenConfig) -> Result<ProblemInstance, GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (n, edges) = match config.topology {
        Topology::Grid { rows, cols } => (rows * cols, grid_edges(rows, cols)),
        Topology::Delaunay { points } => {
            let (pts, edges) = delaunay_points(points, rng.random());
            (pts.len(), edges)
        }
        Topology::Voronoi { points } => {
            let (pts, _) = delaunay_points(points, rng.random());
            voronoi_edges(&pts)
        }
    };

    // Costs per edge, shared by both directions.
    let costs: Vec<i64> = edges
        .iter()
        .map(|_| {
            if rng.random_bool(config.high_cost_fraction) {
                config.cost_high
            } else {
                rng.random_range(config.cost_low..=config.cost_high)
            }
        })
        .collect();
    let specs = |tolled: &[bool]| -> Vec<ArcSpec> {
        edges
            .iter()
            .enumerate()
            .flat_map(|(e, &(u, v))| {
                let cost = Fixed::from_int(costs[e]);
                [ArcSpec::new(u, v, cost, tolled[e]), ArcSpec::new(v, u, cost, tolled[e])]
            })
            .collect()
    };
    let untolled = vec![false; edges.len()];
    let base = Network::new(n, specs(&untolled)).expect("generated arcs are valid");

    // Origin-destination pairs at hop distance >= 2.
    let mut adjacency = vec![Vec::new(); n];
    for &(u, v) in &edges {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    let mut pairs = Vec::new();
    for o in 0..n {
        let dist = hop_distances(n, &adjacency, o);
        for (d, h) in dist.iter().enumerate() {
            if h.is_some_and(|h| h >= 2) {
                pairs.push((o, d));
            }
        }
    }
    if pairs.len() < config.num_commodities {
        return Err(GenError::TooFewPairs {
            available: pairs.len(),
            requested: config.num_commodities,
        });
    }
    pairs.shuffle(&mut rng);
    pairs.truncate(config.num_commodities);
    let commodities: Vec<Commodity> = pairs
        .iter()
        .map(|&(o, d)| Commodity::new(o, d, Fixed::from_int(rng.random_range(1..=100))))
        .collect();

    // Edge usage by zero-toll shortest paths.
    let mut usage = vec![0usize; edges.len()];
    for c in &commodities {
        if let Some((arcs, _)) = shortest_path(&base, c.origin, c.destination, TollRegime::Zero, &ExclusionSet::new()) {
            for a in arcs {
                usage[a / 2] += 1;
            }
        }
    }
    let target_pairs = ((config.toll_ratio * (2 * edges.len()) as f64) / 2.0).round() as usize;
    let ranked_quota = (target_pairs * 2).div_ceil(3);
    let mut ranked: Vec<usize> = (0..edges.len()).collect();
    ranked.sort_by(|&a, &b| usage[b].cmp(&usage[a]).then(a.cmp(&b)));

    let mut tolled = vec![false; edges.len()];
    let keeps_toll_free = |tolled: &[bool]| {
        let net = Network::new(n, specs(tolled)).expect("valid");
        commodities
            .iter()
            .all(|c| net.toll_free_reachable(c.origin)[c.destination])
    };
    let mut converted = 0;
    for &e in &ranked {
        if converted >= ranked_quota {
            break;
        }
        tolled[e] = true;
        if keeps_toll_free(&tolled) {
            converted += 1;
        } else {
            tolled[e] = false;
        }
    }
    let mut rest: Vec<usize> = (0..edges.len()).filter(|&e| !tolled[e]).collect();
    rest.shuffle(&mut rng);
    for e in rest {
        if converted >= target_pairs {
            break;
        }
        tolled[e] = true;
        if keeps_toll_free(&tolled) {
            converted += 1;
        } else {
            tolled[e] = false;
        }
    }

    let mut label = format!("{}_k{}_s{}", config.topology, config.num_commodities, config.seed).replace(':', "");
    if converted < target_pairs {
        warn!(
            "{label}: only {converted} of {target_pairs} tolled arc pairs without disconnecting a commodity"
        );
        label.push_str(&format!("_tolled{}of{}", 2 * converted, 2 * target_pairs));
    }
    let final_specs: Vec<ArcSpec> = specs(&tolled)
        .into_iter()
        .map(|mut s| {
            if s.tolled {
                s.cost = Fixed::from_raw(s.cost.raw() / 2);
            }
            s
        })
        .collect();
    let network = Network::new(n, final_specs).expect("valid");
    Ok(ProblemInstance::new(network, commodities, label).expect("commodity nodes exist"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_instance;

    #[test]
    fn grid_5x12_arc_count() {
        assert_eq!(grid_edges(5, 12).len() * 2, 206);
    }

    #[test]
    fn small_triangulations() {
        let tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        assert_eq!(delaunay_edges(&tri).len(), 3);
        let quad = [(0.0, 0.0), (1.0, 0.1), (1.1, 1.0), (0.1, 0.9)];
        assert_eq!(delaunay_edges(&quad).len(), 5);
    }

    #[test]
    fn delaunay_144_is_planar_and_connected() {
        let (pts, edges) = delaunay_points(144, 11);
        assert!(edges.len() <= 3 * pts.len() - 6);
        let mut adjacency = vec![Vec::new(); pts.len()];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        assert!(hop_distances(pts.len(), &adjacency, 0).iter().all(Option::is_some));
    }

    #[test]
    fn delaunay_empty_circles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..40).map(|_| (rng.random(), rng.random())).collect();
        for t in delaunay_triangles(&pts) {
            for (i, &p) in pts.iter().enumerate() {
                if !t.contains(&i) {
                    assert!(!in_circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], p));
                }
            }
        }
    }

    #[test]
    fn topology_parsing() {
        assert_eq!("grid:5x12".parse::<Topology>().unwrap(), Topology::Grid { rows: 5, cols: 12 });
        assert_eq!("voronoi:30".parse::<Topology>().unwrap(), Topology::Voronoi { points: 30 });
        assert!("ring:5".parse::<Topology>().is_err());
    }

    #[test]
    fn config_rejects_zero_toll_ratio() {
        let mut c = GenConfig::new(Topology::Grid { rows: 3, cols: 3 }, 2, 1);
        c.toll_ratio = 0.0;
        assert!(matches!(generate(&c), Err(GenError::Config(_))));
    }

    #[test]
    fn generated_instances_are_valid_symmetric_and_deterministic() {
        for topology in ["grid:5x12", "delaunay:40", "voronoi:30"] {
            let c = GenConfig::new(topology.parse().unwrap(), 10, 5);
            let a = generate(&c).unwrap();
            assert_eq!(a, generate(&c).unwrap());
            assert!(validate_instance(&a).is_empty(), "{topology}");
            let net = &a.network;
            for arc in net.arcs() {
                let twin = net.arc(arc.id ^ 1);
                assert_eq!((twin.tail, twin.head, twin.cost, twin.tolled), (arc.head, arc.tail, arc.cost, arc.tolled));
            }
        }
    }

    #[test]
    fn grid_5x12_statistics() {
        let inst = generate(&GenConfig::new(Topology::Grid { rows: 5, cols: 12 }, 30, 7)).unwrap();
        assert_eq!(inst.network.node_count(), 60);
        assert_eq!(inst.network.arc_count(), 206);
        let target = (0.2f64 * 206.0 / 2.0).round() as usize * 2;
        assert!(inst.network.tolled_count().abs_diff(target) <= 2);
    }
}
