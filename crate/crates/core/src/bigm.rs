//! Big-M constants for the linearized reformulations.
//!
//! With `gap_k = cost(pi_k) - Llo_k`, the toll-free fallback cost minus the
//! zero-toll optimum of commodity k:
//!
//! * `N_a = max_k gap_k` bounds every toll,
//! * `M_a^k = gap_k` bounds the toll commodity k pays on one arc,
//! * `R_a^k = c_a (+ N_a if tolled) - lo_i + hi_j` for arc (i, j), with `lo`
//!   the zero-toll distances and `hi` the distances with tolls at `N`,
//! * `S_p^k = base(p) + sum of N over the tolled arcs of p - Llo_k`.

use thiserror::Error;

use crate::enumeration::{BilevelFeasibleSet, Path};
use crate::fixed::Fixed;
use crate::network::{Commodity, Network};
use crate::shortest_path::{distances_to, TollRegime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BigMError {
    #[error("commodity {0} has no toll-free path")]
    NoTollFreePath(usize),
    #[error("commodity {0}: origin cannot reach destination")]
    Disconnected(usize),
    #[error("commodity {commodity}: arc {arc} has no finite R bound (endpoint cannot reach the destination)")]
    InfiniteR { commodity: usize, arc: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigMParams {
    /// Toll cap per arc id (zero on toll-free arcs).
    pub n: Vec<Fixed>,
    /// `gap_k` per commodity, the value of `M_a^k` for every tolled arc.
    pub gap: Vec<Fixed>,
    /// Zero-toll distances to each commodity's destination.
    pub lambda_lo: Vec<Vec<Option<Fixed>>>,
    /// Distances to each commodity's destination with tolls at `n`.
    pub lambda_hi: Vec<Vec<Option<Fixed>>>,
    pub l_lo: Vec<Fixed>,
    /// Cost of each commodity's shortest toll-free path.
    pub toll_free_cost: Vec<Fixed>,
    /// `R_a^k` on the original network, indexed `[k][arc]`.
    pub r: Vec<Vec<Option<Fixed>>>,
    /// `S_p^k` for each path of the commodity's bilevel-feasible set.
    pub s: Vec<Vec<Fixed>>,
    /// Multiplier applied by every accessor (1 normally).
    pub scale: i128,
}

/// `R` for every arc of `network`, given distances to the destination.
fn r_bounds(network: &Network, caps: &[Fixed], lo: &[Option<Fixed>], hi: &[Option<Fixed>]) -> Vec<Option<Fixed>> {
    network
        .arcs()
        .iter()
        .map(|arc| {
            let extra = if arc.tolled { caps[arc.id] } else { Fixed::ZERO };
            Some(arc.cost + extra - lo[arc.tail]? + hi[arc.head]?)
        })
        .collect()
}

/// Computes every big-M family on the original network. `bfsets` may be
/// shorter than `commodities` or non-exhaustive; `S` is filled for whatever
/// paths are present.
pub fn compute_bigm(
    network: &Network,
    commodities: &[Commodity],
    bfsets: &[BilevelFeasibleSet],
) -> Result<BigMParams, BigMError> {
    let mut gap = Vec::with_capacity(commodities.len());
    let mut lambda_lo = Vec::with_capacity(commodities.len());
    let mut l_lo = Vec::with_capacity(commodities.len());
    let mut toll_free_cost = Vec::with_capacity(commodities.len());
    for (k, c) in commodities.iter().enumerate() {
        let lo = distances_to(network, c.destination, TollRegime::Zero);
        let free = distances_to(network, c.destination, TollRegime::Infinite);
        let l = lo[c.origin].ok_or(BigMError::Disconnected(k))?;
        let pi = free[c.origin].ok_or(BigMError::NoTollFreePath(k))?;
        gap.push((pi - l).max(Fixed::ZERO));
        l_lo.push(l);
        toll_free_cost.push(pi);
        lambda_lo.push(lo);
    }
    let cap = gap.iter().copied().max().unwrap_or(Fixed::ZERO);
    let n: Vec<Fixed> = network
        .arcs()
        .iter()
        .map(|a| if a.tolled { cap } else { Fixed::ZERO })
        .collect();
    let mut lambda_hi = Vec::with_capacity(commodities.len());
    let mut r = Vec::with_capacity(commodities.len());
    for (k, c) in commodities.iter().enumerate() {
        let hi = distances_to(network, c.destination, TollRegime::Capped(&n));
        r.push(r_bounds(network, &n, &lambda_lo[k], &hi));
        lambda_hi.push(hi);
    }
    let mut params = BigMParams {
        n,
        gap,
        lambda_lo,
        lambda_hi,
        l_lo,
        toll_free_cost,
        r,
        s: vec![Vec::new(); commodities.len()],
        scale: 1,
    };
    for set in bfsets {
        if set.commodity < commodities.len() {
            let values = set
                .paths
                .iter()
                .map(|p| params.s_raw(set.commodity, p.base_cost, p.tolled.iter().copied()))
                .collect();
            params.s[set.commodity] = values;
        }
    }
    Ok(params)
}

impl BigMParams {
    /// The same parameters with every accessor multiplied by `factor`.
    pub fn scaled(&self, factor: i128) -> BigMParams {
        BigMParams {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    pub fn n(&self, arc: usize) -> Fixed {
        self.n[arc].mul_int(self.scale)
    }

    pub fn m(&self, commodity: usize, _arc: usize) -> Fixed {
        self.gap[commodity].mul_int(self.scale)
    }

    pub fn r(&self, commodity: usize, arc: usize) -> Option<Fixed> {
        self.r[commodity][arc].map(|v| v.mul_int(self.scale))
    }

    pub fn s(&self, commodity: usize, path: usize) -> Option<Fixed> {
        self.s[commodity].get(path).map(|v| v.mul_int(self.scale))
    }

    fn s_raw(&self, commodity: usize, base: Fixed, tolled: impl Iterator<Item = usize>) -> Fixed {
        base + tolled.map(|a| self.n[a]).sum::<Fixed>() - self.l_lo[commodity]
    }

    /// `S` for any path given by its base cost and original tolled arcs.
    pub fn s_for(&self, commodity: usize, base: Fixed, tolled: impl Iterator<Item = usize>) -> Fixed {
        self.s_raw(commodity, base, tolled).mul_int(self.scale)
    }

    pub fn s_for_path(&self, commodity: usize, path: &Path) -> Fixed {
        self.s_for(commodity, path.base_cost, path.tolled.iter().copied())
    }

    /// `R` for every arc of a commodity's working graph, with distances
    /// measured on that graph. `caps` gives the toll cap of each of its arcs.
    pub fn r_on_graph(&self, network: &Network, destination: usize, caps: &[Fixed]) -> Vec<Option<Fixed>> {
        let lo = distances_to(network, destination, TollRegime::Zero);
        let hi = distances_to(network, destination, TollRegime::Capped(caps));
        r_bounds(network, caps, &lo, &hi)
            .into_iter()
            .map(|v| v.map(|v| v.mul_int(self.scale)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::{enumerate_all, UNBOUNDED};
    use crate::network::parse_instance;

    const TOY5: &str = "npp 5 7 1\narc 0 1 1 T\narc 1 2 1 T\narc 2 4 1 T\narc 2 3 2 F\narc 3 4 2 F\narc 1 4 3 F\narc 0 4 10 F\ncommodity 0 4 1\n";

    fn i(v: i64) -> Fixed {
        Fixed::from_int(v)
    }

    #[test]
    fn toy5_caps() {
        let inst = parse_instance(TOY5).unwrap();
        let sets = enumerate_all(&inst.network, &inst.commodities, UNBOUNDED);
        let b = compute_bigm(&inst.network, &inst.commodities, &sets).unwrap();
        assert_eq!(b.l_lo, vec![i(3)]);
        assert_eq!(b.toll_free_cost, vec![i(10)]);
        for a in 0..3 {
            assert_eq!(b.n(a), i(7));
            assert_eq!(b.m(0, a), i(7));
        }
        // o-u-v-d: 3 + 21 - 3, o-u-d: 4 + 7 - 3, o-d: 10 - 3
        assert_eq!(b.s[0], vec![i(21), i(8), i(7)]);
        let doubled = b.scaled(2);
        assert_eq!(doubled.n(0), i(14));
        assert_eq!(doubled.s(0, 0), Some(i(42)));
    }

    #[test]
    fn toy5_r_values() {
        let inst = parse_instance(TOY5).unwrap();
        let b = compute_bigm(&inst.network, &inst.commodities, &[]).unwrap();
        // lo = [3,2,1,2,0]; hi with caps 7 = [10,3,4,2,0]
        // o->u tolled: 1 + 7 - 3 + 3 = 8
        assert_eq!(b.r(0, 0), Some(i(8)));
        // u->d toll-free: 3 - 2 + 0 = 1
        assert_eq!(b.r(0, 5), Some(i(1)));
        for k in 0..1 {
            for node in 0..5 {
                assert!(b.lambda_lo[k][node].unwrap() <= b.lambda_hi[k][node].unwrap());
            }
        }
    }

    #[test]
    fn toll_free_shortest_gives_zero_caps() {
        let inst = parse_instance("npp 3 3 1\narc 0 2 2 F\narc 0 1 1 T\narc 1 2 5 F\ncommodity 0 2 1\n").unwrap();
        let b = compute_bigm(&inst.network, &inst.commodities, &[]).unwrap();
        assert_eq!(b.m(0, 1), Fixed::ZERO);
        assert_eq!(b.n(1), Fixed::ZERO);
    }
}
