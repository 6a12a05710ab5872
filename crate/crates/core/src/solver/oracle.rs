//! Brute-force bilevel verifier: one exact LP per assignment of a
//! bilevel-feasible path to each commodity.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::simplex::{solve_exact, ExactLp, LpOutcome};
use crate::enumeration::BilevelFeasibleSet;
use crate::model::Sense;
use crate::network::ProblemInstance;

pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("commodity {0}: path set is not exhaustive")]
    NotExhaustive(usize),
    #[error("commodity {0}: empty path set")]
    Empty(usize),
    #[error("commodity {0}: path set has no toll-free path")]
    NoTollFree(usize),
    #[error("{count} path assignments exceed the oracle cap of {cap}")]
    TooManyAssignments { count: u128, cap: u128 },
    #[error("expected {expected} path sets, got {got}")]
    Mismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Optimal toll per arc id (zero on toll-free arcs).
    pub tolls: Vec<BigRational>,
    pub revenue: BigRational,
    /// Index into each commodity's path set of the chosen path.
    pub choice: Vec<usize>,
    /// Number of assignment LPs actually solved.
    pub lps_solved: usize,
}

impl OracleResult {
    pub fn revenue_f64(&self) -> f64 {
        self.revenue.to_f64().unwrap_or(f64::NAN)
    }

    pub fn tolls_f64(&self) -> Vec<f64> {
        self.tolls.iter().map(|t| t.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

/// Solves the pricing problem exactly by enumeration.
///
/// Every toll is additionally capped at the largest gap between a
/// commodity's toll-free cost and its cheapest path; an optimum within that
/// cap always exists, so the value is unaffected.
pub fn oracle_solve(
    instance: &ProblemInstance,
    bfsets: &[BilevelFeasibleSet],
    cap: u128,
) -> Result<OracleResult, OracleError> {
    let network = &instance.network;
    let commodities = &instance.commodities;
    if bfsets.len() != commodities.len() {
        return Err(OracleError::Mismatch {
            expected: commodities.len(),
            got: bfsets.len(),
        });
    }
    let mut count: u128 = 1;
    for (k, set) in bfsets.iter().enumerate() {
        if !set.exhaustive {
            return Err(OracleError::NotExhaustive(k));
        }
        if set.is_empty() {
            return Err(OracleError::Empty(k));
        }
        if set.toll_free_path().is_none() {
            return Err(OracleError::NoTollFree(k));
        }
        count = count.saturating_mul(set.len() as u128);
    }
    if count > cap {
        return Err(OracleError::TooManyAssignments { count, cap });
    }

    // Tolled arcs that occur on some path become LP columns.
    let mut column = vec![None; network.arc_count()];
    let mut arcs = Vec::new();
    for set in bfsets {
        for p in &set.paths {
            for &a in &p.tolled {
                if column[a].is_none() {
                    column[a] = Some(arcs.len());
                    arcs.push(a);
                }
            }
        }
    }
    let gap = |set: &BilevelFeasibleSet, p: usize| {
        (set.toll_free_path().unwrap().base_cost - set.paths[p].base_cost).to_rational()
    };
    let toll_cap = bfsets
        .iter()
        .map(|s| gap(s, 0))
        .max()
        .unwrap_or_else(BigRational::zero);
    let demand: Vec<BigRational> = commodities.iter().map(|c| c.demand.to_rational()).collect();
    // Revenue bound of choosing path p for commodity k.
    let bound: Vec<Vec<BigRational>> = bfsets
        .iter()
        .enumerate()
        .map(|(k, s)| (0..s.len()).map(|p| &demand[k] * gap(s, p)).collect())
        .collect();
    // Best achievable bound from commodity k onwards.
    let mut tail_bound = vec![BigRational::zero(); bfsets.len() + 1];
    for k in (0..bfsets.len()).rev() {
        tail_bound[k] = &tail_bound[k + 1] + bound[k].iter().max().unwrap();
    }

    let mut best: Option<(BigRational, Vec<BigRational>, Vec<usize>)> = None;
    let mut lps_solved = 0;
    let mut choice = vec![0usize; bfsets.len()];
    let mut partial = vec![BigRational::zero(); bfsets.len() + 1];
    // Iterative depth-first walk over assignments with bound pruning.
    let mut depth = 0usize;
    let mut next = vec![0usize; bfsets.len() + 1];
    loop {
        if depth == bfsets.len() {
            lps_solved += 1;
            if let Some((revenue, x)) = assignment_lp(bfsets, &choice, &column, &arcs, &toll_cap, &demand) {
                if best.as_ref().is_none_or(|(r, _, _)| revenue > *r) {
                    best = Some((revenue, x, choice.clone()));
                }
            }
            depth -= 1;
            continue;
        }
        if next[depth] >= bfsets[depth].len() {
            next[depth] = 0;
            if depth == 0 {
                break;
            }
            depth -= 1;
            continue;
        }
        let p = next[depth];
        next[depth] += 1;
        let optimistic = &partial[depth] + &bound[depth][p] + &tail_bound[depth + 1];
        if best.as_ref().is_some_and(|(r, _, _)| optimistic <= *r) {
            continue;
        }
        choice[depth] = p;
        partial[depth + 1] = &partial[depth] + &bound[depth][p];
        depth += 1;
    }

    let (revenue, x, choice) = best.expect("the all-toll-free assignment is always feasible");
    let mut tolls = vec![BigRational::zero(); network.arc_count()];
    for (j, &a) in arcs.iter().enumerate() {
        tolls[a] = x[j].clone();
    }
    Ok(OracleResult {
        tolls,
        revenue,
        choice,
        lps_solved,
    })
}

fn assignment_lp(
    bfsets: &[BilevelFeasibleSet],
    choice: &[usize],
    column: &[Option<usize>],
    arcs: &[usize],
    toll_cap: &BigRational,
    demand: &[BigRational],
) -> Option<(BigRational, Vec<BigRational>)> {
    let one = BigRational::from_integer(1.into());
    let mut lp = ExactLp::new(arcs.len());
    for j in 0..arcs.len() {
        lp.add_row(&[(j, one.clone())], Sense::Le, toll_cap.clone());
    }
    for (k, set) in bfsets.iter().enumerate() {
        let chosen = &set.paths[choice[k]];
        for &a in &chosen.tolled {
            lp.objective[column[a].unwrap()] += &demand[k];
        }
        for (q, other) in set.paths.iter().enumerate() {
            if q == choice[k] {
                continue;
            }
            // toll(chosen) - toll(other) <= base(other) - base(chosen)
            let mut terms: Vec<(usize, BigRational)> = Vec::new();
            for &a in &chosen.tolled {
                if other.tolled.binary_search(&a).is_err() {
                    terms.push((column[a].unwrap(), one.clone()));
                }
            }
            for &a in &other.tolled {
                if chosen.tolled.binary_search(&a).is_err() {
                    terms.push((column[a].unwrap(), -one.clone()));
                }
            }
            let rhs = (other.base_cost - chosen.base_cost).to_rational();
            if terms.is_empty() {
                if rhs < BigRational::zero() {
                    return None;
                }
                continue;
            }
            lp.add_row(&terms, Sense::Le, rhs);
        }
    }
    match solve_exact(&lp) {
        LpOutcome::Optimal { x, objective } => Some((objective, x)),
        LpOutcome::Infeasible => None,
        LpOutcome::Unbounded => unreachable!("every toll is capped"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::{enumerate_all, UNBOUNDED};
    use crate::network::parse_instance;

    const TOY5: &str = "npp 5 7 1\narc 0 1 1 T\narc 1 2 1 T\narc 2 4 1 T\narc 2 3 2 F\narc 3 4 2 F\narc 1 4 3 F\narc 0 4 10 F\ncommodity 0 4 1\n";

    fn run(text: &str) -> OracleResult {
        let inst = parse_instance(text).unwrap();
        let sets = enumerate_all(&inst.network, &inst.commodities, UNBOUNDED);
        oracle_solve(&inst, &sets, DEFAULT_ORACLE_CAP).unwrap()
    }

    #[test]
    fn toy5_revenue_seven() {
        let r = run(TOY5);
        assert_eq!(r.revenue, BigRational::from_integer(7.into()));
        // The chosen path pays 7 in tolls and costs exactly the toll-free 10.
        let t = r.tolls_f64();
        let paid = match r.choice[0] {
            0 => t[0] + t[1] + t[2],
            1 => t[0],
            _ => unreachable!(),
        };
        assert!((paid - 7.0).abs() < 1e-12);
    }

    #[test]
    fn toll_free_only_gives_zero() {
        let r = run("npp 3 3 1\narc 0 2 2 F\narc 0 1 1 T\narc 1 2 5 F\ncommodity 0 2 1\n");
        assert!(r.revenue.is_zero());
        assert!(r.tolls.iter().all(Zero::is_zero));
    }

    #[test]
    fn demand_is_linear() {
        let single = run(TOY5).revenue;
        let double = TOY5.replace("commodity 0 4 1\n", "commodity 0 4 2\ncommodity 0 4 3\n").replace("npp 5 7 1", "npp 5 7 2");
        let r = run(&double);
        assert_eq!(r.revenue, single * BigRational::from_integer(5.into()));
    }

    #[test]
    fn refuses_over_cap_and_truncated_sets() {
        let inst = parse_instance(TOY5).unwrap();
        let sets = enumerate_all(&inst.network, &inst.commodities, UNBOUNDED);
        assert_eq!(
            oracle_solve(&inst, &sets, 2),
            Err(OracleError::TooManyAssignments { count: 3, cap: 2 })
        );
        let truncated = enumerate_all(&inst.network, &inst.commodities, 1);
        assert_eq!(oracle_solve(&inst, &truncated, 10), Err(OracleError::NotExhaustive(0)));
    }
}
