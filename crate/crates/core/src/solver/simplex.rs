//! Dense two-phase simplex over exact rationals, Bland's rule.
//!
//! Meant for the oracle's small inner LPs, so it has no failure modes in
//! common with the floating-point MILP backend.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::model::Sense;

/// `maximize objective . x` subject to `rows`, `x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct ExactLp {
    pub num_vars: usize,
    pub objective: Vec<BigRational>,
    pub rows: Vec<(Vec<BigRational>, Sense, BigRational)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<BigRational>,
        objective: BigRational,
    },
    Infeasible,
    Unbounded,
}

impl ExactLp {
    pub fn new(num_vars: usize) -> Self {
        ExactLp {
            num_vars,
            objective: vec![BigRational::zero(); num_vars],
            rows: Vec::new(),
        }
    }

    /// Adds a row from sparse `(var, coefficient)` terms.
    pub fn add_row(&mut self, terms: &[(usize, BigRational)], sense: Sense, rhs: BigRational) {
        let mut dense = vec![BigRational::zero(); self.num_vars];
        for (v, c) in terms {
            dense[*v] += c;
        }
        self.rows.push((dense, sense, rhs));
    }
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col].clone();
        for v in self.a[row].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.a[row].clone();
        for (i, r) in self.a.iter_mut().enumerate() {
            if i == row || r[col].is_zero() {
                continue;
            }
            let f = r[col].clone();
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Maximizes `cost . x` over columns `< allowed`. Returns false when
    /// unbounded.
    fn optimize(&mut self, cost: &[BigRational], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut r = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !self.a[i][j].is_zero() {
                        r -= &cost[b] * &self.a[i][j];
                    }
                }
                r.is_positive()
            });
            let Some(col) = entering else { return true };
            let mut best: Option<(usize, BigRational)> = None;
            for i in 0..self.a.len() {
                let coef = &self.a[i][col];
                if !coef.is_positive() {
                    continue;
                }
                let ratio = &self.a[i][self.cols] / coef;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

pub fn solve_exact(lp: &ExactLp) -> LpOutcome {
    let n = lp.num_vars;
    let m = lp.rows.len();
    // Normalize to nonnegative right-hand sides.
    let rows: Vec<(Vec<BigRational>, Sense, BigRational)> = lp
        .rows
        .iter()
        .map(|(a, s, b)| {
            if b.is_negative() {
                let flipped = match s {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (a.iter().map(|v| -v).collect(), flipped, -b)
            } else {
                (a.clone(), *s, b.clone())
            }
        })
        .collect();
    let slacks = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + slacks + artificials;
    let mut a = vec![vec![BigRational::zero(); cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut s, mut art) = (n, n + slacks);
    for (i, (coefs, sense, rhs)) in rows.iter().enumerate() {
        a[i][..n].clone_from_slice(coefs);
        a[i][cols] = rhs.clone();
        match sense {
            Sense::Le => {
                a[i][s] = BigRational::one();
                basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                a[i][s] = -BigRational::one();
                a[i][art] = BigRational::one();
                basis[i] = art;
                s += 1;
                art += 1;
            }
            Sense::Eq => {
                a[i][art] = BigRational::one();
                basis[i] = art;
                art += 1;
            }
        }
    }
    let mut t = Tableau { a, basis, cols };
    let first_art = n + slacks;
    if artificials > 0 {
        let mut phase1 = vec![BigRational::zero(); cols];
        for c in phase1.iter_mut().skip(first_art) {
            *c = -BigRational::one();
        }
        t.optimize(&phase1, cols);
        let infeasibility: BigRational = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= first_art)
            .map(|(i, _)| t.a[i][cols].clone())
            .sum();
        if infeasibility.is_positive() {
            return LpOutcome::Infeasible;
        }
        // Drive remaining (zero-valued) artificials out, dropping redundant rows.
        let mut i = 0;
        while i < t.a.len() {
            if t.basis[i] >= first_art {
                match (0..first_art).find(|&j| !t.a[i][j].is_zero()) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.a.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    let mut cost = vec![BigRational::zero(); cols];
    cost[..n].clone_from_slice(&lp.objective);
    if !t.optimize(&cost, first_art) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.a[i][cols].clone();
        }
    }
    let objective = x.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
    LpOutcome::Optimal { x, objective }
}
