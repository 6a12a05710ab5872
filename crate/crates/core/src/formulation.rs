//! The twelve single-level reformulations and the per-commodity hybrid
//! assembler.
//!
//! Each commodity contributes one block made of a primal part (arc flows or
//! path choice), a dual part (node potentials or a path value), an
//! optimality coupling (strong duality or complementary slackness) and a
//! linearization of the revenue terms. Toll variables `T[a]` are shared by
//! all blocks and indexed by original arc id.
//!
//! Variable names: `T[a]`, `x[k,a]`, `y[k,a]`, `z[k,p]`, `t[k,a]`, `tau[k]`,
//! `lambda[k,i]`, `L[k]`. Arc indices of `x`, `y` and of row tags refer to the
//! block's working graph; `T`, `t` and `lambda` use original ids.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bigm::{BigMError, BigMParams};
use crate::enumeration::{BilevelFeasibleSet, Path};
use crate::fixed::Fixed;
use crate::model::{ModelError, ModelIr, Sense, VarKind};
use crate::network::{Commodity, ProblemInstance};
use crate::preprocess::{path_based_reduce, PreprocessError, ReducedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormulationKind {
    Std,
    Vf,
    Pastd,
    Pvf,
    Cs1,
    Cs2,
    Vfcs1,
    Vfcs2,
    Pacs1,
    Pacs2,
    Pcs1,
    Pcs2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    Arc,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptCondition {
    StrongDuality,
    ComplementarySlackness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearization {
    Direct,
    Substitution,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 12] = [
        FormulationKind::Std,
        FormulationKind::Vf,
        FormulationKind::Pastd,
        FormulationKind::Pvf,
        FormulationKind::Cs1,
        FormulationKind::Cs2,
        FormulationKind::Vfcs1,
        FormulationKind::Vfcs2,
        FormulationKind::Pacs1,
        FormulationKind::Pacs2,
        FormulationKind::Pcs1,
        FormulationKind::Pcs2,
    ];

    pub fn label(self) -> &'static str {
        use FormulationKind::*;
        match self {
            Std => "STD",
            Vf => "VF",
            Pastd => "PASTD",
            Pvf => "PVF",
            Cs1 => "CS1",
            Cs2 => "CS2",
            Vfcs1 => "VFCS1",
            Vfcs2 => "VFCS2",
            Pacs1 => "PACS1",
            Pacs2 => "PACS2",
            Pcs1 => "PCS1",
            Pcs2 => "PCS2",
        }
    }

    pub fn primal(self) -> Rep {
        use FormulationKind::*;
        match self {
            Std | Vf | Cs1 | Cs2 | Vfcs1 | Vfcs2 => Rep::Arc,
            Pastd | Pvf | Pacs1 | Pacs2 | Pcs1 | Pcs2 => Rep::Path,
        }
    }

    pub fn dual(self) -> Rep {
        use FormulationKind::*;
        match self {
            Std | Pastd | Cs1 | Cs2 | Pacs1 | Pacs2 => Rep::Arc,
            Vf | Pvf | Vfcs1 | Vfcs2 | Pcs1 | Pcs2 => Rep::Path,
        }
    }

    pub fn condition(self) -> OptCondition {
        use FormulationKind::*;
        match self {
            Std | Vf | Pastd | Pvf => OptCondition::StrongDuality,
            _ => OptCondition::ComplementarySlackness,
        }
    }

    pub fn linearization(self) -> Linearization {
        use FormulationKind::*;
        match self {
            Cs2 | Vfcs2 | Pacs2 | Pcs2 => Linearization::Substitution,
            _ => Linearization::Direct,
        }
    }

    /// Whether the block needs the commodity's path set.
    pub fn uses_paths(self) -> bool {
        self.primal() == Rep::Path || self.dual() == Rep::Path
    }

    /// Arc-primal/path-dual complementary slackness only covers the listed
    /// paths, so it has to be driven by the cut loop.
    pub fn needs_cut_loop(self) -> bool {
        matches!(self, FormulationKind::Vfcs1 | FormulationKind::Vfcs2)
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown formulation `{0}` (expected one of STD, VF, PASTD, PVF, CS1, CS2, VFCS1, VFCS2, PACS1, PACS2, PCS1, PCS2)")]
pub struct ParseKindError(pub String);

impl FromStr for FormulationKind {
    type Err = ParseKindError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        FormulationKind::ALL
            .into_iter()
            .find(|k| k.label() == upper)
            .ok_or_else(|| ParseKindError(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    BigM(#[from] BigMError),
    #[error("commodity {commodity}: no big-M value for {what}")]
    MissingBigM { commodity: usize, what: String },
    #[error("commodity {0}: {1} needs an exhaustive path set")]
    PathsRequired(usize, FormulationKind),
    #[error("commodity {0}: path is not representable in the working graph")]
    Unrepresentable(usize),
    #[error("{0} blocks must be solved with the cut loop")]
    CutLoopRequired(FormulationKind),
    #[error("breakpoint must be at least 1")]
    InvalidBreakpoint,
    #[error("fallback formulation must be arc-based (STD, CS1 or CS2), got {0}")]
    InvalidFallback(FormulationKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    /// Built on the commodity's working graph with its path set.
    Main,
    /// Built on the original graph without paths.
    Fallback,
}

/// Everything needed to emit one commodity's rows.
#[derive(Debug, Clone)]
pub struct Block {
    pub k: usize,
    pub kind: FormulationKind,
    pub role: BlockRole,
    pub graph: ReducedGraph,
    /// The commodity in working-graph node ids.
    pub commodity: Commodity,
    /// Paths in working-graph arc ids; index `p` names `z[k,p]` and `dp[k,p]`.
    pub paths: Vec<Path>,
    /// `S` per path.
    pub path_s: Vec<Fixed>,
    /// Toll cap of each working-graph arc (zero on toll-free arcs).
    pub caps: Vec<Fixed>,
    /// `R` per working-graph arc, present for arc-dual complementary slackness.
    pub r: Vec<Option<Fixed>>,
    pub m: Fixed,
}

pub fn var_t_toll(a: usize) -> String {
    format!("T[{a}]")
}
pub fn var_x(k: usize, a: usize) -> String {
    format!("x[{k},{a}]")
}
pub fn var_y(k: usize, a: usize) -> String {
    format!("y[{k},{a}]")
}
pub fn var_z(k: usize, p: usize) -> String {
    format!("z[{k},{p}]")
}
pub fn var_t(k: usize, a: usize) -> String {
    format!("t[{k},{a}]")
}
pub fn var_tau(k: usize) -> String {
    format!("tau[{k}]")
}
pub fn var_lambda(k: usize, i: usize) -> String {
    format!("lambda[{k},{i}]")
}
pub fn var_l(k: usize) -> String {
    format!("L[{k}]")
}

const NONNEG: (Option<Fixed>, Option<Fixed>) = (Some(Fixed::ZERO), None);
const UNIT: (Option<Fixed>, Option<Fixed>) = (Some(Fixed::ZERO), Some(Fixed::ONE));

impl Block {
    /// Prepares a block. `original_paths` are in original arc ids and must be
    /// representable in `graph`.
    pub fn new(
        k: usize,
        kind: FormulationKind,
        role: BlockRole,
        graph: ReducedGraph,
        commodity: &Commodity,
        original_paths: &[Path],
        bigm: &BigMParams,
    ) -> Result<Block, BuildError> {
        let local = graph
            .commodity(commodity)
            .ok_or(BuildError::Unrepresentable(k))?;
        let paths = original_paths
            .iter()
            .map(|p| graph.project_path(p).ok_or(BuildError::Unrepresentable(k)))
            .collect::<Result<Vec<_>, _>>()?;
        let path_s = original_paths.iter().map(|p| bigm.s_for_path(k, p)).collect();
        let raw_caps: Vec<Fixed> = (0..graph.network.arc_count())
            .map(|a| graph.original_tolled(a).map_or(Fixed::ZERO, |o| bigm.n[o]))
            .collect();
        let caps = raw_caps.iter().map(|c| c.mul_int(bigm.scale)).collect();
        let r = if kind.dual() == Rep::Arc && kind.condition() == OptCondition::ComplementarySlackness {
            bigm.r_on_graph(&graph.network, local.destination, &raw_caps)
        } else {
            Vec::new()
        };
        Ok(Block {
            k,
            kind,
            role,
            m: bigm.m(k, 0),
            graph,
            commodity: local,
            paths,
            path_s,
            caps,
            r,
        })
    }

    fn arc_var_name(&self, a: usize) -> String {
        if self.graph.network.arc(a).tolled {
            var_x(self.k, a)
        } else {
            var_y(self.k, a)
        }
    }

    fn toll_var(&self, model: &mut ModelIr, a: usize) -> usize {
        let original = self.graph.original_tolled(a).expect("tolled arc");
        model.ensure_var(&var_t_toll(original), VarKind::Continuous, NONNEG.0, NONNEG.1)
    }

    fn lambda(&self, model: &mut ModelIr, node: usize) -> usize {
        let name = var_lambda(self.k, self.graph.node_origin[node]);
        model.ensure_var(&name, VarKind::Continuous, None, None)
    }

    fn var(model: &ModelIr, name: &str) -> usize {
        model.var(name).unwrap_or_else(|| panic!("{name} declared by an earlier part"))
    }

    /// Path indices using each working-graph arc.
    fn coverage(&self) -> Vec<Vec<usize>> {
        let mut cover = vec![Vec::new(); self.graph.network.arc_count()];
        for (p, path) in self.paths.iter().enumerate() {
            for &a in &path.arcs {
                cover[a].push(p);
            }
        }
        cover
    }

    /// Tolled working-graph arcs carrying a revenue variable `t`.
    fn revenue_arcs(&self) -> Vec<usize> {
        let net = &self.graph.network;
        match self.kind.primal() {
            Rep::Arc => net.tolled_arcs().map(|a| a.id).collect(),
            Rep::Path => {
                let cover = self.coverage();
                net.tolled_arcs()
                    .map(|a| a.id)
                    .filter(|&a| !cover[a].is_empty())
                    .collect()
            }
        }
    }

    fn t_var(&self, model: &mut ModelIr, a: usize) -> usize {
        let original = self.graph.original_tolled(a).expect("tolled arc");
        model.ensure_var(&var_t(self.k, original), VarKind::Continuous, NONNEG.0, NONNEG.1)
    }

    /// Primal-selection expression of arc `a`: `x`/`y` or the sum of `z` over
    /// paths through it.
    fn selection(&self, model: &ModelIr, a: usize, cover: &[Vec<usize>]) -> Vec<(Fixed, usize)> {
        match self.kind.primal() {
            Rep::Arc => vec![(Fixed::ONE, Self::var(model, &self.arc_var_name(a)))],
            Rep::Path => cover[a]
                .iter()
                .map(|&p| (Fixed::ONE, Self::var(model, &var_z(self.k, p))))
                .collect(),
        }
    }

    /// Follower base cost of the primal choice: `sum c x + sum c y` or
    /// `sum base(p) z`.
    fn primal_base_cost(&self, model: &ModelIr) -> Vec<(Fixed, usize)> {
        match self.kind.primal() {
            Rep::Arc => self
                .graph
                .network
                .arcs()
                .iter()
                .map(|arc| (arc.cost, Self::var(model, &self.arc_var_name(arc.id))))
                .collect(),
            Rep::Path => self
                .paths
                .iter()
                .enumerate()
                .map(|(p, path)| (path.base_cost, Self::var(model, &var_z(self.k, p))))
                .collect(),
        }
    }

    /// Dual objective `lambda_o - lambda_d` or `L`.
    fn dual_value(&self, model: &mut ModelIr) -> Vec<(Fixed, usize)> {
        match self.kind.dual() {
            Rep::Arc => {
                let o = self.lambda(model, self.commodity.origin);
                let d = self.lambda(model, self.commodity.destination);
                vec![(Fixed::ONE, o), (-Fixed::ONE, d)]
            }
            Rep::Path => vec![(Fixed::ONE, Self::var(model, &var_l(self.k)))],
        }
    }

    fn tag(&self, family: &str, index: impl fmt::Display) -> String {
        format!("{family}[{},{index}]", self.k)
    }
}

/// Emits flow-balance rows over `x`/`y`, or the convexity row over `z`.
pub fn build_primal(model: &mut ModelIr, block: &Block) -> Result<(), BuildError> {
    let k = block.k;
    let net = &block.graph.network;
    match block.kind.primal() {
        Rep::Arc => {
            let y_kind = match block.kind.condition() {
                OptCondition::ComplementarySlackness => VarKind::Binary,
                OptCondition::StrongDuality => VarKind::Continuous,
            };
            for arc in net.arcs() {
                if arc.tolled {
                    model.add_var(var_x(k, arc.id), VarKind::Binary, None, None)?;
                } else {
                    model.add_var(var_y(k, arc.id), y_kind, UNIT.0, UNIT.1)?;
                }
            }
            for node in 0..net.node_count() {
                let terms: Vec<(Fixed, usize)> = net
                    .outgoing(node)
                    .iter()
                    .map(|&a| (Fixed::ONE, a))
                    .chain(net.incoming(node).iter().map(|&a| (-Fixed::ONE, a)))
                    .map(|(c, a)| (c, Block::var(model, &block.arc_var_name(a))))
                    .collect();
                let rhs = Fixed::from_int(block.commodity.supply(node));
                if terms.is_empty() && rhs.is_zero() {
                    continue;
                }
                model.add_constraint(
                    block.tag("pa", block.graph.node_origin[node]),
                    terms,
                    Sense::Eq,
                    rhs,
                )?;
            }
        }
        Rep::Path => {
            if block.paths.is_empty() {
                return Err(BuildError::PathsRequired(k, block.kind));
            }
            let mut terms = Vec::new();
            for p in 0..block.paths.len() {
                terms.push((Fixed::ONE, model.add_var(var_z(k, p), VarKind::Binary, None, None)?));
            }
            model.add_constraint(format!("pp[{k}]"), terms, Sense::Eq, Fixed::ONE)?;
        }
    }
    Ok(())
}

/// Emits dual feasibility rows: arc potentials or path values.
pub fn build_dual(model: &mut ModelIr, block: &Block) -> Result<(), BuildError> {
    let k = block.k;
    match block.kind.dual() {
        Rep::Arc => {
            let net = &block.graph.network;
            for node in 0..net.node_count() {
                block.lambda(model, node);
            }
            for arc in net.arcs() {
                let i = block.lambda(model, arc.tail);
                let j = block.lambda(model, arc.head);
                let mut terms = vec![(Fixed::ONE, i), (-Fixed::ONE, j)];
                let family = if arc.tolled {
                    terms.push((-Fixed::ONE, block.toll_var(model, arc.id)));
                    "da1"
                } else {
                    "da2"
                };
                model.add_constraint(block.tag(family, arc.id), terms, Sense::Le, arc.cost)?;
            }
        }
        Rep::Path => {
            if block.paths.is_empty() {
                return Err(BuildError::PathsRequired(k, block.kind));
            }
            let l = model.add_var(var_l(k), VarKind::Continuous, None, None)?;
            for (p, path) in block.paths.iter().enumerate() {
                let mut terms = vec![(Fixed::ONE, l)];
                for &a in &path.arcs {
                    if block.graph.network.arc(a).tolled {
                        terms.push((-Fixed::ONE, block.toll_var(model, a)));
                    }
                }
                model.add_constraint(block.tag("dp", p), terms, Sense::Le, path.base_cost)?;
            }
        }
    }
    Ok(())
}

fn sd_suffix(kind: FormulationKind) -> &'static str {
    match (kind.primal(), kind.dual()) {
        (Rep::Arc, Rep::Arc) => "aa",
        (Rep::Arc, Rep::Path) => "ap",
        (Rep::Path, Rep::Arc) => "pa",
        (Rep::Path, Rep::Path) => "pp",
    }
}

/// Emits the big-M rows tying `t` to `T` and the primal choice. With
/// `lower` the row `T - t >= 0` is added too; strong duality implies it.
fn build_direct(model: &mut ModelIr, block: &Block, lower: bool) -> Result<(), BuildError> {
    let cover = block.coverage();
    let family = match block.kind.primal() {
        Rep::Arc => "directa",
        Rep::Path => "directp",
    };
    for a in block.revenue_arcs() {
        let t = block.t_var(model, a);
        let toll = block.toll_var(model, a);
        let sel = block.selection(model, a, &cover);
        let n = block.caps[a];
        // t - M sel <= 0
        let terms: Vec<(Fixed, usize)> = std::iter::once((Fixed::ONE, t))
            .chain(sel.iter().map(|&(_, v)| (-block.m, v)))
            .collect();
        model.add_constraint(block.tag(&format!("{family}1"), a), terms, Sense::Le, Fixed::ZERO)?;
        // T - t + N sel <= N
        let terms: Vec<(Fixed, usize)> = [(Fixed::ONE, toll), (-Fixed::ONE, t)]
            .into_iter()
            .chain(sel.iter().map(|&(_, v)| (n, v)))
            .collect();
        model.add_constraint(block.tag(&format!("{family}2"), a), terms, Sense::Le, n)?;
        if lower {
            model.add_constraint(
                block.tag(&format!("{family}2-lo"), a),
                [(Fixed::ONE, toll), (-Fixed::ONE, t)],
                Sense::Ge,
                Fixed::ZERO,
            )?;
        }
    }
    Ok(())
}

/// Terms `-sum_{a in p, tolled} T_a`.
fn path_toll_terms(model: &mut ModelIr, block: &Block, path: &Path) -> Vec<(Fixed, usize)> {
    path.arcs
        .iter()
        .filter(|&&a| block.graph.network.arc(a).tolled)
        .map(|&a| (-Fixed::ONE, block.toll_var(model, a)))
        .collect()
}

/// Linearized arc-primal/path-dual slackness row for one path (in
/// working-graph arc ids): `L - sum T - S sum(x|y) >= base - S |p|`.
pub fn add_arc_path_row(
    model: &mut ModelIr,
    block: &Block,
    path: &Path,
    s: Fixed,
    tag: String,
) -> Result<usize, BuildError> {
    let l = Block::var(model, &var_l(block.k));
    let mut terms = vec![(Fixed::ONE, l)];
    terms.extend(path_toll_terms(model, block, path));
    for &a in &path.arcs {
        terms.push((-s, Block::var(model, &block.arc_var_name(a))));
    }
    let rhs = path.base_cost - s.mul_int(path.arcs.len() as i128);
    Ok(model.add_constraint(tag, terms, Sense::Ge, rhs)?)
}

fn build_slackness(model: &mut ModelIr, block: &Block) -> Result<(), BuildError> {
    let k = block.k;
    match (block.kind.primal(), block.kind.dual()) {
        (primal, Rep::Arc) => {
            let cover = block.coverage();
            let family = if primal == Rep::Arc { "lin-cs-aa" } else { "lin-cs-pa" };
            for arc in block.graph.network.arcs() {
                let r = block.r[arc.id].ok_or_else(|| BuildError::MissingBigM {
                    commodity: k,
                    what: format!("R on arc {} of the working graph", arc.id),
                })?;
                let i = block.lambda(model, arc.tail);
                let j = block.lambda(model, arc.head);
                let mut terms = vec![(Fixed::ONE, i), (-Fixed::ONE, j)];
                if arc.tolled {
                    terms.push((-Fixed::ONE, block.toll_var(model, arc.id)));
                }
                terms.extend(block.selection(model, arc.id, &cover).into_iter().map(|(_, v)| (-r, v)));
                let suffix = if arc.tolled { "1" } else { "2" };
                model.add_constraint(
                    block.tag(&format!("{family}{suffix}"), arc.id),
                    terms,
                    Sense::Ge,
                    arc.cost - r,
                )?;
            }
        }
        (Rep::Path, Rep::Path) => {
            let l = Block::var(model, &var_l(k));
            for (p, path) in block.paths.iter().enumerate() {
                let s = block.path_s[p];
                let z = Block::var(model, &var_z(k, p));
                let mut terms = vec![(Fixed::ONE, l)];
                terms.extend(path_toll_terms(model, block, path));
                terms.push((-s, z));
                model.add_constraint(block.tag("lin-cs-pp", p), terms, Sense::Ge, path.base_cost - s)?;
            }
        }
        (Rep::Arc, Rep::Path) => {
            for (p, path) in block.paths.iter().enumerate() {
                add_arc_path_row(model, block, path, block.path_s[p], block.tag("lin-cs-ap", p))?;
            }
        }
    }
    Ok(())
}

/// Emits the optimality coupling and the revenue linearization, and adds the
/// block's revenue to the objective.
pub fn build_coupling(model: &mut ModelIr, block: &Block) -> Result<(), BuildError> {
    let k = block.k;
    let demand = block.commodity.demand;
    let suffix = sd_suffix(block.kind);
    if block.kind.condition() == OptCondition::ComplementarySlackness {
        build_slackness(model, block)?;
    }
    match block.kind.linearization() {
        Linearization::Direct => {
            let revenue = block.revenue_arcs();
            let strong = block.kind.condition() == OptCondition::StrongDuality;
            if strong {
                let mut terms = block.primal_base_cost(model);
                for &a in &revenue {
                    terms.push((Fixed::ONE, block.t_var(model, a)));
                }
                terms.extend(block.dual_value(model).into_iter().map(|(c, v)| (-c, v)));
                model.add_constraint(format!("lin-sd-{suffix}[{k}]"), terms, Sense::Eq, Fixed::ZERO)?;
            }
            build_direct(model, block, !strong)?;
            let objective: Vec<(Fixed, usize)> = revenue
                .iter()
                .map(|&a| (demand, block.t_var(model, a)))
                .collect();
            model.add_objective_terms(objective);
        }
        Linearization::Substitution => {
            let tau = model.add_var(var_tau(k), VarKind::Continuous, NONNEG.0, NONNEG.1)?;
            let mut terms = block.primal_base_cost(model);
            terms.push((Fixed::ONE, tau));
            terms.extend(block.dual_value(model).into_iter().map(|(c, v)| (-c, v)));
            model.add_constraint(format!("lin-subs-sd-{suffix}[{k}]"), terms, Sense::Eq, Fixed::ZERO)?;
            model.add_objective_terms([(demand, tau)]);
        }
    }
    Ok(())
}

/// Emits a whole block.
pub fn build_block(model: &mut ModelIr, block: &Block) -> Result<(), BuildError> {
    build_primal(model, block)?;
    build_dual(model, block)?;
    build_coupling(model, block)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommodityAssignment {
    /// Single bilevel-feasible path (toll-free): no revenue, no block.
    Dropped,
    Main(FormulationKind),
    Fallback(FormulationKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HybridOptions {
    /// Commodities with at most this many bilevel-feasible paths use the
    /// main formulation. `enumeration::UNBOUNDED` sends every exhaustive
    /// commodity to the main formulation.
    pub breakpoint: usize,
    pub main: FormulationKind,
    pub fallback: FormulationKind,
    /// Build main blocks on path-reduced graphs instead of the original.
    pub preprocess: bool,
    /// Declares that the model will be solved by the cut loop, which is
    /// required for VFCS blocks.
    pub cut_loop: bool,
}

impl HybridOptions {
    pub fn new(breakpoint: usize, main: FormulationKind, fallback: FormulationKind) -> Self {
        HybridOptions {
            breakpoint,
            main,
            fallback,
            preprocess: true,
            cut_loop: main.needs_cut_loop(),
        }
    }

    /// Every commodity on `kind`, no breakpoint.
    pub fn pure(kind: FormulationKind) -> Self {
        Self::new(crate::enumeration::UNBOUNDED, kind, FormulationKind::Std)
    }
}

#[derive(Debug, Clone)]
pub struct HybridModel {
    pub model: ModelIr,
    pub assignments: Vec<CommodityAssignment>,
    pub blocks: Vec<Block>,
}

/// Decides how each commodity is modeled from its (possibly truncated) path
/// set.
pub fn assign(bfset: &BilevelFeasibleSet, options: &HybridOptions) -> CommodityAssignment {
    if bfset.exhaustive && bfset.len() <= 1 {
        CommodityAssignment::Dropped
    } else if bfset.exhaustive && bfset.len() <= options.breakpoint {
        CommodityAssignment::Main(options.main)
    } else {
        CommodityAssignment::Fallback(options.fallback)
    }
}

/// Builds one MILP mixing formulations per commodity with a shared toll
/// vector. `bfsets[k]` must come from enumeration with cap `breakpoint + 1`
/// (or larger).
pub fn assemble_hybrid(
    instance: &ProblemInstance,
    options: &HybridOptions,
    bigm: &BigMParams,
    bfsets: &[BilevelFeasibleSet],
) -> Result<HybridModel, BuildError> {
    if options.breakpoint < 1 {
        return Err(BuildError::InvalidBreakpoint);
    }
    if options.fallback.primal() != Rep::Arc
        || options.fallback.dual() != Rep::Arc
    {
        return Err(BuildError::InvalidFallback(options.fallback));
    }
    let mut model = ModelIr::new();
    let mut assignments = Vec::new();
    let mut blocks = Vec::new();
    for (k, commodity) in instance.commodities.iter().enumerate() {
        let set = &bfsets[k];
        let assignment = assign(set, options);
        assignments.push(assignment);
        let block = match assignment {
            CommodityAssignment::Dropped => continue,
            CommodityAssignment::Main(kind) => {
                if kind.needs_cut_loop() && !options.cut_loop {
                    return Err(BuildError::CutLoopRequired(kind));
                }
                let graph = if options.preprocess {
                    path_based_reduce(&instance.network, commodity, set)?
                } else {
                    ReducedGraph::identity(&instance.network)
                };
                let paths: &[Path] = if kind.uses_paths() { &set.paths } else { &[] };
                Block::new(k, kind, BlockRole::Main, graph, commodity, paths, bigm)?
            }
            CommodityAssignment::Fallback(kind) => Block::new(
                k,
                kind,
                BlockRole::Fallback,
                ReducedGraph::identity(&instance.network),
                commodity,
                &[],
                bigm,
            )?,
        };
        build_block(&mut model, &block)?;
        blocks.push(block);
    }
    Ok(HybridModel {
        model,
        assignments,
        blocks,
    })
}
