//! Graph, commodity and instance data model, plus the line-oriented instance
//! file format:
//!
//! ```text
//! # label: toy5
//! npp <nodes> <arcs> <commodities>
//! arc <tail> <head> <cost> <T|F>
//! commodity <origin> <destination> <demand>
//! ```
//!
//! Blank lines and `#` comments are ignored. A `# label: <text>` comment
//! before the header sets the instance label.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::fixed::Fixed;

/// A directed arc. Tolled arcs form the leader-controlled set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    pub cost: Fixed,
    pub tolled: bool,
}

/// Arc data before ids are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcSpec {
    pub tail: usize,
    pub head: usize,
    pub cost: Fixed,
    pub tolled: bool,
}

impl ArcSpec {
    pub fn new(tail: usize, head: usize, cost: Fixed, tolled: bool) -> Self {
        ArcSpec {
            tail,
            head,
            cost,
            tolled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("arc {arc} references node {node}, but the network has {nodes} nodes")]
    NodeOutOfRange { arc: usize, node: usize, nodes: usize },
    #[error("arc {arc} is a self-loop on node {node}")]
    SelfLoop { arc: usize, node: usize },
}

/// Directed multigraph with dense arc ids and per-node adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    node_count: usize,
    arcs: Vec<Arc>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(
        node_count: usize,
        arcs: impl IntoIterator<Item = ArcSpec>,
    ) -> Result<Self, NetworkError> {
        let mut outgoing = vec![Vec::new(); node_count];
        let mut incoming = vec![Vec::new(); node_count];
        let mut built = Vec::new();
        for (id, spec) in arcs.into_iter().enumerate() {
            for node in [spec.tail, spec.head] {
                if node >= node_count {
                    return Err(NetworkError::NodeOutOfRange {
                        arc: id,
                        node,
                        nodes: node_count,
                    });
                }
            }
            if spec.tail == spec.head {
                return Err(NetworkError::SelfLoop {
                    arc: id,
                    node: spec.tail,
                });
            }
            outgoing[spec.tail].push(id);
            incoming[spec.head].push(id);
            built.push(Arc {
                id,
                tail: spec.tail,
                head: spec.head,
                cost: spec.cost,
                tolled: spec.tolled,
            });
        }
        Ok(Network {
            node_count,
            arcs: built,
            outgoing,
            incoming,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: usize) -> &Arc {
        &self.arcs[id]
    }

    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    pub fn tolled_arcs(&self) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().filter(|a| a.tolled)
    }

    pub fn toll_free_arcs(&self) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().filter(|a| !a.tolled)
    }

    pub fn tolled_count(&self) -> usize {
        self.tolled_arcs().count()
    }

    pub fn specs(&self) -> Vec<ArcSpec> {
        self.arcs
            .iter()
            .map(|a| ArcSpec::new(a.tail, a.head, a.cost, a.tolled))
            .collect()
    }

    /// Same topology with new arc costs (indexed by arc id).
    pub fn with_costs(&self, costs: &[Fixed]) -> Network {
        assert_eq!(costs.len(), self.arcs.len());
        let mut next = self.clone();
        for (arc, &cost) in next.arcs.iter_mut().zip(costs) {
            arc.cost = cost;
        }
        next
    }

    pub fn min_cost(&self) -> Option<Fixed> {
        self.arcs.iter().map(|a| a.cost).min()
    }

    /// Nodes reachable from `source` using only toll-free arcs.
    pub fn toll_free_reachable(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(node) = queue.pop_front() {
            for &a in &self.outgoing[node] {
                let arc = &self.arcs[a];
                if !arc.tolled && !seen[arc.head] {
                    seen[arc.head] = true;
                    queue.push_back(arc.head);
                }
            }
        }
        seen
    }

    /// Nodes along an arc sequence, starting with the tail of the first arc.
    pub fn path_nodes(&self, arcs: &[usize]) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(arcs.len() + 1);
        if let Some(&first) = arcs.first() {
            nodes.push(self.arcs[first].tail);
        }
        nodes.extend(arcs.iter().map(|&a| self.arcs[a].head));
        nodes
    }
}

/// Origin-destination demand of one follower.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commodity {
    pub origin: usize,
    pub destination: usize,
    pub demand: Fixed,
}

impl Commodity {
    pub fn new(origin: usize, destination: usize, demand: Fixed) -> Self {
        Commodity {
            origin,
            destination,
            demand,
        }
    }

    /// Right-hand side of the flow-balance row at `node`.
    pub fn supply(&self, node: usize) -> i64 {
        if node == self.origin {
            1
        } else if node == self.destination {
            -1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemInstance {
    pub network: Network,
    pub commodities: Vec<Commodity>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl ProblemInstance {
    pub fn new(
        network: Network,
        commodities: Vec<Commodity>,
        label: impl Into<String>,
    ) -> Result<Self, InstanceError> {
        for (k, c) in commodities.iter().enumerate() {
            for node in [c.origin, c.destination] {
                if node >= network.node_count() {
                    return Err(InstanceError::Semantic {
                        line: 0,
                        message: format!(
                            "commodity {k} references node {node}, but the network has {} nodes",
                            network.node_count()
                        ),
                    });
                }
            }
        }
        Ok(ProblemInstance {
            network,
            commodities,
            label: label.into(),
        })
    }

    /// Renders the instance in the canonical file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.label.is_empty() {
            out.push_str(&format!("# label: {}\n", self.label));
        }
        out.push_str(&format!(
            "npp {} {} {}\n",
            self.network.node_count(),
            self.network.arc_count(),
            self.commodities.len()
        ));
        for arc in self.network.arcs() {
            out.push_str(&format!(
                "arc {} {} {} {}\n",
                arc.tail,
                arc.head,
                arc.cost,
                if arc.tolled { 'T' } else { 'F' }
            ));
        }
        for c in &self.commodities {
            out.push_str(&format!(
                "commodity {} {} {}\n",
                c.origin, c.destination, c.demand
            ));
        }
        out
    }
}

fn syntax(line: usize, message: impl Into<String>) -> InstanceError {
    InstanceError::Syntax {
        line,
        message: message.into(),
    }
}

fn semantic(line: usize, message: impl Into<String>) -> InstanceError {
    InstanceError::Semantic {
        line,
        message: message.into(),
    }
}

fn parse_field<T: std::str::FromStr>(
    token: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, InstanceError> {
    let token = token.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| syntax(line, format!("invalid {what} `{token}`")))
}

/// Parses the instance file format. Arc ids follow file order.
pub fn parse_instance(text: &str) -> Result<ProblemInstance, InstanceError> {
    let mut label = String::new();
    let mut header: Option<(usize, usize, usize)> = None;
    let mut arcs = Vec::new();
    let mut arc_lines = Vec::new();
    let mut commodities = Vec::new();
    let mut commodity_lines = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if header.is_none() {
                if let Some(rest) = comment.trim_start().strip_prefix("label:") {
                    label = rest.trim().to_string();
                }
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        match (keyword, header) {
            ("npp", None) => {
                let nodes = parse_field(tokens.next(), line, "node count")?;
                let arc_count = parse_field(tokens.next(), line, "arc count")?;
                let commodity_count = parse_field(tokens.next(), line, "commodity count")?;
                header = Some((nodes, arc_count, commodity_count));
            }
            ("npp", Some(_)) => return Err(syntax(line, "duplicate header")),
            (_, None) => return Err(syntax(line, "expected header `npp <nodes> <arcs> <commodities>`")),
            ("arc", Some(_)) => {
                if !commodities.is_empty() {
                    return Err(syntax(line, "arc line after commodity lines"));
                }
                let tail: usize = parse_field(tokens.next(), line, "arc tail")?;
                let head: usize = parse_field(tokens.next(), line, "arc head")?;
                let cost: crate::Fixed = parse_field(tokens.next(), line, "arc cost")?;
                let tolled = match tokens.next() {
                    Some("T") => true,
                    Some("F") => false,
                    Some(other) => return Err(syntax(line, format!("invalid toll flag `{other}`"))),
                    None => return Err(syntax(line, "missing toll flag")),
                };
                arcs.push(ArcSpec::new(tail, head, cost, tolled));
                arc_lines.push(line);
            }
            ("commodity", Some(_)) => {
                let origin: usize = parse_field(tokens.next(), line, "commodity origin")?;
                let destination: usize = parse_field(tokens.next(), line, "commodity destination")?;
                let demand: crate::Fixed = parse_field(tokens.next(), line, "commodity demand")?;
                commodities.push(Commodity::new(origin, destination, demand));
                commodity_lines.push(line);
            }
            (other, Some(_)) => return Err(syntax(line, format!("unknown record `{other}`"))),
        }
        if let Some(extra) = tokens.next() {
            return Err(syntax(line, format!("unexpected trailing token `{extra}`")));
        }
    }

    let (nodes, arc_count, commodity_count) =
        header.ok_or_else(|| syntax(last_line.max(1), "missing header"))?;
    if arcs.len() != arc_count {
        return Err(syntax(
            last_line,
            format!("header declares {arc_count} arcs, found {}", arcs.len()),
        ));
    }
    if commodities.len() != commodity_count {
        return Err(syntax(
            last_line,
            format!(
                "header declares {commodity_count} commodities, found {}",
                commodities.len()
            ),
        ));
    }
    for (spec, &line) in arcs.iter().zip(&arc_lines) {
        for node in [spec.tail, spec.head] {
            if node >= nodes {
                return Err(semantic(
                    line,
                    format!("arc references node {node}, but the network has {nodes} nodes"),
                ));
            }
        }
        if spec.tail == spec.head {
            return Err(semantic(line, format!("self-loop on node {}", spec.tail)));
        }
    }
    for (c, &line) in commodities.iter().zip(&commodity_lines) {
        for node in [c.origin, c.destination] {
            if node >= nodes {
                return Err(semantic(
                    line,
                    format!("commodity references node {node}, but the network has {nodes} nodes"),
                ));
            }
        }
    }
    let network = Network::new(nodes, arcs)?;
    ProblemInstance::new(network, commodities, label)
}

/// One violated instance requirement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    NonPositiveCost { arc: usize, tail: usize, head: usize },
    NonPositiveDemand { commodity: usize },
    SameOriginDestination { commodity: usize },
    NoTollFreePath { commodity: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NonPositiveCost { arc, tail, head } => {
                write!(f, "nonpositive cost on arc {arc} ({tail}->{head})")
            }
            Diagnostic::NonPositiveDemand { commodity } => {
                write!(f, "nonpositive demand for commodity {commodity}")
            }
            Diagnostic::SameOriginDestination { commodity } => {
                write!(f, "origin equals destination for commodity {commodity}")
            }
            Diagnostic::NoTollFreePath { commodity } => {
                write!(f, "no toll-free path for commodity {commodity}")
            }
        }
    }
}

/// Checks positivity of costs and demands and the existence of a toll-free
/// path for every commodity. An empty result means the instance is valid.
pub fn validate_instance(instance: &ProblemInstance) -> Vec<Diagnostic> {
    let network = &instance.network;
    let mut diagnostics: Vec<Diagnostic> = network
        .arcs()
        .iter()
        .filter(|a| !a.cost.is_positive())
        .map(|a| Diagnostic::NonPositiveCost {
            arc: a.id,
            tail: a.tail,
            head: a.head,
        })
        .collect();
    for (k, c) in instance.commodities.iter().enumerate() {
        if !c.demand.is_positive() {
            diagnostics.push(Diagnostic::NonPositiveDemand { commodity: k });
        }
        if c.origin == c.destination {
            diagnostics.push(Diagnostic::SameOriginDestination { commodity: k });
            continue;
        }
        if !network.toll_free_reachable(c.origin)[c.destination] {
            diagnostics.push(Diagnostic::NoTollFreePath { commodity: k });
        }
    }
    diagnostics
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const TOY5: &str = "\
# label: toy5
npp 5 7 1
arc 0 1 1 T
arc 1 2 1 T
arc 2 4 1 T
arc 2 3 2 F
arc 3 4 2 F
arc 1 4 3 F
arc 0 4 10 F
commodity 0 4 1
";

    #[test]
    fn parses_minimal_file() {
        let inst = parse_instance("npp 2 1 1\narc 0 1 10 F\ncommodity 0 1 1\n").unwrap();
        assert_eq!(inst.network.node_count(), 2);
        assert_eq!(inst.network.tolled_count(), 0);
        assert_eq!(inst.network.toll_free_arcs().count(), 1);
        assert_eq!(inst.commodities[0].demand, Fixed::ONE);
    }

    #[test]
    fn parses_toy5() {
        let inst = parse_instance(TOY5).unwrap();
        assert_eq!(inst.label, "toy5");
        assert_eq!(inst.network.node_count(), 5);
        assert_eq!(inst.network.tolled_count(), 3);
        assert_eq!(inst.network.toll_free_arcs().count(), 4);
        assert_eq!(inst.network.outgoing(0), &[0, 6]);
        assert_eq!(inst.network.incoming(4), &[2, 4, 5, 6]);
    }

    #[test]
    fn commodity_out_of_range_is_semantic_error() {
        let text = TOY5.replace("commodity 0 4 1", "commodity 0 99 1");
        match parse_instance(&text) {
            Err(InstanceError::Semantic { line, .. }) => assert_eq!(line, 10),
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_instance("npp 2 1 1\narc 0 1 ten F\ncommodity 0 1 1\n").unwrap_err();
        assert_eq!(
            err,
            InstanceError::Syntax {
                line: 2,
                message: "invalid arc cost `ten`".into()
            }
        );
        let err = parse_instance("npp 2 2 1\narc 0 1 1 F\ncommodity 0 1 1\n").unwrap_err();
        assert!(matches!(err, InstanceError::Syntax { .. }));
        let err = parse_instance("npp 2 1 1\narc 0 1 1 X\ncommodity 0 1 1\n").unwrap_err();
        assert!(matches!(err, InstanceError::Syntax { line: 2, .. }));
    }

    #[test]
    fn self_loop_rejected() {
        let err = parse_instance("npp 2 1 1\narc 1 1 1 F\ncommodity 0 1 1\n").unwrap_err();
        assert!(matches!(err, InstanceError::Semantic { line: 2, .. }));
    }

    #[test]
    fn toy5_is_valid() {
        let inst = parse_instance(TOY5).unwrap();
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn tolled_only_route_is_reported() {
        let inst = parse_instance("npp 2 1 1\narc 0 1 5 T\ncommodity 0 1 1\n").unwrap();
        let diags = validate_instance(&inst);
        assert_eq!(diags, vec![Diagnostic::NoTollFreePath { commodity: 0 }]);
        assert_eq!(diags[0].to_string(), "no toll-free path for commodity 0");
    }

    #[test]
    fn zero_cost_is_reported() {
        let inst = parse_instance("npp 2 2 1\narc 0 1 0 F\narc 1 0 1 F\ncommodity 0 1 1\n").unwrap();
        let diags = validate_instance(&inst);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].to_string().starts_with("nonpositive cost on arc"));
    }

    #[test]
    fn diagnostics_stable_under_arc_reordering() {
        let text = "npp 4 4 2\narc 0 1 0 F\narc 1 2 3 T\narc 2 3 1 F\narc 0 3 -1 T\ncommodity 0 3 1\ncommodity 0 2 1\n";
        let inst = parse_instance(text).unwrap();
        let mut specs = inst.network.specs();
        specs.reverse();
        let reordered = ProblemInstance::new(
            Network::new(4, specs).unwrap(),
            inst.commodities.clone(),
            "",
        )
        .unwrap();
        let semantic = |d: &Diagnostic| match *d {
            Diagnostic::NonPositiveCost { tail, head, .. } => format!("cost {tail}->{head}"),
            ref other => other.to_string(),
        };
        let mut a: Vec<_> = validate_instance(&inst).iter().map(semantic).collect();
        let mut b: Vec<_> = validate_instance(&reordered).iter().map(semantic).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }

    fn arb_instance() -> impl Strategy<Value = ProblemInstance> {
        (2usize..8).prop_flat_map(|n| {
            let arc = (0..n, 1..n, 1i64..10_000, any::<bool>()).prop_map(move |(t, off, c, tol)| {
                ArcSpec::new(t, (t + off) % n, Fixed::from_raw(c as i128 * 10_000_000_000_000_000), tol)
            });
            let commodity = (0..n, 1..n, 1i64..50)
                .prop_map(move |(o, off, d)| Commodity::new(o, (o + off) % n, Fixed::from_int(d)));
            (
                prop::collection::vec(arc, 1..20),
                prop::collection::vec(commodity, 0..4),
                "[a-z0-9_]{0,8}",
            )
                .prop_map(move |(arcs, commodities, label)| {
                    ProblemInstance::new(Network::new(n, arcs).unwrap(), commodities, label).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(inst in arb_instance()) {
            let parsed = parse_instance(&inst.to_text()).unwrap();
            prop_assert_eq!(parsed, inst);
        }
    }
}
