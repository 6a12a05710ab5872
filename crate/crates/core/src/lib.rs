//! Toolkit for the network pricing problem: a leader sets tolls on a subset
//! of arcs and each commodity's follower routes along its cheapest path.
//!
//! The crate enumerates bilevel-feasible paths, shrinks per-commodity graphs,
//! builds any of twelve single-level MILP reformulations (or a per-commodity
//! hybrid of them), solves them through a pluggable backend and checks the
//! answers against a brute-force oracle.

pub mod bigm;
pub mod cuts;
pub mod enumeration;
pub mod experiment;
pub mod fixed;
pub mod formulation;
pub mod generator;
pub mod model;
pub mod network;
pub mod preprocess;
pub mod shortest_path;
pub mod solver;

pub use fixed::Fixed;
pub use network::{Arc, ArcSpec, Commodity, Network, ProblemInstance};
