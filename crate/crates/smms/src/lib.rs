//! Almost-sure reachability for stochastic multi-mode systems.
//!
//! A stochastic multi-mode system (SMMS) is a plant with finitely many
//! modes, each a compactly supported distribution over constant rate
//! vectors. The controller repeatedly picks a mode and a dwell time; the
//! environment samples a rate and the state drifts linearly. This crate
//! provides:
//!
//! - [`model`] — mode distributions, the plant, its expected system, and
//!   seeded sampling;
//! - [`decide`] — the exact-rational polynomial-time decision procedure for
//!   almost-sure ε-reachability, with machine-checkable certificates, plus
//!   certified lower bounds on the spanning margin λ;
//! - [`control`] — the provably convergent control policies: center-reaching
//!   inside a safety ball, arbitrary targets via waypoint chains, and the
//!   one-dimensional dwell policy;
//! - [`plan`] — convex-polytope safety geometry, path clearance, ball
//!   covers, an RRT path finder, and the end-to-end controller for
//!   path-connected safety sets;
//! - [`sim`] — a seeded Monte Carlo harness with an independent trajectory
//!   auditor and the statistical impossibility-bound test;
//! - [`scenario`] / [`cli`] — the JSON scenario schema and the `check`,
//!   `plan`, `run`, `render` subcommands.
//!
//! All randomness flows through ChaCha8 streams derived from
//! `(seed, run_index)`, so every result in this crate is bit-reproducible.

pub mod cli;
pub mod control;
pub mod decide;
pub mod model;
pub mod plan;
pub mod rational;
pub mod render;
pub mod scenario;
pub mod sim;

mod simplex;
