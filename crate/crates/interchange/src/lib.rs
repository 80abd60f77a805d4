//! Simulation and exact-numerics toolkit for the lazy interchange process on
//! dumbbell-family graphs, the Bernoulli–Laplace urn chain, and the labelled
//! exclusion process on the complete graph.
//!
//! The crate is organized around six subsystems:
//!
//! - [`graphs`] — the parametric graph families (dumbbell, symmetrized,
//!   half-symmetrized, complete) with exact rational edge weights and O(1)
//!   weighted edge sampling.
//! - [`dynamics`] — Monte Carlo simulation of the ½-lazy interchange and
//!   exclusion processes with O(1)-per-step incremental observables.
//! - [`lumped`] — small projected chains (single particle, particle pair,
//!   Bernoulli–Laplace counts, the 3-state half-symmetrized projection) and
//!   exact total-variation profiles via extended-precision repeated squaring.
//! - [`analytics`] — closed-form moments, hypergeometric stationary laws,
//!   Wilson and bottleneck bounds, regime predictions, Chebyshev separation.
//! - [`couplings`] — the three-layer coupled pair / symmetrized walk /
//!   copycat walk construction with coalescence and hitting-tail statistics.
//! - [`mixing`] — experiment drivers: exact mixing profiles, statistic-based
//!   TV lower bounds, cutoff scans, exclusion experiments, certificates.
//!
//! Monte Carlo replicas run data-parallel under the default `parallel`
//! feature (rayon) and sequentially without it; results are bit-identical
//! either way because every replica owns a stream seeded from
//! `base_seed ^ replica_index`.

pub mod analytics;
pub mod couplings;
pub mod dd;
pub mod dynamics;
pub mod graphs;
pub mod lumped;
pub mod matrix;
pub mod mixing;
pub mod rational;
pub mod replicas;

pub use dd::Dd;
pub use graphs::{GraphKind, WeightedGraph};
pub use rational::Ratio;
