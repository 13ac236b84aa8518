//! Simulation library for studying the evolution of modularity in Boolean
//! gene regulatory networks.
//!
//! A [`Genome`](genome::Genome) is a small signed adjacency matrix whose
//! Boolean dynamics are iterated to fixed-point attractors. Fitness rewards
//! robust recovery of target activity patterns under random perturbations,
//! a genetic algorithm evolves populations of genomes against a staged
//! target schedule, and the Newman Q score measures how modular the evolved
//! networks are with respect to the partition implied by the targets.
//!
//! Modules:
//! - [`genome`]: network representation and Boolean dynamics
//! - [`fitness`]: perturbation sampling, robustness fitness, exact oracle
//! - [`evolution`]: mutation, crossover, selection, generation loop
//! - [`modularity`]: target-derived partitions and the Q score
//! - [`analysis`]: dominance extraction, edge trimming, removal lattices,
//!   neighbor probes
//! - [`stats`]: Wilcoxon signed-rank test and summaries
//! - [`config`], [`record`], [`experiment`], [`seed`]: experiment harness

pub mod analysis;
pub mod config;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod fitness;
pub mod genome;
pub mod modularity;
pub mod record;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
