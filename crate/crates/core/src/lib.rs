//! Simulation and verification toolkit for Lenglart-type domination
//! inequalities.
//!
//! For non-negative `X` dominated by a predictable non-decreasing `G`
//! (`E[X_tau] <= E[G_tau]` for bounded stopping times) and `p in (0,1)`:
//!
//! * `E[(sup X)^p] <= p^-p / (1-p) * E[(sup G)^p]`,
//! * `E[(sup X)^p] <= p^-p * E[(sup G)^p]` when `X` is non-decreasing,
//!
//! and both constants are attained in the limit by explicit constructions.
//! This crate samples those constructions, estimates the moments by seeded
//! Monte Carlo and checks the inequalities and their sharpness numerically.

pub mod bdg;
pub mod cli;
pub mod constructions;
pub mod montecarlo;
pub mod oracles;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod verifier;

pub use constructions::{ExtremalParams, ExtremalRealization, Proposal, TailMode};
pub use montecarlo::{Estimate, EstimatorMethod, RatioEstimate};
pub use oracles::{constant, ConstantKind};
pub use paths::{PathPair, StoppingIndex, SupSample, TimeGrid};
