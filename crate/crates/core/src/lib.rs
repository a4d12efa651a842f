//! Solver and simulator for voluntary pre-review lotteries.
//!
//! Authors may enter a lottery that rejects their paper before review with
//! probability `L`. Fewer reviewed papers means less reviewer load and lower
//! review noise, which sharpens the selection of the papers that survive.
//! This crate computes the quality of accepted papers under any threshold
//! participation rule, the planner's optimal rule, the Nash threshold that
//! self-interested authors sustain, and validates the continuous model with
//! finite-population Monte Carlo.

pub mod continuum;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod quadrature;

pub use continuum::{ContinuumSolution, ContinuumSolver, CutoffUnderDeviation, Deviation};
pub use equilibrium::{EquilibriumResult, EquilibriumSolver, Mode};
pub use error::{Error, Result};
pub use model::{
    effective_noise, sample_score, score_survival, survival_prob, ModelParams, QualityDistribution, ScoreModel,
    ThresholdStrategy,
};
pub use montecarlo::{MCResult, MonteCarlo};
pub use quadrature::QualityGrid;
