//! Benchmark harness and agent library for contextual-bandit treatment
//! assignment over drug-response cohorts.
//!
//! The pipeline: ingest a cohort (IC50 responses, feature embeddings,
//! biomarker flags) or synthesize one with a planted signal; define rewards
//! and regret against the per-unit optimal drug; drive a Thompson-sampling
//! agent through a seeded unit sequence; and sweep the full experiment grid
//! (state mode × reward kind × agent × seed) deterministically.
//!
//! Modules:
//!
//! - [`num`], [`rng`], [`types`]: scalar abstraction, labelled deterministic
//!   random streams, shared identifiers.
//! - [`ingest`]: cohort parsing, score normalization, percentiles, synthetic
//!   cohorts, and a PCA fallback reducer.
//! - [`rewards`]: the three reward metrics, optimal actions, regret.
//! - [`guidelines`]: protocol-rule DSL, recommendation features, and the
//!   rule-based reference assignment.
//! - [`agents`]: uniform/guideline/oracle baselines, Bayesian linear
//!   Thompson sampling, and the neural posterior-approximation family.
//! - [`runner`]: context assembly, the sequential assignment loop, the
//!   experiment grid, and report emission.
//!
//! The numeric core is generic over [`num::Scalar`] (`f32` or `f64`);
//! everything defaults to `f64` via the aliases below.

pub mod agents;
pub mod guidelines;
pub mod ingest;
pub mod num;
pub mod rewards;
pub mod rng;
pub mod runner;
pub mod types;

pub use ingest::{percentile_of, normalize_scores, Dataset};
pub use num::Scalar;
pub use rewards::{compute_reward, instant_regret, optimal_action, RewardKind, RewardValue};
pub use rng::{derive_stream, RngSeed, RngStream};
pub use types::{Context, ContextMode, DrugId, UnitId};

/// Canonical scalar type for the benchmark.
pub type Real = f64;

/// `f32` instantiations of the core generic types.
pub type DatasetF32 = ingest::Dataset<f32>;
pub type ContextF32 = types::Context<f32>;
pub type RewardValueF32 = rewards::RewardValue<f32>;
