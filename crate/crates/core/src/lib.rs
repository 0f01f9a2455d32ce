//! Stochastic online correlated selection laboratory.
//!
//! Building blocks for non-IID online stochastic matching, AdWords, and
//! Display Ads: problem instances and LP relaxations with exact separation,
//! the type-decomposition sampler, the two-way and general rounding
//! algorithms with their convergence-rate curves, exact oracles for small
//! instances, a lossless query-commit simulator, and a reproducible Monte
//! Carlo harness.
//!
//! The usual pipeline: generate or load an instance, solve its LP
//! relaxation, round the fractional solution with a SOCS runner under the
//! harness, and compare the per-agent outcomes against the algorithm's
//! convergence-rate curve.
//!
//! ```
//! use socs_core::harness::{compare_to_rate, monte_carlo, AlgorithmKind,
//!     Benchmark, ExperimentConfig};
//! use socs_core::instance::{generate, GenSpec, ProblemClass};
//! use socs_core::lp::solve_matching_lp;
//!
//! let instance = generate(GenSpec {
//!     class: ProblemClass::Unweighted,
//!     n_types: 3,
//!     n_agents: 3,
//!     horizon: 4,
//!     density: 0.6,
//!     seed: 7,
//! });
//! let (allocation, report) = solve_matching_lp(&instance, 1e-9).unwrap();
//! assert!(report.max_violation <= 1e-9);
//!
//! let config = ExperimentConfig {
//!     kind: AlgorithmKind::GeneralMatching,
//!     trials: 4_000,
//!     seed: 1,
//!     benchmark: Benchmark::Lp,
//! };
//! let summary = monte_carlo(&instance, &allocation, &config).unwrap();
//! assert!(summary.ratio.unwrap() > 0.69);
//!
//! let verdicts = compare_to_rate(&summary, config.kind.rate_kind());
//! assert!(verdicts.all_pass());
//! ```

pub mod adwords;
pub mod allocation;
pub mod decomposition;
pub mod display;
pub mod error;
pub mod harness;
pub mod hindsight;
pub mod instance;
pub mod lp;
pub mod matching;
pub mod numeric;
pub mod oracles;
pub mod querycommit;
pub mod rates;
pub mod rng;
pub mod stats;

pub use error::{Result, SocsError};
