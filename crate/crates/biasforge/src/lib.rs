//! biasforge: a bias-injection sandbox and fairness audit toolkit for
//! tabular binary classification.
//!
//! The pipeline runs in five stages, each usable on its own:
//!
//! 1. [`synth`] generates a rare-positive synthetic base table.
//! 2. [`inject`] appends a synthetic protected attribute (and optional
//!    separability features), or flips training labels, so the data
//!    provably satisfies a declared bias scenario.
//! 3. [`audit`] decides from data alone which bias conditions hold.
//! 4. [`learn`] trains fairness-blind classifiers (logistic regression,
//!    CART, random forest, gradient-boosted trees) with an awareness toggle.
//! 5. [`eval`] thresholds scores at a fixed global false-positive rate and
//!    reports group error-rate ratios, their decomposition, and 80%-rule
//!    flags.
//!
//! [`runner`] orchestrates the full grid (scenarios x replicates x models x
//! awareness) behind a single config, writing CSV reports and manifests.

pub mod audit;
pub mod data;
pub mod error;
pub mod eval;
pub mod inject;
pub mod learn;
pub mod par;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod synth;

pub use data::{load_csv, write_csv, DatasetSchema, Group, TabularDataset};
pub use error::{Error, Result};
pub use inject::{apply_scenario, BiasScenario, InjectionManifest, ScenarioKind, SeparabilityScheme};
pub use runner::{run_experiment, ExperimentConfig};
pub use synth::{gen_base_dataset, BaseConfig};
