//! Tests for additive interaction between two exposures in case-control
//! data.
//!
//! The statistics avoid any model for the outcome. Each one compares the
//! exposure distribution among cases with baseline exposure models fitted on
//! controls (or on an inverse-probability-weighted full sample): under no
//! additive interaction, the odds-ratio-reweighted centered product of the
//! exposures has mean zero among cases. Exploiting independence of the two
//! exposures fixes the odds ratio at one and removes a variance term, which
//! is where the power gain comes from.
//!
//! Layout:
//! - [`data`]: datasets, schemas, CSV I/O, summaries.
//! - [`glm`]: weighted maximum-likelihood fits for the nuisance regressions.
//! - [`nuisance`]: exposure models, the exposure odds-ratio parameter and
//!   their stacked influence contributions.
//! - [`interaction`]: per-subject contributions, standardized tests and the
//!   exhaustive-enumeration oracle.
//! - [`variance`]: closed-form, sandwich and bootstrap variance estimates.
//! - [`reri`]: the prospective logistic RERI comparator.
//! - [`simulation`]: case-control generators and Monte Carlo experiments.
//! - [`pipeline`]: one-call test recipes used by the CLI and simulations.

pub mod data;
pub mod error;
pub mod glm;
pub mod interaction;
pub mod nuisance;
pub mod pipeline;
pub mod reri;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod variance;

pub use data::{Dataset, Exposure, ExposureKind, Schema};
pub use error::{Error, Result};
pub use interaction::{GFunction, Method, TestResult, UVector};
pub use nuisance::{ExposureFamily, FitSample, ModelPlan, NuisanceModels};
pub use pipeline::{run_test, TestRecipe, VarianceMethod};
pub use reri::{reri_test, ReriResult};
pub use variance::VarianceDecomposition;
