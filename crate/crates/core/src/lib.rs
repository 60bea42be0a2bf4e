//! Ensemble classifiers for detecting incipient anomalies.
//!
//! The crate covers the full pipeline: synthetic severity-spectrum data
//! ([`data`]), bagged decision trees and small networks ([`learners`],
//! [`ensemble`]), per-example uncertainty scores over the ensemble's
//! prediction matrix ([`uncertainty`]), FPR-percentile threshold
//! calibration and uncertain-negative triage ([`decision`]), evaluation
//! ([`eval`]), a numerical check of the Beta output model ([`theory`]) and
//! the sweep harness used by the command-line tool ([`experiment`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod decision;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod learners;
pub mod rng;
pub mod theory;
pub mod uncertainty;

pub use data::{Dataset, GeneratorConfig, LabeledExample, LabelingPolicy, SplitSpec, Standardizer};
pub use decision::DecisionPolicy;
pub use ensemble::{Combination, EnsembleModel, PredictionMatrix};
pub use error::{Error, Result};
pub use eval::MetricsReport;
pub use learners::{BaseModel, LearnerSpec, NetParams, TreeParams};
pub use theory::{BetaPair, BetaParams, MisrankEstimate};
pub use uncertainty::{Metric, UncertaintyScores};
