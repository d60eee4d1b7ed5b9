//! Learnable synthetic-minority oversampling.
//!
//! The crate bundles everything an imbalanced-classification experiment
//! needs: CSV ingestion and stratified splitting ([`dataset`]), a small
//! reverse-mode differentiation substrate ([`gradcore`]), class-conditional
//! nearest neighbors ([`neighbors`]), the six synthetic-sample aggregators
//! ([`aggregators`]), classical oversamplers ([`oversample`]), the MLP
//! classifier ([`classifier`]), Gumbel-Softmax decision sampling
//! ([`gumbel`]), the learnable oversampler itself ([`autosmote`]) and
//! evaluation metrics ([`metrics`]).

pub mod aggregators;
pub mod autosmote;
pub mod checkpoint;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod gradcore;
pub mod gumbel;
pub mod metrics;
pub mod neighbors;
pub mod oversample;

pub use aggregators::AggregatorKind;
pub use autosmote::{Ablation, AutoSmote, AutoSmoteConfig, Criterion, MlpOversampler, Variant};
pub use classifier::{MlpClassifier, TrainConfig};
pub use dataset::{Dataset, NormStats, SplitPair};
pub use error::{Error, Result};
pub use gradcore::{Adam, Matrix, Param, Parameters, Tape, Var};
pub use metrics::MetricsReport;
pub use neighbors::NeighborIndex;
pub use oversample::OversamplePlan;
