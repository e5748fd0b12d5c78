//! Next-term grade prediction with matrix factorization and temporal
//! course-wise influence.
//!
//! A student's grade in a course is modelled as the similarity of their
//! latent "knowledge" vectors plus a decayed, influence-weighted average of
//! the grades they earned in the previous two terms. The influence matrix is
//! non-negative, sparse and low rank, and is fitted with ADMM.
//!
//! Module map:
//!
//! * [`scale`] and [`data`]: letter grades, records, term splits and grade matrices.
//! * [`synthetic`]: planted-parameter data for verification.
//! * [`baseline`]: MF, MF0 and NMF.
//! * [`mftci`]: the influence model and its solver.
//! * [`eval`]: RMSE, MAE and tick accuracy.
//! * [`influence`]: top influence edges and graph export.
//! * [`experiment`]: holdout runs and grid search.
//! * [`cli`]: the `gradecast` command line.

pub mod baseline;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod influence;
pub mod mftci;
pub mod predictor;
pub mod scale;
mod sgd;
pub mod synthetic;

pub use baseline::{train_baseline, BaselineModel, TrainConfig, Variant};
pub use data::{parse_records, GradeRecord, RecordSet, SparseGradeMatrix};
pub use error::{Error, Result};
pub use eval::{mae, report, rmse, tick_accuracy, MetricsReport, PredictionBatch, PredictionRow};
pub use mftci::{fit, MftciHyper, MftciModel};
pub use predictor::{GradePredictor, Prediction};
pub use scale::LetterScale;
pub use synthetic::{generate_synthetic, GroundTruth, SyntheticConfig};
