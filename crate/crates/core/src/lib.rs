//! Speech intelligibility prediction from the similarity of hidden
//! representations of reference and processed binaural signals.
//!
//! The pipeline: log-mel features ([`feats`]), a forward-only toy recogniser
//! exposing three representation levels ([`asr`]), a binary store for those
//! sequences plus the trial manifest ([`store`]), framewise and warped
//! similarity ([`sim`]), and logistic calibration with agreement metrics
//! ([`calib`]).

pub mod asr;
pub mod calib;
pub mod error;
pub mod feats;
pub mod linalg;
pub mod sim;
pub mod store;

pub use calib::{EvalReport, Grouping, LogisticParams, PredictionRecord};
pub use error::{Error, Result};
pub use feats::{FeatConfig, StereoSignal};
pub use linalg::Matrix;
pub use sim::SimilarityScore;
pub use store::{BinauralRep, Channel, Level, Manifest, RepSequence, Split, TrialRecord};
