//! Representation sequences, their on-disk format, and the trial manifest.

mod hrep;
mod manifest;
mod rep;

pub use hrep::{decode_reps, encode_reps, read_reps, write_reps, HREP_MAGIC, HREP_VERSION};
pub use manifest::{load_manifest, parse_manifest, LoadOptions, Manifest, ManifestIssue, Split, TrialRecord};
pub use rep::{BinauralRep, Channel, Level, RepSequence};
