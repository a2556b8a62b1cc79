//! Trial manifest: a JSON array of objects
//!
//! ```json
//! [{"signal_id": "S001", "listener_id": "L01", "system_id": "E003",
//!   "correctness": 0.8, "ref_left": "ref/S001.wav", "ref_right": "ref/S001.wav",
//!   "proc_left": "proc/S001.wav", "proc_right": "proc/S001.wav", "split": "dev"}]
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "eval" => Ok(Split::Eval),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

/// One listener's response to one processed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub signal_id: String,
    pub listener_id: String,
    pub system_id: String,
    /// Word correctness in `[0, 1]`.
    pub correctness: f64,
    pub ref_left: PathBuf,
    pub ref_right: PathBuf,
    pub proc_left: PathBuf,
    pub proc_right: PathBuf,
    pub split: Split,
}

impl TrialRecord {
    pub fn paths(&self) -> [&Path; 4] {
        [&self.ref_left, &self.ref_right, &self.proc_left, &self.proc_right]
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrial {
    signal_id: String,
    listener_id: String,
    system_id: String,
    correctness: f64,
    ref_left: PathBuf,
    ref_right: PathBuf,
    proc_left: PathBuf,
    proc_right: PathBuf,
    split: Split,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Correctness is given on a 0–100 scale.
    pub wcs_percent: bool,
    /// Report missing files instead of failing.
    pub lenient: bool,
    /// Check that every referenced path exists.
    pub check_paths: bool,
}

/// A non-fatal problem found in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestIssue {
    pub index: usize,
    pub signal_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<TrialRecord>,
    pub issues: Vec<ManifestIssue>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Signal ids in first-seen order, each once.
    pub fn signal_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .map(|r| r.signal_id.as_str())
            .filter(|id| seen.insert(*id))
            .collect()
    }

    pub fn flagged(&self, signal_id: &str) -> bool {
        self.issues.iter().any(|i| i.signal_id == signal_id)
    }
}

pub fn parse_manifest(json: &str, base_dir: &Path, opts: LoadOptions) -> Result<Manifest> {
    let raw: Vec<RawTrial> =
        serde_json::from_str(json).map_err(|e| Error::Manifest(format!("schema violation: {e}")))?;
    let mut manifest = Manifest::default();
    let mut seen_pairs = HashSet::new();
    let mut signal_paths: HashMap<String, [PathBuf; 4]> = HashMap::new();
    for (index, r) in raw.into_iter().enumerate() {
        let at = |msg: String| Error::Manifest(format!("trial {index}: {msg}"));
        for (name, v) in [
            ("signal_id", &r.signal_id),
            ("listener_id", &r.listener_id),
            ("system_id", &r.system_id),
        ] {
            if v.trim().is_empty() {
                return Err(at(format!("{name} is empty")));
            }
        }
        let correctness = if opts.wcs_percent {
            r.correctness / 100.0
        } else {
            r.correctness
        };
        if !(0.0..=1.0).contains(&correctness) {
            return Err(at(format!("correctness {} outside [0, 1]", r.correctness)));
        }
        if !seen_pairs.insert((r.signal_id.clone(), r.listener_id.clone())) {
            return Err(at(format!(
                "duplicate (signal_id, listener_id) = ({}, {})",
                r.signal_id, r.listener_id
            )));
        }
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let paths = [
            resolve(r.ref_left),
            resolve(r.ref_right),
            resolve(r.proc_left),
            resolve(r.proc_right),
        ];
        match signal_paths.get(&r.signal_id) {
            Some(prev) if *prev != paths => {
                return Err(at(format!(
                    "signal {} refers to different audio than an earlier trial",
                    r.signal_id
                )))
            }
            Some(_) => {}
            None => {
                signal_paths.insert(r.signal_id.clone(), paths.clone());
            }
        }
        if opts.check_paths {
            for p in paths.iter().filter(|p| !p.exists()) {
                let message = format!("missing file {}", p.display());
                if !opts.lenient {
                    return Err(at(message));
                }
                manifest.issues.push(ManifestIssue {
                    index,
                    signal_id: r.signal_id.clone(),
                    message,
                });
            }
        }
        let [ref_left, ref_right, proc_left, proc_right] = paths;
        manifest.records.push(TrialRecord {
            signal_id: r.signal_id,
            listener_id: r.listener_id,
            system_id: r.system_id,
            correctness,
            ref_left,
            ref_right,
            proc_left,
            proc_right,
            split: r.split,
        });
    }
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(signal: &str, listener: &str, correctness: f64, split: &str) -> String {
        format!(
            r#"{{"signal_id":"{signal}","listener_id":"{listener}","system_id":"E01","correctness":{correctness},
               "ref_left":"r/{signal}.wav","ref_right":"r/{signal}.wav","proc_left":"p/{signal}.wav",
               "proc_right":"p/{signal}.wav","split":"{split}"}}"#
        )
    }

    fn parse(json: &str, opts: LoadOptions) -> Result<Manifest> {
        parse_manifest(json, Path::new("/data"), opts)
    }

    #[test]
    fn empty_list() {
        assert!(parse("[]", LoadOptions::default()).unwrap().records.is_empty());
    }

    #[test]
    fn out_of_range_correctness() {
        let json = format!("[{}]", trial("S1", "L1", 1.5, "dev"));
        assert!(matches!(parse(&json, LoadOptions::default()), Err(Error::Manifest(_))));
    }

    #[test]
    fn percent_scale() {
        let json = format!("[{}]", trial("S1", "L1", 80.0, "dev"));
        let opts = LoadOptions {
            wcs_percent: true,
            ..LoadOptions::default()
        };
        let m = parse(&json, opts).unwrap();
        assert_eq!(m.records[0].correctness, 0.8);
        assert!(parse(&json, LoadOptions::default()).is_err());
    }

    #[test]
    fn duplicates_rejected_and_order_preserved() {
        let json = format!("[{},{}]", trial("S1", "L1", 0.5, "dev"), trial("S1", "L1", 0.4, "eval"));
        assert!(parse(&json, LoadOptions::default()).is_err());
        let json = format!(
            "[{},{},{}]",
            trial("S2", "L1", 0.5, "train"),
            trial("S1", "L2", 0.4, "eval"),
            trial("S1", "L1", 0.1, "dev")
        );
        let m = parse(&json, LoadOptions::default()).unwrap();
        let ids: Vec<_> = m.records.iter().map(|r| (r.signal_id.as_str(), r.listener_id.as_str())).collect();
        assert_eq!(ids, [("S2", "L1"), ("S1", "L2"), ("S1", "L1")]);
        assert_eq!(m.signal_ids(), ["S2", "S1"]);
        assert_eq!(m.records[0].ref_left, Path::new("/data/r/S2.wav"));
        assert_eq!(parse(&json, LoadOptions::default()).unwrap(), m);
    }

    #[test]
    fn schema_violations() {
        assert!(parse("{}", LoadOptions::default()).is_err());
        assert!(parse(r#"[{"signal_id":"S"}]"#, LoadOptions::default()).is_err());
        let bad_split = trial("S1", "L1", 0.5, "test");
        assert!(parse(&format!("[{bad_split}]"), LoadOptions::default()).is_err());
        let empty_id = trial("", "L1", 0.5, "dev");
        assert!(parse(&format!("[{empty_id}]"), LoadOptions::default()).is_err());
    }

    #[test]
    fn conflicting_audio_for_one_signal() {
        let a = trial("S1", "L1", 0.5, "dev");
        let b = trial("S1", "L2", 0.5, "dev").replace("p/S1.wav", "p/other.wav");
        assert!(parse(&format!("[{a},{b}]"), LoadOptions::default()).is_err());
    }

    #[test]
    fn missing_files_strict_vs_lenient() {
        let json = format!("[{}]", trial("S1", "L1", 0.5, "dev"));
        let strict = LoadOptions {
            check_paths: true,
            ..LoadOptions::default()
        };
        assert!(parse(&json, strict).is_err());
        let lenient = LoadOptions {
            check_paths: true,
            lenient: true,
            ..LoadOptions::default()
        };
        let m = parse(&json, lenient).unwrap();
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.issues.len(), 4);
        assert!(m.flagged("S1"));
    }
}
