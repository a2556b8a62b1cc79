//! On-disk representation cache.
//!
//! Layout: `<root>/reps/<signal>/<side>_<channel>_<level>.hrep`, plus
//! `<root>/index.json` mapping each file (relative to the root) to the
//! content hash of the inputs and configuration that produced it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hrsim_core::store::{encode_reps, read_reps};
use hrsim_core::{Channel, Level, RepSequence};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Ref,
    Proc,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Ref, Side::Proc];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Ref => "ref",
            Side::Proc => "proc",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// SHA-256 over length-prefixed parts, as lowercase hex.
pub fn content_key(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory name for a signal id. Ids made only of `[A-Za-z0-9._-]` are
/// used verbatim; anything else is replaced and a hash suffix keeps
/// distinct ids apart.
pub fn signal_dir_name(signal_id: &str) -> String {
    let safe = |c: char| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-');
    if !signal_id.is_empty() && signal_id.chars().all(safe) && !signal_id.starts_with('.') {
        return signal_id.to_string();
    }
    let cleaned: String = signal_id.chars().map(|c| if safe(c) { c } else { '_' }).collect();
    format!("{}-{}", cleaned, &content_key(&[signal_id.as_bytes()])[..12])
}

#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    index: BTreeMap<String, String>,
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        let index_path = root.join(INDEX_FILE);
        let index = match std::fs::read(&index_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| CliError::data(index_path.display(), e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(CliError::data(index_path.display(), e)),
        };
        Ok(Self { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn relative(signal_id: &str, side: Side, channel: Channel, level: Level) -> String {
        format!("reps/{}/{}_{}_{}.hrep", signal_dir_name(signal_id), side, channel.as_str(), level)
    }

    pub fn rep_path(&self, signal_id: &str, side: Side, channel: Channel, level: Level) -> PathBuf {
        self.root.join(Self::relative(signal_id, side, channel, level))
    }

    /// The file exists and was produced from inputs hashing to `key`.
    pub fn is_fresh(&self, rel: &str, key: &str) -> bool {
        self.index.get(rel).is_some_and(|k| k == key) && self.root.join(rel).is_file()
    }

    pub fn record(&mut self, rel: String, key: String) {
        self.index.insert(rel, key);
    }

    pub fn read(&self, rel: &str) -> CliResult<RepSequence> {
        Ok(read_reps(self.root.join(rel))?)
    }

    /// Writes through a temporary file so an interrupted run never leaves a
    /// partial representation behind.
    pub fn write(root: &Path, rel: &str, rep: &RepSequence) -> CliResult<()> {
        write_atomic(&root.join(rel), &encode_reps(rep))
    }

    pub fn save(&self) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(&self.index).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.root.join(INDEX_FILE), text.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::data(dir.display(), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::data(tmp.display(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::data(path.display(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_prefix_safe() {
        assert_ne!(content_key(&[b"ab", b"c"]), content_key(&[b"a", b"bc"]));
        assert_eq!(content_key(&[b"x"]).len(), 64);
    }

    #[test]
    fn dir_names() {
        assert_eq!(signal_dir_name("S001_L-2.x"), "S001_L-2.x");
        let a = signal_dir_name("a/b");
        let b = signal_dir_name("a?b");
        assert!(a.starts_with("a_b-") && b.starts_with("a_b-"));
        assert_ne!(a, b);
        assert_ne!(signal_dir_name(".."), "..");
    }

    #[test]
    fn index_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = Cache::open(dir.path()).unwrap();
        let rel = Cache::relative("S1", Side::Proc, Channel::Right, Level::Enc);
        assert_eq!(rel, "reps/S1/proc_right_enc.hrep");
        let rep = RepSequence::new(Level::Enc, Channel::Right, "S1", 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        Cache::write(cache.root(), &rel, &rep).unwrap();
        cache.record(rel.clone(), "k".into());
        cache.save().unwrap();
        let reopened = Cache::open(dir.path()).unwrap();
        assert!(reopened.is_fresh(&rel, "k"));
        assert!(!reopened.is_fresh(&rel, "other"));
        assert_eq!(reopened.read(&rel).unwrap(), rep);
        std::fs::remove_file(dir.path().join(&rel)).unwrap();
        assert!(!reopened.is_fresh(&rel, "k"));
    }
}
