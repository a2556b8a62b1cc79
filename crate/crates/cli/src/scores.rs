//! `scores.csv`: one row per trial, preceded by a single timestamp comment.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use hrsim_core::Level;
use serde::{Deserialize, Serialize};

use crate::cache::write_atomic;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub signal_id: String,
    pub listener_id: String,
    pub system_id: String,
    pub level: Level,
    pub raw_score: Option<f64>,
    pub zero_norm_frames: Option<usize>,
    pub error: Option<String>,
}

impl ScoreRow {
    /// The score when the row carries one and it is finite.
    pub fn usable_score(&self) -> Option<f64> {
        self.raw_score.filter(|s| s.is_finite() && self.error.is_none())
    }
}

pub fn timestamp_line(unix_secs: u64) -> String {
    format!("# generated_at_unix={unix_secs}")
}

pub fn encode_scores(rows: &[ScoreRow], unix_secs: u64) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "{}", timestamp_line(unix_secs)).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn write_scores(path: &Path, rows: &[ScoreRow], unix_secs: u64) -> CliResult<()> {
    write_atomic(path, &encode_scores(rows, unix_secs)?)
}

pub fn read_scores(path: &Path) -> CliResult<Vec<ScoreRow>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::data(path.display(), e))?;
    parse_scores(BufReader::new(file)).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_scores(input: impl BufRead) -> CliResult<Vec<ScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    rdr.deserialize()
        .map(|r| r.map_err(|e| CliError::Data(format!("bad score row: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(sig: &str, score: Option<f64>, err: Option<&str>) -> ScoreRow {
        ScoreRow {
            signal_id: sig.into(),
            listener_id: "L1".into(),
            system_id: "E1".into(),
            level: Level::Enc,
            raw_score: score,
            zero_norm_frames: score.map(|_| 3),
            error: err.map(String::from),
        }
    }

    #[test]
    fn round_trip_preserves_bits() {
        let rows = vec![
            row("a", Some(0.1 + 0.2), None),
            row("b,quoted", None, Some("missing representation")),
            row("c", Some(-1e-300), None),
        ];
        let bytes = encode_scores(&rows, 42).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# generated_at_unix=42\nsignal_id,listener_id,system_id,level,raw_score,"));
        let back = parse_scores(bytes.as_slice()).unwrap();
        assert_eq!(back, rows);
        assert_eq!(back[0].raw_score.unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back[1].usable_score(), None);
    }
}
