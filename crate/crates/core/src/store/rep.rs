use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Input,
    Pre,
    Enc,
    Dec,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Input, Level::Pre, Level::Enc, Level::Dec];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code)).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Input => "input",
            Level::Pre => "pre",
            Level::Enc => "enc",
            Level::Dec => "dec",
        }
    }

    /// Decoder sequences are compared by warping; the rest frame by frame.
    pub fn is_warped(self) -> bool {
        self == Level::Dec
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown level {s:?} (expected input, pre, enc or dec)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Left,
    Right,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Left, Channel::Right];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::BOTH.get(usize::from(code)).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Left => "left",
            Channel::Right => "right",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A `T x d` sequence of hidden representations for one channel of one
/// signal at one level. Values are stored as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepSequence {
    level: Level,
    channel: Channel,
    signal_id: String,
    frames: usize,
    dim: usize,
    data: Vec<f32>,
}

impl RepSequence {
    pub fn new(
        level: Level,
        channel: Channel,
        signal_id: impl Into<String>,
        frames: usize,
        dim: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::Shape(format!("representation must be non-empty, got {frames}x{dim}")));
        }
        if data.len() != frames * dim {
            return Err(Error::Shape(format!(
                "{} values for a {frames}x{dim} representation",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("representation values"));
        }
        let signal_id = signal_id.into();
        if signal_id.len() > usize::from(u16::MAX) {
            return Err(Error::Config("signal id longer than 65535 bytes".into()));
        }
        Ok(Self {
            level,
            channel,
            signal_id,
            frames,
            dim,
            data,
        })
    }

    /// Rounds each `f64` to `f32`.
    pub fn from_matrix(level: Level, channel: Channel, signal_id: impl Into<String>, m: &Matrix) -> Result<Self> {
        let data = m.as_slice().iter().map(|&v| v as f32).collect();
        Self::new(level, channel, signal_id, m.rows(), m.cols(), data)
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.frames, self.dim, |i, j| f64::from(self.data[i * self.dim + j]))
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn signal_id(&self) -> &str {
        &self.signal_id
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frame_iter(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// First `n` frames.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.frames).max(1);
        Self {
            frames: n,
            data: self.data[..n * self.dim].to_vec(),
            ..self.clone()
        }
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }
}

/// Left and right sequences of one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct BinauralRep {
    left: RepSequence,
    right: RepSequence,
}

impl BinauralRep {
    pub fn new(left: RepSequence, right: RepSequence) -> Result<Self> {
        if left.level != right.level {
            return Err(Error::Shape(format!(
                "left is {} level, right is {}",
                left.level, right.level
            )));
        }
        if left.signal_id != right.signal_id {
            return Err(Error::Shape(format!(
                "left belongs to {:?}, right to {:?}",
                left.signal_id, right.signal_id
            )));
        }
        if left.dim != right.dim {
            return Err(Error::Shape(format!("channel widths differ: {} vs {}", left.dim, right.dim)));
        }
        if !left.level.is_warped() && left.frames != right.frames {
            return Err(Error::Shape(format!(
                "{} level channels must have equal length, got {} and {}",
                left.level, left.frames, right.frames
            )));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &RepSequence {
        &self.left
    }

    pub fn right(&self) -> &RepSequence {
        &self.right
    }

    pub fn channel(&self, c: Channel) -> &RepSequence {
        match c {
            Channel::Left => &self.left,
            Channel::Right => &self.right,
        }
    }

    pub fn level(&self) -> Level {
        self.left.level
    }

    pub fn signal_id(&self) -> &str {
        &self.left.signal_id
    }

    /// Left and right exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            left: self.right.clone().with_channel(Channel::Left),
            right: self.left.clone().with_channel(Channel::Right),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(level: Level, channel: Channel, frames: usize, dim: usize) -> RepSequence {
        RepSequence::new(level, channel, "s1", frames, dim, vec![0.5; frames * dim]).unwrap()
    }

    #[test]
    fn construction_rules() {
        assert!(RepSequence::new(Level::Enc, Channel::Left, "x", 0, 3, vec![]).is_err());
        assert!(RepSequence::new(Level::Enc, Channel::Left, "x", 2, 3, vec![0.0; 5]).is_err());
        assert!(RepSequence::new(Level::Enc, Channel::Left, "x", 1, 2, vec![0.0, f32::NAN]).is_err());
    }

    #[test]
    fn binaural_length_rules() {
        assert!(BinauralRep::new(seq(Level::Enc, Channel::Left, 3, 2), seq(Level::Enc, Channel::Right, 4, 2)).is_err());
        assert!(BinauralRep::new(seq(Level::Dec, Channel::Left, 3, 2), seq(Level::Dec, Channel::Right, 4, 2)).is_ok());
        assert!(BinauralRep::new(seq(Level::Dec, Channel::Left, 3, 2), seq(Level::Dec, Channel::Right, 3, 5)).is_err());
        assert!(BinauralRep::new(seq(Level::Pre, Channel::Left, 3, 2), seq(Level::Enc, Channel::Right, 3, 2)).is_err());
    }

    #[test]
    fn level_names_round_trip() {
        for l in Level::ALL {
            assert_eq!(l.as_str().parse::<Level>().unwrap(), l);
            assert_eq!(Level::from_code(l.code()), Some(l));
        }
        assert!("mid".parse::<Level>().is_err());
        assert_eq!(Level::from_code(4), None);
    }
}
