use std::path::Path;

use hound::{SampleFormat, WavReader};

use crate::error::{Error, Result};

/// A two-channel signal. Mono sources are duplicated into both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSignal {
    left: Vec<f64>,
    right: Vec<f64>,
    sample_rate_hz: u32,
}

impl StereoSignal {
    pub fn new(left: Vec<f64>, right: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::Shape(format!(
                "channel lengths differ: {} vs {}",
                left.len(),
                right.len()
            )));
        }
        if sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if !left.iter().chain(&right).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("audio samples"));
        }
        Ok(Self {
            left,
            right,
            sample_rate_hz,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        Self::new(samples.clone(), samples, sample_rate_hz)
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }
}

/// Reads a 16-bit PCM or 32-bit float WAV file with one or two channels.
///
/// Integer samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<StereoSignal> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedAudio(format!(
            "{} channels in {}",
            spec.channels,
            path.display()
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedAudio(format!(
                "{bits}-bit {fmt:?} in {}",
                path.display()
            )))
        }
    };
    if interleaved.is_empty() {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    let signal = if spec.channels == 1 {
        StereoSignal::mono(interleaved, spec.sample_rate)?
    } else {
        let left = interleaved.iter().step_by(2).copied().collect();
        let right = interleaved.iter().skip(1).step_by(2).copied().collect();
        StereoSignal::new(left, right, spec.sample_rate)?
    };
    Ok(signal)
}
