use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Front-end configuration. Defaults give 80 bands over 25 ms Hann windows
/// with a 10 ms hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatConfig {
    pub n_mels: usize,
    pub window_ms: f64,
    pub hop_ms: f64,
    /// `None` selects the next power of two at or above the window length.
    pub fft_size: Option<usize>,
    pub fmin_hz: f64,
    /// `None` selects the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    pub log_floor: f64,
    /// Per-band mean/variance normalisation over time.
    pub normalize: bool,
}

impl Default for FeatConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            window_ms: 25.0,
            hop_ms: 10.0,
            fft_size: None,
            fmin_hz: 0.0,
            fmax_hz: None,
            log_floor: 1e-10,
            normalize: false,
        }
    }
}

impl FeatConfig {
    pub fn window_samples(&self, sr: u32) -> usize {
        (self.window_ms * f64::from(sr) / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sr: u32) -> usize {
        (self.hop_ms * f64::from(sr) / 1000.0).round() as usize
    }

    pub fn resolved_fft_size(&self, sr: u32) -> usize {
        self.fft_size
            .unwrap_or_else(|| self.window_samples(sr).next_power_of_two())
    }

    pub fn resolved_fmax(&self, sr: u32) -> f64 {
        self.fmax_hz.unwrap_or(f64::from(sr) / 2.0)
    }

    pub fn validate(&self, sr: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if sr == 0 {
            return bad("sample rate must be positive".into());
        }
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        if !(self.hop_ms > 0.0 && self.window_ms >= self.hop_ms) {
            return bad(format!(
                "need window_ms >= hop_ms > 0, got {} / {}",
                self.window_ms, self.hop_ms
            ));
        }
        let (win, hop) = (self.window_samples(sr), self.hop_samples(sr));
        if win == 0 || hop == 0 {
            return bad(format!("window or hop rounds to zero samples at {sr} Hz"));
        }
        if self.resolved_fft_size(sr) < win {
            return bad(format!(
                "fft_size {} is shorter than the {win}-sample window",
                self.resolved_fft_size(sr)
            ));
        }
        let fmax = self.resolved_fmax(sr);
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < fmax && fmax <= f64::from(sr) / 2.0) {
            return bad(format!(
                "need 0 <= fmin < fmax <= {}, got {} / {fmax}",
                f64::from(sr) / 2.0,
                self.fmin_hz
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad(format!("log_floor must be positive, got {}", self.log_floor));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Number of full analysis frames in `n_samples`.
pub fn frame_count(n_samples: usize, cfg: &FeatConfig, sr: u32) -> Result<usize> {
    cfg.validate(sr)?;
    let (win, hop) = (cfg.window_samples(sr), cfg.hop_samples(sr));
    if n_samples < win {
        return Err(Error::TooShort(format!(
            "{n_samples} samples is shorter than one {win}-sample window"
        )));
    }
    Ok((n_samples - win) / hop + 1)
}

/// A prepared log-mel analyser for one sample rate.
pub struct LogMel {
    cfg: FeatConfig,
    sample_rate: u32,
    win: usize,
    hop: usize,
    n_fft: usize,
    window: Vec<f64>,
    /// `n_mels x (n_fft/2 + 1)`
    filters: Matrix,
    band_centers_hz: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for LogMel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogMel")
            .field("cfg", &self.cfg)
            .field("sample_rate", &self.sample_rate)
            .field("n_fft", &self.n_fft)
            .finish_non_exhaustive()
    }
}

impl LogMel {
    pub fn new(cfg: &FeatConfig, sample_rate: u32) -> Result<Self> {
        cfg.validate(sample_rate)?;
        let win = cfg.window_samples(sample_rate);
        let hop = cfg.hop_samples(sample_rate);
        let n_fft = cfg.resolved_fft_size(sample_rate);
        // periodic Hann
        let window = (0..win)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / win as f64).cos())
            .collect();
        let (filters, band_centers_hz) = mel_filters(cfg, sample_rate, n_fft)?;
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Ok(Self {
            cfg: cfg.clone(),
            sample_rate,
            win,
            hop,
            n_fft,
            window,
            filters,
            band_centers_hz,
            fft,
        })
    }

    pub fn filters(&self) -> &Matrix {
        &self.filters
    }

    /// Peak frequency of each triangular filter.
    pub fn band_centers_hz(&self) -> &[f64] {
        &self.band_centers_hz
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// `frame_count x n_mels` log-mel energies.
    pub fn compute(&self, samples: &[f64]) -> Result<Matrix> {
        if !samples.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("audio samples"));
        }
        let n_frames = frame_count(samples.len(), &self.cfg, self.sample_rate)?;
        let n_bins = self.n_fft / 2 + 1;
        let ln_floor = self.cfg.log_floor.ln();
        let mut out = Matrix::zeros(n_frames, self.cfg.n_mels);
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        let mut power = vec![0.0; n_bins];
        for t in 0..n_frames {
            let frame = &samples[t * self.hop..t * self.hop + self.win];
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for ((c, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                c.re = x * w;
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (m, o) in out.row_mut(t).iter_mut().enumerate() {
                let energy: f64 = self
                    .filters
                    .row(m)
                    .iter()
                    .zip(&power)
                    .fold(0.0, |acc, (w, p)| acc + w * p);
                *o = if energy > self.cfg.log_floor {
                    energy.ln()
                } else {
                    ln_floor
                };
            }
        }
        if self.cfg.normalize {
            normalize_bands(&mut out);
        }
        Ok(out)
    }
}

/// Convenience wrapper building a [`LogMel`] for a single call.
pub fn logmel(samples: &[f64], cfg: &FeatConfig, sr: u32) -> Result<Matrix> {
    LogMel::new(cfg, sr)?.compute(samples)
}

fn mel_filters(cfg: &FeatConfig, sr: u32, n_fft: usize) -> Result<(Matrix, Vec<f64>)> {
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(cfg.resolved_fmax(sr));
    let step = (mel_hi - mel_lo) / (cfg.n_mels + 1) as f64;
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();
    let bin_hz = f64::from(sr) / n_fft as f64;
    let filters = Matrix::from_fn(cfg.n_mels, n_bins, |m, k| {
        let f = k as f64 * bin_hz;
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let up = (f - lo) / (mid - lo);
        let down = (hi - f) / (hi - mid);
        up.min(down).max(0.0)
    });
    if let Some(m) = (0..cfg.n_mels).find(|&m| filters.row(m).iter().all(|&w| w == 0.0)) {
        return Err(Error::Config(format!(
            "mel band {m} covers no FFT bin; lower n_mels or raise fft_size"
        )));
    }
    Ok((filters, edges[1..=cfg.n_mels].to_vec()))
}

fn normalize_bands(m: &mut Matrix) {
    let (rows, cols) = m.shape();
    for j in 0..cols {
        let mean = (0..rows).map(|i| m[(i, j)]).sum::<f64>() / rows as f64;
        let var = (0..rows).map(|i| (m[(i, j)] - mean).powi(2)).sum::<f64>() / rows as f64;
        let sd = var.sqrt();
        for i in 0..rows {
            let centred = m[(i, j)] - mean;
            m[(i, j)] = if sd > 0.0 { centred / sd } else { centred };
        }
    }
}
