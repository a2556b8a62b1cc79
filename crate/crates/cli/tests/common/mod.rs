//! Synthetic binaural trials for pipeline tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

pub const SAMPLE_RATE: u32 = 16_000;
/// Noise levels of the smoke dataset, cleanest first. `None` is no noise.
pub const SNRS_DB: [Option<f64>; 6] = [None, Some(30.0), Some(20.0), Some(10.0), Some(0.0), Some(-10.0)];

/// Voiced-speech stand-in: a few harmonics of a gliding fundamental under a
/// syllable-rate envelope.
pub fn harmonic_signal(index: usize, seconds: f64) -> Vec<f64> {
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    let f0 = 110.0 + 17.0 * index as f64;
    let rate = 3.0 + 0.4 * index as f64;
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            let f = f0 * (1.0 + 0.08 * (2.0 * std::f64::consts::PI * 0.7 * t).sin());
            phase += 2.0 * std::f64::consts::PI * f / SAMPLE_RATE as f64;
            let env = 0.55 + 0.45 * (2.0 * std::f64::consts::PI * rate * t).sin();
            let voiced: f64 = (1..=8).map(|h| (h as f64 * phase).sin() / h as f64).sum();
            0.2 * env * voiced
        })
        .collect()
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds white Gaussian noise at the given SNR relative to the signal power.
pub fn add_noise(x: &[f64], snr_db: Option<f64>, seed: u64) -> Vec<f64> {
    let Some(snr) = snr_db else {
        return x.to_vec();
    };
    let sigma = (power(x) / 10f64.powf(snr / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    x.iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn write_stereo(path: &Path, left: &[f64], right: &[f64]) {
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for (l, r) in left.iter().zip(right) {
        w.write_sample(*l as f32).unwrap();
        w.write_sample(*r as f32).unwrap();
    }
    w.finalize().unwrap();
}

/// Right ear: the left signal delayed a little and attenuated.
pub fn binaural(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let delay = 8;
    let right = (0..x.len()).map(|i| if i >= delay { 0.8 * x[i - delay] } else { 0.0 }).collect();
    (x.to_vec(), right)
}

#[derive(Debug, Clone)]
pub struct SmokeTrial {
    pub signal_id: String,
    pub source: usize,
    pub snr_index: usize,
}

/// Writes 10 clean sources and a noisy copy of each at every level in
/// [`SNRS_DB`], plus a manifest with one listener per processed signal.
/// Correctness falls with noise; dev and eval alternate by source.
pub fn smoke_dataset(dir: &Path, seconds: f64) -> (PathBuf, Vec<SmokeTrial>) {
    let mut entries = Vec::new();
    let mut trials = Vec::new();
    for source in 0..10 {
        let clean = harmonic_signal(source, seconds);
        let (l, r) = binaural(&clean);
        let ref_rel = format!("ref/src{source:02}.wav");
        write_stereo(&dir.join(&ref_rel), &l, &r);
        for (k, snr) in SNRS_DB.iter().enumerate() {
            let seed = 1000 + 10 * source as u64 + k as u64;
            let pl = add_noise(&l, *snr, seed);
            let pr = add_noise(&r, *snr, seed + 500);
            let proc_rel = format!("proc/src{source:02}_snr{k}.wav");
            write_stereo(&dir.join(&proc_rel), &pl, &pr);
            let signal_id = format!("S{source:02}_{k}");
            let correctness = (1.0 - 0.17 * k as f64 - 0.01 * source as f64).clamp(0.0, 1.0);
            entries.push(json!({
                "signal_id": signal_id,
                "listener_id": format!("L{}", source % 3),
                "system_id": format!("E{k}"),
                "correctness": correctness,
                "ref_left": ref_rel, "ref_right": ref_rel,
                "proc_left": proc_rel, "proc_right": proc_rel,
                "split": if source % 2 == 0 { "dev" } else { "eval" },
            }));
            trials.push(SmokeTrial {
                signal_id,
                source,
                snr_index: k,
            });
        }
    }
    let manifest = dir.join("manifest.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(&entries).unwrap()).unwrap();
    (manifest, trials)
}

/// File contents with `# generated_at` lines and `"generated_at"` fields
/// removed.
pub fn without_timestamps(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# generated_at") && !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}
