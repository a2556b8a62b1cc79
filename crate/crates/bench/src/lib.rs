//! Deterministic inputs for the benchmarks.

use hrsim_core::asr::CtcInstance;
use hrsim_core::sim::Frames;
use hrsim_core::Matrix;

/// A smooth, reproducible test tone with a little harmonic content.
pub fn tone(sr: u32, seconds: f64) -> Vec<f64> {
    let n = (f64::from(sr) * seconds) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(sr);
            0.3 * (2.0 * std::f64::consts::PI * 220.0 * t).sin() + 0.1 * (2.0 * std::f64::consts::PI * 660.0 * t).sin()
        })
        .collect()
}

/// `t` frames of width `d`; `salt` decorrelates sequences of the same shape.
pub fn frames(t: usize, d: usize, salt: f64) -> Frames {
    let data = (0..t * d).map(|k| ((k as f64 + 1.0) * (0.37 + salt)).sin().abs() + 0.01).collect();
    Frames::from_rows(d, data).expect("valid frame shape")
}

/// A CTC problem with normalized rows over `vocab` symbols.
pub fn ctc_instance(frames: usize, vocab: usize, labels: usize) -> CtcInstance {
    let logits = Matrix::from_fn(frames, vocab, |i, j| ((i * 13 + j * 7) as f64 * 0.1).sin());
    let mut lp = logits.clone();
    for i in 0..frames {
        let lse = logits.row(i).iter().map(|v| v.exp()).sum::<f64>().ln();
        for v in lp.row_mut(i) {
            *v -= lse;
        }
    }
    let labels = (0..labels).map(|k| 1 + k % (vocab - 1)).collect();
    CtcInstance::new(lp, labels).expect("valid instance")
}

/// Scores and targets with plenty of ties.
pub fn ranked(n: usize) -> (Vec<f64>, Vec<f64>) {
    let x = (0..n).map(|i| ((i * 7919) % 101) as f64).collect();
    let y = (0..n).map(|i| ((i * 104_729) % 11) as f64 / 10.0).collect();
    (x, y)
}
