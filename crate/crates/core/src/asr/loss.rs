//! CTC, sequence-to-sequence and joint loss evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const BLANK: usize = 0;

/// Largest number of frame-label paths [`ctc_brute_force`] will enumerate.
pub const ENUMERATION_BOUND: u128 = 1_000_000;

const ROW_SUM_TOL: f64 = 1e-9;

/// Per-frame log-probabilities and a target label sequence. Blank is index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcInstance {
    log_probs: Matrix,
    labels: Vec<usize>,
}

impl CtcInstance {
    pub fn new(log_probs: Matrix, labels: Vec<usize>) -> Result<Self> {
        let (t, v) = log_probs.shape();
        if t == 0 || v < 2 {
            return Err(Error::Shape(format!("need T >= 1 and V >= 2, got {t}x{v}")));
        }
        if labels.is_empty() {
            return Err(Error::Config("label sequence must be non-empty".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l == BLANK || l >= v) {
            return Err(Error::Config(format!("label {bad} outside [1, {v})")));
        }
        for (i, row) in log_probs.row_iter().enumerate() {
            if row.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
                return Err(Error::NonFinite("CTC log-probabilities"));
            }
            let total: f64 = row.iter().map(|x| x.exp()).sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Distribution(format!("frame {i} sums to {total}")));
            }
        }
        Ok(Self { log_probs, labels })
    }

    pub fn log_probs(&self) -> &Matrix {
        &self.log_probs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn frames(&self) -> usize {
        self.log_probs.rows()
    }

    pub fn vocab(&self) -> usize {
        self.log_probs.cols()
    }

    /// Frames needed by the shortest alignment: one per label plus a blank
    /// between each adjacent repeat.
    pub fn min_frames(&self) -> usize {
        self.labels.len() + self.labels.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Negative log-likelihood of the labels, summed over every alignment that
/// collapses to them. Forward recursion over the blank-expanded label in
/// log space.
pub fn ctc_loss(inst: &CtcInstance) -> Result<f64> {
    let lp = &inst.log_probs;
    let mut ext = Vec::with_capacity(2 * inst.labels.len() + 1);
    ext.push(BLANK);
    for &l in &inst.labels {
        ext.push(l);
        ext.push(BLANK);
    }
    let s_len = ext.len();
    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = lp[(0, ext[0])];
    alpha[1] = lp[(0, ext[1])];
    let mut next = vec![f64::NEG_INFINITY; s_len];
    for t in 1..inst.frames() {
        for s in 0..s_len {
            let mut acc = alpha[s];
            if s >= 1 {
                acc = log_add(acc, alpha[s - 1]);
            }
            if s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2] {
                acc = log_add(acc, alpha[s - 2]);
            }
            next[s] = acc + lp[(t, ext[s])];
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let total = log_add(alpha[s_len - 1], alpha[s_len - 2]);
    if total == f64::NEG_INFINITY {
        return Err(Error::Unreachable(format!(
            "no alignment of {} labels in {} frames has non-zero probability",
            inst.labels.len(),
            inst.frames()
        )));
    }
    Ok((-total).max(0.0))
}

/// Removes repeats, then blanks.
pub fn ctc_collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != BLANK {
            out.push(p);
        }
        prev = Some(p);
    }
    out
}

/// Calls `visit(path, probability)` for every one of the `V^T` frame-label
/// paths.
pub fn for_each_ctc_path(log_probs: &Matrix, mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
    let (t, v) = log_probs.shape();
    let count = (v as u128).checked_pow(t as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_BOUND {
        return Err(Error::EnumerationBound(count));
    }
    let mut path = vec![0usize; t];
    loop {
        let logp: f64 = path.iter().enumerate().map(|(i, &k)| log_probs[(i, k)]).sum();
        visit(&path, logp.exp());
        // odometer increment, last frame fastest
        let mut i = t;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            path[i] += 1;
            if path[i] < v {
                break;
            }
            path[i] = 0;
        }
    }
}

/// Exhaustive-enumeration reference for [`ctc_loss`].
pub fn ctc_brute_force(inst: &CtcInstance) -> Result<f64> {
    let mut total = 0.0;
    for_each_ctc_path(&inst.log_probs, |path, p| {
        if ctc_collapse(path) == inst.labels {
            total += p;
        }
    })?;
    if total == 0.0 {
        return Err(Error::Unreachable(format!(
            "no path over {} frames collapses to the {} labels",
            inst.frames(),
            inst.labels.len()
        )));
    }
    Ok((-total.ln()).max(0.0))
}

fn check_distributions(m: &Matrix, what: &str) -> Result<()> {
    for (u, row) in m.row_iter().enumerate() {
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Distribution(format!("{what} row {u} has an entry outside [0, inf)")));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Distribution(format!("{what} row {u} sums to {total}")));
        }
    }
    Ok(())
}

/// Sum over positions of the divergence from the target distribution to the
/// predicted one, with `0 log 0 = 0`.
pub fn seq2seq_loss(true_dists: &Matrix, pred_dists: &Matrix) -> Result<f64> {
    if true_dists.shape() != pred_dists.shape() {
        return Err(Error::Shape(format!(
            "target {:?} vs prediction {:?}",
            true_dists.shape(),
            pred_dists.shape()
        )));
    }
    check_distributions(true_dists, "target")?;
    check_distributions(pred_dists, "prediction")?;
    let mut total = 0.0;
    for (u, (p_row, q_row)) in true_dists.row_iter().zip(pred_dists.row_iter()).enumerate() {
        for (v, (&p, &q)) in p_row.iter().zip(q_row).enumerate() {
            if p == 0.0 {
                continue;
            }
            if q == 0.0 {
                return Err(Error::Distribution(format!(
                    "prediction has zero mass at position {u}, token {v} where the target does not"
                )));
            }
            total += p * (p.ln() - q.ln());
        }
    }
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLossConfig {
    lambda: f64,
}

impl JointLossConfig {
    pub const TRAINING: Self = Self { lambda: 0.3 };
    pub const DECODING: Self = Self { lambda: 0.4 };

    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `λ·ctc + (1 − λ)·s2s`
pub fn joint_loss(ctc: f64, s2s: f64, cfg: JointLossConfig) -> f64 {
    cfg.lambda * ctc + (1.0 - cfg.lambda) * s2s
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // rounded reference values are kept as published
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(t: usize, v: usize) -> Matrix {
        Matrix::from_fn(t, v, |_, _| (1.0 / v as f64).ln())
    }

    #[test]
    fn single_frame_single_label() {
        let inst = CtcInstance::new(uniform(1, 2), vec![1]).unwrap();
        assert_abs_diff_eq!(ctc_loss(&inst).unwrap(), 0.5f64.ln().abs(), epsilon = 1e-12);
        assert_abs_diff_eq!(ctc_loss(&inst).unwrap(), 0.693147, epsilon = 1e-6);
        assert_abs_diff_eq!(ctc_brute_force(&inst).unwrap(), 0.693147, epsilon = 1e-6);
    }

    #[test]
    fn two_frames_three_paths() {
        // (1,1), (1,0), (0,1) each with probability 1/4
        let inst = CtcInstance::new(uniform(2, 2), vec![1]).unwrap();
        assert_abs_diff_eq!(ctc_loss(&inst).unwrap(), -(0.75f64.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(ctc_loss(&inst).unwrap(), 0.287682, epsilon = 1e-6);
        assert_abs_diff_eq!(ctc_brute_force(&inst).unwrap(), 0.287682, epsilon = 1e-6);
    }

    #[test]
    fn labels_longer_than_frames_are_unreachable() {
        let inst = CtcInstance::new(uniform(2, 3), vec![1, 2, 1]).unwrap();
        assert!(matches!(ctc_loss(&inst), Err(Error::Unreachable(_))));
        assert!(matches!(ctc_brute_force(&inst), Err(Error::Unreachable(_))));
        // a repeat needs a separating blank
        let inst = CtcInstance::new(uniform(2, 2), vec![1, 1]).unwrap();
        assert_eq!(inst.min_frames(), 3);
        assert!(matches!(ctc_loss(&inst), Err(Error::Unreachable(_))));
    }

    #[test]
    fn zero_probability_label_is_unreachable() {
        let lp = Matrix::from_rows(&[[0.0, f64::NEG_INFINITY], [0.0, f64::NEG_INFINITY]]).unwrap();
        let inst = CtcInstance::new(lp, vec![1]).unwrap();
        assert!(matches!(ctc_loss(&inst), Err(Error::Unreachable(_))));
    }

    #[test]
    fn enumeration_bound() {
        let inst = CtcInstance::new(uniform(11, 4), vec![1]).unwrap();
        assert!(matches!(ctc_brute_force(&inst), Err(Error::EnumerationBound(_))));
        assert!(ctc_loss(&inst).is_ok());
    }

    #[test]
    fn instance_validation() {
        assert!(CtcInstance::new(uniform(2, 3), vec![]).is_err());
        assert!(CtcInstance::new(uniform(2, 3), vec![0]).is_err());
        assert!(CtcInstance::new(uniform(2, 3), vec![3]).is_err());
        let bad = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(CtcInstance::new(bad, vec![1]), Err(Error::Distribution(_))));
    }

    #[test]
    fn collapse_rule() {
        assert_eq!(ctc_collapse(&[0, 1, 1, 0, 1, 2, 2, 0]), vec![1, 1, 2]);
        assert_eq!(ctc_collapse(&[0, 0]), Vec::<usize>::new());
    }

    #[test]
    fn seq2seq_examples() {
        let p = Matrix::from_rows(&[[0.2, 0.8], [0.5, 0.5]]).unwrap();
        assert_eq!(seq2seq_loss(&p, &p).unwrap(), 0.0);
        let one_hot = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let half = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(seq2seq_loss(&one_hot, &half).unwrap(), 0.693147, epsilon = 1e-6);
        let pred = Matrix::from_rows(&[[0.9, 0.1]]).unwrap();
        let expected = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert_abs_diff_eq!(seq2seq_loss(&half, &pred).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.510826, epsilon = 1e-6);
    }

    #[test]
    fn seq2seq_support_violation() {
        let t = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        let q = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(matches!(seq2seq_loss(&t, &q), Err(Error::Distribution(_))));
        assert!(seq2seq_loss(&t, &Matrix::from_rows(&[[0.5, 0.6]]).unwrap()).is_err());
    }

    #[test]
    fn joint_loss_weights() {
        let zero = JointLossConfig::new(0.0).unwrap();
        let one = JointLossConfig::new(1.0).unwrap();
        assert_eq!(joint_loss(2.0, 1.0, zero), 1.0);
        assert_eq!(joint_loss(2.0, 1.0, one), 2.0);
        assert_abs_diff_eq!(joint_loss(2.0, 1.0, JointLossConfig::TRAINING), 1.3, epsilon = 1e-12);
        assert_eq!(JointLossConfig::DECODING.lambda(), 0.4);
        assert!(JointLossConfig::new(1.5).is_err());
    }
}
