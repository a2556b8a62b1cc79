use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::{kendall_tau, ncc, order_free_sum, rmse};
use crate::error::{Error, Result};

/// One scored trial: listener correctness alongside the raw similarity and
/// its calibrated value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub signal_id: String,
    pub listener_id: String,
    pub system_id: String,
    pub correctness: f64,
    pub raw_score: f64,
    pub mapped_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Trial,
    Listener,
    System,
}

impl Grouping {
    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Trial => "trial",
            Grouping::Listener => "listener",
            Grouping::System => "system",
        }
    }

    fn key(self, r: &PredictionRecord) -> &str {
        match self {
            Grouping::Trial => &r.signal_id,
            Grouping::Listener => &r.listener_id,
            Grouping::System => &r.system_id,
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub id: String,
    pub n: usize,
    pub mean_correctness: f64,
    pub se_correctness: f64,
    pub mean_prediction: f64,
    pub se_prediction: f64,
    pub mean_raw: f64,
}

/// Agreement between predictions and listener scores. `ncc` and `kt` are
/// absent when the points make them undefined (fewer than two, or no
/// variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub grouping: Grouping,
    pub n_trials: usize,
    /// Number of points the metrics were computed over.
    pub n_points: usize,
    pub rmse: f64,
    pub ncc: Option<f64>,
    pub kt: Option<f64>,
    /// Correlations of the uncalibrated similarity scores.
    pub raw_ncc: Option<f64>,
    pub raw_kt: Option<f64>,
    pub groups: Vec<GroupStats>,
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = order_free_sum(v.iter().copied()) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss = order_free_sum(v.iter().map(|x| (x - mean) * (x - mean)));
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn check(records: &[PredictionRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Degenerate("no prediction records".into()));
    }
    if !records
        .iter()
        .all(|r| r.correctness.is_finite() && r.raw_score.is_finite() && r.mapped_score.is_finite())
    {
        return Err(Error::NonFinite("prediction record"));
    }
    Ok(())
}

fn report(grouping: Grouping, n_trials: usize, truth: &[f64], pred: &[f64], raw: &[f64], groups: Vec<GroupStats>) -> Result<EvalReport> {
    Ok(EvalReport {
        grouping,
        n_trials,
        n_points: truth.len(),
        rmse: rmse(pred, truth)?,
        ncc: defined(ncc(pred, truth))?,
        kt: defined(kendall_tau(pred, truth))?,
        raw_ncc: defined(ncc(raw, truth))?,
        raw_kt: defined(kendall_tau(raw, truth))?,
        groups,
    })
}

/// Metrics over group means, with per-group means and standard errors.
/// Groups are listed in id order.
pub fn group_aggregate(records: &[PredictionRecord], by: Grouping) -> Result<EvalReport> {
    check(records)?;
    let mut buckets: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        buckets.entry(by.key(r)).or_default().push(r);
    }
    let mut groups = Vec::with_capacity(buckets.len());
    for (id, rs) in buckets {
        let (mean_correctness, se_correctness) = mean_and_se(&rs.iter().map(|r| r.correctness).collect::<Vec<_>>());
        let (mean_prediction, se_prediction) = mean_and_se(&rs.iter().map(|r| r.mapped_score).collect::<Vec<_>>());
        let (mean_raw, _) = mean_and_se(&rs.iter().map(|r| r.raw_score).collect::<Vec<_>>());
        groups.push(GroupStats {
            id: id.to_string(),
            n: rs.len(),
            mean_correctness,
            se_correctness,
            mean_prediction,
            se_prediction,
            mean_raw,
        });
    }
    let truth: Vec<f64> = groups.iter().map(|g| g.mean_correctness).collect();
    let pred: Vec<f64> = groups.iter().map(|g| g.mean_prediction).collect();
    let raw: Vec<f64> = groups.iter().map(|g| g.mean_raw).collect();
    report(by, records.len(), &truth, &pred, &raw, groups)
}

/// Metrics at the requested granularity. Trial level uses every record as a
/// point and reports no groups.
pub fn evaluate(records: &[PredictionRecord], grouping: Grouping) -> Result<EvalReport> {
    if grouping != Grouping::Trial {
        return group_aggregate(records, grouping);
    }
    check(records)?;
    let truth: Vec<f64> = records.iter().map(|r| r.correctness).collect();
    let pred: Vec<f64> = records.iter().map(|r| r.mapped_score).collect();
    let raw: Vec<f64> = records.iter().map(|r| r.raw_score).collect();
    report(Grouping::Trial, records.len(), &truth, &pred, &raw, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(signal: &str, listener: &str, system: &str, truth: f64, pred: f64) -> PredictionRecord {
        PredictionRecord {
            signal_id: signal.into(),
            listener_id: listener.into(),
            system_id: system.into(),
            correctness: truth,
            raw_score: pred * 2.0,
            mapped_score: pred,
        }
    }

    #[test]
    fn two_groups_hand_example() {
        let rs = vec![
            rec("s1", "L1", "A", 0.2, 0.2),
            rec("s2", "L1", "A", 0.4, 0.4),
            rec("s3", "L2", "B", 0.8, 0.8),
        ];
        let rep = group_aggregate(&rs, Grouping::Listener).unwrap();
        assert_eq!(rep.n_points, 2);
        assert_eq!(rep.n_trials, 3);
        assert_abs_diff_eq!(rep.groups[0].mean_prediction, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.groups[1].mean_prediction, 0.8, epsilon = 1e-15);
        assert_eq!(rep.groups[1].se_prediction, 0.0);
        // sample sd of {0.2, 0.4} is sqrt(0.02), divided by sqrt(2)
        assert_abs_diff_eq!(rep.groups[0].se_prediction, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.rmse, 0.0, epsilon = 1e-15);

        let shifted: Vec<_> = rs.iter().map(|r| PredictionRecord { mapped_score: r.mapped_score + 0.1, ..r.clone() }).collect();
        let rep = group_aggregate(&shifted, Grouping::Listener).unwrap();
        assert_abs_diff_eq!(rep.rmse, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn single_group_mean_is_global_mean() {
        let rs = vec![rec("a", "L", "S", 0.1, 0.3), rec("b", "L", "S", 0.6, 0.5), rec("c", "L", "S", 0.9, 0.4)];
        let rep = group_aggregate(&rs, Grouping::System).unwrap();
        assert_eq!(rep.groups.len(), 1);
        assert_abs_diff_eq!(rep.groups[0].mean_correctness, (0.1 + 0.6 + 0.9) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.groups[0].mean_prediction, 0.4, epsilon = 1e-15);
        assert_eq!(rep.ncc, None);
        assert_eq!(rep.kt, None);
    }

    #[test]
    fn singleton_groups_reproduce_trial_metrics() {
        let rs: Vec<_> = (0..12)
            .map(|i| {
                let t = ((i * 7) % 12) as f64 / 11.0;
                rec(&format!("s{i}"), &format!("L{i:02}"), "S", t, (i as f64 * 0.9).sin().abs())
            })
            .rev()
            .collect();
        let trial = evaluate(&rs, Grouping::Trial).unwrap();
        let grouped = evaluate(&rs, Grouping::Listener).unwrap();
        assert_eq!(trial.rmse, grouped.rmse);
        assert_eq!(trial.ncc, grouped.ncc);
        assert_eq!(trial.kt, grouped.kt);
        assert!(grouped.groups.iter().all(|g| g.se_prediction == 0.0));
    }

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(evaluate(&[], Grouping::Trial).is_err());
        assert!(matches!(
            evaluate(&[rec("a", "L", "S", f64::NAN, 0.2)], Grouping::Trial),
            Err(Error::NonFinite(_))
        ));
    }
}
