use crate::error::{Error, Result};

/// Sum that does not depend on the order of its inputs: values are sorted
/// before a compensated (Neumaier) accumulation.
pub fn order_free_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_pair(pred: &[f64], truth: &[f64], min_len: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions vs {} targets", pred.len(), truth.len())));
    }
    if pred.len() < min_len {
        return Err(Error::Degenerate(format!("need at least {min_len} values, got {}", pred.len())));
    }
    if !pred.iter().chain(truth).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("metric input"));
    }
    Ok(())
}

/// Root mean square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 1)?;
    let sq = order_free_sum(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)));
    Ok((sq / pred.len() as f64).sqrt())
}

/// Pearson correlation coefficient.
pub fn ncc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let n = pred.len() as f64;
    let mp = order_free_sum(pred.iter().copied()) / n;
    let mt = order_free_sum(truth.iter().copied()) / n;
    let cov = order_free_sum(pred.iter().zip(truth).map(|(p, t)| (p - mp) * (t - mt)));
    let vp = order_free_sum(pred.iter().map(|p| (p - mp) * (p - mp)));
    let vt = order_free_sum(truth.iter().map(|t| (t - mt) * (t - mt)));
    if vp == 0.0 || vt == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((cov / (vp.sqrt() * vt.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KendallVariant {
    /// No tie correction: `(C - D) / (n(n-1)/2)`.
    A,
    /// Tie-corrected.
    #[default]
    B,
}

/// Counts inversions (strictly decreasing pairs) while merge-sorting.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Number of pairs within runs of equal consecutive keys.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall's tau in `O(n log n)`.
pub fn kendall_tau_variant(pred: &[f64], truth: &[f64], variant: KendallVariant) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let n = pred.len() as u64;
    let n0 = n * (n - 1) / 2;
    let mut pairs: Vec<(f64, f64)> = pred.iter().copied().zip(truth.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let ties_pred = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let ties_both = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let discordant = merge_count(&mut ys, &mut buf);
    let ties_truth = tied_pairs(&ys);
    let concordant_plus_discordant = n0 - ties_pred - ties_truth + ties_both;
    let diff = concordant_plus_discordant as i64 - 2 * discordant as i64;
    let denom_sq = match variant {
        KendallVariant::A => n0 * n0,
        KendallVariant::B => (n0 - ties_pred) * (n0 - ties_truth),
    };
    if denom_sq == 0 {
        return Err(Error::Degenerate("every pair is tied".into()));
    }
    Ok(diff as f64 / (denom_sq as f64).sqrt())
}

/// Tie-corrected Kendall's tau (tau-b).
pub fn kendall_tau(pred: &[f64], truth: &[f64]) -> Result<f64> {
    kendall_tau_variant(pred, truth, KendallVariant::B)
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::cmp::Ordering;

    /// Pair-counting reference for tau-b.
    fn tau_b_oracle(x: &[f64], y: &[f64]) -> f64 {
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0u64, 0u64);
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let dx = x[i].partial_cmp(&x[j]).unwrap();
                let dy = y[i].partial_cmp(&y[j]).unwrap();
                match (dx, dy) {
                    (Ordering::Equal, Ordering::Equal) => {}
                    (Ordering::Equal, _) => tx += 1,
                    (_, Ordering::Equal) => ty += 1,
                    (a, b) if a == b => c += 1,
                    _ => d += 1,
                }
            }
        }
        let cd = (c + d) as u64;
        ((c - d) as f64) / (((cd + tx) * (cd + ty)) as f64).sqrt()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.3, 0.9], &[0.3, 0.9]).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn ncc_examples() {
        let t = [0.1, 0.5, 0.2, 0.9];
        assert_abs_diff_eq!(ncc(&t, &t).unwrap(), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(ncc(&neg, &t).unwrap(), -1.0, epsilon = 1e-12);
        // centered sums: cov 3, var_x 2, var_y 14/3
        let expected = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        assert_abs_diff_eq!(ncc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.98198, epsilon = 1e-5);
        assert!(matches!(ncc(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn kendall_examples() {
        let inc = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(kendall_tau(&inc, &inc).unwrap(), 1.0);
        assert_eq!(kendall_tau(&inc, &rev).unwrap(), -1.0);
        let (p, t) = ([1.0, 2.0, 2.0, 3.0], [1.0, 2.0, 3.0, 3.0]);
        assert_eq!(kendall_tau(&p, &t).unwrap(), tau_b_oracle(&p, &t));
        // C = 4, D = 0, one pair tied in each list only
        assert_abs_diff_eq!(kendall_tau(&p, &t).unwrap(), 0.8, epsilon = 1e-15);
        assert!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn tau_a_ignores_tie_correction() {
        let (p, t) = ([1.0, 2.0, 2.0, 3.0], [1.0, 2.0, 3.0, 3.0]);
        assert_abs_diff_eq!(kendall_tau_variant(&p, &t, KendallVariant::A).unwrap(), 4.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn order_free_sum_ignores_order() {
        let v = [1e16, 1.0, -1e16, 3.5, 1e-3, -2.25];
        let mut r = v;
        r.reverse();
        assert_eq!(order_free_sum(v), order_free_sum(r));
        assert_abs_diff_eq!(order_free_sum(v), 2.251, epsilon = 1e-12);
    }
}
