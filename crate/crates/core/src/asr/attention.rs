//! Scaled dot-product and multi-head attention.

use crate::error::{Error, Result};
use crate::linalg::{dot, vec_matmul, Matrix};

/// Boolean `n x m` attention mask; `true` marks an allowed position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
}

impl Mask {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let allowed = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self {
            rows,
            cols,
            allowed,
        }
    }

    /// Lower-triangular mask: position `i` may attend to every `j <= i`.
    pub fn causal(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| j <= i)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.allowed[i * self.cols..(i + 1) * self.cols]
    }
}

pub fn causal_mask(n: usize) -> Mask {
    Mask::causal(n)
}

/// Softmax weights of one query row over the allowed keys. Masked keys get
/// weight exactly zero.
fn row_weights(q: &[f64], keys: &Matrix, allowed: Option<&[bool]>, row: usize) -> Result<Vec<f64>> {
    let scale = 1.0 / (q.len() as f64).sqrt();
    let ok = |j: usize| allowed.is_none_or(|a| a[j]);
    let mut scores = vec![f64::NEG_INFINITY; keys.rows()];
    let mut max = f64::NEG_INFINITY;
    for (j, s) in scores.iter_mut().enumerate() {
        if ok(j) {
            *s = dot(q, keys.row(j)) * scale;
            max = max.max(*s);
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::FullyMasked(row));
    }
    let mut total = 0.0;
    for (j, s) in scores.iter_mut().enumerate() {
        if ok(j) {
            *s = (*s - max).exp();
            total += *s;
        } else {
            *s = 0.0;
        }
    }
    for (j, s) in scores.iter_mut().enumerate() {
        if ok(j) {
            *s /= total;
        }
    }
    Ok(scores)
}

/// Attention output for one query row. Masked rows of `values` are never
/// read, so changing them cannot affect the result.
fn attend_row(
    q: &[f64],
    keys: &Matrix,
    values: &Matrix,
    allowed: Option<&[bool]>,
    row: usize,
) -> Result<Vec<f64>> {
    let weights = row_weights(q, keys, allowed, row)?;
    let mut out = vec![0.0; values.cols()];
    for (j, &w) in weights.iter().enumerate() {
        if allowed.is_some_and(|a| !a[j]) {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(values.row(j)) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn check_mask(mask: Option<&Mask>, n: usize, m: usize) -> Result<()> {
    match mask {
        Some(mask) if mask.shape() != (n, m) => Err(Error::Shape(format!(
            "mask is {:?}, attention is {n}x{m}",
            mask.shape()
        ))),
        _ => Ok(()),
    }
}

/// Softmax matrix `softmax(Q Kᵀ / √d_k)` with masked entries at zero.
pub fn attention_weights(q: &Matrix, k: &Matrix, mask: Option<&Mask>) -> Result<Matrix> {
    if q.cols() != k.cols() {
        return Err(Error::Shape(format!(
            "query width {} != key width {}",
            q.cols(),
            k.cols()
        )));
    }
    check_mask(mask, q.rows(), k.rows())?;
    let mut out = Matrix::zeros(q.rows(), k.rows());
    for i in 0..q.rows() {
        let w = row_weights(q.row(i), k, mask.map(|m| m.row(i)), i)?;
        out.row_mut(i).copy_from_slice(&w);
    }
    Ok(out)
}

/// `softmax(Q Kᵀ / √d_k) V`, softmax taken with max subtraction.
pub fn scaled_dot_attention(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    mask: Option<&Mask>,
) -> Result<Matrix> {
    if q.cols() != k.cols() || k.rows() != v.rows() {
        return Err(Error::Shape(format!(
            "Q {:?}, K {:?}, V {:?} are incompatible",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    check_mask(mask, q.rows(), k.rows())?;
    if !(q.is_finite() && k.is_finite() && v.is_finite()) {
        return Err(Error::NonFinite("attention inputs"));
    }
    let mut out = Matrix::zeros(q.rows(), v.cols());
    for i in 0..q.rows() {
        let row = attend_row(q.row(i), k, v, mask.map(|m| m.row(i)), i)?;
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok(out)
}

/// Per-head projections plus the output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    n_heads: usize,
    d_model: usize,
    d_k: usize,
    d_v: usize,
    w_q: Vec<Matrix>,
    w_k: Vec<Matrix>,
    w_v: Vec<Matrix>,
    w_o: Matrix,
}

impl AttentionParams {
    pub fn new(w_q: Vec<Matrix>, w_k: Vec<Matrix>, w_v: Vec<Matrix>, w_o: Matrix) -> Result<Self> {
        let n_heads = w_q.len();
        if n_heads == 0 || w_k.len() != n_heads || w_v.len() != n_heads {
            return Err(Error::Shape(format!(
                "need the same positive number of Q/K/V projections, got {}/{}/{}",
                w_q.len(),
                w_k.len(),
                w_v.len()
            )));
        }
        let (d_model, d_k) = w_q[0].shape();
        let d_v = w_v[0].cols();
        for h in 0..n_heads {
            if w_q[h].shape() != (d_model, d_k)
                || w_k[h].shape() != (d_model, d_k)
                || w_v[h].shape() != (d_model, d_v)
            {
                return Err(Error::Shape(format!("head {h} projections disagree")));
            }
        }
        if w_o.shape() != (n_heads * d_v, d_model) {
            return Err(Error::Shape(format!(
                "W_o is {:?}, expected {}x{d_model}",
                w_o.shape(),
                n_heads * d_v
            )));
        }
        let all = w_q.iter().chain(&w_k).chain(&w_v).chain(std::iter::once(&w_o));
        if !all.clone().all(Matrix::is_finite) {
            return Err(Error::NonFinite("attention parameters"));
        }
        Ok(Self {
            n_heads,
            d_model,
            d_k,
            d_v,
            w_q,
            w_k,
            w_v,
            w_o,
        })
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn d_k(&self) -> usize {
        self.d_k
    }

    pub fn d_v(&self) -> usize {
        self.d_v
    }

    /// Projects key/value rows for every head.
    pub fn project_kv(&self, x_kv: &Matrix) -> Result<KvCache> {
        let mut cache = KvCache::empty(self);
        for row in x_kv.row_iter() {
            cache.push(self, row)?;
        }
        Ok(cache)
    }

    /// Output for one query row attending to `cache`.
    pub fn attend(&self, x_q: &[f64], cache: &KvCache, allowed: Option<&[bool]>, row: usize) -> Result<Vec<f64>> {
        if x_q.len() != self.d_model {
            return Err(Error::Shape(format!(
                "query row has width {}, expected {}",
                x_q.len(),
                self.d_model
            )));
        }
        let mut concat = Vec::with_capacity(self.n_heads * self.d_v);
        for h in 0..self.n_heads {
            let q = vec_matmul(x_q, &self.w_q[h]);
            concat.extend(attend_row(&q, &cache.k[h], &cache.v[h], allowed, row)?);
        }
        Ok(vec_matmul(&concat, &self.w_o))
    }
}

/// Projected keys and values, one matrix per head.
#[derive(Debug, Clone)]
pub struct KvCache {
    k: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl KvCache {
    pub fn empty(params: &AttentionParams) -> Self {
        Self {
            k: vec![Matrix::zeros(0, params.d_k); params.n_heads],
            v: vec![Matrix::zeros(0, params.d_v); params.n_heads],
        }
    }

    pub fn len(&self) -> usize {
        self.k.first().map_or(0, Matrix::rows)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, params: &AttentionParams, x: &[f64]) -> Result<()> {
        if x.len() != params.d_model {
            return Err(Error::Shape(format!(
                "key/value row has width {}, expected {}",
                x.len(),
                params.d_model
            )));
        }
        for h in 0..params.n_heads {
            self.k[h].push_row(&vec_matmul(x, &params.w_k[h]))?;
            self.v[h].push_row(&vec_matmul(x, &params.w_v[h]))?;
        }
        Ok(())
    }
}

/// Concatenated per-head attention outputs times `W_o`.
pub fn multi_head_attention(
    x_q: &Matrix,
    x_kv: &Matrix,
    params: &AttentionParams,
    mask: Option<&Mask>,
) -> Result<Matrix> {
    if x_q.cols() != params.d_model || x_kv.cols() != params.d_model {
        return Err(Error::Shape(format!(
            "inputs are {} and {} wide, model width is {}",
            x_q.cols(),
            x_kv.cols(),
            params.d_model
        )));
    }
    check_mask(mask, x_q.rows(), x_kv.rows())?;
    let cache = params.project_kv(x_kv)?;
    let mut out = Matrix::zeros(x_q.rows(), params.d_model);
    for i in 0..x_q.rows() {
        let row = params.attend(x_q.row(i), &cache, mask.map(|m| m.row(i)), i)?;
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn uniform_weights_average_values() {
        let out = scaled_dot_attention(&m(&[&[0.0]]), &m(&[&[0.0], &[0.0]]), &m(&[&[1.0], &[3.0]]), None).unwrap();
        assert_eq!(out.as_slice(), &[2.0]);
    }

    #[test]
    fn two_key_softmax_matches_logistic() {
        let out = scaled_dot_attention(&m(&[&[1.0]]), &m(&[&[1.0], &[-1.0]]), &m(&[&[1.0], &[0.0]]), None).unwrap();
        let e2 = 2f64.exp();
        assert_abs_diff_eq!(out[(0, 0)], e2 / (e2 + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(out[(0, 0)], 0.8808, epsilon = 1e-4);
    }

    #[test]
    fn identical_keys_give_value_mean() {
        let k = Matrix::from_fn(5, 3, |_, j| j as f64 * 0.7 - 1.0);
        let v = Matrix::from_fn(5, 2, |i, j| (i * 3 + j) as f64 * 0.37);
        let q = Matrix::from_fn(4, 3, |i, j| (i + j) as f64);
        let out = scaled_dot_attention(&q, &k, &v, None).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                let mean = (0..5).map(|r| v[(r, j)]).sum::<f64>() / 5.0;
                assert_abs_diff_eq!(out[(i, j)], mean, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn causal_mask_shape() {
        assert_eq!(causal_mask(1).row(0), &[true]);
        let m2 = causal_mask(2);
        assert_eq!(m2.row(0), &[true, false]);
        assert_eq!(m2.row(1), &[true, true]);
        let m7 = causal_mask(7);
        for i in 0..7 {
            assert_eq!(m7.row(i).iter().filter(|&&b| b).count(), i + 1);
        }
    }

    #[test]
    fn masked_weights_are_exactly_zero() {
        let q = Matrix::from_fn(3, 2, |i, j| (i as f64 - j as f64) * 0.5);
        let k = Matrix::from_fn(3, 2, |i, j| (i * j) as f64 * 0.3 + 0.1);
        let w = attention_weights(&q, &k, Some(&causal_mask(3))).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_eq!(w[(i, j)], 0.0);
            }
            assert_abs_diff_eq!(w.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fully_masked_row_is_an_error() {
        let mask = Mask::from_fn(2, 2, |i, _| i == 0);
        let x = Matrix::identity(2);
        assert!(matches!(
            scaled_dot_attention(&x, &x, &x, Some(&mask)),
            Err(Error::FullyMasked(1))
        ));
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        assert!(scaled_dot_attention(&a, &b, &b, None).is_err());
        let nan = Matrix::from_rows(&[[f64::NAN, 0.0]]).unwrap();
        assert!(matches!(
            scaled_dot_attention(&nan, &b, &b, None),
            Err(Error::NonFinite(_))
        ));
        assert!(scaled_dot_attention(&b, &b, &b, Some(&causal_mask(3))).is_err());
    }

    #[test]
    fn single_identity_head_matches_plain_attention() {
        let d = 3;
        let id = Matrix::identity(d);
        let p = AttentionParams::new(vec![id.clone()], vec![id.clone()], vec![id.clone()], id).unwrap();
        let xq = Matrix::from_fn(4, d, |i, j| ((i * 5 + j * 3) % 7) as f64 * 0.2 - 0.5);
        let xkv = Matrix::from_fn(6, d, |i, j| ((i * 2 + j) % 5) as f64 * 0.3 - 0.4);
        let mh = multi_head_attention(&xq, &xkv, &p, None).unwrap();
        let plain = scaled_dot_attention(&xq, &xkv, &xkv, None).unwrap();
        assert_eq!(mh.shape(), (4, d));
        for (a, b) in mh.as_slice().iter().zip(plain.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn duplicated_heads_with_halved_output_match_one_head() {
        let d = 4;
        let wq = Matrix::from_fn(d, 2, |i, j| 0.1 * (i as f64 + 2.0 * j as f64).sin());
        let wk = Matrix::from_fn(d, 2, |i, j| 0.2 * (i as f64 - j as f64).cos());
        let wv = Matrix::from_fn(d, 3, |i, j| 0.3 * ((i * j) as f64 + 0.5).sin());
        let wo = Matrix::from_fn(3, d, |i, j| 0.05 * (i + 2 * j) as f64 - 0.2);
        let one = AttentionParams::new(vec![wq.clone()], vec![wk.clone()], vec![wv.clone()], wo.clone()).unwrap();
        let half = wo.scale(0.5);
        let two = AttentionParams::new(
            vec![wq.clone(), wq],
            vec![wk.clone(), wk],
            vec![wv.clone(), wv],
            Matrix::vcat(&[half.clone(), half]).unwrap(),
        )
        .unwrap();
        let x = Matrix::from_fn(5, d, |i, j| ((i * 7 + j * 11) % 13) as f64 / 13.0 - 0.5);
        let a = multi_head_attention(&x, &x, &one, Some(&causal_mask(5))).unwrap();
        let b = multi_head_attention(&x, &x, &two, Some(&causal_mask(5))).unwrap();
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-14);
        }
    }

    #[test]
    fn malformed_params_rejected() {
        let a = Matrix::zeros(4, 2);
        assert!(AttentionParams::new(vec![a.clone()], vec![a.clone()], vec![a.clone()], Matrix::zeros(3, 4)).is_err());
        assert!(AttentionParams::new(vec![], vec![], vec![], Matrix::zeros(0, 4)).is_err());
        assert!(AttentionParams::new(vec![a.clone()], vec![Matrix::zeros(4, 3)], vec![a.clone()], Matrix::zeros(2, 4)).is_err());
    }
}
