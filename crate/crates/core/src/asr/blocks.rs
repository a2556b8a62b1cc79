//! Post-norm transformer blocks: every sub-layer computes
//! `LayerNorm(x + Sublayer(x))`.

use crate::error::{Error, Result};
use crate::linalg::{vec_matmul, Matrix};

use super::attention::{AttentionParams, KvCache, Mask};
use super::weights::WeightGen;

pub const LAYER_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNorm {
    /// Unit gain, zero bias.
    pub fn identity(d: usize) -> Self {
        Self {
            gain: vec![1.0; d],
            bias: vec![0.0; d],
        }
    }

    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        x.iter()
            .zip(self.gain.iter().zip(&self.bias))
            .map(|(v, (g, b))| (v - mean) * inv * g + b)
            .collect()
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&self.apply_row(x.row(i)));
        }
        out
    }
}

/// Two affine maps with a ReLU between them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl FeedForward {
    pub fn generate(gen: &mut WeightGen, d_model: usize, d_ff: usize) -> Self {
        Self {
            w1: gen.matrix(d_model, d_ff),
            b1: gen.vector(d_ff),
            w2: gen.matrix(d_ff, d_model),
            b2: gen.vector(d_model),
        }
    }

    pub fn zeros(d_model: usize, d_ff: usize) -> Self {
        Self {
            w1: Matrix::zeros(d_model, d_ff),
            b1: vec![0.0; d_ff],
            w2: Matrix::zeros(d_ff, d_model),
            b2: vec![0.0; d_model],
        }
    }

    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        let mut hidden = vec_matmul(x, &self.w1);
        for (h, b) in hidden.iter_mut().zip(&self.b1) {
            *h = (*h + b).max(0.0);
        }
        let mut out = vec_matmul(&hidden, &self.w2);
        for (o, b) in out.iter_mut().zip(&self.b2) {
            *o += b;
        }
        out
    }
}

pub(crate) fn generate_attention(gen: &mut WeightGen, d_model: usize, n_heads: usize) -> Result<AttentionParams> {
    let d_head = d_model / n_heads;
    let mut w_q = Vec::with_capacity(n_heads);
    let mut w_k = Vec::with_capacity(n_heads);
    let mut w_v = Vec::with_capacity(n_heads);
    for _ in 0..n_heads {
        w_q.push(gen.matrix(d_model, d_head));
        w_k.push(gen.matrix(d_model, d_head));
        w_v.push(gen.matrix(d_model, d_head));
    }
    AttentionParams::new(w_q, w_k, w_v, gen.matrix(n_heads * d_head, d_model))
}

pub(crate) fn zero_attention(d_model: usize, n_heads: usize) -> AttentionParams {
    let d_head = d_model / n_heads;
    let z = Matrix::zeros(d_model, d_head);
    AttentionParams::new(
        vec![z.clone(); n_heads],
        vec![z.clone(); n_heads],
        vec![z; n_heads],
        Matrix::zeros(n_heads * d_head, d_model),
    )
    .expect("zero parameters are well formed")
}

fn residual_norm(norm: &LayerNorm, x: &[f64], sub: &[f64]) -> Result<Vec<f64>> {
    let summed: Vec<f64> = x.iter().zip(sub).map(|(a, b)| a + b).collect();
    let out = norm.apply_row(&summed);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite("transformer block output"))
    }
}

fn check_width(x: &Matrix, d: usize) -> Result<()> {
    if x.cols() != d {
        return Err(Error::Shape(format!("block input is {} wide, expected {d}", x.cols())));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("transformer block input"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock {
    pub self_attn: AttentionParams,
    pub norm1: LayerNorm,
    pub ffn: FeedForward,
    pub norm2: LayerNorm,
}

impl EncoderBlock {
    pub fn generate(gen: &mut WeightGen, d_model: usize, n_heads: usize, d_ff: usize) -> Result<Self> {
        Ok(Self {
            self_attn: generate_attention(gen, d_model, n_heads)?,
            norm1: LayerNorm::identity(d_model),
            ffn: FeedForward::generate(gen, d_model, d_ff),
            norm2: LayerNorm::identity(d_model),
        })
    }

    pub fn zeros(d_model: usize, n_heads: usize, d_ff: usize) -> Self {
        Self {
            self_attn: zero_attention(d_model, n_heads),
            norm1: LayerNorm::identity(d_model),
            ffn: FeedForward::zeros(d_model, d_ff),
            norm2: LayerNorm::identity(d_model),
        }
    }

    pub fn d_model(&self) -> usize {
        self.self_attn.d_model()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.d_model())?;
        let cache = self.self_attn.project_kv(x)?;
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let attn = self.self_attn.attend(x.row(i), &cache, None, i)?;
            let h = residual_norm(&self.norm1, x.row(i), &attn)?;
            let ff = self.ffn.apply_row(&h);
            out.row_mut(i).copy_from_slice(&residual_norm(&self.norm2, &h, &ff)?);
        }
        Ok(out)
    }
}

pub fn encoder_block_forward(x: &Matrix, block: &EncoderBlock) -> Result<Matrix> {
    block.forward(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBlock {
    pub self_attn: AttentionParams,
    pub norm1: LayerNorm,
    pub cross_attn: AttentionParams,
    pub norm2: LayerNorm,
    pub ffn: FeedForward,
    pub norm3: LayerNorm,
}

/// Incremental state for one decoder block: the growing self-attention
/// cache and the fixed encoder-side cache.
#[derive(Debug, Clone)]
pub struct DecoderBlockState {
    self_kv: KvCache,
    cross_kv: KvCache,
}

impl DecoderBlock {
    pub fn generate(gen: &mut WeightGen, d_model: usize, n_heads: usize, d_ff: usize) -> Result<Self> {
        Ok(Self {
            self_attn: generate_attention(gen, d_model, n_heads)?,
            norm1: LayerNorm::identity(d_model),
            cross_attn: generate_attention(gen, d_model, n_heads)?,
            norm2: LayerNorm::identity(d_model),
            ffn: FeedForward::generate(gen, d_model, d_ff),
            norm3: LayerNorm::identity(d_model),
        })
    }

    pub fn zeros(d_model: usize, n_heads: usize, d_ff: usize) -> Self {
        Self {
            self_attn: zero_attention(d_model, n_heads),
            norm1: LayerNorm::identity(d_model),
            cross_attn: zero_attention(d_model, n_heads),
            norm2: LayerNorm::identity(d_model),
            ffn: FeedForward::zeros(d_model, d_ff),
            norm3: LayerNorm::identity(d_model),
        }
    }

    pub fn d_model(&self) -> usize {
        self.self_attn.d_model()
    }

    pub fn start(&self, enc_out: &Matrix) -> Result<DecoderBlockState> {
        check_width(enc_out, self.d_model())?;
        if enc_out.rows() == 0 {
            return Err(Error::Shape("decoder needs a non-empty encoder output".into()));
        }
        Ok(DecoderBlockState {
            self_kv: KvCache::empty(&self.self_attn),
            cross_kv: self.cross_attn.project_kv(enc_out)?,
        })
    }

    /// Processes the next position given everything before it.
    pub fn step(&self, state: &mut DecoderBlockState, y: &[f64]) -> Result<Vec<f64>> {
        let pos = state.self_kv.len();
        state.self_kv.push(&self.self_attn, y)?;
        let attn = self.self_attn.attend(y, &state.self_kv, None, pos)?;
        let h1 = residual_norm(&self.norm1, y, &attn)?;
        let cross = self.cross_attn.attend(&h1, &state.cross_kv, None, pos)?;
        let h2 = residual_norm(&self.norm2, &h1, &cross)?;
        let ff = self.ffn.apply_row(&h2);
        residual_norm(&self.norm3, &h2, &ff)
    }

    /// Full-sequence forward with causal self-attention followed by
    /// cross-attention on `enc_out`.
    pub fn forward(&self, y: &Matrix, enc_out: &Matrix) -> Result<Matrix> {
        check_width(y, self.d_model())?;
        let mask = Mask::causal(y.rows());
        let self_kv = self.self_attn.project_kv(y)?;
        let state = self.start(enc_out)?;
        let mut out = Matrix::zeros(y.rows(), y.cols());
        for i in 0..y.rows() {
            let attn = self.self_attn.attend(y.row(i), &self_kv, Some(mask.row(i)), i)?;
            let h1 = residual_norm(&self.norm1, y.row(i), &attn)?;
            let cross = self.cross_attn.attend(&h1, &state.cross_kv, None, i)?;
            let h2 = residual_norm(&self.norm2, &h1, &cross)?;
            let ff = self.ffn.apply_row(&h2);
            out.row_mut(i).copy_from_slice(&residual_norm(&self.norm3, &h2, &ff)?);
        }
        Ok(out)
    }
}

pub fn decoder_block_forward(y: &Matrix, enc_out: &Matrix, block: &DecoderBlock) -> Result<Matrix> {
    block.forward(y, enc_out)
}
