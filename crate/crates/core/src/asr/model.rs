//! A small deterministic PreNet → encoder → decoder stack that exposes the
//! three hidden-representation levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vec_matmul, Matrix};

use super::blocks::{DecoderBlock, EncoderBlock};
use super::weights::WeightGen;

/// Temporal kernel width of every PreNet convolution.
pub const PRENET_KERNEL: usize = 3;

/// Dimensions of the full-size recogniser the toy stands in for. Kept as
/// metadata only.
pub mod reference_dims {
    pub const PRENET_CONV_LAYERS: usize = 3;
    pub const ENCODER_BLOCKS: usize = 12;
    pub const DECODER_BLOCKS: usize = 6;
    pub const PRENET_DIM: usize = 10240;
    pub const ENCODER_DIM: usize = 768;
    pub const DECODER_DIM: usize = 768;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyAsrConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_blocks: usize,
    pub n_dec_blocks: usize,
    /// Output channels of each stride-2 convolution.
    pub prenet_channels: Vec<usize>,
    pub d_ff: usize,
    /// Includes the CTC blank at index 0; the last index is start/end.
    pub vocab_size: usize,
    pub max_decode_len: usize,
    pub seed_tag: i64,
}

impl Default for ToyAsrConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_enc_blocks: 2,
            n_dec_blocks: 2,
            prenet_channels: vec![4, 8],
            d_ff: 256,
            vocab_size: 32,
            max_decode_len: 32,
            seed_tag: 0,
        }
    }
}

impl ToyAsrConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.d_ff == 0 {
            return bad("d_ff must be positive");
        }
        if self.max_decode_len == 0 {
            return bad("max_decode_len must be positive");
        }
        if self.prenet_channels.contains(&0) {
            return bad("prenet channel counts must be positive");
        }
        Ok(())
    }

    pub fn eos_token(&self) -> usize {
        self.vocab_size - 1
    }

    /// Fewest input frames the PreNet accepts: the receptive field of one
    /// output step.
    pub fn min_frames(&self) -> usize {
        (1usize << (self.prenet_channels.len() + 1)) - 1
    }

    pub fn prenet_frames(&self, t: usize) -> usize {
        self.prenet_channels.iter().fold(t, |t, _| t.div_ceil(2))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer {
    in_ch: usize,
    out_ch: usize,
    /// `out_ch x (in_ch * PRENET_KERNEL)`
    weight: Matrix,
    bias: Vec<f64>,
}

impl ConvLayer {
    /// Stride-2, zero-padded temporal convolution shared across bands,
    /// followed by ReLU. Frames are stored channel-major.
    fn forward(&self, input: &Matrix, bands: usize) -> Matrix {
        let t_out = input.rows().div_ceil(2);
        let mut out = Matrix::zeros(t_out, self.out_ch * bands);
        for t in 0..t_out {
            let row = out.row_mut(t);
            for co in 0..self.out_ch {
                let w = self.weight.row(co);
                for f in 0..bands {
                    let mut acc = self.bias[co];
                    for ci in 0..self.in_ch {
                        for k in 0..PRENET_KERNEL {
                            let Some(src) = (2 * t + k).checked_sub(1) else {
                                continue;
                            };
                            if src < input.rows() {
                                acc += w[ci * PRENET_KERNEL + k] * input[(src, ci * bands + f)];
                            }
                        }
                    }
                    row[co * bands + f] = acc.max(0.0);
                }
            }
        }
        out
    }
}

/// Hidden representations at the three levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Representations {
    pub pre: Matrix,
    pub enc: Matrix,
    /// `None` when decoding was skipped.
    pub dec: Option<Matrix>,
    /// Emitted tokens, one per row of `dec`.
    pub tokens: Vec<usize>,
}

/// Parameters built from a [`ToyAsrConfig`] for a given input width.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyAsr {
    cfg: ToyAsrConfig,
    input_dim: usize,
    convs: Vec<ConvLayer>,
    input_proj: Matrix,
    encoder: Vec<EncoderBlock>,
    embedding: Matrix,
    decoder: Vec<DecoderBlock>,
    output_proj: Matrix,
}

fn positional_encoding(pos: usize, d: usize) -> impl Iterator<Item = f64> {
    (0..d).map(move |i| {
        let freq = 10000f64.powf(-((i / 2 * 2) as f64) / d as f64);
        let angle = pos as f64 * freq;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

impl ToyAsr {
    pub fn new(cfg: &ToyAsrConfig, input_dim: usize) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input feature width must be positive".into()));
        }
        let mut gen = WeightGen::new(cfg.seed_tag);
        let mut convs = Vec::new();
        let mut in_ch = 1;
        for &out_ch in &cfg.prenet_channels {
            convs.push(ConvLayer {
                in_ch,
                out_ch,
                weight: gen.matrix(out_ch, in_ch * PRENET_KERNEL),
                bias: gen.vector(out_ch),
            });
            in_ch = out_ch;
        }
        let input_proj = gen.matrix(in_ch * input_dim, cfg.d_model);
        let encoder = (0..cfg.n_enc_blocks)
            .map(|_| EncoderBlock::generate(&mut gen, cfg.d_model, cfg.n_heads, cfg.d_ff))
            .collect::<Result<_>>()?;
        let embedding = gen.matrix(cfg.vocab_size, cfg.d_model);
        let decoder = (0..cfg.n_dec_blocks)
            .map(|_| DecoderBlock::generate(&mut gen, cfg.d_model, cfg.n_heads, cfg.d_ff))
            .collect::<Result<_>>()?;
        let output_proj = gen.matrix(cfg.d_model, cfg.vocab_size);
        Ok(Self {
            cfg: cfg.clone(),
            input_dim,
            convs,
            input_proj,
            encoder,
            embedding,
            decoder,
            output_proj,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn config(&self) -> &ToyAsrConfig {
        &self.cfg
    }

    pub fn prenet_dim(&self) -> usize {
        self.cfg.prenet_channels.last().copied().unwrap_or(1) * self.input_dim
    }

    fn check_input(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "features are {} wide, model expects {}",
                features.cols(),
                self.input_dim
            )));
        }
        if features.rows() < self.cfg.min_frames() {
            return Err(Error::TooShort(format!(
                "{} frames is below the PreNet receptive field of {}",
                features.rows(),
                self.cfg.min_frames()
            )));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("input features"));
        }
        Ok(())
    }

    pub fn prenet(&self, features: &Matrix) -> Result<Matrix> {
        self.check_input(features)?;
        Ok(self
            .convs
            .iter()
            .fold(features.clone(), |x, conv| conv.forward(&x, self.input_dim)))
    }

    /// PreNet and encoder outputs.
    pub fn encode(&self, features: &Matrix) -> Result<(Matrix, Matrix)> {
        let pre = self.prenet(features)?;
        let mut x = Matrix::zeros(pre.rows(), self.cfg.d_model);
        for (t, row) in pre.row_iter().enumerate() {
            let projected = vec_matmul(row, &self.input_proj);
            for (o, (p, pe)) in x
                .row_mut(t)
                .iter_mut()
                .zip(projected.into_iter().zip(positional_encoding(t, self.cfg.d_model)))
            {
                *o = p + pe;
            }
        }
        for block in &self.encoder {
            x = block.forward(&x)?;
        }
        Ok((pre, x))
    }

    fn embed(&self, token: usize, pos: usize) -> Vec<f64> {
        let scale = (self.cfg.d_model as f64).sqrt();
        self.embedding
            .row(token)
            .iter()
            .zip(positional_encoding(pos, self.cfg.d_model))
            .map(|(e, pe)| e * scale + pe)
            .collect()
    }

    /// Greedy autoregressive decoding. Returns the final decoder block
    /// output at each step that emitted a non-end token, and those tokens.
    /// The end token is suppressed at the first step so at least one row
    /// comes back.
    pub fn greedy_decode(&self, enc: &Matrix) -> Result<(Matrix, Vec<usize>)> {
        let eos = self.cfg.eos_token();
        let mut states = self
            .decoder
            .iter()
            .map(|b| b.start(enc))
            .collect::<Result<Vec<_>>>()?;
        let mut reps = Matrix::zeros(0, self.cfg.d_model);
        let mut tokens = Vec::new();
        let mut prev = eos;
        for step in 0..self.cfg.max_decode_len {
            let mut h = self.embed(prev, step);
            for (block, state) in self.decoder.iter().zip(states.iter_mut()) {
                h = block.step(state, &h)?;
            }
            let logits = vec_matmul(&h, &self.output_proj);
            let next = argmax(&logits, if step == 0 { Some(eos) } else { None });
            if next == eos {
                break;
            }
            reps.push_row(&h)?;
            tokens.push(next);
            prev = next;
        }
        Ok((reps, tokens))
    }

    /// Runs the decoder stack over a fixed token prefix (teacher forcing)
    /// using full-sequence block forwards.
    pub fn decode_prefix(&self, enc: &Matrix, tokens: &[usize]) -> Result<Matrix> {
        let mut y = Matrix::zeros(0, self.cfg.d_model);
        for (pos, &tok) in tokens.iter().enumerate() {
            if tok >= self.cfg.vocab_size {
                return Err(Error::Config(format!("token {tok} outside vocabulary")));
            }
            y.push_row(&self.embed(tok, pos))?;
        }
        for block in &self.decoder {
            y = block.forward(&y, enc)?;
        }
        Ok(y)
    }

    pub fn forward(&self, features: &Matrix) -> Result<Representations> {
        let (pre, enc) = self.encode(features)?;
        let (dec, tokens) = self.greedy_decode(&enc)?;
        Ok(Representations {
            pre,
            enc,
            dec: Some(dec),
            tokens,
        })
    }
}

/// First index of the largest value, skipping `exclude`.
fn argmax(values: &[f64], exclude: Option<usize>) -> usize {
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// Builds the model for `features` and returns all three levels.
pub fn toy_forward(features: &Matrix, cfg: &ToyAsrConfig) -> Result<Representations> {
    ToyAsr::new(cfg, features.cols())?.forward(features)
}
