//! Forward-only toy recogniser and loss evaluation.

mod attention;
mod blocks;
mod loss;
mod model;
mod weights;

pub use attention::{
    attention_weights, causal_mask, multi_head_attention, scaled_dot_attention, AttentionParams, KvCache, Mask,
};
pub use blocks::{
    decoder_block_forward, encoder_block_forward, DecoderBlock, DecoderBlockState, EncoderBlock, FeedForward,
    LayerNorm, LAYER_NORM_EPS,
};
pub use loss::{
    ctc_brute_force, ctc_collapse, ctc_loss, for_each_ctc_path, joint_loss, seq2seq_loss, CtcInstance,
    JointLossConfig, BLANK, ENUMERATION_BOUND,
};
pub use model::{reference_dims, toy_forward, Representations, ToyAsr, ToyAsrConfig, PRENET_KERNEL};
pub use weights::WeightGen;
