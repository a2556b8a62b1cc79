//! Similarity between reference and processed representations.

mod binaural;
mod cosine;
mod dtw;

pub use binaural::{
    binaural_warped_sim, framewise_binaural_sim, reconcile_lengths, SimilarityScore, DEFAULT_DTW_RADIUS,
};
pub use cosine::{cosine, cosine_counted, Frames, ZERO_NORM_EPS};
pub use dtw::{dtw_path_exact, dtw_path_fast, path_cost, warped_sim, WarpPath, MIN_COARSE_FRAMES};
