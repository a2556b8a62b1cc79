//! Audio input and the log-mel front end.

mod mel;
mod wav;

pub use mel::{frame_count, hz_to_mel, logmel, mel_to_hz, FeatConfig, LogMel};
pub use wav::{read_wav, StereoSignal};
