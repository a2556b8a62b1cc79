use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::{BinauralRep, Channel, Level};

use super::cosine::Frames;
use super::dtw::{dtw_path_fast, warped_sim};

pub const DEFAULT_DTW_RADIUS: usize = 10;

/// Reference/processed channel pairings: (l,l), (l,r), (r,l), (r,r).
const PAIRINGS: [(Channel, Channel); 4] = [
    (Channel::Left, Channel::Left),
    (Channel::Left, Channel::Right),
    (Channel::Right, Channel::Left),
    (Channel::Right, Channel::Right),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub level: Level,
    /// Frames (over all four input sequences) whose norm fell below the
    /// zero-norm threshold; each such frame contributes cosine 0.
    pub zero_norm_frames: usize,
}

/// Common frame count for matched-step comparison. Lengths may differ by
/// at most `max(2, 2%)` of the longer sequence.
pub fn reconcile_lengths(ref_frames: usize, proc_frames: usize) -> Result<usize> {
    let longer = ref_frames.max(proc_frames);
    let diff = ref_frames.abs_diff(proc_frames);
    let allowed = 2f64.max(0.02 * longer as f64);
    if diff as f64 > allowed {
        return Err(Error::Shape(format!(
            "reference has {ref_frames} frames, processed has {proc_frames}; at most {allowed:.0} may differ"
        )));
    }
    Ok(ref_frames.min(proc_frames))
}

fn check_pair(reference: &BinauralRep, processed: &BinauralRep) -> Result<()> {
    if reference.level() != processed.level() {
        return Err(Error::Shape(format!(
            "reference is {} level, processed is {}",
            reference.level(),
            processed.level()
        )));
    }
    if reference.left().dim() != processed.left().dim() {
        return Err(Error::Shape(format!(
            "reference is {} wide, processed is {}",
            reference.left().dim(),
            processed.left().dim()
        )));
    }
    Ok(())
}

fn frames_of(rep: &BinauralRep) -> [Frames; 2] {
    [Frames::from_rep(rep.left()), Frames::from_rep(rep.right())]
}

fn idx(c: Channel) -> usize {
    match c {
        Channel::Left => 0,
        Channel::Right => 1,
    }
}

/// Mean over frames of the best of the four channel-pair cosines. For the
/// matched-step levels (input, pre, enc).
pub fn framewise_binaural_sim(reference: &BinauralRep, processed: &BinauralRep) -> Result<SimilarityScore> {
    check_pair(reference, processed)?;
    let level = reference.level();
    if level.is_warped() {
        return Err(Error::Config(
            "decoder-level sequences need the warped similarity".into(),
        ));
    }
    let t = reconcile_lengths(reference.left().frames(), processed.left().frames())?;
    let r = frames_of(reference);
    let p = frames_of(processed);
    let mut total = 0.0;
    for step in 0..t {
        let best = PAIRINGS
            .iter()
            .map(|&(rc, pc)| r[idx(rc)].cos(step, &p[idx(pc)], step))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    let zero_norm_frames = r.iter().chain(&p).map(|f| f.zero_norm_count(t)).sum();
    Ok(SimilarityScore {
        value: (total / t as f64).clamp(-1.0, 1.0),
        level,
        zero_norm_frames,
    })
}

/// Best warped similarity over the four channel pairings, each pairing
/// aligned independently with fast DTW.
pub fn binaural_warped_sim(reference: &BinauralRep, processed: &BinauralRep, radius: usize) -> Result<SimilarityScore> {
    check_pair(reference, processed)?;
    let level = reference.level();
    if !level.is_warped() {
        return Err(Error::Config(format!(
            "warped similarity applies to decoder-level sequences, got {level}"
        )));
    }
    let r = frames_of(reference);
    let p = frames_of(processed);
    if r.iter().chain(&p).any(Frames::is_empty) {
        return Err(Error::Shape("empty channel sequence".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for &(rc, pc) in &PAIRINGS {
        let (a, b) = (&r[idx(rc)], &p[idx(pc)]);
        let path = dtw_path_fast(a, b, radius);
        best = best.max(warped_sim(a, b, &path)?);
    }
    let zero_norm_frames = r.iter().chain(&p).map(|f| f.zero_norm_count(f.len())).sum();
    Ok(SimilarityScore {
        value: best,
        level,
        zero_norm_frames,
    })
}
