//! The pipeline stages. Each stage reads what the previous one left in the
//! cache or output directory, so any stage can be rerun on its own.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use hrsim_core::asr::ToyAsr;
use hrsim_core::calib::{fit_logistic, logistic, FitResult};
use hrsim_core::feats::{read_wav, LogMel};
use hrsim_core::sim::{binaural_warped_sim, framewise_binaural_sim};
use hrsim_core::store::{decode_reps, load_manifest, LoadOptions};
use hrsim_core::{
    BinauralRep, Channel, LogisticParams, Manifest, PredictionRecord, RepSequence, SimilarityScore, Split,
    StereoSignal, TrialRecord,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{content_key, Cache, Side};
use crate::config::{FitSplit, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::scores::ScoreRow;
use hrsim_core::Level;

const CHANNELS: [Channel; 2] = [Channel::Left, Channel::Right];

/// Outcome of a cache-filling stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageSummary {
    pub written: usize,
    pub skipped: usize,
    /// Signals that could not be processed, with the reason.
    pub failures: Vec<(String, String)>,
}

/// Per-signal outcome: (written, skipped) files or a failure reason.
type SignalOutcome = (String, Result<(usize, usize), String>);

impl StageSummary {
    fn merge(results: Vec<SignalOutcome>) -> Self {
        let mut s = StageSummary::default();
        for (id, r) in results {
            match r {
                Ok((w, k)) => {
                    s.written += w;
                    s.skipped += k;
                }
                Err(m) => s.failures.push((id, m)),
            }
        }
        s
    }
}

pub fn open_manifest(cfg: &PipelineConfig, check_paths: bool) -> CliResult<Manifest> {
    let opts = LoadOptions {
        wcs_percent: cfg.wcs_percent,
        lenient: cfg.lenient,
        check_paths,
    };
    Ok(load_manifest(cfg.manifest_path()?, opts)?)
}

/// First trial for each signal that is not flagged, in manifest order.
fn unique_signals(manifest: &Manifest) -> Vec<&TrialRecord> {
    let firsts: HashMap<&str, &TrialRecord> =
        manifest.records.iter().rev().map(|r| (r.signal_id.as_str(), r)).collect();
    manifest
        .signal_ids()
        .into_iter()
        .filter(|id| !manifest.flagged(id))
        .map(|id| firsts[id])
        .collect()
}

fn source_path(t: &TrialRecord, side: Side, channel: Channel) -> &Path {
    match (side, channel) {
        (Side::Ref, Channel::Left) => &t.ref_left,
        (Side::Ref, Channel::Right) => &t.ref_right,
        (Side::Proc, Channel::Left) => &t.proc_left,
        (Side::Proc, Channel::Right) => &t.proc_right,
    }
}

fn is_hrep(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("hrep"))
}

type Entry = (String, String);

/// Per-signal work result: written/skipped counts and index updates.
type SignalResult = Result<(usize, usize, Vec<Entry>), String>;

fn run_signals<F>(signals: &[&TrialRecord], work: F) -> Vec<(String, SignalResult)>
where
    F: Fn(&TrialRecord) -> SignalResult + Sync,
{
    signals
        .par_iter()
        .map(|t| (t.signal_id.clone(), work(t)))
        .collect()
}

fn finish(cache: &mut Cache, results: Vec<(String, SignalResult)>) -> CliResult<StageSummary> {
    let mut merged = Vec::with_capacity(results.len());
    for (id, r) in results {
        merged.push((
            id,
            r.map(|(w, k, entries)| {
                for (rel, key) in entries {
                    cache.record(rel, key);
                }
                (w, k)
            }),
        ));
    }
    cache.save()?;
    Ok(StageSummary::merge(merged))
}

/// Input-level log-mel representations for every signal side and channel.
/// Sources ending in `.hrep` are copied into the cache at their own level.
pub fn featurize(cfg: &PipelineConfig, manifest: &Manifest) -> CliResult<StageSummary> {
    let mut cache = Cache::open(&cfg.cache_dir)?;
    let feat_json = serde_json::to_vec(&cfg.feat).map_err(|e| CliError::Internal(e.to_string()))?;
    let root = cache.root().to_path_buf();
    let signals = unique_signals(manifest);
    let cache_ref = &cache;
    let results = run_signals(&signals, |t| {
        let mut skipped = 0;
        let mut entries = Vec::new();
        // Nothing is written until every channel of the signal succeeded.
        let mut pending = Vec::new();
        let mut audio: HashMap<&Path, StereoSignal> = HashMap::new();
        for side in Side::BOTH {
            for channel in CHANNELS {
                let src = source_path(t, side, channel);
                let bytes = std::fs::read(src).map_err(|e| format!("{}: {e}", src.display()))?;
                if is_hrep(src) {
                    let rep = decode_reps(&bytes).map_err(|e| format!("{}: {e}", src.display()))?;
                    let rep = RepSequence::new(
                        rep.level(),
                        channel,
                        t.signal_id.clone(),
                        rep.frames(),
                        rep.dim(),
                        rep.data().to_vec(),
                    )
                    .map_err(|e| e.to_string())?;
                    let rel = Cache::relative(&t.signal_id, side, channel, rep.level());
                    let key = content_key(&[b"copy", &bytes, &[channel.code()]]);
                    if cache_ref.is_fresh(&rel, &key) {
                        skipped += 1;
                    } else {
                        pending.push((rel.clone(), rep));
                    }
                    entries.push((rel, key));
                    continue;
                }
                let rel = Cache::relative(&t.signal_id, side, channel, Level::Input);
                let key = content_key(&[b"featurize", &bytes, &[channel.code()], &feat_json]);
                if cache_ref.is_fresh(&rel, &key) {
                    skipped += 1;
                    entries.push((rel, key));
                    continue;
                }
                if !audio.contains_key(src) {
                    audio.insert(src, read_wav(src).map_err(|e| e.to_string())?);
                }
                let signal = &audio[src];
                let samples = match channel {
                    Channel::Left => signal.left(),
                    Channel::Right => signal.right(),
                };
                let frontend = LogMel::new(&cfg.feat, signal.sample_rate_hz()).map_err(|e| e.to_string())?;
                let feats = frontend.compute(samples).map_err(|e| format!("{}: {e}", src.display()))?;
                let rep = RepSequence::from_matrix(Level::Input, channel, t.signal_id.clone(), &feats)
                    .map_err(|e| e.to_string())?;
                pending.push((rel.clone(), rep));
                entries.push((rel, key));
            }
        }
        for (rel, rep) in &pending {
            Cache::write(&root, rel, rep).map_err(|e| e.to_string())?;
        }
        Ok((pending.len(), skipped, entries))
    });
    finish(&mut cache, results)
}

/// Runs the toy recogniser over cached input features and stores the
/// requested hidden levels.
pub fn forward(cfg: &PipelineConfig, manifest: &Manifest, levels: &[Level]) -> CliResult<StageSummary> {
    let levels: Vec<Level> = {
        let mut l: Vec<Level> = levels.iter().copied().filter(|&l| l != Level::Input).collect();
        l.sort();
        l.dedup();
        l
    };
    if levels.is_empty() {
        return Err(CliError::Usage("forward needs at least one of pre, enc, dec".into()));
    }
    let mut cache = Cache::open(&cfg.cache_dir)?;
    let asr_json = serde_json::to_vec(&cfg.asr).map_err(|e| CliError::Internal(e.to_string()))?;
    let root = cache.root().to_path_buf();
    let signals = unique_signals(manifest);
    let cache_ref = &cache;
    let results = run_signals(&signals, |t| {
        let mut written = 0;
        let mut skipped = 0;
        let mut entries = Vec::new();
        let mut model: Option<ToyAsr> = None;
        for side in Side::BOTH {
            for channel in CHANNELS {
                let outputs: Vec<String> = levels
                    .iter()
                    .map(|&l| Cache::relative(&t.signal_id, side, channel, l))
                    .collect();
                let input_rel = Cache::relative(&t.signal_id, side, channel, Level::Input);
                let input_path = root.join(&input_rel);
                if !input_path.is_file() {
                    // Representations supplied by the manifest are used as they are.
                    if is_hrep(source_path(t, side, channel)) {
                        continue;
                    }
                    return Err(format!("missing {input_rel}; run featurize first"));
                }
                let bytes = std::fs::read(&input_path).map_err(|e| format!("{input_rel}: {e}"))?;
                let keys: Vec<String> = levels
                    .iter()
                    .map(|l| content_key(&[b"forward", &bytes, &asr_json, &[l.code()]]))
                    .collect();
                let stale: Vec<usize> = (0..levels.len())
                    .filter(|&i| !cache_ref.is_fresh(&outputs[i], &keys[i]))
                    .collect();
                skipped += levels.len() - stale.len();
                if !stale.is_empty() {
                    let input = decode_reps(&bytes).map_err(|e| format!("{input_rel}: {e}"))?;
                    let feats = input.to_matrix();
                    let m = match &model {
                        Some(m) if m.input_dim() == feats.cols() => m,
                        _ => model.insert(ToyAsr::new(&cfg.asr, feats.cols()).map_err(|e| e.to_string())?),
                    };
                    let (pre, enc) = m.encode(&feats).map_err(|e| format!("{input_rel}: {e}"))?;
                    let dec = if stale.iter().any(|&i| levels[i] == Level::Dec) {
                        Some(m.greedy_decode(&enc).map_err(|e| format!("{input_rel}: {e}"))?.0)
                    } else {
                        None
                    };
                    for &i in &stale {
                        let mat = match levels[i] {
                            Level::Pre => &pre,
                            Level::Enc => &enc,
                            _ => dec.as_ref().expect("decoded when requested"),
                        };
                        let rep = RepSequence::from_matrix(levels[i], channel, t.signal_id.clone(), mat)
                            .map_err(|e| e.to_string())?;
                        Cache::write(&root, &outputs[i], &rep).map_err(|e| e.to_string())?;
                        written += 1;
                    }
                }
                entries.extend(outputs.into_iter().zip(keys));
            }
        }
        Ok((written, skipped, entries))
    });
    finish(&mut cache, results)
}

fn load_binaural(cache: &Cache, signal_id: &str, side: Side, level: Level) -> Result<BinauralRep, String> {
    let read = |channel| {
        let rel = Cache::relative(signal_id, side, channel, level);
        cache.read(&rel).map_err(|e| format!("{rel}: {e}"))
    };
    BinauralRep::new(read(Channel::Left)?, read(Channel::Right)?).map_err(|e| e.to_string())
}

/// Similarity of one signal at the configured level.
pub fn score_signal(cache: &Cache, cfg: &PipelineConfig, signal_id: &str) -> Result<SimilarityScore, String> {
    let reference = load_binaural(cache, signal_id, Side::Ref, cfg.level)?;
    let processed = load_binaural(cache, signal_id, Side::Proc, cfg.level)?;
    let score = if cfg.level.is_warped() {
        binaural_warped_sim(&reference, &processed, cfg.dtw_radius)
    } else {
        framewise_binaural_sim(&reference, &processed)
    };
    score.map_err(|e| e.to_string())
}

/// One row per trial, sorted by signal then listener. Failures become rows
/// with an error message rather than aborting the run.
pub fn sim(cfg: &PipelineConfig, manifest: &Manifest) -> CliResult<Vec<ScoreRow>> {
    let cache = Cache::open(&cfg.cache_dir)?;
    let ids = manifest.signal_ids();
    let scored: Vec<(&str, Result<SimilarityScore, String>)> = ids
        .par_iter()
        .map(|&id| {
            let r = if manifest.flagged(id) {
                let why: Vec<&str> = manifest
                    .issues
                    .iter()
                    .filter(|i| i.signal_id == id)
                    .map(|i| i.message.as_str())
                    .collect();
                Err(format!("flagged: {}", why.join("; ")))
            } else {
                score_signal(&cache, cfg, id)
            };
            (id, r)
        })
        .collect();
    let by_signal: HashMap<&str, Result<SimilarityScore, String>> = scored.into_iter().collect();
    let mut rows: Vec<ScoreRow> = manifest
        .records
        .iter()
        .map(|t| {
            let (raw_score, zero_norm_frames, error) = match &by_signal[t.signal_id.as_str()] {
                Ok(s) => (Some(s.value), Some(s.zero_norm_frames), None),
                Err(m) => (None, None, Some(m.clone())),
            };
            ScoreRow {
                signal_id: t.signal_id.clone(),
                listener_id: t.listener_id.clone(),
                system_id: t.system_id.clone(),
                level: cfg.level,
                raw_score,
                zero_norm_frames,
                error,
            }
        })
        .collect();
    rows.sort_by(|a, b| (&a.signal_id, &a.listener_id).cmp(&(&b.signal_id, &b.listener_id)));
    Ok(rows)
}

/// The persisted calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOutput {
    pub a: f64,
    pub b: f64,
    pub fit_rmse: f64,
    pub n_dev: usize,
}

impl FitOutput {
    pub fn params(&self) -> LogisticParams {
        LogisticParams::new(self.a, self.b)
    }
}

fn in_fit_split(split: Split, fit: FitSplit) -> bool {
    match fit {
        FitSplit::Dev => split == Split::Dev,
        FitSplit::TrainAll => matches!(split, Split::Train | Split::Dev),
    }
}

/// Scored trials joined with their manifest records, in score-file order.
fn joined<'a>(trials: &'a [TrialRecord], scores: &'a [ScoreRow]) -> Vec<(&'a TrialRecord, &'a ScoreRow)> {
    let by_key: HashMap<(&str, &str), &TrialRecord> = trials
        .iter()
        .map(|t| ((t.signal_id.as_str(), t.listener_id.as_str()), t))
        .collect();
    scores
        .iter()
        .filter_map(|s| by_key.get(&(s.signal_id.as_str(), s.listener_id.as_str())).map(|t| (*t, s)))
        .collect()
}

/// Fits the logistic mapping on the fit split only; other trials are never
/// read.
pub fn fit(trials: &[TrialRecord], scores: &[ScoreRow], split: FitSplit) -> CliResult<FitOutput> {
    let pairs: Vec<(f64, f64)> = joined(trials, scores)
        .into_iter()
        .filter(|(t, _)| in_fit_split(t.split, split))
        .filter_map(|(t, s)| s.usable_score().map(|x| (x, t.correctness)))
        .collect();
    if pairs.is_empty() {
        return Err(CliError::Data(format!("no scored trials in the {split} split")));
    }
    let FitResult { params, fit_rmse, n } = fit_logistic(&pairs)?;
    Ok(FitOutput {
        a: params.a,
        b: params.b,
        fit_rmse,
        n_dev: n,
    })
}

/// Calibrated predictions for the eval split. Also returns how many eval
/// trials had no usable score.
pub fn predictions(
    trials: &[TrialRecord],
    scores: &[ScoreRow],
    params: LogisticParams,
) -> CliResult<(Vec<PredictionRecord>, usize)> {
    let mut skipped = 0;
    let mut records = Vec::new();
    for (t, s) in joined(trials, scores) {
        if t.split != Split::Eval {
            continue;
        }
        match s.usable_score() {
            Some(raw) => records.push(PredictionRecord {
                signal_id: t.signal_id.clone(),
                listener_id: t.listener_id.clone(),
                system_id: t.system_id.clone(),
                correctness: t.correctness,
                raw_score: raw,
                mapped_score: logistic(raw, params),
            }),
            None => skipped += 1,
        }
    }
    if records.is_empty() {
        return Err(CliError::Data("no scored trials in the eval split".into()));
    }
    Ok((records, skipped))
}

/// Distinct levels present in a score file, sorted.
pub fn score_levels(scores: &[ScoreRow]) -> Vec<Level> {
    let set: BTreeSet<Level> = scores.iter().map(|s| s.level).collect();
    set.into_iter().collect()
}
