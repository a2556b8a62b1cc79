use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hrsim_core::{Grouping, Level};

use crate::config::{FitSplit, Overrides, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, FitOutput, StageSummary};
use crate::report::{build_report, read_report, render_table, write_reports};
use crate::scores::{read_scores, write_scores};

#[derive(Debug, Parser)]
#[command(name = "hrsim", version, about = "Speech intelligibility from hidden-representation similarity")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Trial manifest (JSON).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Representation cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for scores, parameters and reports.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Representation level to compare.
    #[arg(long, global = true, value_parser = parse_level)]
    pub level: Option<Level>,
    /// Warping radius for decoder-level comparison.
    #[arg(long, global = true)]
    pub dtw_radius: Option<usize>,
    /// Trials used to fit the calibration.
    #[arg(long, global = true, value_parser = parse_fit_split)]
    pub fit_split: Option<FitSplit>,
    /// Manifest correctness values are percentages.
    #[arg(long, global = true)]
    pub wcs_percent: bool,
    /// Flag trials with missing or unreadable inputs instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute log-mel features for every signal into the cache.
    Featurize,
    /// Run the toy recogniser and cache hidden representations.
    Forward(ForwardArgs),
    /// Score every trial and write scores.csv.
    Sim,
    /// Fit the logistic calibration and write params.json.
    Fit,
    /// Evaluate calibrated scores on the eval split.
    Eval(EvalArgs),
    /// Print report.json as a table.
    Report(ReportArgs),
    /// featurize, forward, sim, fit and eval in sequence.
    Run(EvalArgs),
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Levels to write.
    #[arg(long, value_delimiter = ',', value_parser = parse_level, default_value = "pre,enc,dec")]
    pub levels: Vec<Level>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Trial,
    Listener,
    System,
}

impl From<GroupArg> for Grouping {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Trial => Grouping::Trial,
            GroupArg::Listener => Grouping::Listener,
            GroupArg::System => Grouping::System,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Groupings to report.
    #[arg(long, value_delimiter = ',', value_enum, default_value = "trial,listener,system")]
    pub group_by: Vec<GroupArg>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report to render; defaults to report.json in the output directory.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: hrsim_core::Error| e.to_string())
}

fn parse_fit_split(s: &str) -> Result<FitSplit, String> {
    s.parse()
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            level: self.level,
            dtw_radius: self.dtw_radius,
            fit_split: self.fit_split,
            wcs_percent: self.wcs_percent,
            lenient: self.lenient,
            manifest: self.manifest.clone(),
            cache_dir: self.cache_dir.clone(),
            out_dir: self.out_dir.clone(),
        }
    }
}

fn report_stage(name: &str, s: &StageSummary, lenient: bool) -> CliResult<()> {
    eprintln!("{name}: {} written, {} up to date", s.written, s.skipped);
    for (id, why) in &s.failures {
        eprintln!("{name}: signal {id} failed: {why}");
    }
    if !s.failures.is_empty() && !lenient {
        return Err(CliError::Data(format!("{name}: {} signal(s) failed", s.failures.len())));
    }
    Ok(())
}

fn run_featurize(cfg: &PipelineConfig) -> CliResult<()> {
    let manifest = pipeline::open_manifest(cfg, true)?;
    for issue in &manifest.issues {
        eprintln!("featurize: flagged trial {} ({}): {}", issue.index, issue.signal_id, issue.message);
    }
    let s = pipeline::featurize(cfg, &manifest)?;
    report_stage("featurize", &s, cfg.lenient)
}

fn run_forward(cfg: &PipelineConfig, levels: &[Level]) -> CliResult<()> {
    let manifest = pipeline::open_manifest(cfg, false)?;
    let s = pipeline::forward(cfg, &manifest, levels)?;
    report_stage("forward", &s, cfg.lenient)
}

fn run_sim(cfg: &PipelineConfig) -> CliResult<()> {
    let manifest = pipeline::open_manifest(cfg, cfg.lenient)?;
    let rows = pipeline::sim(cfg, &manifest)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    write_scores(&cfg.scores_path(), &rows, now_unix())?;
    eprintln!("sim: {} trials scored at level {}, {failed} with errors", rows.len() - failed, cfg.level);
    if failed == rows.len() && !rows.is_empty() {
        return Err(CliError::Data("sim: no trial could be scored".into()));
    }
    Ok(())
}

fn run_fit(cfg: &PipelineConfig) -> CliResult<()> {
    let manifest = pipeline::open_manifest(cfg, false)?;
    let scores = read_scores(&cfg.scores_path())?;
    let out = pipeline::fit(&manifest.records, &scores, cfg.fit_split)?;
    let mut json = serde_json::to_string_pretty(&out).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    crate::cache::write_atomic(&cfg.params_path(), json.as_bytes())?;
    eprintln!("fit: a = {}, b = {}, rmse = {} over {} trials", out.a, out.b, out.fit_rmse, out.n_dev);
    Ok(())
}

fn run_eval(cfg: &PipelineConfig, args: &EvalArgs) -> CliResult<()> {
    let manifest = pipeline::open_manifest(cfg, false)?;
    let scores = read_scores(&cfg.scores_path())?;
    let params_path = cfg.params_path();
    let text = std::fs::read_to_string(&params_path).map_err(|e| CliError::data(params_path.display(), e))?;
    let params: FitOutput = serde_json::from_str(&text).map_err(|e| CliError::data(params_path.display(), e))?;
    let (records, skipped) = pipeline::predictions(&manifest.records, &scores, params.params())?;
    let levels = pipeline::score_levels(&scores);
    let level = match levels.as_slice() {
        [l] => Some(*l),
        _ => None,
    };
    let mut groupings: Vec<Grouping> = args.group_by.iter().map(|&g| g.into()).collect();
    groupings.dedup();
    let report = build_report(&records, skipped, params, level, &groupings, now_unix())?;
    write_reports(&cfg.out_dir, &report, &records)?;
    print!("{}", render_table(&report));
    Ok(())
}

fn run_report(cfg: &PipelineConfig, args: &ReportArgs) -> CliResult<()> {
    let path = args.report.clone().unwrap_or_else(|| cfg.report_path());
    print!("{}", render_table(&read_report(&path)?));
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = PipelineConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    match &cli.command {
        Command::Featurize => run_featurize(&cfg),
        Command::Forward(a) => run_forward(&cfg, &a.levels),
        Command::Sim => run_sim(&cfg),
        Command::Fit => run_fit(&cfg),
        Command::Eval(a) => run_eval(&cfg, a),
        Command::Report(a) => run_report(&cfg, a),
        Command::Run(a) => {
            run_featurize(&cfg)?;
            run_forward(&cfg, &[cfg.level.max(Level::Pre)])?;
            run_sim(&cfg)?;
            run_fit(&cfg)?;
            run_eval(&cfg, a)
        }
    }
}
