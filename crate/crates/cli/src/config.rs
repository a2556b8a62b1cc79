use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hrsim_core::asr::ToyAsrConfig;
use hrsim_core::sim::DEFAULT_DTW_RADIUS;
use hrsim_core::{FeatConfig, Level};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which trials the calibration is fitted on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSplit {
    #[default]
    Dev,
    /// Train and dev trials together.
    TrainAll,
}

impl FitSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            FitSplit::Dev => "dev",
            FitSplit::TrainAll => "train_all",
        }
    }
}

impl fmt::Display for FitSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dev" => Ok(FitSplit::Dev),
            "train_all" => Ok(FitSplit::TrainAll),
            _ => Err(format!("unknown fit split {s:?} (expected dev or train_all)")),
        }
    }
}

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub feat: FeatConfig,
    pub asr: ToyAsrConfig,
    pub level: Option<Level>,
    pub dtw_radius: Option<usize>,
    pub fit_split: Option<FitSplit>,
    pub wcs_percent: Option<bool>,
    pub lenient: Option<bool>,
    pub manifest: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Command-line values; `None` (or `false`) defers to the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub level: Option<Level>,
    pub dtw_radius: Option<usize>,
    pub fit_split: Option<FitSplit>,
    pub wcs_percent: bool,
    pub lenient: bool,
    pub manifest: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub feat: FeatConfig,
    pub asr: ToyAsrConfig,
    pub level: Level,
    /// Only used when `level` is `dec`.
    pub dtw_radius: usize,
    pub fit_split: FitSplit,
    pub wcs_percent: bool,
    pub lenient: bool,
    pub manifest: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::resolve(FileConfig::default(), &Overrides::default())
    }
}

impl PipelineConfig {
    /// Command-line values win over file values, which win over defaults.
    pub fn resolve(file: FileConfig, cli: &Overrides) -> Self {
        Self {
            feat: file.feat,
            asr: file.asr,
            level: cli.level.or(file.level).unwrap_or(Level::Dec),
            dtw_radius: cli.dtw_radius.or(file.dtw_radius).unwrap_or(DEFAULT_DTW_RADIUS),
            fit_split: cli.fit_split.or(file.fit_split).unwrap_or_default(),
            wcs_percent: cli.wcs_percent || file.wcs_percent.unwrap_or(false),
            lenient: cli.lenient || file.lenient.unwrap_or(false),
            manifest: cli.manifest.clone().or(file.manifest),
            cache_dir: cli.cache_dir.clone().or(file.cache_dir).unwrap_or_else(|| PathBuf::from("hrsim-cache")),
            out_dir: cli.out_dir.clone().or(file.out_dir).unwrap_or_else(|| PathBuf::from(".")),
        }
    }

    pub fn load(config: Option<&Path>, cli: &Overrides) -> CliResult<Self> {
        let file = match config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let cfg = Self::resolve(file, cli);
        cfg.asr.validate()?;
        Ok(cfg)
    }

    pub fn manifest_path(&self) -> CliResult<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| CliError::Usage("--manifest is required for this command".into()))
    }

    pub fn scores_path(&self) -> PathBuf {
        self.out_dir.join("scores.csv")
    }

    pub fn params_path(&self) -> PathBuf {
        self.out_dir.join("params.json")
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }
}
