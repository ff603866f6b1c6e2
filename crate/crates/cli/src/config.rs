use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use texture_space::grouping::ParticipantModel;
use texture_space::mds::MdsOptions;
use texture_space::pipeline::{AnalysisConfig, DEFAULT_ANALYSIS_K, DEFAULT_K_MAX, DEFAULT_PARTICIPANTS};
use texture_space::space::AnalysisOptions;
use texture_space::synthesis::{
    build_texture_set, TextureSet, CURRENT_CENTER_MA, CURRENT_SPAN_MA, DEFAULT_DURATION_S, DEFAULT_FS,
};

use crate::CliError;

/// Everything a pipeline run depends on. Every field has a default, so an
/// empty file (or no file) reproduces the reference study.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root for command outputs; each command writes to its own subdirectory.
    pub out: Option<PathBuf>,
    pub synthesis: SynthesisConfig,
    pub experiment: ExperimentConfig,
    pub mds: MdsConfig,
    pub analysis: AnalysisOptions,
    pub sweep: SweepConfig,
    pub serve: ServeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub fs: f64,
    pub duration_s: f64,
    pub base_seed: u64,
    /// Also write each texture as drive current in mA.
    pub current_csv: bool,
    pub center_ma: f64,
    pub span_ma: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            fs: DEFAULT_FS,
            duration_s: DEFAULT_DURATION_S,
            base_seed: 0,
            current_csv: true,
            center_ma: CURRENT_CENTER_MA,
            span_ma: CURRENT_SPAN_MA,
        }
    }
}

impl SynthesisConfig {
    pub fn texture_set(&self) -> Result<TextureSet, CliError> {
        if !(self.fs > 0.0 && self.fs.fract() == 0.0 && self.fs <= f64::from(u32::MAX)) {
            return Err(CliError::Validation(format!("synthesis.fs must be a positive whole number of Hz, got {}", self.fs)));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(CliError::Validation(format!("synthesis.duration_s must be positive, got {}", self.duration_s)));
        }
        Ok(build_texture_set(self.fs, self.duration_s, self.base_seed))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub participants: usize,
    pub seed: u64,
    /// Perceptual model shared by all simulated participants; its
    /// `group_counts` are the targets for the three rounds.
    pub model: ParticipantModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { participants: DEFAULT_PARTICIPANTS, seed: 0, model: ParticipantModel::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdsConfig {
    /// Dimensionality the report describes.
    pub k: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for MdsConfig {
    fn default() -> Self {
        let o = MdsOptions::default();
        Self { k: DEFAULT_ANALYSIS_K, k_max: DEFAULT_K_MAX, restarts: o.restarts, max_iter: o.max_iter, tol: o.tol, seed: o.seed }
    }
}

impl MdsConfig {
    pub fn options(&self) -> MdsOptions {
        MdsOptions { restarts: self.restarts, max_iter: self.max_iter, tol: self.tol, seed: self.seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub duration_s: f64,
    pub rpm: f64,
    pub radius_mm: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { f_start_hz: 10.0, f_end_hz: 1000.0, duration_s: 10.0, rpm: 33.0, radius_mm: 60.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Where session logs are kept; in memory only when unset.
    pub sessions_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self { addr: SocketAddr::from(([127, 0, 0, 1], 8080)), sessions_dir: None }
    }
}

impl PipelineConfig {
    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = crate::read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn out_dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out")).join(command)
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            k: self.mds.k,
            k_max: self.mds.k_max,
            mds: self.mds.options(),
            analysis: self.analysis.clone(),
        }
    }
}
