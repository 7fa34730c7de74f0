use std::path::{Path, PathBuf};

use newsjump_core::market_data::synthetic::SyntheticDesign;
use newsjump_core::market_data::{PipelineConfig, WindowConfig};
use newsjump_core::mc::McDesign;
use newsjump_core::sim::{EventDesign, HestonParams, JumpSpec, NoiseSpec, SimulationRecord, TransitionSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which result formats to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }
}

/// One simulated window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub window: f64,
    pub heston: HestonParams,
    pub event: EventDesign,
    pub jump_size: f64,
    pub vol_jump_scale: f64,
    pub terminal_dev: f64,
    pub noise: NoiseSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: 21_600,
            window: 10_800.0,
            heston: HestonParams::default(),
            event: EventDesign::default(),
            jump_size: -0.027,
            vol_jump_scale: 10.0,
            terminal_dev: 0.0,
            noise: NoiseSpec::default(),
        }
    }
}

impl SimulateConfig {
    pub fn record(&self, seed: u64) -> SimulationRecord {
        let jump = JumpSpec {
            tau: self.event.tau,
            jump_size: self.jump_size,
            vol_jump: self.vol_jump_scale * self.heston.theta,
            vol_jump_decay: self.event.vol_jump_decay,
            vol_jump_scale: self.vol_jump_scale,
        };
        SimulationRecord {
            heston: self.heston,
            jump,
            transition: TransitionSpec {
                eta: self.event.eta,
                theta_pn: self.event.theta_pn,
                tau_bar: self.event.tau + self.event.transition_seconds,
                terminal_dev: self.terminal_dev,
            },
            noise: self.noise,
            n: self.n,
            window: self.window,
            seed,
        }
    }
}

/// Everything a run reads. Config files override these defaults and flags
/// override the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; overrides the seed of whichever design the command runs.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub format: Format,
    pub simulate: SimulateConfig,
    pub mc: McDesign,
    pub window: WindowConfig,
    pub pipeline: PipelineConfig,
    pub synthetic: SyntheticDesign,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            threads: None,
            output_dir: None,
            format: Format::Both,
            simulate: SimulateConfig::default(),
            mc: McDesign::default(),
            window: WindowConfig::default(),
            pipeline: PipelineConfig::default(),
            synthetic: SyntheticDesign::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}
