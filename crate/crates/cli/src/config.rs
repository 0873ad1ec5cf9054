//! Experiment configuration: one JSON file, overridable from flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rm4d::{GridParams, MapKind, RobotModel};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Builtin robot name or path to a description file.
    pub robot: String,
    pub map_type: String,
    pub grid: GridConfig,
    pub schedule: ScheduleConfig,
    pub eval: Option<EvalConfig>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Defaults to the robot's reach.
    pub r_xy: Option<f64>,
    pub r_z: Option<f64>,
    pub cell_size: f64,
    pub delta_theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub total_samples: u64,
    pub checkpoint_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub count: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            robot: "ideal6".into(),
            map_type: "rm4d".into(),
            grid: GridConfig::default(),
            schedule: ScheduleConfig::default(),
            eval: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r_xy: None,
            r_z: None,
            cell_size: 0.05,
            delta_theta_deg: 5.0,
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_samples: 5_000_000,
            checkpoint_every: 100_000,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { count: 10_000, seed: 1 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("reading config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))
    }

    pub fn map_kind(&self) -> Result<MapKind, CliError> {
        self.map_type.parse().map_err(CliError::Usage)
    }

    pub fn grid_params(&self, model: &RobotModel) -> Result<GridParams, CliError> {
        GridParams::with_degrees(
            self.grid.r_xy.unwrap_or(model.reach_xy()),
            self.grid.r_z.unwrap_or(model.reach_z()),
            self.grid.cell_size,
            self.grid.delta_theta_deg,
        )
        .map_err(CliError::from)
    }

    /// Short hash of the resolved configuration, for naming runs.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:08x}", crc32fast::hash(canonical.as_bytes()))
    }
}
