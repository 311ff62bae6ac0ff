use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{AnchorMode, BoundsProblem};
use crate::calibration::CalibrationParams;
use crate::chaos::ScenarioConfig;
use crate::error::{invalid, Error, Result};
use crate::model::{DemandCurve, MarketSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// One JSON document with a section per subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub allocate: Option<AllocationConfig>,
    #[serde(default)]
    pub worst: Option<AllocationConfig>,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub simulate: Option<ScenarioConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub calibrate: Option<CalibrateConfig>,
}

impl RunConfig {
    pub fn empty() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            allocate: None,
            worst: None,
            bounds: None,
            simulate: None,
            sweep: None,
            calibrate: None,
        }
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if let Some(c) = cfg.calibrate.as_mut() {
            if let (Some(survey), Some(dir)) = (c.survey.as_mut(), path.parent()) {
                if survey.is_relative() {
                    *survey = dir.join(&*survey);
                }
            }
        }
        Ok(cfg)
    }
}

/// Markets facing one ceiling with a fixed supply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    pub markets: Vec<MarketSpec>,
    pub ceiling: f64,
    pub supply: f64,
    /// Aggregate demand without the ceiling, for the Harberger comparison.
    #[serde(default)]
    pub harberger: Option<HarbergerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarbergerConfig {
    pub aggregate: DemandCurve,
    pub base_price: f64,
    pub base_quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub problem: BoundsProblem,
    #[serde(default)]
    pub anchors: AnchorMode,
    /// Loss used to express the bounds as ratios.
    #[serde(default)]
    pub harberger: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub demands: Vec<DemandCurve>,
    pub caps: Vec<f64>,
    pub supply: f64,
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default)]
    pub params: CalibrationParams,
    /// Survey CSV; the bundled synthetic table when absent.
    #[serde(default)]
    pub survey: Option<PathBuf>,
    #[serde(default)]
    pub anchors: Option<AnchorMode>,
}
