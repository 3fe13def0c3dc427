//! Versioned run configuration covering every tunable default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::LassoConfig;
use crate::error::{Result, SdamiError};
use crate::footprint::{DEFAULT_GRID_POINTS, DEFAULT_N_MC, DEFAULT_THRESHOLD};
use crate::metrics::{Method, MethodConfigs};
use crate::pipeline::{config_hash, PipelineConfig};

pub const CONFIG_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub case: u32,
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    pub n_test: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            case: 1,
            n: 150,
            k: 150,
            sigma: 0.5,
            n_test: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FootprintConfig {
    pub grid_points: usize,
    pub n_mc: usize,
    pub threshold: f64,
}

impl Default for FootprintConfig {
    fn default() -> Self {
        FootprintConfig {
            grid_points: DEFAULT_GRID_POINTS,
            n_mc: DEFAULT_N_MC,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub reps: usize,
    pub methods: Vec<Method>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            reps: 20,
            methods: vec![Method::Sdami, Method::Lasso, Method::Dnn, Method::Fspam],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u64,
    pub seed: u64,
    pub simulation: SimulationConfig,
    pub pipeline: PipelineConfig,
    pub lasso: LassoConfig,
    pub footprint: FootprintConfig,
    pub benchmark: BenchmarkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 0,
            simulation: SimulationConfig::default(),
            pipeline: PipelineConfig::default(),
            lasso: LassoConfig::default(),
            footprint: FootprintConfig::default(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SdamiError::io(path, e))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(SdamiError::Version {
                found: self.version,
                expected: CONFIG_VERSION,
            });
        }
        self.pipeline.validate()?;
        if self.footprint.grid_points < 5 || self.footprint.n_mc < crate::footprint::MIN_N_MC {
            return Err(SdamiError::InvalidArgument(
                "footprint needs grid_points >= 5 and n_mc >= 100".into(),
            ));
        }
        if self.benchmark.reps == 0 {
            return Err(SdamiError::InvalidArgument(
                "benchmark reps must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn method_configs(&self) -> MethodConfigs {
        MethodConfigs {
            pipeline: self.pipeline.clone(),
            lasso: self.lasso.clone(),
        }
    }
}
