//! Pipeline configuration, read from TOML.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationParams;
use crate::evaluation::EvalParams;
use crate::mapgraph::{IcpParams, MergeStrategy};
use crate::placards::ReadParams;
use crate::reconstruction::ReconstructionParams;

/// How tracking losses are bridged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeParams {
    /// `false` assumes the camera stood still across every loss instead of
    /// aligning the depth clouds.
    pub use_icp: bool,
    /// Alignments with a larger RMS residual leave the submap unmerged.
    pub max_rms: f64,
    pub icp: IcpParams,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            use_icp: true,
            max_rms: 0.05,
            icp: IcpParams::default(),
        }
    }
}

impl MergeParams {
    pub fn strategy(&self) -> MergeStrategy {
        if self.use_icp {
            MergeStrategy::Icp {
                params: self.icp,
                max_rms: self.max_rms,
            }
        } else {
            MergeStrategy::AssumeStationary
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Detections below this confidence are ignored.
    pub confidence_threshold: f64,
    pub merge: MergeParams,
    pub placards: ReadParams,
    pub reconstruction: ReconstructionParams,
    pub aggregation: AggregationParams,
    pub evaluation: EvalParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.9,
            merge: MergeParams::default(),
            placards: ReadParams::default(),
            reconstruction: ReconstructionParams::default(),
            aggregation: AggregationParams::default(),
            evaluation: EvalParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            bail!("confidence_threshold must lie in [0, 1]");
        }
        if !(self.merge.max_rms > 0.0) {
            bail!("merge.max_rms must be positive");
        }
        let checks = [
            self.merge.icp.validate(),
            self.placards.validate(),
            self.reconstruction.validate(),
            self.aggregation.validate(),
            self.evaluation.validate(),
        ];
        for c in checks {
            c.map_err(anyhow::Error::msg)?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(text).context("malformed config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Full TOML dump; parsing it back yields the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
