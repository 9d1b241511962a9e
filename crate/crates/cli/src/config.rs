//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use apiscope_core::bench::BenchConfig;
use apiscope_core::denoise::FilterConfig;
use apiscope_core::noise::CorpusSpec;
use apiscope_core::pipeline::{Ablations, PipelineConfig};
use apiscope_core::refine::RefinerConfig;
use apiscope_core::template::MinerConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub filter: FilterConfig,
    pub miner: MinerConfig,
    pub refiner: RefinerConfig,
    pub ablations: Ablations,
    pub corpus: CorpusSpec,
    pub bench: BenchConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            filter: self.filter.clone(),
            miner: self.miner.clone(),
            refiner: self.refiner.clone(),
            ablations: self.ablations,
            seed: self.seed,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub disable_nf: bool,
    pub disable_templates: bool,
    pub force_kmeans: bool,
}

impl Overrides {
    pub fn apply(&self, file: &mut FileConfig) {
        if let Some(s) = self.seed {
            file.seed = s;
        }
        if let Some(t) = self.theta {
            file.refiner.theta = t;
        }
        if let Some(l) = self.lambda {
            file.refiner.lambda = l;
        }
        if let Some(t) = self.tau {
            file.filter.tau = t;
        }
        file.ablations.disable_noise_filter |= self.disable_nf;
        file.ablations.disable_template_mining |= self.disable_templates;
        file.ablations.force_kmeans |= self.force_kmeans;
    }
}
