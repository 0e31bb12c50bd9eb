//! Run configuration: one file holds every section, flags override it and the
//! resolved result is written next to the outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sparse_radar::doa::{MusicOptions, Taper};
use sparse_radar::eval::MatchConfig;
use sparse_radar::neural::{LossMode, NetworkConfig, OutputActivation, RefCnnConfig, TrainConfig};
use sparse_radar::pipeline::PipelineConfig;
use sparse_radar::psf::PsfConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub simulate: SimulateSection,
    pub psf: PsfConfig,
    pub network: NetworkConfig,
    pub reference_cnn: RefCnnConfig,
    pub train: TrainSection,
    pub music: MusicOptions,
    pub das_taper: Taper,
    pub eval: MatchConfig,
    /// Dynamic range of exported graymaps.
    pub pgm_dynamic_range_db: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            pipeline: PipelineConfig::default(),
            simulate: SimulateSection::default(),
            psf: PsfConfig::default(),
            network: NetworkConfig::default(),
            reference_cnn: RefCnnConfig::default(),
            train: TrainSection::default(),
            music: MusicOptions::default(),
            das_taper: Taper::Hann,
            eval: MatchConfig::default(),
            pgm_dynamic_range_db: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_scenes: usize,
    /// Index of the first scene; scene `i` is reproducible on its own.
    pub first_index: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { n_scenes: 10, first_index: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    #[serde(flatten)]
    pub core: TrainConfig,
    /// Trailing dataset entries held out for validation loss.
    pub validation_count: usize,
    /// Share of the primary dataset when a second one is mixed in.
    pub mix_fraction: f64,
    /// Size of the mixed set; the largest feasible size when unset.
    pub mix_total: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { core: TrainConfig::default(), validation_count: 0, mix_fraction: 0.5, mix_total: None }
    }
}

impl RunConfig {
    /// Reads a TOML (`.toml`) or JSON file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Ties derived sizes to the pipeline and validates every section.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.train.core.seed = self.seed;
        let p = &self.pipeline;
        self.network.input_height = p.range_bins;
        self.network.input_width = p.angle_bins;
        self.network.output = OutputActivation::for_loss(self.train.core.loss.mode);
        self.reference_cnn.n_out = p.angle_bins;
        self.reference_cnn.n_elements = p.input_array()?.n_v();
        self.reference_cnn.output = match self.train.core.loss.mode {
            LossMode::Classification => OutputActivation::Sigmoid,
            LossMode::Regression => OutputActivation::None,
        };
        p.validate()?;
        self.network.validate()?;
        self.train.core.validate()?;
        self.eval.validate()?;
        if !(0.0..=1.0).contains(&self.train.mix_fraction) {
            return Err(CliError::Config(format!("mix fraction {} outside [0, 1]", self.train.mix_fraction)));
        }
        if !(self.pgm_dynamic_range_db > 0.0) {
            return Err(CliError::Config("graymap dynamic range must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "seed = 4\n[pipeline]\narray = \"sparse6\"\n[train]\nepochs = 3\n[train.optimizer]\nkind = \"sgd\"\nlr = 0.01\nmomentum = 0.9\n").unwrap();
        let a = RunConfig::load(&t).unwrap();
        assert_eq!(a.seed, 4);
        assert_eq!(a.train.core.epochs, 3);
        let j = dir.path().join("c.json");
        std::fs::write(&j, serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(RunConfig::load(&j).unwrap(), a);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "sed = 4\n").unwrap();
        assert!(matches!(RunConfig::load(&t), Err(CliError::Config(_))));
    }

    #[test]
    fn resolve_ties_sizes() {
        let mut c = RunConfig::default();
        c.pipeline.array = sparse_radar::geometry::ArrayKind::Sparse6;
        c.resolve().unwrap();
        assert_eq!(c.reference_cnn.n_elements, 18);
        assert_eq!((c.network.input_height, c.network.input_width), (64, 64));
        c.pipeline.angle_bins = 0;
        assert!(matches!(c.resolve(), Err(CliError::Config(_))));
    }
}
