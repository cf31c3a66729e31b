//! Experiment configuration: a sectioned key-value file layered over defaults.
//!
//! ```text
//! [experiment]
//! societies = ["nest", "primitive"]
//! num_seeds = 5
//!
//! [world]
//! population = 50
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::disease::{DiseaseParams, ObservationModel};
use crate::learning::LearnParams;
use crate::social::{Mixture, Society, SocietyProfile};
use crate::world::WorldConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub societies: Vec<Society>,
    /// Explicit seeds; when absent, `num_seeds` sequential seeds from `base_seed`.
    pub seeds: Option<Vec<u64>>,
    pub num_seeds: u32,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub rolling_window: usize,
    /// Trailing evaluation steps averaged as the converged value.
    pub convergence_window: usize,
    /// Parallel runs; 0 uses every core.
    pub jobs: usize,
    /// Norm listing file replacing the default norm set.
    pub norms_file: Option<PathBuf>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            societies: vec![Society::Nest],
            seeds: None,
            num_seeds: 20,
            base_seed: 0,
            output_dir: PathBuf::from("runs"),
            rolling_window: crate::metrics::DEFAULT_WINDOW,
            convergence_window: 500,
            jobs: 0,
            norms_file: None,
        }
    }
}

/// Fields replacing the society preset's values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocietyOverrides {
    pub mixture: Option<Mixture>,
    pub w_immediate: Option<f64>,
    pub w_potential: Option<f64>,
    pub kappa: Option<f64>,
    pub mild_gate: Option<f64>,
    pub critical_gate: Option<f64>,
    pub approval_gate: Option<f64>,
}

impl SocietyOverrides {
    pub fn apply(&self, mut p: SocietyProfile) -> SocietyProfile {
        if let Some(m) = self.mixture {
            p.mixture = m;
        }
        if let Some(w) = self.w_potential {
            p.w_potential = w;
            p.kappa = w;
        }
        let fields = [
            (self.w_immediate, &mut p.w_immediate),
            (self.kappa, &mut p.kappa),
            (self.mild_gate, &mut p.mild_gate),
            (self.critical_gate, &mut p.critical_gate),
            (self.approval_gate, &mut p.approval_gate),
        ];
        for (v, slot) in fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
        p
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub world: WorldConfig,
    pub disease: DiseaseParams,
    pub observation: ObservationModel,
    pub society: SocietyOverrides,
    pub learning: LearnParams,
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        text.parse()
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.experiment.seeds {
            Some(s) => s.clone(),
            None => (0..self.experiment.num_seeds as u64)
                .map(|i| self.experiment.base_seed.wrapping_add(i))
                .collect(),
        }
    }

    pub fn profile(&self, society: Society) -> SocietyProfile {
        self.society.apply(SocietyProfile::preset(society))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = ConfigError::Invalid;
        if self.seeds().is_empty() {
            return Err(bad("at least one seed is required".into()));
        }
        if self.experiment.societies.is_empty() {
            return Err(bad("at least one society is required".into()));
        }
        if self.experiment.rolling_window == 0 || self.experiment.convergence_window == 0 {
            return Err(bad("windows must be at least 1".into()));
        }
        if self.world.episode_steps == 0 {
            return Err(bad("episode_steps must be at least 1".into()));
        }
        self.world.validate().map_err(|e| bad(e.to_string()))?;
        self.disease
            .validate()
            .map_err(|e| bad(format!("disease: {e}")))?;
        self.observation
            .validate()
            .map_err(|e| bad(format!("observation: {e}")))?;
        self.learning
            .validate()
            .map_err(|e| bad(format!("learning: {e}")))?;
        for &s in &self.experiment.societies {
            self.profile(s)
                .validate()
                .map_err(|e| bad(format!("society {}: {e}", s.name())))?;
        }
        Ok(())
    }

    /// SHA-256 over the resolved configuration with keys sorted, so it does
    /// not depend on how the source file was laid out.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.seeds(), (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn sections_override_defaults() {
        let c = ExperimentConfig::from_str(
            "[experiment]\nsocieties = [\"tell\", \"nest\"]\nbase_seed = 7\nnum_seeds = 2\n\n\
             [world]\npopulation = 50\n\n[society]\napproval_gate = 0.25\n\n\
             [disease.progress]\nasymptomatic = 0.1\nmild = 0.02\ncritical = 0.01\n",
        )
        .unwrap();
        assert_eq!(c.experiment.societies, vec![Society::Tell, Society::Nest]);
        assert_eq!(c.seeds(), vec![7, 8]);
        assert_eq!(c.world.population, 50);
        assert_eq!(c.world.episode_steps, 2000);
        assert_eq!(c.disease.progress.mild, 0.02);
        assert_eq!(c.disease.progress.critical, 0.01);
        assert_eq!(c.profile(Society::Nest).approval_gate, 0.25);
        assert_eq!(c.profile(Society::Nest).kappa, 0.3);
    }

    #[test]
    fn unknown_keys_and_societies_rejected() {
        assert!(matches!(
            ExperimentConfig::from_str("[world]\npopulaton = 5\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_str("[experiment]\nsocieties = [\"anarchy\"]\n"),
            Err(ConfigError::Parse(_))
        ));
        let mut c = ExperimentConfig::default();
        c.experiment.seeds = Some(vec![]);
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = ExperimentConfig::from_str(
            "[world]\npopulation = 40\nepisode_steps = 10\n[learning]\nepsilon = 0.2\n",
        )
        .unwrap();
        let b = ExperimentConfig::from_str(
            "[learning]\nepsilon = 0.2\n[world]\nepisode_steps = 10\npopulation = 40\n",
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ExperimentConfig::default().hash());
    }
}
