//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qrobust::attacks::AttackKind;
use qrobust::certify::{PConvention, ProbabilitySource};
use qrobust::noise::{NoiseKind, NoisePosition};
use qrobust::{GradBackend, Loss, NoiseSpec64, SplitSpec, TrainMode};

use crate::CliError;

/// Overrides the base directory of relative dataset paths.
pub const DATA_DIR_ENV: &str = "QROBUST_DATA_DIR";

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub train: TrainBlock,
    #[serde(default)]
    pub noise: Vec<NoiseBlock>,
    #[serde(default)]
    pub attack: AttackBlock,
    #[serde(default)]
    pub certify: CertifyBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Iris,
    Bc,
    Pid,
    Mnist2,
    Mnist4,
    Mnist10,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum SplitBlock {
    Counts { train: usize, val: usize, test: usize },
    Fractions { held_out: f64, test_fraction: f64 },
}

impl From<&SplitBlock> for SplitSpec {
    fn from(s: &SplitBlock) -> Self {
        match *s {
            SplitBlock::Counts { train, val, test } => SplitSpec::Counts { train, val, test },
            SplitBlock::Fractions { held_out, test_fraction } => SplitSpec::Fractions { held_out, test_fraction },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: DatasetName,
    /// CSV file (`csv`) or directory holding the IDX files (`mnist*`).
    pub path: Option<PathBuf>,
    /// Label column of a CSV dataset.
    pub label_column: Option<String>,
    /// Preprocessing steps of a CSV dataset, e.g. `"drop_feature(id)"`.
    #[serde(default)]
    pub recipe: Vec<String>,
    pub split: Option<SplitBlock>,
    pub max_samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// Defaults to the fewest qubits that encode the feature vector.
    pub n_qubits: Option<usize>,
    #[serde(default = "default_layers")]
    pub n_layers: usize,
    #[serde(default = "default_measured")]
    pub n_measured: usize,
    /// Must match the dataset when given.
    pub n_classes: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Evaluate this checkpoint instead of training (sweep, certify).
    pub checkpoint: Option<PathBuf>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            n_qubits: None,
            n_layers: default_layers(),
            n_measured: default_measured(),
            n_classes: None,
            seed: 0,
            checkpoint: None,
        }
    }
}

fn default_layers() -> usize {
    2
}

fn default_measured() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    #[default]
    CrossEntropy,
    Nll,
}

impl From<LossName> for Loss {
    fn from(l: LossName) -> Self {
        match l {
            LossName::CrossEntropy => Loss::CrossEntropy,
            LossName::Nll => Loss::Nll,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Vanilla,
    Adversarial,
    Smoothing,
}

impl From<ModeName> for TrainMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Vanilla => TrainMode::Vanilla,
            ModeName::Adversarial => TrainMode::Adversarial,
            ModeName::Smoothing => TrainMode::Smoothing,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    Auto,
    #[default]
    Adjoint,
    ParameterShift,
    FiniteDiff,
}

impl From<BackendName> for GradBackend {
    fn from(b: BackendName) -> Self {
        match b {
            BackendName::Auto => GradBackend::Auto,
            BackendName::Adjoint => GradBackend::Adjoint,
            BackendName::ParameterShift => GradBackend::ParameterShift,
            BackendName::FiniteDiff => GradBackend::FiniteDiff,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub loss: LossName,
    #[serde(default)]
    pub mode: ModeName,
    /// PGD budget and steps of adversarial training.
    pub attack_epsilon: Option<f64>,
    pub attack_steps: Option<usize>,
    /// Half-width of the smoothing noise.
    pub sigma: Option<f64>,
    pub early_stop_loss: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backend: BackendName,
}

impl Default for TrainBlock {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 30,
            epochs: 100,
            loss: LossName::default(),
            mode: ModeName::default(),
            attack_epsilon: None,
            attack_steps: None,
            sigma: None,
            early_stop_loss: None,
            seed: 0,
            backend: BackendName::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindName {
    Global,
    PerQubit,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub kind: NoiseKindName,
    /// Probability grid; each value is applied at every listed position.
    pub p: Vec<f64>,
    /// `"every_layer"`, `"before_measurement"` or `"layer:<l>"`.
    #[serde(default = "default_positions")]
    pub positions: Vec<String>,
}

fn default_positions() -> Vec<String> {
    vec!["before_measurement".into()]
}

impl NoiseBlock {
    /// Noise model with probability `p`.
    pub fn spec(&self, p: f64, n_layers: usize) -> Result<NoiseSpec64, CliError> {
        let mut positions = Vec::new();
        for pos in &self.positions {
            match pos.as_str() {
                "every_layer" => positions.extend((0..n_layers).map(NoisePosition::AfterLayer)),
                "before_measurement" => positions.push(NoisePosition::BeforeMeasurement),
                other => {
                    let layer = other
                        .strip_prefix("layer:")
                        .and_then(|l| l.parse().ok())
                        .ok_or_else(|| CliError::Config(format!("unknown noise position `{other}`")))?;
                    positions.push(NoisePosition::AfterLayer(layer));
                }
            }
        }
        let kind = match self.kind {
            NoiseKindName::Global => NoiseKind::Global,
            NoiseKindName::PerQubit => NoiseKind::PerQubit,
        };
        let spec = NoiseSpec64 { kind, probabilities: vec![p], positions };
        spec.validate(n_layers)?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackName {
    Fgsm,
    Pgd,
}

impl From<AttackName> for AttackKind {
    fn from(a: AttackName) -> Self {
        match a {
            AttackName::Fgsm => AttackKind::Fgsm,
            AttackName::Pgd => AttackKind::Pgd,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AttackBlock {
    /// FGSM when a noise block is present, PGD otherwise.
    pub kind: Option<AttackName>,
    pub epsilon: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Defaults to the dataset domain.
    pub clip: Option<[f64; 2]>,
}

fn default_steps() -> usize {
    50
}

impl Default for AttackBlock {
    fn default() -> Self {
        Self { kind: None, epsilon: vec![0.0], steps: default_steps(), clip: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceName {
    #[default]
    Noiseless,
    UnderNoise,
}

impl From<SourceName> for ProbabilitySource {
    fn from(s: SourceName) -> Self {
        match s {
            SourceName::Noiseless => ProbabilitySource::Noiseless,
            SourceName::UnderNoise => ProbabilitySource::UnderNoise,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionName {
    #[default]
    Composed,
    PerChannel,
}

impl From<ConventionName> for PConvention {
    fn from(c: ConventionName) -> Self {
        match c {
            ConventionName::Composed => PConvention::Composed,
            ConventionName::PerChannel => PConvention::PerChannel,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyBlock {
    pub p: Vec<f64>,
    #[serde(default)]
    pub source: SourceName,
    #[serde(default)]
    pub convention: ConventionName,
}

impl Default for CertifyBlock {
    fn default() -> Self {
        Self { p: vec![0.1, 0.5, 0.9], source: SourceName::default(), convention: ConventionName::default() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_plot")]
    pub plot: bool,
}

fn default_plot() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: None, plot: true }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Replaces every seed in the file.
    pub fn override_seed(&mut self, seed: u64) {
        self.dataset.seed = Some(seed);
        self.model.seed = seed;
        self.train.seed = seed;
    }

    /// Attack kind used by the sweep.
    pub fn attack_kind(&self) -> AttackName {
        self.attack
            .kind
            .unwrap_or(if self.noise.is_empty() { AttackName::Pgd } else { AttackName::Fgsm })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.noise.iter().any(|n| n.p.is_empty()) {
            return bad("noise block with an empty probability list".into());
        }
        if self.attack.epsilon.is_empty() {
            return bad("attack epsilon grid is empty".into());
        }
        if self.certify.p.is_empty() {
            return bad("certify p list is empty".into());
        }
        if self.certify.source == SourceName::UnderNoise && self.noise.is_empty() {
            return bad("certify source `under_noise` needs a noise block".into());
        }
        match self.dataset.name {
            DatasetName::Csv if self.dataset.path.is_none() || self.dataset.label_column.is_none() => {
                bad("csv datasets need `path` and `label_column`".into())
            }
            DatasetName::Csv => Ok(()),
            _ if !self.dataset.recipe.is_empty() || self.dataset.label_column.is_some() => {
                bad(format!("`recipe` and `label_column` only apply to csv datasets, not {:?}", self.dataset.name))
            }
            _ => Ok(()),
        }
    }
}

/// Resolves a dataset path against the data directory override, then the config directory.
pub fn resolve_data_path(path: &Path, config_dir: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(path),
        None => config_dir.join(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IRIS: &str = r#"
        [dataset]
        name = "iris"

        [train]
        learning_rate = 0.05
        batch_size = 30
        epochs = 100

        [[noise]]
        kind = "global"
        p = [0.0, 0.5]
        positions = ["every_layer"]
    "#;

    #[test]
    fn defaults_and_attack_choice() {
        let mut c = ExperimentConfig::parse(IRIS).unwrap();
        assert_eq!(c.model.n_layers, 2);
        assert_eq!(c.certify.p, vec![0.1, 0.5, 0.9]);
        assert_eq!(c.attack_kind(), AttackName::Fgsm);
        c.noise.clear();
        assert_eq!(c.attack_kind(), AttackName::Pgd);
        c.validate().unwrap();
    }

    #[test]
    fn noise_positions() {
        let c = ExperimentConfig::parse(IRIS).unwrap();
        let s = c.noise[0].spec(0.5, 3).unwrap();
        assert_eq!(s.positions.len(), 3);
        let mut b = c.noise[0].clone();
        b.positions = vec!["layer:1".into(), "before_measurement".into()];
        assert_eq!(
            b.spec(0.1, 2).unwrap().positions,
            vec![NoisePosition::AfterLayer(1), NoisePosition::BeforeMeasurement]
        );
        b.positions = vec!["middle".into()];
        assert!(matches!(b.spec(0.1, 2), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_blocks() {
        assert!(ExperimentConfig::parse("[dataset]\nname = \"iris\"\ncolour = 1").is_err());
        assert!(ExperimentConfig::parse("[dataset]\nname = \"cifar\"").is_err());
        let c = ExperimentConfig::parse("[dataset]\nname = \"csv\"").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("[dataset]\nname = \"iris\"\nrecipe = [\"l2_normalize\"]").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn split_forms() {
        let c = ExperimentConfig::parse("[dataset]\nname = \"bc\"\nsplit = { held_out = 0.2, test_fraction = 1.0 }")
            .unwrap();
        assert_eq!(SplitSpec::from(c.dataset.split.as_ref().unwrap()), SplitSpec::holdout(0.2));
        let c = ExperimentConfig::parse("[dataset]\nname = \"iris\"\nsplit = { train = 60, val = 0, test = 40 }")
            .unwrap();
        assert_eq!(
            SplitSpec::from(c.dataset.split.as_ref().unwrap()),
            SplitSpec::Counts { train: 60, val: 0, test: 40 }
        );
    }
}
