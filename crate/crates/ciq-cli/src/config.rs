//! Experiment configuration: TOML or JSON files describing the
//! environment, agent, interference, and training hyperparameters.
//!
//! Every field has a default, so an empty file is a valid clean-training
//! baseline; validation reports the offending field by name.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ciq_core::agent::{AgentKind, EpsilonSchedule, Hyper, LabelMode};
use ciq_core::env::Cartpole;
use ciq_core::interference::{InterferenceKind, LabelProcess};
use ciq_core::metrics::{CleverConfig, LipschitzEstimator, PNorm};
use ciq_core::nn::AdamHyper;

use crate::CliError;

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Environment identifier; the pole-balancing task is the only one.
    pub env: String,
    pub agent: AgentChoice,
    pub interference: InterferenceConfig,
    pub label: LabelConfig,
    /// Interference level: per-step probability under the Bernoulli label
    /// process, ignored by processes with their own schedule.
    pub p_i: f64,
    /// Training episode cap; zero returns an untrained agent.
    pub max_episodes: u32,
    /// Per-episode step cap of the environment.
    pub max_steps: u32,
    /// Score at which the task counts as solved.
    pub target: f64,
    pub seeds: Vec<u64>,
    pub hyper: HyperConfig,
    pub eval: EvalConfig,
    /// Train/test grid for the transfer subcommand.
    pub transfer: Option<TransferConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: "cartpole".into(),
            agent: AgentChoice::Dqn,
            interference: InterferenceConfig::None,
            label: LabelConfig::Bernoulli,
            p_i: 0.0,
            max_episodes: 400,
            max_steps: 200,
            target: 195.0,
            seeds: vec![0, 1, 2, 3, 4],
            hyper: HyperConfig::default(),
            eval: EvalConfig::default(),
            transfer: None,
        }
    }
}

/// Agent selection, one-to-one with the core agent kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentChoice {
    Dqn,
    Ddqn,
    DqnCf,
    DqnSa,
    Ciq,
}

impl AgentChoice {
    pub fn kind(self) -> AgentKind {
        match self {
            Self::Dqn => AgentKind::Dqn,
            Self::Ddqn => AgentKind::Ddqn,
            Self::DqnCf => AgentKind::DqnCf,
            Self::DqnSa => AgentKind::DqnSa,
            Self::Ciq => AgentKind::Ciq,
        }
    }

    pub fn from_kind(kind: AgentKind) -> Self {
        match kind {
            AgentKind::Dqn => Self::Dqn,
            AgentKind::Ddqn => Self::Ddqn,
            AgentKind::DqnCf => Self::DqnCf,
            AgentKind::DqnSa => Self::DqnSa,
            AgentKind::Ciq => Self::Ciq,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.kind().as_str()
    }
}

/// Interference generator plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterferenceConfig {
    /// No interference; the label process never fires.
    None,
    Gaussian,
    Adversarial {
        #[serde(default = "default_attack_epsilon")]
        epsilon: f64,
    },
    Blackout,
    Whiteout,
    Frozen,
}

fn default_attack_epsilon() -> f64 {
    0.1
}

impl InterferenceConfig {
    pub fn kind(&self) -> Option<InterferenceKind> {
        match self {
            Self::None => None,
            Self::Gaussian => Some(InterferenceKind::Gaussian),
            Self::Adversarial { epsilon } => {
                Some(InterferenceKind::Adversarial { epsilon: *epsilon })
            }
            Self::Blackout => Some(InterferenceKind::Blackout),
            Self::Whiteout => Some(InterferenceKind::Whiteout),
            Self::Frozen => Some(InterferenceKind::Frozen),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Gaussian => "gaussian",
            Self::Adversarial { .. } => "adversarial",
            Self::Blackout => "blackout",
            Self::Whiteout => "whiteout",
            Self::Frozen => "frozen",
        }
    }
}

/// How interference labels are drawn over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelConfig {
    /// Independent per-step draws at the configured level.
    Bernoulli,
    /// Bursty two-state chain: stay-interfered and become-interfered
    /// probabilities.
    Markov { p11: f64, p10: f64 },
    /// Level oscillating between `low` and `high` with the given period.
    Cosine { low: f64, high: f64, period: u32 },
}

impl LabelConfig {
    pub fn process(&self, p_i: f64) -> Result<LabelProcess, CliError> {
        let process = match self {
            Self::Bernoulli => LabelProcess::bernoulli(p_i),
            Self::Markov { p11, p10 } => LabelProcess::markov(*p11, *p10),
            Self::Cosine { low, high, period } => LabelProcess::cosine(*low, *high, *period),
        };
        process.map_err(|e| CliError::config(format!("label: {e}")))
    }
}

/// Training hyperparameters, flattened for file friendliness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperConfig {
    pub gamma: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub tau: f64,
    /// Weight of the label cross-entropy term in the switched-head loss.
    pub lambda: f64,
    pub kappa: f64,
    pub quantile: f64,
    pub prioritized: bool,
    pub priority_alpha: f64,
    pub priority_beta: f64,
    /// Frames per stacked observation window.
    pub m: usize,
    pub hidden: usize,
    /// Encoder output width of the switched-head agent.
    pub latent: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        let core = Hyper::default();
        let adam = AdamHyper::default();
        let eps = EpsilonSchedule::default();
        Self {
            gamma: core.gamma,
            lr: adam.lr,
            weight_decay: adam.weight_decay,
            batch_size: core.batch_size,
            buffer_capacity: core.buffer_capacity,
            tau: core.tau,
            lambda: core.lambda,
            kappa: core.kappa,
            quantile: core.quantile,
            prioritized: core.prioritized,
            priority_alpha: core.priority_alpha,
            priority_beta: core.priority_beta,
            m: 4,
            hidden: 32,
            latent: 32,
            epsilon_start: eps.start,
            epsilon_decay: eps.decay,
            epsilon_floor: eps.floor,
        }
    }
}

impl HyperConfig {
    pub fn to_core(&self) -> Result<Hyper, CliError> {
        let hyper = Hyper {
            gamma: self.gamma,
            adam: AdamHyper {
                lr: self.lr,
                weight_decay: self.weight_decay,
                ..AdamHyper::default()
            },
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            tau: self.tau,
            lambda: self.lambda,
            kappa: self.kappa,
            quantile: self.quantile,
            prioritized: self.prioritized,
            priority_alpha: self.priority_alpha,
            priority_beta: self.priority_beta,
        };
        hyper
            .validate()
            .map_err(|e| CliError::config(format!("hyper: {e}")))?;
        Ok(hyper)
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            decay: self.epsilon_decay,
            floor: self.epsilon_floor,
        }
    }
}

/// Evaluation cadence and label handling during greedy play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Run an evaluation round every this many training episodes.
    pub every: u32,
    /// Greedy episodes per round.
    pub episodes: u32,
    pub label_mode: LabelModeChoice,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            every: 10,
            episodes: 10,
            label_mode: LabelModeChoice::Sampled,
        }
    }
}

/// How predicted label probabilities enter the evaluation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelModeChoice {
    Sampled,
    Hard,
    Soft,
}

impl LabelModeChoice {
    pub fn mode(self) -> LabelMode {
        match self {
            Self::Sampled => LabelMode::Sampled,
            Self::Hard => LabelMode::Hard,
            Self::Soft => LabelMode::Soft,
        }
    }
}

/// Train/test grid for interference transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub train: Vec<TransferCell>,
    pub test: Vec<TransferCell>,
}

/// One interference setting of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferCell {
    pub interference: InterferenceConfig,
    pub p_i: f64,
}

impl TransferCell {
    pub fn describe(&self) -> String {
        format!("{}@{}", self.interference.as_str(), self.p_i)
    }
}

/// Certificate settings shared by the report and certificate subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    L1,
    L2,
    Linf,
}

impl NormChoice {
    pub fn norm(self) -> PNorm {
        match self {
            Self::L1 => PNorm::One,
            Self::L2 => PNorm::Two,
            Self::Linf => PNorm::Inf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    SampleMax,
    WeibullMle,
}

impl EstimatorChoice {
    pub fn estimator(self) -> LipschitzEstimator {
        match self {
            Self::SampleMax => LipschitzEstimator::SampleMax,
            Self::WeibullMle => LipschitzEstimator::WeibullMle,
        }
    }
}

/// Certificate parameters on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleverSettings {
    pub norm: NormChoice,
    pub radius: f64,
    pub batches: usize,
    pub samples_per_batch: usize,
    pub estimator: EstimatorChoice,
}

impl Default for CleverSettings {
    fn default() -> Self {
        let core = CleverConfig::default();
        Self {
            norm: NormChoice::L2,
            radius: core.radius,
            batches: core.batches,
            samples_per_batch: core.samples_per_batch,
            estimator: EstimatorChoice::SampleMax,
        }
    }
}

impl CleverSettings {
    pub fn to_core(self) -> CleverConfig {
        CleverConfig {
            norm: self.norm.norm(),
            radius: self.radius,
            batches: self.batches,
            samples_per_batch: self.samples_per_batch,
            estimator: self.estimator.estimator(),
        }
    }
}

impl ExperimentConfig {
    /// Load from a TOML or JSON file, picking the parser by extension
    /// (anything other than `.json` parses as TOML).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let config: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.env != "cartpole" {
            return Err(CliError::config(format!(
                "env: unknown environment `{}`",
                self.env
            )));
        }
        if !(0.0..=1.0).contains(&self.p_i) {
            return Err(CliError::config("p_i: must lie in [0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds: list must be nonempty"));
        }
        if !(self.target > 0.0) {
            return Err(CliError::config("target: must be positive"));
        }
        if self.max_steps == 0 {
            return Err(CliError::config("max_steps: must be positive"));
        }
        if self.eval.every == 0 || self.eval.episodes == 0 {
            return Err(CliError::config(
                "eval: cadence and episode count must be positive",
            ));
        }
        if self.hyper.m == 0 || self.hyper.hidden == 0 || self.hyper.latent == 0 {
            return Err(CliError::config(
                "hyper: window, hidden and latent sizes must be positive",
            ));
        }
        self.hyper.to_core()?;
        self.label.process(self.p_i)?;
        if let Some(kind) = self.interference.kind() {
            kind.validate()
                .map_err(|e| CliError::config(format!("interference: {e}")))?;
        }
        if let Some(transfer) = &self.transfer {
            if transfer.train.is_empty() || transfer.test.is_empty() {
                return Err(CliError::config(
                    "transfer: train and test lists must be nonempty",
                ));
            }
            for cell in transfer.train.iter().chain(&transfer.test) {
                if !(0.0..=1.0).contains(&cell.p_i) {
                    return Err(CliError::config("transfer: p_i must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        Cartpole::OBS_DIM
    }

    pub fn actions(&self) -> usize {
        Cartpole::ACTIONS
    }

    /// The same experiment under a different interference setting.
    pub fn with_interference(&self, cell: &TransferCell) -> Self {
        Self {
            interference: cell.interference.clone(),
            p_i: cell.p_i,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_the_clean_baseline() {
        let config: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(config, ExperimentConfig::default());
        config.validate().unwrap();
        assert_eq!(config.agent.kind(), AgentKind::Dqn);
        assert!(config.interference.kind().is_none());
    }

    #[test]
    fn toml_round_trip_preserves_every_field() {
        let config = ExperimentConfig {
            agent: AgentChoice::Ciq,
            interference: InterferenceConfig::Adversarial { epsilon: 0.2 },
            label: LabelConfig::Markov { p11: 0.55, p10: 0.05 },
            p_i: 0.2,
            seeds: vec![7, 8],
            transfer: Some(TransferConfig {
                train: vec![TransferCell {
                    interference: InterferenceConfig::Gaussian,
                    p_i: 0.3,
                }],
                test: vec![TransferCell {
                    interference: InterferenceConfig::Blackout,
                    p_i: 0.1,
                }],
            }),
            ..ExperimentConfig::default()
        };
        let text = toml::to_string(&config).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
        let json = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn validation_names_the_offending_field() {
        let bad = ExperimentConfig {
            p_i: 1.5,
            ..ExperimentConfig::default()
        };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("p_i"), "{msg}");

        let bad = ExperimentConfig {
            seeds: vec![],
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("seeds"));

        let bad = ExperimentConfig {
            env: "lunar".into(),
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("lunar"));

        let bad = ExperimentConfig {
            hyper: HyperConfig {
                gamma: 1.5,
                ..HyperConfig::default()
            },
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("hyper"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("banana = 3").unwrap_err();
        assert!(err.to_string().contains("banana"));
    }

    #[test]
    fn interference_parses_by_kind_tag() {
        let config: ExperimentConfig =
            toml::from_str("p_i = 0.2\n[interference]\nkind = \"adversarial\"\n").unwrap();
        assert_eq!(
            config.interference,
            InterferenceConfig::Adversarial { epsilon: 0.1 }
        );
        let config: ExperimentConfig =
            toml::from_str("[interference]\nkind = \"gaussian\"\n").unwrap();
        assert_eq!(config.interference.as_str(), "gaussian");
    }

    #[test]
    fn label_config_builds_core_processes() {
        let markov = LabelConfig::Markov { p11: 0.55, p10: 0.05 };
        markov.process(0.0).unwrap();
        let cosine = LabelConfig::Cosine { low: 0.0, high: 0.3, period: 10 };
        cosine.process(0.0).unwrap();
        assert!(LabelConfig::Markov { p11: 1.5, p10: 0.0 }.process(0.0).is_err());
    }
}
