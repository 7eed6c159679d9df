//! Declarative run configuration: a TOML file plus `--key value` overrides.
//!
//! Defaults follow the MNIST learning specification (ε = 0.3, η₁ = 0.05,
//! K = 10, c = 0.7, learning rate 0.01, natural pre-training) scaled to a
//! desk budget: a 10k stratified subset and 20 epochs. The evaluation attack
//! defaults to PGD with ε = 0.3, K = 500, η₁ = 0.01 and 5 random restarts.
//! The batch size (64) is not given by the source and is our choice.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackSpec, Norm, Reversion};
use crate::error::{Error, Result};
use crate::nn::ModelSpec;
use crate::oracles::SyntheticDist;
use crate::sense::{SenseSpec, TrainSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Train,
    Attack,
    Eval,
    Analytic,
    Synthetic,
    Convcheck,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Train,
        Command::Attack,
        Command::Eval,
        Command::Analytic,
        Command::Synthetic,
        Command::Convcheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Attack => "attack",
            Command::Eval => "eval",
            Command::Analytic => "analytic",
            Command::Synthetic => "synthetic",
            Command::Convcheck => "convcheck",
        }
    }

    fn needs_checkpoint(self) -> bool {
        matches!(self, Command::Attack | Command::Eval | Command::Convcheck)
    }

    fn needs_data(self) -> bool {
        !matches!(self, Command::Analytic | Command::Synthetic)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config("command", format!("unknown command `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Cnn,
    Mlp,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: ArchKind,
    pub capacity: u32,
    /// Hidden widths of an MLP.
    pub hidden: Vec<usize>,
    /// Trained model for `attack`, `eval` and `convcheck`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: ArchKind::Cnn,
            capacity: 2,
            hidden: vec![64],
            checkpoint: None,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self, features: usize, classes: usize, seed: u64) -> ModelSpec {
        match self.arch {
            ArchKind::Cnn => ModelSpec::cnn(self.capacity, seed),
            ArchKind::Linear => ModelSpec::linear(features, classes, seed),
            ArchKind::Mlp => {
                let mut widths = vec![features];
                widths.extend(&self.hidden);
                widths.push(classes);
                ModelSpec::mlp(widths, seed)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Mnist,
    Synthetic,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory holding the four MNIST IDX files.
    pub dir: PathBuf,
    /// Stratified training subset size; 0 keeps everything.
    pub train_subset: usize,
    pub test_subset: usize,
    pub dist: SyntheticDist,
    pub n_train: usize,
    pub n_test: usize,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Mnist,
            dir: PathBuf::from("data/mnist"),
            train_subset: 10_000,
            test_subset: 0,
            dist: SyntheticDist::ThreeClusters {
                p: 0.55,
                sigma: 0.2,
                m: 7.0,
            },
            n_train: 1000,
            n_test: 1000,
            train_csv: None,
            test_csv: None,
        }
    }
}

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Nat,
    Rat,
    Sense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: MethodKind,
    pub c: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay_steps: Vec<usize>,
    pub lr_decay_factor: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    pub reversion: Reversion,
    /// Natural-training epochs before the chosen method starts.
    pub pretrain_epochs: usize,
    /// Attack the monitored test set every epoch with the training attack.
    pub monitor_attack: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: MethodKind::Sense,
            c: 0.7,
            epochs: 20,
            batch_size: 64,
            lr: 0.01,
            lr_decay_steps: Vec::new(),
            lr_decay_factor: 1.0,
            weight_decay: 0.0,
            warmup_epochs: 0,
            reversion: Reversion::Break,
            pretrain_epochs: 1,
            monitor_attack: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub norm: Norm,
    pub epsilon: f64,
    pub step_size: f64,
    pub steps: usize,
    pub restarts: usize,
    pub random_start: bool,
}

impl AttackConfig {
    fn training() -> Self {
        AttackConfig {
            norm: Norm::Linf,
            epsilon: 0.3,
            step_size: 0.05,
            steps: 10,
            restarts: 1,
            random_start: false,
        }
    }

    pub fn spec(&self, clip: Option<(f64, f64)>) -> AttackSpec {
        AttackSpec {
            norm: self.norm,
            epsilon: self.epsilon,
            step_size: self.step_size,
            steps: self.steps,
            restarts: self.restarts,
            random_start: self.random_start,
            clip,
        }
    }
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self::training()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub norm: Norm,
    pub epsilon: f64,
    pub step_size: f64,
    pub steps: usize,
    pub restarts: usize,
    pub random_start: bool,
    /// Threshold for partition counts.
    pub c: Option<f64>,
    /// Robustly evaluate the test set after `train`.
    pub after_train: bool,
    /// Examples traced by `convcheck`.
    pub examples: usize,
}

impl EvalConfig {
    pub fn attack(&self) -> AttackConfig {
        AttackConfig {
            norm: self.norm,
            epsilon: self.epsilon,
            step_size: self.step_size,
            steps: self.steps,
            restarts: self.restarts,
            random_start: self.random_start,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            norm: Norm::Linf,
            epsilon: 0.3,
            step_size: 0.01,
            steps: 500,
            restarts: 5,
            random_start: true,
            c: None,
            after_train: false,
            examples: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConfig {
    /// `ex1`, `ex2` or `three_clusters`.
    pub setting: String,
    pub p: f64,
    /// Attack radius; three clusters use `γσ` instead.
    pub epsilon: f64,
    pub sigma: f64,
    pub m: f64,
    pub gamma: f64,
    /// Monte-Carlo sample size; 0 skips simulation.
    pub mc_n: usize,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        AnalyticConfig {
            setting: "ex1".into(),
            p: 0.75,
            epsilon: 0.1,
            sigma: 0.2,
            m: 7.0,
            gamma: 8.0,
            mc_n: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Attack used to perturb training inputs.
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub analytic: AnalyticConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Short override keys and the config paths they set.
const ALIASES: [(&str, &str); 19] = [
    ("method", "train.method"),
    ("c", "train.c"),
    ("epochs", "train.epochs"),
    ("lr", "train.lr"),
    ("batch-size", "train.batch_size"),
    ("warmup", "train.warmup_epochs"),
    ("pretrain", "train.pretrain_epochs"),
    ("steps", "eval.steps"),
    ("restarts", "eval.restarts"),
    ("setting", "analytic.setting"),
    ("p", "analytic.p"),
    ("eps", "analytic.epsilon"),
    ("sigma", "analytic.sigma"),
    ("m", "analytic.m"),
    ("gamma", "analytic.gamma"),
    ("mc-n", "analytic.mc_n"),
    ("checkpoint", "model.checkpoint"),
    ("arch", "model.arch"),
    ("capacity", "model.capacity"),
];

pub fn resolve_key(key: &str) -> String {
    ALIASES
        .iter()
        .find(|(short, _)| *short == key)
        .map_or_else(|| key.replace('-', "_"), |(_, full)| full.to_string())
}

/// A bare override value as TOML: numbers, booleans and arrays keep their
/// type, anything else is a string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| Error::config(path, "empty key"))?;
    let mut table = root;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(path, format!("`{part}` is not a table")))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

fn field_err(field: &str, message: impl Into<String>) -> Error {
    Error::config(field, message)
}

impl RunConfig {
    /// Parses `toml_text` (possibly empty), applies overrides in order, and
    /// validates the result.
    pub fn from_sources(command: Command, toml_text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut root: toml::Table = toml::from_str(toml_text).map_err(|e| {
            let span = e.span().map_or(String::new(), |s| format!(" at byte {}", s.start));
            field_err("<config>", format!("{}{span}", e.message()))
        })?;
        root.insert("command".into(), toml::Value::String(command.name().into()));
        for (key, raw) in overrides {
            set_path(&mut root, &resolve_key(key), parse_value(raw))?;
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(root))
            .map_err(|e| field_err(&e.path().to_string(), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(command: Command, path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let text = match path {
            Some(p) => {
                std::fs::read_to_string(p).map_err(|e| field_err("--config", format!("{}: {e}", p.display())))?
            }
            None => String::new(),
        };
        Self::from_sources(command, &text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |field: &str, r: Result<()>| r.map_err(|e| field_err(field, e.to_string()));
        let t = &self.train;
        if !(0.0..=1.0).contains(&t.c) {
            return Err(field_err("train.c", format!("must lie in [0, 1], got {}", t.c)));
        }
        wrap("train", self.train_spec().validate())?;
        wrap("attack", self.attack.spec(None).validate())?;
        wrap("eval", self.eval.attack().spec(None).validate())?;
        if self.eval.restarts == 0 {
            return Err(field_err("eval.restarts", "must be ≥ 1"));
        }
        if let Some(c) = self.eval.c {
            if !(0.0..=1.0).contains(&c) {
                return Err(field_err("eval.c", format!("must lie in [0, 1], got {c}")));
            }
        }
        wrap("data.dist", self.data.dist.validate())?;
        if self.model.arch == ArchKind::Cnn && !(1..=12).contains(&self.model.capacity) {
            return Err(field_err("model.capacity", "must lie in 1..=12"));
        }
        let a = &self.analytic;
        if !["ex1", "ex2", "three_clusters"].contains(&a.setting.as_str()) {
            return Err(field_err(
                "analytic.setting",
                format!("unknown setting `{}`", a.setting),
            ));
        }
        if !(a.epsilon >= 0.0 && a.sigma > 0.0 && a.m > 0.0 && a.gamma >= 0.0) {
            return Err(field_err("analytic", "need ε ≥ 0, σ > 0, m > 0, γ ≥ 0"));
        }
        // The closed forms carry the remaining range checks, such as p.
        wrap("analytic", super::analytic_report(self).map(drop))?;
        if a.mc_n != 0 && a.mc_n < 1000 {
            return Err(field_err("analytic.mc_n", "must be 0 or ≥ 1000"));
        }
        if self.command.needs_checkpoint() {
            match &self.model.checkpoint {
                None => return Err(field_err("model.checkpoint", "required by this command")),
                Some(p) if !p.is_file() => {
                    return Err(field_err("model.checkpoint", format!("{} does not exist", p.display())))
                }
                _ => {}
            }
        }
        if self.command.needs_data() {
            match self.data.source {
                DataSource::Mnist => {
                    for f in MNIST_FILES {
                        if !self.data.dir.join(f).is_file() {
                            return Err(field_err(
                                "data.dir",
                                format!("{} is missing {f}", self.data.dir.display()),
                            ));
                        }
                    }
                }
                DataSource::Csv => {
                    for (field, p) in [
                        ("data.train_csv", &self.data.train_csv),
                        ("data.test_csv", &self.data.test_csv),
                    ] {
                        match p {
                            Some(p) if p.is_file() => {}
                            Some(p) => return Err(field_err(field, format!("{} does not exist", p.display()))),
                            None => return Err(field_err(field, "required for csv data")),
                        }
                    }
                }
                DataSource::Synthetic => {
                    if self.data.n_train == 0 || self.data.n_test == 0 {
                        return Err(field_err("data.n_train", "sample sizes must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn train_spec(&self) -> TrainSpec {
        let t = &self.train;
        TrainSpec {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            lr_decay_steps: t.lr_decay_steps.clone(),
            lr_decay_factor: t.lr_decay_factor,
            weight_decay: t.weight_decay,
            seed: self.seed,
        }
    }

    pub fn sense_spec(&self, clip: Option<(f64, f64)>) -> SenseSpec {
        SenseSpec {
            c: self.train.c,
            attack: self.attack.spec(clip),
            warmup_epochs: self.train.warmup_epochs,
            reversion: self.train.reversion,
        }
    }
}
