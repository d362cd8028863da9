use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use pfl_core::engine::RunConfig;
use pfl_core::numcore::MlpShape;
use pfl_core::privacy::DpConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// One hidden ReLU layer.
    Mlp,
    /// Softmax regression (no body).
    Linear,
}

/// `run` flags. Every field can also come from `--config`; flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the fields below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario directory written by `generate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label used for the scenario column in reports (default: directory name).
    #[arg(long)]
    pub scenario_name: Option<String>,
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub join_ratio: Option<f64>,
    #[arg(long)]
    pub local_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Algorithm hyperparameter, `key=value`; repeatable.
    #[arg(long = "hyper", value_parser = parse_hyper)]
    pub hyper: Vec<(String, f64)>,
    #[arg(long)]
    pub dp: bool,
    #[arg(long)]
    pub dp_sigma: Option<f64>,
    #[arg(long)]
    pub dp_clip: Option<f64>,
    /// Run the gradient-inversion attack after the last round.
    #[arg(long)]
    pub dp_attack: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_hyper(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub data: Option<PathBuf>,
    pub scenario_name: Option<String>,
    pub algo: Option<String>,
    pub model: Option<ModelKind>,
    pub hidden: Option<usize>,
    pub rounds: Option<usize>,
    pub join_ratio: Option<f64>,
    pub local_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub eval_interval: Option<usize>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub hyper: BTreeMap<String, f64>,
    pub dp: Option<bool>,
    pub dp_sigma: Option<f64>,
    pub dp_clip: Option<f64>,
    pub dp_attack: Option<bool>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(CliError::io(path))?;
        serde_json::from_slice(&bytes).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: PathBuf,
    pub scenario_name: String,
    pub model: ModelKind,
    pub hidden: usize,
    /// `num_clients` is filled in from the scenario when it is loaded.
    pub run: RunConfig,
    pub dp: DpConfig,
    pub dp_attack: bool,
    pub reps: usize,
    pub threads: usize,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => ConfigFile::read(p)?,
            None => ConfigFile::default(),
        };
        Self::merge(args, file)
    }

    pub fn merge(args: &RunArgs, file: ConfigFile) -> Result<Self> {
        let need = |v: Option<PathBuf>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("--{flag} is required")));
        let scenario = need(args.data.clone().or(file.data), "data")?;
        let out = need(args.out.clone().or(file.out), "out")?;
        let algo = args
            .algo
            .clone()
            .or(file.algo)
            .ok_or_else(|| CliError::Usage("--algo is required".into()))?;
        let scenario_name = match args.scenario_name.clone().or(file.scenario_name) {
            Some(n) => n,
            None => scenario
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .ok_or_else(|| CliError::Usage(format!("cannot name scenario {}", scenario.display())))?,
        };

        let mut run = RunConfig::new(algo, 0);
        run.num_rounds = args.rounds.or(file.rounds).unwrap_or(run.num_rounds);
        run.join_ratio = args.join_ratio.or(file.join_ratio).unwrap_or(run.join_ratio);
        run.local_epochs = args.local_epochs.or(file.local_epochs).unwrap_or(run.local_epochs);
        run.batch_size = args.batch_size.or(file.batch_size).unwrap_or(run.batch_size);
        run.learning_rate = args.lr.or(file.lr).unwrap_or(run.learning_rate);
        run.eval_interval = args.eval_interval.or(file.eval_interval).unwrap_or(run.eval_interval);
        run.seed = args.seed.or(file.seed).unwrap_or(run.seed);
        run.hyper = file.hyper;
        for (k, v) in &args.hyper {
            run.hyper.insert(k.clone(), *v);
        }

        let dp_on = args.dp || file.dp.unwrap_or(false);
        let clip = args.dp_clip.or(file.dp_clip).unwrap_or(1.0);
        let sigma = args.dp_sigma.or(file.dp_sigma).unwrap_or(0.0);
        let dp = if dp_on { DpConfig::new(clip, sigma)? } else { DpConfig::disabled() };

        let reps = args.reps.or(file.reps).unwrap_or(1);
        if reps == 0 {
            return Err(CliError::Usage("--reps must be at least 1".into()));
        }
        let model = args.model.or(file.model).unwrap_or(ModelKind::Mlp);
        let hidden = match model {
            ModelKind::Linear => 0,
            ModelKind::Mlp => args.hidden.or(file.hidden).unwrap_or(32),
        };
        Ok(Self {
            scenario,
            scenario_name,
            model,
            hidden,
            run,
            dp,
            dp_attack: args.dp_attack || file.dp_attack.unwrap_or(false),
            reps,
            threads: args.threads.or(file.threads).unwrap_or(1).max(1),
            out,
        })
    }

    pub fn shape(&self, input_dim: usize, num_classes: usize) -> Result<MlpShape> {
        Ok(MlpShape::new(input_dim, self.hidden, num_classes)?)
    }
}
