use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pfl_core::datagen::{
    label_entropy, load_idx, partition, save_scenario, synth_gaussian, Dataset, PartitionKind, PartitionSpec,
    Scenario,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    Synthetic,
    Mnist,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Source dataset.
    #[arg(long, value_enum, default_value = "synthetic")]
    pub data: SourceKind,
    /// Directory holding the four MNIST IDX files.
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 300)]
    pub per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// pathological, practical, feature_shift or iid.
    #[arg(long, default_value = "practical")]
    pub kind: String,
    #[arg(long, default_value_t = 20)]
    pub clients: usize,
    #[arg(long, default_value_t = 2)]
    pub classes_per_client: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub shift_strength: f64,
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub min_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenerateArgs {
    pub fn spec(&self) -> Result<PartitionSpec> {
        let kind: PartitionKind = self.kind.parse()?;
        Ok(PartitionSpec {
            classes_per_client: self.classes_per_client,
            alpha: self.alpha,
            shift_strength: self.shift_strength,
            train_fraction: self.train_fraction,
            min_samples_per_client: self.min_samples,
            ..PartitionSpec::new(kind, self.clients, self.seed)
        })
    }

    fn source(&self) -> Result<(Dataset, &'static str)> {
        match self.data {
            SourceKind::Synthetic => Ok((
                synth_gaussian(self.classes, self.dim, self.per_class, self.spread, self.seed)?,
                "synthetic",
            )),
            SourceKind::Mnist => {
                let dir = self
                    .mnist_dir
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--data mnist requires --mnist-dir".into()))?;
                let ds = load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
                Ok((ds, "mnist"))
            }
        }
    }
}

/// Partitions the source dataset and writes the scenario directory.
pub fn cmd_generate(args: &GenerateArgs) -> Result<Scenario> {
    let spec = args.spec()?;
    let (ds, name) = args.source()?;
    let scenario = partition(&ds, &spec, name)?;
    save_scenario(&scenario, &args.out)?;
    Ok(scenario)
}

/// Per-client class histogram table with label entropies.
pub fn histogram_table(s: &Scenario) -> String {
    let k = s.manifest.source.num_classes;
    let mut out = String::from("client  n_train  n_test  entropy ");
    for c in 0..k {
        let _ = write!(out, " {:>5}", format!("c{c}"));
    }
    out.push('\n');
    for (i, m) in s.manifest.per_client.iter().enumerate() {
        let _ = write!(out, "{i:>6}  {:>7}  {:>6}  {:>7.4} ", m.n_train, m.n_test, label_entropy(&m.class_hist));
        for n in &m.class_hist {
            let _ = write!(out, " {n:>5}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "mean label entropy: {:.4} nats", s.mean_label_entropy());
    out
}
