//! Client partitioners.
//!
//! Every partitioner first produces an [`Assignment`] (index lists into the
//! source dataset) and then materializes it into a [`Scenario`]. Keeping the
//! index form public lets callers check conservation directly.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{split_train_test, Dataset};
use crate::numcore::Matrix;
use crate::rng::{self, SimRng};
use crate::{Error, Result};

/// Maximum number of Dirichlet redraws before a practical split gives up.
const MAX_DIRICHLET_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    Pathological,
    Practical,
    FeatureShift,
    Iid,
}

impl std::str::FromStr for PartitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pathological" => Ok(Self::Pathological),
            "practical" | "dir" | "dirichlet" => Ok(Self::Practical),
            "feature_shift" => Ok(Self::FeatureShift),
            "iid" => Ok(Self::Iid),
            other => Err(Error::Config(format!(
                "unknown partition kind `{other}` (pathological, practical, feature_shift, iid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub kind: PartitionKind,
    pub num_clients: usize,
    pub classes_per_client: usize,
    pub alpha: f64,
    pub shift_strength: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub min_samples_per_client: usize,
}

impl PartitionSpec {
    pub fn new(kind: PartitionKind, num_clients: usize, seed: u64) -> Self {
        Self {
            kind,
            num_clients,
            classes_per_client: 2,
            alpha: 0.1,
            shift_strength: 1.0,
            seed,
            train_fraction: 0.75,
            min_samples_per_client: 10,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::Config("num_clients must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        match self.kind {
            PartitionKind::Pathological => {
                if self.classes_per_client == 0 || self.classes_per_client > num_classes {
                    return Err(Error::Config(format!(
                        "classes_per_client must be in 1..={num_classes}, got {}",
                        self.classes_per_client
                    )));
                }
                if self.num_clients * self.classes_per_client < num_classes {
                    return Err(Error::Infeasible(format!(
                        "{} clients × {} classes cannot cover {num_classes} classes",
                        self.num_clients, self.classes_per_client
                    )));
                }
            }
            PartitionKind::Practical => {
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
                }
            }
            PartitionKind::FeatureShift => {
                if !self.shift_strength.is_finite() {
                    return Err(Error::Config("shift_strength must be finite".into()));
                }
            }
            PartitionKind::Iid => {}
        }
        Ok(())
    }
}

/// Planar rotations on coordinate pairs `(2j, 2j+1)` followed by a translation.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineShift {
    pub angles: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineShift {
    pub fn identity(dim: usize) -> Self {
        Self {
            angles: vec![0.0; dim / 2],
            offset: vec![0.0; dim],
        }
    }

    fn random(dim: usize, strength: f64, rng: &mut SimRng) -> Self {
        let angles = (0..dim / 2)
            .map(|_| strength * rng.random_range(-1.0..1.0) * std::f64::consts::FRAC_PI_4)
            .collect();
        let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let offset = dir.into_iter().map(|v| strength * v / norm).collect();
        Self { angles, offset }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for (j, &theta) in self.angles.iter().enumerate() {
            if theta == 0.0 {
                continue;
            }
            let (s, c) = theta.sin_cos();
            let (a, b) = (x[2 * j], x[2 * j + 1]);
            x[2 * j] = c * a - s * b;
            x[2 * j + 1] = s * a + c * b;
        }
        for (v, t) in x.iter_mut().zip(&self.offset) {
            *v += t;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Index-level result of a partitioner.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub clients: Vec<ClientIndices>,
    pub shifts: Option<Vec<AffineShift>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientData {
    pub train: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub dataset: String,
    pub num_samples: usize,
    pub dim: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientManifest {
    pub n_train: usize,
    pub n_test: usize,
    /// Per-class counts over the client's train and test samples together.
    pub class_hist: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u16,
    pub source: SourceInfo,
    pub spec: PartitionSpec,
    pub per_client: Vec<ClientManifest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub manifest: Manifest,
    pub clients: Vec<ClientData>,
}

impl Scenario {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn num_classes(&self) -> usize {
        self.manifest.source.num_classes
    }

    pub fn dim(&self) -> usize {
        self.manifest.source.dim
    }

    /// Mean per-client label entropy (nats).
    pub fn mean_label_entropy(&self) -> f64 {
        let n = self.manifest.per_client.len().max(1) as f64;
        self.manifest
            .per_client
            .iter()
            .map(|c| label_entropy(&c.class_hist))
            .sum::<f64>()
            / n
    }
}

/// Shannon entropy (nats) of a class histogram.
pub fn label_entropy(hist: &[usize]) -> f64 {
    let total: usize = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum()
}

fn indices_by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); ds.num_classes()];
    for (i, &y) in ds.labels().iter().enumerate() {
        out[y].push(i);
    }
    out
}

fn check_min_samples(clients: &[Vec<usize>], min: usize) -> Result<()> {
    if let Some((i, c)) = clients.iter().enumerate().find(|(_, c)| c.len() < min.max(1)) {
        return Err(Error::Infeasible(format!(
            "client {i} would hold {} samples, below min_samples_per_client = {min}",
            c.len()
        )));
    }
    Ok(())
}

fn split_clients(ds: &Dataset, spec: &PartitionSpec, clients: Vec<Vec<usize>>) -> Result<Vec<ClientIndices>> {
    clients
        .into_iter()
        .enumerate()
        .map(|(i, idx)| {
            let (train, test) = split_train_test(
                &idx,
                ds.labels(),
                spec.train_fraction,
                rng::derive_seed(spec.seed, &[2, i as u64]),
            )
            .map_err(|e| match e {
                Error::Infeasible(m) => Error::Infeasible(format!("client {i}: {m}")),
                other => other,
            })?;
            Ok(ClientIndices { train, test })
        })
        .collect()
}

fn assign_pathological(ds: &Dataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    let k = ds.num_classes();
    let mut rng = rng::stream(spec.seed, &[1]);
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);

    let mut owners = vec![Vec::new(); k];
    for client in 0..spec.num_clients {
        for j in 0..spec.classes_per_client {
            owners[order[(client * spec.classes_per_client + j) % k]].push(client);
        }
    }

    let mut clients = vec![Vec::new(); spec.num_clients];
    for (class, mut idx) in indices_by_class(ds).into_iter().enumerate() {
        let own = &owners[class];
        if idx.len() < own.len() {
            return Err(Error::Infeasible(format!(
                "class {class} has {} samples for {} owning clients",
                idx.len(),
                own.len()
            )));
        }
        idx.shuffle(&mut rng);
        let base = idx.len() / own.len();
        let extra = idx.len() % own.len();
        let mut cursor = 0;
        for (s, &client) in own.iter().enumerate() {
            let take = base + usize::from(s < extra);
            clients[client].extend_from_slice(&idx[cursor..cursor + take]);
            cursor += take;
        }
    }
    check_min_samples(&clients, spec.min_samples_per_client)?;
    Ok(clients)
}

/// Dirichlet(alpha · 1) draw via log-space gamma variates, robust for tiny alpha.
fn dirichlet(alpha: f64, n: usize, rng: &mut SimRng) -> Vec<f64> {
    let shape = if alpha < 1.0 { alpha + 1.0 } else { alpha };
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let mut l = g.max(f64::MIN_POSITIVE).ln();
            if alpha < 1.0 {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                l += u.ln() / alpha;
            }
            l
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Integer counts summing to `total`, proportional to `p`, by largest remainder.
fn largest_remainder(p: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|&q| q * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn assign_practical(ds: &Dataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    let by_class = indices_by_class(ds);
    let mut rng = rng::stream(spec.seed, &[1]);
    let mut last_err = None;
    for _ in 0..MAX_DIRICHLET_RETRIES {
        let mut clients = vec![Vec::new(); spec.num_clients];
        for idx in &by_class {
            let mut idx = idx.clone();
            idx.shuffle(&mut rng);
            let p = dirichlet(spec.alpha, spec.num_clients, &mut rng);
            let counts = largest_remainder(&p, idx.len());
            let mut cursor = 0;
            for (client, &c) in counts.iter().enumerate() {
                clients[client].extend_from_slice(&idx[cursor..cursor + c]);
                cursor += c;
            }
        }
        match check_min_samples(&clients, spec.min_samples_per_client) {
            Ok(()) => return Ok(clients),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Infeasible(format!(
        "min_samples_per_client = {} not met after {MAX_DIRICHLET_RETRIES} Dirichlet draws (last: {})",
        spec.min_samples_per_client,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn assign_iid(ds: &Dataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    let mut rng = rng::stream(spec.seed, &[1]);
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut rng);
    let n = spec.num_clients;
    let base = idx.len() / n;
    let extra = idx.len() % n;
    let mut clients = Vec::with_capacity(n);
    let mut cursor = 0;
    for i in 0..n {
        let take = base + usize::from(i < extra);
        clients.push(idx[cursor..cursor + take].to_vec());
        cursor += take;
    }
    check_min_samples(&clients, spec.min_samples_per_client)?;
    Ok(clients)
}

/// Computes the index-level assignment for `spec`.
pub fn assign(ds: &Dataset, spec: &PartitionSpec) -> Result<Assignment> {
    spec.validate(ds.num_classes())?;
    let raw = match spec.kind {
        PartitionKind::Pathological => assign_pathological(ds, spec)?,
        PartitionKind::Practical => assign_practical(ds, spec)?,
        PartitionKind::FeatureShift | PartitionKind::Iid => assign_iid(ds, spec)?,
    };
    let shifts = (spec.kind == PartitionKind::FeatureShift).then(|| {
        (0..spec.num_clients)
            .map(|i| {
                if spec.shift_strength == 0.0 {
                    AffineShift::identity(ds.dim())
                } else {
                    let mut r = rng::stream(spec.seed, &[3, i as u64]);
                    AffineShift::random(ds.dim(), spec.shift_strength, &mut r)
                }
            })
            .collect()
    });
    Ok(Assignment {
        clients: split_clients(ds, spec, raw)?,
        shifts,
    })
}

/// Builds client datasets from an assignment. Inputs are rounded to `f32`
/// so in-memory and on-disk scenarios are identical.
pub fn materialize(ds: &Dataset, spec: &PartitionSpec, dataset_name: &str, a: &Assignment) -> Result<Scenario> {
    let mut clients = Vec::with_capacity(a.clients.len());
    let mut per_client = Vec::with_capacity(a.clients.len());
    for (i, ci) in a.clients.iter().enumerate() {
        let mut train = ds.subset(&ci.train);
        let mut test = ds.subset(&ci.test);
        for part in [&mut train, &mut test] {
            let m: &mut Matrix = part.inputs_mut();
            for r in 0..m.rows() {
                let row = m.row_mut(r);
                if let Some(shifts) = &a.shifts {
                    shifts[i].apply(row);
                }
                for v in row.iter_mut() {
                    *v = f64::from(*v as f32);
                }
            }
        }
        let mut hist = train.class_histogram();
        for (h, t) in hist.iter_mut().zip(test.class_histogram()) {
            *h += t;
        }
        per_client.push(ClientManifest {
            n_train: train.len(),
            n_test: test.len(),
            class_hist: hist,
        });
        clients.push(ClientData { train, test });
    }
    Ok(Scenario {
        manifest: Manifest {
            version: super::FORMAT_VERSION,
            source: SourceInfo {
                dataset: dataset_name.to_string(),
                num_samples: ds.len(),
                dim: ds.dim(),
                num_classes: ds.num_classes(),
            },
            spec: spec.clone(),
            per_client,
        },
        clients,
    })
}

fn partition_kind(ds: &Dataset, spec: &PartitionSpec, kind: PartitionKind) -> Result<Scenario> {
    if spec.kind != kind {
        return Err(Error::Config(format!(
            "spec kind {:?} passed to the {kind:?} partitioner",
            spec.kind
        )));
    }
    partition(ds, spec, "dataset")
}

pub fn partition_pathological(ds: &Dataset, spec: &PartitionSpec) -> Result<Scenario> {
    partition_kind(ds, spec, PartitionKind::Pathological)
}

pub fn partition_practical(ds: &Dataset, spec: &PartitionSpec) -> Result<Scenario> {
    partition_kind(ds, spec, PartitionKind::Practical)
}

pub fn partition_feature_shift(ds: &Dataset, spec: &PartitionSpec) -> Result<Scenario> {
    partition_kind(ds, spec, PartitionKind::FeatureShift)
}

pub fn partition_iid(ds: &Dataset, spec: &PartitionSpec) -> Result<Scenario> {
    partition_kind(ds, spec, PartitionKind::Iid)
}

/// Dispatches on `spec.kind`; `dataset_name` is recorded in the manifest.
pub fn partition(ds: &Dataset, spec: &PartitionSpec, dataset_name: &str) -> Result<Scenario> {
    let a = assign(ds, spec)?;
    materialize(ds, spec, dataset_name, &a)
}
