use std::collections::BTreeMap;

use crate::datagen::Dataset;
use crate::numcore::{Matrix, MlpShape, ParamVector};
use crate::rng::{self, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    pub vector: Vec<f64>,
    pub count: usize,
}

/// Per-class vectors (prototypes or mean logits) with the sample counts
/// they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    dim: usize,
    entries: BTreeMap<usize, ClassEntry>,
}

impl ClassTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// Per-class row means of `rows`; classes without samples are absent.
    pub fn class_means(rows: &Matrix, labels: &[usize]) -> Self {
        let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
        for (r, &y) in labels.iter().enumerate() {
            let e = sums.entry(y).or_insert_with(|| (vec![0.0; rows.cols()], 0));
            for (s, &v) in e.0.iter_mut().zip(rows.row(r)) {
                *s += v;
            }
            e.1 += 1;
        }
        let entries = sums
            .into_iter()
            .map(|(c, (s, n))| {
                let vector = s.into_iter().map(|v| v / n as f64).collect();
                (c, ClassEntry { vector, count: n })
            })
            .collect();
        Self {
            dim: rows.cols(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, class: usize, vector: Vec<f64>, count: usize) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "class vector of {} in a table of width {}",
                vector.len(),
                self.dim
            )));
        }
        self.entries.insert(class, ClassEntry { vector, count });
        Ok(())
    }

    pub fn get(&self, class: usize) -> Option<&ClassEntry> {
        self.entries.get(&class)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &ClassEntry)> {
        self.entries.iter().map(|(&c, e)| (c, e))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (usize, &mut ClassEntry)> {
        self.entries.iter_mut().map(|(&c, e)| (c, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scalars needed to transmit the table: each vector plus its count.
    pub fn floats(&self) -> usize {
        self.entries.len() * (self.dim + 1)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(|e| e.vector.iter().all(|v| v.is_finite()))
    }
}

/// Everything a client owns. Models share one layout across all clients.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub train: Dataset,
    pub test: Dataset,
    /// Training-set class histogram.
    pub class_counts: Vec<usize>,
    /// The client's working copy of the model (`w_i`).
    pub model: ParamVector,
    /// Separately trained personal model (`v_i`, `θ`), when the algorithm keeps one.
    pub personal: Option<ParamVector>,
    pub control: Option<ParamVector>,
    pub mix_weight: Option<f64>,
    pub ala_weights: Option<Vec<f64>>,
    /// Client-side class table (prototypes or mean logits).
    pub class_table: Option<ClassTable>,
    /// Auxiliary classifier head with its own layout.
    pub aux_head: Option<ParamVector>,
    pub rounds_trained: usize,
}

impl ClientState {
    pub fn new(id: usize, train: Dataset, test: Dataset, model: ParamVector) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Infeasible(format!("client {id} has no training samples")));
        }
        let class_counts = train.class_histogram();
        Ok(Self {
            id,
            train,
            test,
            class_counts,
            model,
            personal: None,
            control: None,
            mix_weight: None,
            ala_weights: None,
            class_table: None,
            aux_head: None,
            rounds_trained: 0,
        })
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    pub fn n_test(&self) -> usize {
        self.test.len()
    }
}

/// Server-side state. Algorithm-specific fields stay empty for algorithms
/// that do not use them.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub shape: MlpShape,
    pub global: ParamVector,
    pub round: usize,
    pub num_rounds: usize,
    pub num_clients: usize,
    /// Client learning rate, for inference-time adaptation.
    pub lr: f64,
    pub control: Option<ParamVector>,
    /// Last model received from each client.
    pub client_models: Vec<ParamVector>,
    /// Per-client personalized aggregate sent back down.
    pub cloud: Vec<ParamVector>,
    pub class_table: Option<ClassTable>,
    pub(crate) rng: SimRng,
}

impl ServerState {
    pub fn new(shape: MlpShape, global: ParamVector, num_clients: usize, num_rounds: usize, lr: f64, seed: u64) -> Self {
        Self {
            shape,
            global,
            round: 0,
            num_rounds,
            num_clients,
            lr,
            control: None,
            client_models: Vec::new(),
            cloud: Vec::new(),
            class_table: None,
            rng: rng::stream(seed, &[0x5e7e]),
        }
    }
}
