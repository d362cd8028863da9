//! The plugin interface and the sixteen implemented algorithms.
//!
//! A plugin is a stateless bundle of hooks. Everything mutable lives in
//! [`ClientState`] and [`ServerState`]; the engine calls the hooks in a
//! fixed order each round:
//!
//! 1. [`Algorithm::server_payload`] for every sampled client,
//! 2. [`Algorithm::local_train`] on each sampled client (possibly in parallel),
//! 3. [`Algorithm::aggregate`] once, with updates in ascending client id,
//! 4. [`Algorithm::predict`] per client during evaluation.

mod apfl;
mod common;
mod ditto;
mod fedala;
mod fedamp;
mod fedavg;
mod fedbabu;
mod feddistill;
mod fedper;
mod fedprox;
mod fedproto;
mod fedrep;
mod fedrod;
mod lgfedavg;
mod perfedavg;
mod pfedme;
mod scaffold;

use crate::engine::{ClassTable, ClientState, HyperParams, ServerState};
use crate::numcore::{Matrix, MlpShape, ParamVector, SegmentGroup};
use crate::rng::{self, SimRng};
use crate::{Error, Result};

pub use apfl::Apfl;
pub use ditto::Ditto;
pub use fedala::FedAla;
pub use fedamp::FedAmp;
pub use fedavg::FedAvg;
pub use fedbabu::FedBabu;
pub use feddistill::FedDistill;
pub use fedper::FedPer;
pub use fedprox::FedProx;
pub use fedproto::FedProto;
pub use fedrep::FedRep;
pub use fedrod::FedRod;
pub use lgfedavg::LgFedAvg;
pub use perfedavg::PerFedAvg;
pub use pfedme::PFedMe;
pub use scaffold::Scaffold;

/// Hand-checkable update rules, exposed for oracles and tests.
pub mod rules {
    pub use super::apfl::{alpha_step, blend};
    pub use super::fedala::{ala_blend, ala_weight_step};
    pub use super::fedamp::{attention_weights, cloud_models};
    pub use super::feddistill::{average_logits, distill_term};
    pub use super::fedprox::prox_gradient;
    pub use super::fedproto::{aggregate_prototypes, nearest_prototype};
    pub use super::fedrod::balanced_logits;
    pub use super::perfedavg::meta_step;
    pub use super::pfedme::{outer_step, proximal_inner};
    pub use super::scaffold::{control_update, corrected_step};
}

/// What the server sends to one client.
#[derive(Debug, Clone)]
pub enum Payload {
    Model(ParamVector),
    /// A full vector of which only `group` is meaningful.
    Segments { params: ParamVector, group: SegmentGroup },
    Scaffold { model: ParamVector, control: ParamVector },
    /// A client-specific aggregate.
    Cloud(ParamVector),
    Table(Option<ClassTable>),
}

/// What one client returns.
#[derive(Debug, Clone)]
pub struct Update {
    pub body: UpdateBody,
    pub num_samples: usize,
    pub train_loss: f64,
}

#[derive(Debug, Clone)]
pub enum UpdateBody {
    Model(ParamVector),
    Segments { params: ParamVector, group: SegmentGroup },
    Scaffold { delta_model: ParamVector, delta_control: ParamVector },
    Table(ClassTable),
}

impl UpdateBody {
    /// Scalars the client transmits.
    pub fn uplink_floats(&self) -> usize {
        match self {
            Self::Model(p) => p.len(),
            Self::Segments { params, group } => params.layout().group_len(*group),
            Self::Scaffold { delta_model, delta_control } => delta_model.len() + delta_control.len(),
            Self::Table(t) => t.floats(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Model(_) => "model",
            Self::Segments { .. } => "segments",
            Self::Scaffold { .. } => "scaffold",
            Self::Table(_) => "table",
        }
    }
}

/// Per-call training context.
#[derive(Debug, Clone, Copy)]
pub struct LocalContext {
    pub shape: MlpShape,
    pub round: usize,
    pub seed: u64,
    pub client_id: usize,
    pub lr: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
}

impl LocalContext {
    /// An independent stream for this (round, client, purpose).
    pub fn rng(&self, stream: u64) -> SimRng {
        rng::stream(self.seed, &[self.round as u64, self.client_id as u64, stream])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// The plugin had no personal model for this client and used its local model.
    pub fallback: bool,
}

impl Prediction {
    fn direct(labels: Vec<usize>) -> Self {
        Self { labels, fallback: false }
    }
}

pub trait Algorithm: Send + Sync {
    fn name(&self) -> &'static str;

    fn init(&self, _server: &mut ServerState, _clients: &mut [ClientState]) -> Result<()> {
        Ok(())
    }

    fn server_payload(&self, server: &ServerState, client: usize) -> Payload;

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update>;

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()>;

    /// Labels for `inputs` from the model this algorithm designates for the client.
    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction>;
}

pub const ALGORITHMS: [&str; 16] = [
    "FedAvg",
    "FedProx",
    "SCAFFOLD",
    "Per-FedAvg",
    "pFedMe",
    "Ditto",
    "APFL",
    "FedAMP",
    "FedALA",
    "FedPer",
    "FedRep",
    "LG-FedAvg",
    "FedBABU",
    "FedRoD",
    "FedProto",
    "FedDistill",
];

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

/// Canonical name for `name`, matched case-insensitively ignoring `-` and `_`.
pub fn canonical_name(name: &str) -> Result<&'static str> {
    let key = normalize(name);
    ALGORITHMS
        .iter()
        .copied()
        .find(|a| normalize(a) == key)
        .ok_or_else(|| Error::UnknownAlgorithm {
            name: name.to_owned(),
            available: ALGORITHMS.to_vec(),
        })
}

/// Builds a plugin by name, reading its hyperparameters from `hyper`.
/// Unknown names and unknown hyperparameter keys are errors.
pub fn build(name: &str, hyper: &std::collections::BTreeMap<String, f64>) -> Result<Box<dyn Algorithm>> {
    let canon = canonical_name(name)?;
    let h = HyperParams::new(hyper);
    let algo: Box<dyn Algorithm> = match canon {
        "FedAvg" => Box::new(FedAvg),
        "FedProx" => Box::new(FedProx::from_hyper(&h)?),
        "SCAFFOLD" => Box::new(Scaffold::from_hyper(&h)?),
        "Per-FedAvg" => Box::new(PerFedAvg::from_hyper(&h)?),
        "pFedMe" => Box::new(PFedMe::from_hyper(&h)?),
        "Ditto" => Box::new(Ditto::from_hyper(&h)?),
        "APFL" => Box::new(Apfl::from_hyper(&h)?),
        "FedAMP" => Box::new(FedAmp::from_hyper(&h)?),
        "FedALA" => Box::new(FedAla::from_hyper(&h)?),
        "FedPer" => Box::new(FedPer),
        "FedRep" => Box::new(FedRep::from_hyper(&h)?),
        "LG-FedAvg" => Box::new(LgFedAvg),
        "FedBABU" => Box::new(FedBabu::from_hyper(&h)?),
        "FedRoD" => Box::new(FedRod),
        "FedProto" => Box::new(FedProto::from_hyper(&h)?),
        "FedDistill" => Box::new(FedDistill::from_hyper(&h)?),
        _ => unreachable!("every canonical name has a constructor"),
    };
    h.finish(canon)?;
    Ok(algo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn names_resolve() {
        assert_eq!(canonical_name("lg_fedavg").unwrap(), "LG-FedAvg");
        assert_eq!(canonical_name("PERFEDAVG").unwrap(), "Per-FedAvg");
        for a in ALGORITHMS {
            assert_eq!(build(a, &BTreeMap::new()).unwrap().name(), a);
        }
    }

    #[test]
    fn unknown_name_lists_all() {
        match build("NoSuchAlgo", &BTreeMap::new()) {
            Err(Error::UnknownAlgorithm { available, .. }) => assert_eq!(available.len(), 16),
            other => panic!("unexpected {:?}", other.map(|a| a.name())),
        }
        let msg = canonical_name("x").unwrap_err().to_string();
        assert!(msg.contains("FedDistill") && msg.contains("SCAFFOLD"));
    }

    #[test]
    fn unknown_hyper_rejected() {
        let mut h = BTreeMap::new();
        h.insert("mu".to_owned(), 0.1);
        assert!(build("FedProx", &h).is_ok());
        assert!(build("FedAvg", &h).is_err());
    }
}
