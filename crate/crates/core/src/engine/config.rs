use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Round-loop settings shared by every algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub num_rounds: usize,
    pub num_clients: usize,
    pub join_ratio: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub eval_interval: usize,
    pub seed: u64,
    pub algorithm: String,
    #[serde(default)]
    pub hyper: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn new(algorithm: impl Into<String>, num_clients: usize) -> Self {
        Self {
            num_rounds: 100,
            num_clients,
            join_ratio: 1.0,
            local_epochs: 1,
            batch_size: 10,
            learning_rate: 0.05,
            eval_interval: 1,
            seed: 0,
            algorithm: algorithm.into(),
            hyper: BTreeMap::new(),
        }
    }

    pub fn with_hyper(mut self, key: &str, value: f64) -> Self {
        self.hyper.insert(key.to_string(), value);
        self
    }

    /// Number of clients drawn each round, `floor(join_ratio · num_clients)`.
    pub fn clients_per_round(&self) -> usize {
        ((self.join_ratio * self.num_clients as f64) + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::Config("num_clients must be at least 1".into()));
        }
        if !(self.join_ratio > 0.0 && self.join_ratio <= 1.0) {
            return Err(Error::Config(format!("join_ratio must be in (0, 1], got {}", self.join_ratio)));
        }
        if self.clients_per_round() == 0 {
            return Err(Error::Config(format!(
                "join_ratio {} selects no client out of {}",
                self.join_ratio, self.num_clients
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.eval_interval == 0 {
            return Err(Error::Config("batch_size and eval_interval must be positive".into()));
        }
        Ok(())
    }
}

/// Reads algorithm hyperparameters and remembers which keys were consumed,
/// so unknown keys can be reported.
pub struct HyperParams<'a> {
    map: &'a BTreeMap<String, f64>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> HyperParams<'a> {
    pub fn new(map: &'a BTreeMap<String, f64>) -> Self {
        Self {
            map,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    pub fn get(&self, key: &str, default: f64) -> f64 {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key).copied().unwrap_or(default)
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("{key} must be positive, got {v}")))
        }
    }

    pub fn non_negative(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default);
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("{key} must be non-negative, got {v}")))
        }
    }

    /// The value for `key` if present, which must be non-negative.
    pub fn optional_non_negative(&self, key: &str) -> Result<Option<f64>> {
        if self.map.contains_key(key) {
            self.non_negative(key, 0.0).map(Some)
        } else {
            self.used.borrow_mut().insert(key.to_string());
            Ok(None)
        }
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
            Ok(v as usize)
        } else {
            Err(Error::Config(format!("{key} must be a non-negative integer, got {v}")))
        }
    }

    pub fn flag(&self, key: &str, default: bool) -> bool {
        self.get(key, if default { 1.0 } else { 0.0 }) != 0.0
    }

    /// Fails if the map holds keys nobody asked for.
    pub fn finish(self, algorithm: &str) -> Result<()> {
        let used = self.used.into_inner();
        let unknown: Vec<&str> = self
            .map
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{algorithm} does not take hyperparameter(s): {}",
                unknown.join(", ")
            )))
        }
    }
}
