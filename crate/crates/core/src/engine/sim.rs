use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::index;

use super::{ClientState, RoundMetrics, RunConfig, ServerState};
use crate::algorithms::{self, Algorithm, LocalContext, Payload, Update, UpdateBody};
use crate::datagen::{Dataset, Scenario};
use crate::numcore::{MlpShape, ParamVector};
use crate::privacy::{dp_privatize_slice, DpConfig};
use crate::rng;
use crate::{Error, Result};

const INIT_STREAM: u64 = 0x1417;
const DP_STREAM: u64 = 0xd9;

/// `floor(join_ratio · N)` distinct client ids drawn uniformly from the
/// server RNG, ascending. Full participation consumes no randomness.
pub fn sample_clients(server: &mut ServerState, config: &RunConfig) -> Vec<usize> {
    let n = server.num_clients;
    let k = config.clients_per_round().clamp(1, n.max(1));
    if k >= n {
        return (0..n).collect();
    }
    let mut ids = index::sample(&mut server.rng, n, k).into_vec();
    ids.sort_unstable();
    ids
}

fn accuracy(pred: &[usize], truth: &[usize]) -> usize {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count()
}

/// Accuracy of the global model over the union of all client test sets.
pub fn evaluate_global(server: &ServerState, clients: &[ClientState]) -> Result<f64> {
    let mut correct = 0;
    let mut total = 0;
    for c in clients {
        let pred = server.shape.predict(&server.global, c.test.inputs())?;
        correct += accuracy(&pred, c.test.labels());
        total += c.n_test();
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

/// Sample-weighted accuracy of each client's designated model on its own
/// test set, plus the number of clients that fell back to their local model.
pub fn evaluate_personalized(
    server: &ServerState,
    clients: &[ClientState],
    algorithm: &dyn Algorithm,
) -> Result<(f64, usize)> {
    let mut correct = 0;
    let mut total = 0;
    let mut fallbacks = 0;
    for c in clients {
        let p = algorithm.predict(server, c, c.test.inputs())?;
        if p.labels.len() != c.n_test() {
            return Err(Error::Protocol {
                client: c.id,
                detail: format!("{} predictions for {} test samples", p.labels.len(), c.n_test()),
            });
        }
        correct += accuracy(&p.labels, c.test.labels());
        total += c.n_test();
        fallbacks += usize::from(p.fallback);
    }
    Ok((if total == 0 { 0.0 } else { correct as f64 / total as f64 }, fallbacks))
}

/// One federated run: configuration, model shape, plugin and all state.
pub struct Simulation {
    config: RunConfig,
    algorithm: Box<dyn Algorithm>,
    server: ServerState,
    clients: Vec<ClientState>,
    threads: usize,
    dp: DpConfig,
    history: Vec<RoundMetrics>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, shape: MlpShape, config: RunConfig) -> Result<Self> {
        let data = scenario
            .clients
            .iter()
            .map(|c| (c.train.clone(), c.test.clone()))
            .collect();
        Self::from_datasets(data, shape, config)
    }

    /// Builds a run over explicit `(train, test)` pairs, one per client.
    pub fn from_datasets(data: Vec<(Dataset, Dataset)>, shape: MlpShape, config: RunConfig) -> Result<Self> {
        config.validate()?;
        if data.len() != config.num_clients {
            return Err(Error::Config(format!(
                "config expects {} clients, scenario has {}",
                config.num_clients,
                data.len()
            )));
        }
        for (i, (tr, te)) in data.iter().enumerate() {
            for ds in [tr, te] {
                if ds.dim() != shape.input_dim || ds.num_classes() != shape.num_classes {
                    return Err(Error::Config(format!(
                        "client {i} data is {}-dimensional with {} classes, model expects {} and {}",
                        ds.dim(),
                        ds.num_classes(),
                        shape.input_dim,
                        shape.num_classes
                    )));
                }
            }
        }
        let algorithm = algorithms::build(&config.algorithm, &config.hyper)?;
        let global = shape.init(&mut rng::stream(config.seed, &[INIT_STREAM]));
        let mut clients = data
            .into_iter()
            .enumerate()
            .map(|(i, (tr, te))| ClientState::new(i, tr, te, global.clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut server = ServerState::new(
            shape,
            global,
            config.num_clients,
            config.num_rounds,
            config.learning_rate,
            config.seed,
        );
        algorithm.init(&mut server, &mut clients)?;
        Ok(Self {
            config,
            algorithm,
            server,
            clients,
            threads: 1,
            dp: DpConfig::disabled(),
            history: Vec::new(),
        })
    }

    /// Worker threads for local training; results do not depend on it.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn with_dp(mut self, dp: DpConfig) -> Result<Self> {
        dp.validate()?;
        self.dp = dp;
        Ok(self)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn algorithm(&self) -> &dyn Algorithm {
        self.algorithm.as_ref()
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    /// Direct access for tests and fault injection.
    pub fn state_mut(&mut self) -> (&mut ServerState, &mut [ClientState]) {
        (&mut self.server, &mut self.clients)
    }

    pub fn history(&self) -> &[RoundMetrics] {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.server.round >= self.config.num_rounds
    }

    fn context(&self, client: usize) -> LocalContext {
        LocalContext {
            shape: self.server.shape,
            round: self.server.round,
            seed: self.config.seed,
            client_id: client,
            lr: self.config.learning_rate,
            local_epochs: self.config.local_epochs,
            batch_size: self.config.batch_size,
        }
    }

    fn train_sampled(&mut self, ids: &[usize], payloads: Vec<Payload>) -> Vec<(usize, Result<Update>)> {
        let wanted: BTreeSet<usize> = ids.iter().copied().collect();
        let ctxs: Vec<LocalContext> = ids.iter().map(|&i| self.context(i)).collect();
        let algo = self.algorithm.as_ref();
        let mut jobs: Vec<(&mut ClientState, Payload, LocalContext)> = self
            .clients
            .iter_mut()
            .filter(|c| wanted.contains(&c.id))
            .zip(payloads)
            .zip(ctxs)
            .map(|((c, p), x)| (c, p, x))
            .collect();
        let run = |(c, p, x): &mut (&mut ClientState, Payload, LocalContext)| {
            let id = c.id;
            (id, algo.local_train(c, p.clone(), x))
        };
        if self.threads <= 1 || jobs.len() <= 1 {
            return jobs.iter_mut().map(run).collect();
        }
        let per = jobs.len().div_ceil(self.threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .chunks_mut(per)
                .map(|chunk| s.spawn(move || chunk.iter_mut().map(run).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("training worker panicked"))
                .collect()
        })
    }

    fn check_update(&self, id: usize, u: &Update) -> Result<()> {
        let layout = self.server.global.layout();
        let check = |p: &ParamVector| -> Result<()> {
            if !Arc::ptr_eq(p.layout(), layout) && **p.layout() != **layout {
                return Err(Error::Protocol {
                    client: id,
                    detail: "update layout differs from the global model".into(),
                });
            }
            if !p.is_finite() {
                return Err(Error::Divergence {
                    client: id,
                    detail: "update contains non-finite parameters".into(),
                });
            }
            Ok(())
        };
        match &u.body {
            UpdateBody::Model(p) | UpdateBody::Segments { params: p, .. } => check(p)?,
            UpdateBody::Scaffold {
                delta_model,
                delta_control,
            } => {
                check(delta_model)?;
                check(delta_control)?;
            }
            UpdateBody::Table(t) => {
                if !t.is_finite() {
                    return Err(Error::Divergence {
                        client: id,
                        detail: "class table contains non-finite values".into(),
                    });
                }
            }
        }
        if !u.train_loss.is_finite() {
            return Err(Error::Divergence {
                client: id,
                detail: format!("training loss is {}", u.train_loss),
            });
        }
        Ok(())
    }

    fn privatize(&self, id: usize, u: &mut Update) -> Result<()> {
        if !self.dp.enabled {
            return Ok(());
        }
        let mut r = rng::stream(self.config.seed, &[DP_STREAM, self.server.round as u64, id as u64]);
        let global = &self.server.global;
        match &mut u.body {
            UpdateBody::Model(p) => {
                let mut delta = p.sub(global)?;
                dp_privatize_slice(delta.as_mut_slice(), &self.dp, &mut r);
                *p = global.add(&delta)?;
            }
            UpdateBody::Segments { params, group } => {
                let mine = params.group_values(*group);
                let base = global.group_values(*group);
                let mut delta: Vec<f64> = mine.iter().zip(&base).map(|(a, b)| a - b).collect();
                dp_privatize_slice(&mut delta, &self.dp, &mut r);
                let noised: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + d).collect();
                params.set_group_values(*group, &noised)?;
            }
            UpdateBody::Scaffold { delta_model, .. } => {
                dp_privatize_slice(delta_model.as_mut_slice(), &self.dp, &mut r);
            }
            UpdateBody::Table(_) => {}
        }
        Ok(())
    }

    /// Runs one round; returns metrics when the round is an evaluation round.
    pub fn run_round(&mut self) -> Result<Option<RoundMetrics>> {
        if self.is_finished() {
            return Err(Error::Config(format!(
                "all {} rounds have already run",
                self.config.num_rounds
            )));
        }
        self.server.round += 1;
        let ids = sample_clients(&mut self.server, &self.config);
        let payloads: Vec<Payload> = ids
            .iter()
            .map(|&i| self.algorithm.server_payload(&self.server, i))
            .collect();
        let results = self.train_sampled(&ids, payloads);

        let mut updates = Vec::with_capacity(results.len());
        for (id, r) in results {
            let mut u = r?;
            self.check_update(id, &u)?;
            self.privatize(id, &mut u)?;
            updates.push((id, u));
        }
        let uplink: usize = updates.iter().map(|(_, u)| u.body.uplink_floats()).sum();
        let n_total: usize = updates.iter().map(|(_, u)| u.num_samples).sum();
        let train_loss = updates
            .iter()
            .map(|(_, u)| u.train_loss * u.num_samples as f64)
            .sum::<f64>()
            / n_total.max(1) as f64;

        self.algorithm.aggregate(&mut self.server, &updates)?;
        for &i in &ids {
            self.clients[i].rounds_trained += 1;
        }

        if !self.server.round.is_multiple_of(self.config.eval_interval) {
            return Ok(None);
        }
        let global_acc = evaluate_global(&self.server, &self.clients)?;
        let (personal_acc, personal_fallbacks) =
            evaluate_personalized(&self.server, &self.clients, self.algorithm.as_ref())?;
        let m = RoundMetrics {
            round: self.server.round,
            global_acc,
            personal_acc,
            train_loss,
            uplink_floats: uplink,
            personal_fallbacks,
        };
        self.history.push(m.clone());
        Ok(Some(m))
    }

    /// Runs every remaining round and returns the full metrics history.
    pub fn run(&mut self) -> Result<&[RoundMetrics]> {
        while !self.is_finished() {
            self.run_round()?;
        }
        Ok(&self.history)
    }
}
