use super::common::{aggregate_full, model_update, payload_model, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::datagen::Dataset;
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::{sgd_step, sgd_step_in_place, Batch, Matrix, MlpShape, ParamVector};
use crate::Result;
use rand::seq::SliceRandom;

/// First-order meta step: `w' = w − α·g(B1, w)`, then `w − β·g(B2, w')`.
/// `grad` returns the gradient of a given batch at a given point.
pub fn meta_step<F>(w: &ParamVector, alpha: f64, beta: f64, mut grad: F) -> Result<ParamVector>
where
    F: FnMut(&ParamVector, usize) -> Result<ParamVector>,
{
    let inner = sgd_step(w, &grad(w, 0)?, alpha, None)?;
    sgd_step(w, &grad(&inner, 1)?, beta, None)
}

/// First-order Per-FedAvg.
#[derive(Debug, Clone, Copy)]
pub struct PerFedAvg {
    /// Inner (adaptation) step size; `None` uses the run's learning rate.
    pub alpha: Option<f64>,
    /// Outer step size; `None` uses the run's learning rate.
    pub beta: Option<f64>,
}

impl PerFedAvg {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            alpha: h.optional_non_negative("alpha")?,
            beta: h.optional_non_negative("beta")?,
        })
    }
}

/// Disjoint batch pairs: shuffled chunks of `2·batch_size`, each halved.
/// A leftover single sample is used for both batches.
fn batch_pairs(n: usize, batch_size: usize, epochs: usize, rng: &mut impl rand::Rng) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for _ in 0..epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(2 * batch_size.max(1)) {
            if chunk.len() == 1 {
                out.push((chunk.to_vec(), chunk.to_vec()));
            } else {
                let half = chunk.len().div_ceil(2);
                out.push((chunk[..half].to_vec(), chunk[half..].to_vec()));
            }
        }
    }
    out
}

/// One full-batch adaptation step from `w` on `data`.
pub(crate) fn adapt(shape: &MlpShape, w: &ParamVector, data: &Dataset, alpha: f64) -> Result<ParamVector> {
    let (_, g) = shape.loss_and_grad(w, &data.full_batch()?)?;
    sgd_step(w, &g, alpha, None)
}

impl Algorithm for PerFedAvg {
    fn name(&self) -> &'static str {
        "Per-FedAvg"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Model(server.global.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let alpha = self.alpha.unwrap_or(ctx.lr);
        let beta = self.beta.unwrap_or(ctx.lr);
        let mut w = payload_model(payload, client.id)?;
        let pairs = batch_pairs(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let mut total = 0.0;
        for (b1, b2) in &pairs {
            let b1: Batch = client.train.batch(b1)?;
            let b2: Batch = client.train.batch(b2)?;
            let (l, g1) = ctx.shape.loss_and_grad(&w, &b1)?;
            total += l;
            let inner = sgd_step(&w, &g1, alpha, None)?;
            let (_, g2) = ctx.shape.loss_and_grad(&inner, &b2)?;
            sgd_step_in_place(&mut w, &g2, beta, None)?;
        }
        let loss = total / pairs.len().max(1) as f64;
        client.model = w.clone();
        Ok(model_update(client, w, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        let alpha = self.alpha.unwrap_or(server.lr);
        let adapted = adapt(&server.shape, &server.global, &client.train, alpha)?;
        Ok(Prediction::direct(server.shape.predict(&adapted, inputs)?))
    }
}
