use super::common::{aggregate_full, epoch_batches, model_update, payload_model, run_sgd, STREAM_MAIN};
use super::{Algorithm, FedAvg, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::{Matrix, ParamVector};
use crate::Result;

/// `g + mu·(v − w)`.
pub fn prox_gradient(grad: &ParamVector, v: &ParamVector, w: &ParamVector, mu: f64) -> Result<ParamVector> {
    let mut out = grad.clone();
    out.axpy_in_place(mu, &v.sub(w)?)?;
    Ok(out)
}

/// FedAvg with a proximal pull toward the round's global model.
#[derive(Debug, Clone, Copy)]
pub struct FedProx {
    pub mu: f64,
}

impl FedProx {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            mu: h.non_negative("mu", 0.01)?,
        })
    }
}

impl Algorithm for FedProx {
    fn name(&self) -> &'static str {
        "FedProx"
    }

    fn server_payload(&self, server: &ServerState, client: usize) -> Payload {
        FedAvg.server_payload(server, client)
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let global = payload_model(payload, client.id)?;
        let mut v = global.clone();
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let mu = self.mu;
        let loss = run_sgd(&mut v, &client.train, &batches, ctx.lr, None, |p, b| {
            let (l, g) = ctx.shape.loss_and_grad(p, b)?;
            if mu == 0.0 {
                return Ok((l, g));
            }
            Ok((l, prox_gradient(&g, p, &global, mu)?))
        })?;
        client.model = v.clone();
        Ok(model_update(client, v, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        FedAvg.predict(server, client, inputs)
    }
}
