use super::common::{
    aggregate_full, epoch_batches, model_update, payload_model, plain_training, run_sgd, STREAM_MAIN, STREAM_SECOND,
};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::Matrix;
use crate::Result;

/// FedAvg for the global model plus a locally kept personal model pulled
/// toward the global one.
#[derive(Debug, Clone, Copy)]
pub struct Ditto {
    pub lambda: f64,
}

impl Ditto {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            lambda: h.non_negative("lambda", 1.0)?,
        })
    }
}

impl Algorithm for Ditto {
    fn name(&self) -> &'static str {
        "Ditto"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Model(server.global.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let global = payload_model(payload, client.id)?;
        let mut w = global.clone();
        let loss = plain_training(&ctx.shape, &mut w, &client.train, ctx, STREAM_MAIN, None)?;

        let mut v = client.personal.take().unwrap_or_else(|| global.clone());
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_SECOND));
        let lambda = self.lambda;
        run_sgd(&mut v, &client.train, &batches, ctx.lr, None, |p, b| {
            let (l, mut g) = ctx.shape.loss_and_grad(p, b)?;
            if lambda != 0.0 {
                g.axpy_in_place(lambda, &p.sub(&global)?)?;
            }
            Ok((l, g))
        })?;
        client.personal = Some(v);
        client.model = w.clone();
        Ok(model_update(client, w, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        Ok(match &client.personal {
            Some(v) => Prediction::direct(server.shape.predict(v, inputs)?),
            None => Prediction {
                labels: server.shape.predict(&client.model, inputs)?,
                fallback: true,
            },
        })
    }
}
