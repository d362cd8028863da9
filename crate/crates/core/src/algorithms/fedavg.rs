use super::common::{aggregate_full, model_update, payload_model, plain_training, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, ServerState};
use crate::numcore::Matrix;
use crate::Result;

/// Local SGD from the global model, sample-weighted averaging.
#[derive(Debug, Clone, Copy, Default)]
pub struct FedAvg;

impl Algorithm for FedAvg {
    fn name(&self) -> &'static str {
        "FedAvg"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Model(server.global.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let mut w = payload_model(payload, client.id)?;
        let loss = plain_training(&ctx.shape, &mut w, &client.train, ctx, STREAM_MAIN, None)?;
        client.model = w.clone();
        Ok(model_update(client, w, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, _client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        Ok(Prediction::direct(server.shape.predict(&server.global, inputs)?))
    }
}
