use super::common::{aggregate_group, payload_model, plain_training, segment_update, splice, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, ServerState};
use crate::numcore::{Matrix, SegmentGroup};
use crate::Result;

/// Private body, shared head.
#[derive(Debug, Clone, Copy, Default)]
pub struct LgFedAvg;

impl Algorithm for LgFedAvg {
    fn name(&self) -> &'static str {
        "LG-FedAvg"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Segments {
            params: server.global.clone(),
            group: SegmentGroup::Head,
        }
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let global = payload_model(payload, client.id)?;
        let mut m = splice(&client.model, &global, SegmentGroup::Head)?;
        let loss = plain_training(&ctx.shape, &mut m, &client.train, ctx, STREAM_MAIN, None)?;
        client.model = m.clone();
        Ok(segment_update(client, m, SegmentGroup::Head, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_group(server, updates, SegmentGroup::Head)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        let m = splice(&client.model, &server.global, SegmentGroup::Head)?;
        Ok(Prediction::direct(server.shape.predict(&m, inputs)?))
    }
}
