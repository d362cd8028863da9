use super::common::{aggregate_group, payload_model, plain_training, segment_update, splice, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, ServerState};
use crate::numcore::{Matrix, SegmentGroup};
use crate::Result;

/// Shared body, private head.
#[derive(Debug, Clone, Copy, Default)]
pub struct FedPer;

impl Algorithm for FedPer {
    fn name(&self) -> &'static str {
        "FedPer"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Segments {
            params: server.global.clone(),
            group: SegmentGroup::Body,
        }
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let global = payload_model(payload, client.id)?;
        let mut m = splice(&client.model, &global, SegmentGroup::Body)?;
        let loss = plain_training(&ctx.shape, &mut m, &client.train, ctx, STREAM_MAIN, None)?;
        client.model = m.clone();
        Ok(segment_update(client, m, SegmentGroup::Body, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_group(server, updates, SegmentGroup::Body)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        let m = splice(&client.model, &server.global, SegmentGroup::Body)?;
        Ok(Prediction::direct(server.shape.predict(&m, inputs)?))
    }
}
