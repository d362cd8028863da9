use super::common::{aggregate_group, payload_model, plain_training, segment_update, splice, STREAM_MAIN, STREAM_SECOND};
use super::{Algorithm, FedPer, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::{Matrix, SegmentGroup, SegmentMask};
use crate::Result;

/// Shared body, private head, trained in alternation: head first with the
/// body frozen, then body with the head frozen.
#[derive(Debug, Clone, Copy)]
pub struct FedRep {
    pub head_epochs: usize,
    pub body_epochs: usize,
}

impl FedRep {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            head_epochs: h.count("head_epochs", 1)?,
            body_epochs: h.count("body_epochs", 1)?,
        })
    }
}

impl Algorithm for FedRep {
    fn name(&self) -> &'static str {
        "FedRep"
    }

    fn server_payload(&self, server: &ServerState, client: usize) -> Payload {
        FedPer.server_payload(server, client)
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let global = payload_model(payload, client.id)?;
        let mut m = splice(&client.model, &global, SegmentGroup::Body)?;
        let head_ctx = LocalContext {
            local_epochs: self.head_epochs,
            ..*ctx
        };
        let body_ctx = LocalContext {
            local_epochs: self.body_epochs,
            ..*ctx
        };
        let l1 = plain_training(
            &ctx.shape,
            &mut m,
            &client.train,
            &head_ctx,
            STREAM_MAIN,
            Some(&SegmentMask::Group(SegmentGroup::Body)),
        )?;
        let l2 = plain_training(
            &ctx.shape,
            &mut m,
            &client.train,
            &body_ctx,
            STREAM_SECOND,
            Some(&SegmentMask::Group(SegmentGroup::Head)),
        )?;
        let loss = if self.body_epochs > 0 { l2 } else { l1 };
        client.model = m.clone();
        Ok(segment_update(client, m, SegmentGroup::Body, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_group(server, updates, SegmentGroup::Body)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        FedPer.predict(server, client, inputs)
    }
}
