use super::common::{aggregate_group, payload_model, plain_training, segment_update, splice, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::datagen::Dataset;
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::{sgd_step_in_place, Matrix, MlpShape, ParamVector, SegmentGroup, SegmentMask};
use crate::Result;

/// Body-only training under one frozen random head; the head is fine-tuned
/// per client at evaluation time.
#[derive(Debug, Clone, Copy)]
pub struct FedBabu {
    pub finetune_steps: usize,
}

impl FedBabu {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            finetune_steps: h.count("finetune_steps", 10)?,
        })
    }
}

/// `steps` full-batch head-only SGD steps on a copy of `params`.
pub(crate) fn finetune_head(
    shape: &MlpShape,
    params: &ParamVector,
    data: &Dataset,
    steps: usize,
    lr: f64,
) -> Result<ParamVector> {
    let mut m = params.clone();
    if steps == 0 {
        return Ok(m);
    }
    let batch = data.full_batch()?;
    let frozen = SegmentMask::Group(SegmentGroup::Body);
    for _ in 0..steps {
        let (_, g) = shape.loss_and_grad(&m, &batch)?;
        sgd_step_in_place(&mut m, &g, lr, Some(&frozen))?;
    }
    Ok(m)
}

impl Algorithm for FedBabu {
    fn name(&self) -> &'static str {
        "FedBABU"
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
        let frozen = SegmentMask::Group(SegmentGroup::Head);
        let loss = plain_training(&ctx.shape, &mut m, &client.train, ctx, STREAM_MAIN, Some(&frozen))?;
        client.model = m.clone();
        Ok(segment_update(client, m, SegmentGroup::Body, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_group(server, updates, SegmentGroup::Body)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        let tuned = finetune_head(&server.shape, &server.global, &client.train, self.finetune_steps, server.lr)?;
        Ok(Prediction::direct(server.shape.predict(&tuned, inputs)?))
    }
}
