use std::sync::Arc;

use super::common::{aggregate_full, epoch_batches, model_update, payload_model, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, ServerState};
use crate::numcore::{cross_entropy_grad, sgd_step_in_place, Matrix, MlpShape, ParamVector};
use crate::{Error, Result};

/// Count used for classes absent from a client.
pub const ABSENT_CLASS_COUNT: f64 = 1e-8;

/// Balanced-softmax logits `z_c + ln n_c`.
pub fn balanced_logits(logits: &Matrix, counts: &[usize]) -> Result<Matrix> {
    if counts.len() != logits.cols() {
        return Err(Error::Shape(format!(
            "{} class counts for {} logits",
            counts.len(),
            logits.cols()
        )));
    }
    let shift: Vec<f64> = counts
        .iter()
        .map(|&n| if n == 0 { ABSENT_CLASS_COUNT } else { n as f64 }.ln())
        .collect();
    let mut out = logits.clone();
    out.add_row_vector(&shift)?;
    Ok(out)
}

fn aux_logits(shape: &MlpShape, reps: &Matrix, aux: &ParamVector) -> Result<Matrix> {
    let w = aux.segment("Wp").ok_or_else(|| Error::Layout("missing segment `Wp`".into()))?;
    let b = aux.segment("bp").ok_or_else(|| Error::Layout("missing segment `bp`".into()))?;
    shape.head_logits(reps, w, b)
}

/// Generic head trained with balanced softmax and aggregated with the body;
/// a private head on detached representations corrects its logits.
#[derive(Debug, Clone, Copy, Default)]
pub struct FedRod;

impl Algorithm for FedRod {
    fn name(&self) -> &'static str {
        "FedRoD"
    }

    fn init(&self, server: &mut ServerState, clients: &mut [ClientState]) -> Result<()> {
        let layout = server.shape.head_layout();
        for c in clients {
            c.aux_head = Some(ParamVector::zeros(Arc::clone(&layout)));
        }
        Ok(())
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Model(server.global.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let shape = ctx.shape;
        let mut m = payload_model(payload, client.id)?;
        let mut aux = client
            .aux_head
            .take()
            .unwrap_or_else(|| ParamVector::zeros(shape.head_layout()));
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let mut total = 0.0;
        for b in &batches {
            let batch = client.train.batch(b)?;
            let fwd = shape.forward(&m, &batch.inputs)?;
            let adjusted = balanced_logits(&fwd.logits, &client.class_counts)?;
            let (loss, dz) = cross_entropy_grad(&adjusted, &batch.labels)?;
            total += loss;
            let grad = shape.backward_from(&m, &batch.inputs, &fwd, &dz, None)?;

            let mut combined = aux_logits(&shape, &fwd.reps, &aux)?;
            for (c, z) in combined.as_mut_slice().iter_mut().zip(fwd.logits.as_slice()) {
                *c += z;
            }
            let (_, dp) = cross_entropy_grad(&combined, &batch.labels)?;
            let mut aux_grad = ParamVector::zeros(Arc::clone(aux.layout()));
            fwd.reps
                .tmatmul_into(&dp, aux_grad.segment_mut("Wp").expect("Wp"))?;
            aux_grad
                .segment_mut("bp")
                .expect("bp")
                .copy_from_slice(&dp.column_sums());

            sgd_step_in_place(&mut m, &grad, ctx.lr, None)?;
            sgd_step_in_place(&mut aux, &aux_grad, ctx.lr, None)?;
        }
        if !aux.is_finite() {
            return Err(Error::Divergence {
                client: client.id,
                detail: "personal head is not finite".into(),
            });
        }
        client.aux_head = Some(aux);
        client.model = m.clone();
        Ok(model_update(client, m, total / batches.len().max(1) as f64))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        let fwd = server.shape.forward(&server.global, inputs)?;
        let Some(aux) = &client.aux_head else {
            return Ok(Prediction {
                labels: fwd.logits.argmax_rows(),
                fallback: true,
            });
        };
        let mut z = aux_logits(&server.shape, &fwd.reps, aux)?;
        for (a, g) in z.as_mut_slice().iter_mut().zip(fwd.logits.as_slice()) {
            *a += g;
        }
        Ok(Prediction::direct(z.argmax_rows()))
    }
}
