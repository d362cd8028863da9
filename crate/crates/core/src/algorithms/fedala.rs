use rand::seq::index;

use super::common::{aggregate_full, model_update, payload_model, plain_training, STREAM_MAIN, STREAM_THIRD};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::{Matrix, SegmentGroup};
use crate::{Error, Result};

/// `h_old + W ⊙ (h_global − h_old)`.
pub fn ala_blend(h_old: &[f64], h_global: &[f64], w: &[f64]) -> Vec<f64> {
    h_old
        .iter()
        .zip(h_global)
        .zip(w)
        .map(|((o, g), w)| o + w * (g - o))
        .collect()
}

/// `clip01(W − η · ∂L/∂h ⊙ (h_global − h_old))`.
pub fn ala_weight_step(w: &[f64], grad_h: &[f64], h_global: &[f64], h_old: &[f64], lr: f64) -> Vec<f64> {
    w.iter()
        .zip(grad_h)
        .zip(h_global.iter().zip(h_old))
        .map(|((w, g), (hg, ho))| (w - lr * g * (hg - ho)).clamp(0.0, 1.0))
        .collect()
}

/// Adaptive local aggregation on the head, then FedAvg-style training.
#[derive(Debug, Clone, Copy)]
pub struct FedAla {
    pub ala_lr: f64,
    pub ala_threshold: f64,
    pub ala_max_iters: usize,
    pub rand_fraction: f64,
}

impl FedAla {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        let rand_fraction = h.positive("rand_fraction", 0.8)?;
        if rand_fraction > 1.0 {
            return Err(Error::Config(format!("rand_fraction must lie in (0, 1], got {rand_fraction}")));
        }
        Ok(Self {
            ala_lr: h.non_negative("ala_lr", 1.0)?,
            ala_threshold: h.non_negative("ala_threshold", 1e-3)?,
            ala_max_iters: h.count("ala_max_iters", 20)?,
            rand_fraction,
        })
    }
}

impl Algorithm for FedAla {
    fn name(&self) -> &'static str {
        "FedALA"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Model(server.global.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let global = payload_model(payload, client.id)?;
        let mut model = global.clone();
        match client.ala_weights.take() {
            None => {
                client.ala_weights = Some(vec![1.0; global.layout().group_len(SegmentGroup::Head)]);
            }
            Some(mut w) => {
                let h_old = client.model.group_values(SegmentGroup::Head);
                let h_g = global.group_values(SegmentGroup::Head);
                let n = client.n_train();
                let k = ((n as f64 * self.rand_fraction).round() as usize).clamp(1, n);
                let mut subset = index::sample(&mut ctx.rng(STREAM_THIRD), n, k).into_vec();
                subset.sort_unstable();
                let batch = client.train.batch(&subset)?;
                let mut prev: Option<f64> = None;
                for _ in 0..self.ala_max_iters {
                    model.set_group_values(SegmentGroup::Head, &ala_blend(&h_old, &h_g, &w))?;
                    let (loss, grad) = ctx.shape.loss_and_grad(&model, &batch)?;
                    if prev.is_some_and(|p| (p - loss).abs() < self.ala_threshold) {
                        break;
                    }
                    prev = Some(loss);
                    w = ala_weight_step(&w, &grad.group_values(SegmentGroup::Head), &h_g, &h_old, self.ala_lr);
                }
                model.set_group_values(SegmentGroup::Head, &ala_blend(&h_old, &h_g, &w))?;
                client.ala_weights = Some(w);
            }
        }
        let loss = plain_training(&ctx.shape, &mut model, &client.train, ctx, STREAM_MAIN, None)?;
        client.model = model.clone();
        Ok(model_update(client, model, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        Ok(Prediction {
            labels: server.shape.predict(&client.model, inputs)?,
            fallback: client.ala_weights.is_none(),
        })
    }
}
