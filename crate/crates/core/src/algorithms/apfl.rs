use super::common::{aggregate_full, epoch_batches, model_update, payload_model, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::{dot, sgd_step_in_place, Matrix, ParamVector};
use crate::Result;

/// `m = ᾱ·v + (1 − ᾱ)·w`.
pub fn blend(alpha: f64, v: &ParamVector, w: &ParamVector) -> Result<ParamVector> {
    let mut m = w.clone();
    m.axpy_in_place(alpha, &v.sub(w)?)?;
    Ok(m)
}

/// `clip01(ᾱ − η·⟨g(m), v − w⟩)`.
pub fn alpha_step(alpha: f64, lr: f64, grad_m: &ParamVector, v: &ParamVector, w: &ParamVector) -> Result<f64> {
    Ok((alpha - lr * dot(grad_m, &v.sub(w)?)?).clamp(0.0, 1.0))
}

/// Adaptive mixture of a local personal model and the shared model.
#[derive(Debug, Clone, Copy)]
pub struct Apfl {
    pub alpha0: f64,
    pub adapt_alpha: bool,
}

impl Apfl {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        let alpha0 = h.non_negative("alpha0", 0.5)?;
        if alpha0 > 1.0 {
            return Err(crate::Error::Config(format!("alpha0 must lie in [0, 1], got {alpha0}")));
        }
        Ok(Self {
            alpha0,
            adapt_alpha: h.flag("adapt_alpha", true),
        })
    }
}

impl Algorithm for Apfl {
    fn name(&self) -> &'static str {
        "APFL"
    }

    fn init(&self, _server: &mut ServerState, clients: &mut [ClientState]) -> Result<()> {
        for c in clients {
            c.mix_weight = Some(self.alpha0);
        }
        Ok(())
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Model(server.global.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let mut w = payload_model(payload, client.id)?;
        let mut v = client.personal.take().unwrap_or_else(|| w.clone());
        let mut alpha = client.mix_weight.unwrap_or(self.alpha0);
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let mut total = 0.0;
        for b in &batches {
            let batch = client.train.batch(b)?;
            let (l, gw) = ctx.shape.loss_and_grad(&w, &batch)?;
            total += l;
            sgd_step_in_place(&mut w, &gw, ctx.lr, None)?;
            if alpha == 0.0 && !self.adapt_alpha {
                continue;
            }
            let m = blend(alpha, &v, &w)?;
            let (_, gm) = ctx.shape.loss_and_grad(&m, &batch)?;
            let next_alpha = if self.adapt_alpha {
                alpha_step(alpha, ctx.lr, &gm, &v, &w)?
            } else {
                alpha
            };
            sgd_step_in_place(&mut v, &gm, ctx.lr * alpha, None)?;
            alpha = next_alpha;
        }
        client.personal = Some(v);
        client.mix_weight = Some(alpha);
        client.model = w.clone();
        Ok(model_update(client, w, total / batches.len().max(1) as f64))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        Ok(match (&client.personal, client.mix_weight) {
            (Some(v), Some(a)) => Prediction::direct(server.shape.predict(&blend(a, v, &client.model)?, inputs)?),
            _ => Prediction {
                labels: server.shape.predict(&client.model, inputs)?,
                fallback: true,
            },
        })
    }
}
