use super::common::{aggregate_full, epoch_batches, model_update, payload_model, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{ClientState, HyperParams, ServerState};
use crate::numcore::{Matrix, ParamVector};
use crate::Result;

/// `K` steps of `θ ← θ − η(g(θ) + λ(θ − w))` starting from `θ = w`.
pub fn proximal_inner<F>(w: &ParamVector, lambda: f64, eta: f64, k: usize, mut grad: F) -> Result<ParamVector>
where
    F: FnMut(&ParamVector) -> Result<ParamVector>,
{
    let mut theta = w.clone();
    for _ in 0..k {
        let mut g = grad(&theta)?;
        g.axpy_in_place(lambda, &theta.sub(w)?)?;
        theta.axpy_in_place(-eta, &g)?;
    }
    Ok(theta)
}

/// `w ← w − η·λ·(w − θ)`.
pub fn outer_step(w: &ParamVector, theta: &ParamVector, lr: f64, lambda: f64) -> Result<ParamVector> {
    let mut out = w.clone();
    out.axpy_in_place(-lr * lambda, &w.sub(theta)?)?;
    Ok(out)
}

/// Moreau-envelope personalization.
#[derive(Debug, Clone, Copy)]
pub struct PFedMe {
    pub lambda: f64,
    pub k_inner: usize,
    pub eta_inner: f64,
}

impl PFedMe {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            lambda: h.non_negative("lambda", 1.0)?,
            k_inner: h.count("K_inner", 5)?,
            eta_inner: h.positive("eta_inner", 0.01)?,
        })
    }
}

impl Algorithm for PFedMe {
    fn name(&self) -> &'static str {
        "pFedMe"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Model(server.global.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let mut w = payload_model(payload, client.id)?;
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let mut theta = w.clone();
        let mut total = 0.0;
        for b in &batches {
            let batch = client.train.batch(b)?;
            let mut first = true;
            theta = proximal_inner(&w, self.lambda, self.eta_inner, self.k_inner, |t| {
                let (l, g) = ctx.shape.loss_and_grad(t, &batch)?;
                if first {
                    total += l;
                    first = false;
                }
                Ok(g)
            })?;
            if first {
                total += ctx.shape.loss(&theta, &batch)?;
            }
            w = outer_step(&w, &theta, ctx.lr, self.lambda)?;
        }
        client.personal = Some(theta);
        client.model = w.clone();
        Ok(model_update(client, w, total / batches.len().max(1) as f64))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        aggregate_full(server, updates)
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        Ok(match &client.personal {
            Some(theta) => Prediction::direct(server.shape.predict(theta, inputs)?),
            None => Prediction {
                labels: server.shape.predict(&client.model, inputs)?,
                fallback: true,
            },
        })
    }
}
