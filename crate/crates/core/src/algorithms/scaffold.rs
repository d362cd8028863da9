use super::common::{epoch_batches, protocol, run_sgd, STREAM_MAIN};
use super::{Algorithm, FedAvg, LocalContext, Payload, Prediction, Update, UpdateBody};
use crate::engine::{weighted_average, ClientState, HyperParams, ServerState};
use crate::numcore::{Matrix, ParamVector};
use crate::{Error, Result};

/// Drift-corrected gradient `g − c_i + c`.
pub fn corrected_step(grad: &ParamVector, c_local: &ParamVector, c_global: &ParamVector) -> Result<ParamVector> {
    let mut out = grad.clone();
    out.axpy_in_place(-1.0, c_local)?;
    out.axpy_in_place(1.0, c_global)?;
    Ok(out)
}

/// `c_i⁺ = c_i − c + (w − v)/(K·η)`.
pub fn control_update(
    c_local: &ParamVector,
    c_global: &ParamVector,
    w: &ParamVector,
    v: &ParamVector,
    steps: usize,
    lr: f64,
) -> Result<ParamVector> {
    let mut out = c_local.sub(c_global)?;
    out.axpy_in_place(1.0 / (steps as f64 * lr), &w.sub(v)?)?;
    Ok(out)
}

/// Control-variate corrected local SGD.
#[derive(Debug, Clone, Copy)]
pub struct Scaffold {
    pub server_lr: f64,
}

impl Scaffold {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            server_lr: h.positive("server_lr", 1.0)?,
        })
    }
}

fn unweighted_mean<'a>(vs: impl Iterator<Item = &'a ParamVector>, base: &ParamVector) -> Result<ParamVector> {
    let ups: Vec<(&ParamVector, usize)> = vs.map(|v| (v, 1)).collect();
    weighted_average(&ups, None, base)
}

impl Algorithm for Scaffold {
    fn name(&self) -> &'static str {
        "SCAFFOLD"
    }

    fn init(&self, server: &mut ServerState, clients: &mut [ClientState]) -> Result<()> {
        let zero = ParamVector::zeros(std::sync::Arc::clone(server.global.layout()));
        server.control = Some(zero.clone());
        for c in clients {
            c.control = Some(zero.clone());
        }
        Ok(())
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Scaffold {
            model: server.global.clone(),
            control: server
                .control
                .clone()
                .unwrap_or_else(|| ParamVector::zeros(std::sync::Arc::clone(server.global.layout()))),
        }
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let Payload::Scaffold { model: w, control: c } = payload else {
            return Err(protocol(client.id, "expected a SCAFFOLD payload"));
        };
        let c_i = client
            .control
            .clone()
            .unwrap_or_else(|| ParamVector::zeros(std::sync::Arc::clone(w.layout())));
        let mut v = w.clone();
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let loss = run_sgd(&mut v, &client.train, &batches, ctx.lr, None, |p, b| {
            let (l, g) = ctx.shape.loss_and_grad(p, b)?;
            Ok((l, corrected_step(&g, &c_i, &c)?))
        })?;
        let c_new = control_update(&c_i, &c, &w, &v, batches.len(), ctx.lr)?;
        let delta_control = c_new.sub(&c_i)?;
        let delta_model = v.sub(&w)?;
        client.control = Some(c_new);
        client.model = v;
        Ok(Update {
            body: UpdateBody::Scaffold {
                delta_model,
                delta_control,
            },
            num_samples: client.n_train(),
            train_loss: loss,
        })
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        let mut dm = Vec::with_capacity(updates.len());
        let mut dc = Vec::with_capacity(updates.len());
        for (id, u) in updates {
            match &u.body {
                UpdateBody::Scaffold {
                    delta_model,
                    delta_control,
                } => {
                    dm.push(delta_model);
                    dc.push(delta_control);
                }
                other => return Err(protocol(*id, format!("expected a SCAFFOLD update, got {}", other.tag()))),
            }
        }
        let first = *dm.first().ok_or_else(|| Error::Config("cannot aggregate an empty update list".into()))?;
        let mean_dm = unweighted_mean(dm.into_iter(), first)?;
        let mean_dc = unweighted_mean(dc.iter().copied(), dc[0])?;
        server.global.axpy_in_place(self.server_lr, &mean_dm)?;
        let frac = updates.len() as f64 / server.num_clients as f64;
        let control = server
            .control
            .get_or_insert_with(|| ParamVector::zeros(std::sync::Arc::clone(server.global.layout())));
        control.axpy_in_place(frac, &mean_dc)?;
        Ok(())
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        FedAvg.predict(server, client, inputs)
    }
}
