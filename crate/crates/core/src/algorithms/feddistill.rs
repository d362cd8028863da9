use super::common::{epoch_batches, merge_tables, payload_table, table_updates, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update, UpdateBody};
use crate::engine::{ClassTable, ClientState, HyperParams, ServerState};
use crate::numcore::{cross_entropy_grad, sgd_step_in_place, Matrix};
use crate::{Error, Result};

/// Unweighted per-class mean over the clients holding each class.
pub fn average_logits<'a>(tables: impl IntoIterator<Item = &'a ClassTable>, dim: usize) -> Result<ClassTable> {
    merge_tables(tables, dim, |_| 1.0)
}

/// `γ · mean over n·C of (z − G_y)²` and its gradient, for rows whose
/// class has a global entry.
pub fn distill_term(logits: &Matrix, labels: &[usize], global: &ClassTable, gamma: f64) -> (f64, Matrix) {
    let scale = gamma / (logits.rows() * logits.cols()) as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (r, &y) in labels.iter().enumerate() {
        if let Some(e) = global.get(y) {
            for ((g, &z), &t) in grad.row_mut(r).iter_mut().zip(logits.row(r)).zip(&e.vector) {
                loss += scale * (z - t) * (z - t);
                *g = 2.0 * scale * (z - t);
            }
        }
    }
    (loss, grad)
}

/// Exchanges per-class mean logits; models stay local.
#[derive(Debug, Clone, Copy)]
pub struct FedDistill {
    pub gamma: f64,
}

impl FedDistill {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            gamma: h.non_negative("gamma", 1.0)?,
        })
    }
}

impl Algorithm for FedDistill {
    fn name(&self) -> &'static str {
        "FedDistill"
    }

    fn server_payload(&self, server: &ServerState, _client: usize) -> Payload {
        Payload::Table(server.class_table.clone())
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let global = payload_table(payload, client.id)?;
        let shape = ctx.shape;
        let mut m = client.model.clone();
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let mut total = 0.0;
        for b in &batches {
            let batch = client.train.batch(b)?;
            let fwd = shape.forward(&m, &batch.inputs)?;
            let (mut loss, mut dz) = cross_entropy_grad(&fwd.logits, &batch.labels)?;
            if let (Some(g), true) = (&global, self.gamma > 0.0) {
                let (l, d) = distill_term(&fwd.logits, &batch.labels, g, self.gamma);
                loss += l;
                for (a, b) in dz.as_mut_slice().iter_mut().zip(d.as_slice()) {
                    *a += b;
                }
            }
            total += loss;
            let grad = shape.backward_from(&m, &batch.inputs, &fwd, &dz, None)?;
            sgd_step_in_place(&mut m, &grad, ctx.lr, None)?;
        }
        let logits = shape.forward(&m, client.train.inputs())?.logits;
        let table = ClassTable::class_means(&logits, client.train.labels());
        client.model = m;
        client.class_table = Some(table.clone());
        Ok(Update {
            body: UpdateBody::Table(table),
            num_samples: client.n_train(),
            train_loss: total / batches.len().max(1) as f64,
        })
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        let tables = table_updates(updates)?;
        if tables.is_empty() {
            return Err(Error::Config("cannot aggregate an empty update list".into()));
        }
        server.class_table = Some(average_logits(tables.into_iter().map(|(_, t)| t), server.shape.num_classes)?);
        Ok(())
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        Ok(Prediction::direct(server.shape.predict(&client.model, inputs)?))
    }
}
