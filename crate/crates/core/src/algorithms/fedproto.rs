use super::common::{epoch_batches, merge_tables, payload_table, table_updates, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update, UpdateBody};
use crate::engine::{ClassTable, ClientState, HyperParams, ServerState};
use crate::numcore::{cross_entropy_grad, sgd_step_in_place, Matrix};
use crate::{Error, Result};

/// Count-weighted per-class mean of client prototypes.
pub fn aggregate_prototypes<'a>(tables: impl IntoIterator<Item = &'a ClassTable>, dim: usize) -> Result<ClassTable> {
    merge_tables(tables, dim, |n| n as f64)
}

/// Index of the nearest prototype to `rep` (lowest class on ties).
pub fn nearest_prototype(rep: &[f64], protos: &ClassTable) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, e) in protos.iter() {
        let d: f64 = rep.iter().zip(&e.vector).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c, d));
        }
    }
    best.map(|(c, _)| c)
}

/// Exchanges class prototypes only; models stay local.
#[derive(Debug, Clone, Copy)]
pub struct FedProto {
    pub lambda: f64,
}

impl FedProto {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            lambda: h.non_negative("lambda", 1.0)?,
        })
    }
}

impl Algorithm for FedProto {
    fn name(&self) -> &'static str {
        "FedProto"
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
            let (mut loss, dz) = cross_entropy_grad(&fwd.logits, &batch.labels)?;
            let extra = match (&global, self.lambda > 0.0) {
                (Some(protos), true) => {
                    let n = batch.len() as f64;
                    let mut d = Matrix::zeros(fwd.reps.rows(), fwd.reps.cols());
                    for (r, &y) in batch.labels.iter().enumerate() {
                        if let Some(p) = protos.get(y) {
                            for ((dst, &h), &pc) in d.row_mut(r).iter_mut().zip(fwd.reps.row(r)).zip(&p.vector) {
                                loss += self.lambda * (h - pc) * (h - pc) / n;
                                *dst = 2.0 * self.lambda * (h - pc) / n;
                            }
                        }
                    }
                    Some(d)
                }
                _ => None,
            };
            total += loss;
            let grad = shape.backward_from(&m, &batch.inputs, &fwd, &dz, extra.as_ref())?;
            sgd_step_in_place(&mut m, &grad, ctx.lr, None)?;
        }
        let reps = shape.represent(&m, client.train.inputs())?;
        let table = ClassTable::class_means(&reps, client.train.labels());
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
        let dim = server.shape.rep_dim();
        if tables.is_empty() {
            return Err(Error::Config("cannot aggregate an empty update list".into()));
        }
        server.class_table = Some(aggregate_prototypes(tables.into_iter().map(|(_, t)| t), dim)?);
        Ok(())
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        match &client.class_table {
            Some(protos) if !protos.is_empty() => {
                let reps = server.shape.represent(&client.model, inputs)?;
                let labels = (0..reps.rows())
                    .map(|r| nearest_prototype(reps.row(r), protos).expect("table is non-empty"))
                    .collect();
                Ok(Prediction::direct(labels))
            }
            _ => Ok(Prediction {
                labels: server.shape.predict(&client.model, inputs)?,
                fallback: true,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(usize, f64, usize)]) -> ClassTable {
        let mut t = ClassTable::new(1);
        for &(c, v, n) in entries {
            t.insert(c, vec![v], n).unwrap();
        }
        t
    }

    #[test]
    fn single_client_is_identity() {
        let t = table(&[(0, 0.25, 3), (2, -1.0, 5)]);
        assert_eq!(aggregate_prototypes([&t], 1).unwrap(), t);
    }

    #[test]
    fn equal_counts_average() {
        let a = table(&[(0, 0.0, 4)]);
        let b = table(&[(0, 2.0, 4)]);
        assert_eq!(aggregate_prototypes([&a, &b], 1).unwrap().get(0).unwrap().vector, vec![1.0]);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let t = table(&[(1, 1.0, 1), (3, -1.0, 1), (5, 4.0, 1)]);
        assert_eq!(nearest_prototype(&[0.0], &t), Some(1));
        assert_eq!(nearest_prototype(&[3.0], &t), Some(5));
        assert_eq!(nearest_prototype(&[0.0], &ClassTable::new(1)), None);
    }
}
