use rand::seq::SliceRandom;
use rand::Rng;

use super::{Payload, Update, UpdateBody};
use crate::datagen::Dataset;
use crate::engine::{weighted_average, ClassTable, ClientState, ServerState};
use crate::numcore::{sgd_step_in_place, Batch, MlpShape, ParamVector, SegmentGroup, SegmentMask};
use crate::{Error, Result};

/// Default stream ids used by `LocalContext::rng`.
pub(crate) const STREAM_MAIN: u64 = 0;
pub(crate) const STREAM_SECOND: u64 = 1;
pub(crate) const STREAM_THIRD: u64 = 2;

/// `epochs` shuffled passes over `0..n`, each cut into batches of at most
/// `batch_size` (the last one may be shorter).
pub(crate) fn epoch_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, epochs: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for _ in 0..epochs {
        idx.shuffle(rng);
        out.extend(idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec));
    }
    out
}

/// SGD over `batches`, with `objective` returning loss and gradient at the
/// current point. Returns the mean pre-step batch loss (0 for no batches).
pub(crate) fn run_sgd<F>(
    params: &mut ParamVector,
    data: &Dataset,
    batches: &[Vec<usize>],
    lr: f64,
    frozen: Option<&SegmentMask>,
    mut objective: F,
) -> Result<f64>
where
    F: FnMut(&ParamVector, &Batch) -> Result<(f64, ParamVector)>,
{
    let mut total = 0.0;
    for b in batches {
        let batch = data.batch(b)?;
        let (loss, grad) = objective(params, &batch)?;
        total += loss;
        sgd_step_in_place(params, &grad, lr, frozen)?;
    }
    Ok(if batches.is_empty() { 0.0 } else { total / batches.len() as f64 })
}

/// Plain cross-entropy SGD for `local_epochs` on stream `stream`.
pub(crate) fn plain_training(
    shape: &MlpShape,
    params: &mut ParamVector,
    data: &Dataset,
    ctx: &super::LocalContext,
    stream: u64,
    frozen: Option<&SegmentMask>,
) -> Result<f64> {
    let batches = epoch_batches(data.len(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(stream));
    run_sgd(params, data, &batches, ctx.lr, frozen, |p, b| shape.loss_and_grad(p, b))
}

pub(crate) fn protocol(client: usize, detail: impl Into<String>) -> Error {
    Error::Protocol {
        client,
        detail: detail.into(),
    }
}

pub(crate) fn payload_model(p: Payload, client: usize) -> Result<ParamVector> {
    match p {
        Payload::Model(m) | Payload::Cloud(m) | Payload::Segments { params: m, .. } => Ok(m),
        _ => Err(protocol(client, "expected a model payload")),
    }
}

pub(crate) fn payload_table(p: Payload, client: usize) -> Result<Option<ClassTable>> {
    match p {
        Payload::Table(t) => Ok(t),
        _ => Err(protocol(client, "expected a class-table payload")),
    }
}

pub(crate) fn model_updates(updates: &[(usize, Update)]) -> Result<Vec<(&ParamVector, usize)>> {
    updates
        .iter()
        .map(|(id, u)| match &u.body {
            UpdateBody::Model(p) => Ok((p, u.num_samples)),
            other => Err(protocol(*id, format!("expected a model update, got {}", other.tag()))),
        })
        .collect()
}

pub(crate) fn segment_updates(updates: &[(usize, Update)], want: SegmentGroup) -> Result<Vec<(&ParamVector, usize)>> {
    updates
        .iter()
        .map(|(id, u)| match &u.body {
            UpdateBody::Segments { params, group } if *group == want => Ok((params, u.num_samples)),
            other => Err(protocol(*id, format!("expected {want:?} segments, got {}", other.tag()))),
        })
        .collect()
}

pub(crate) fn table_updates(updates: &[(usize, Update)]) -> Result<Vec<(usize, &ClassTable)>> {
    updates
        .iter()
        .map(|(id, u)| match &u.body {
            UpdateBody::Table(t) => Ok((*id, t)),
            other => Err(protocol(*id, format!("expected a class table, got {}", other.tag()))),
        })
        .collect()
}

/// FedAvg aggregation of full models into `server.global`.
pub(crate) fn aggregate_full(server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
    let ups = model_updates(updates)?;
    server.global = weighted_average(&ups, None, &server.global)?;
    Ok(())
}

/// Aggregation of one segment group; the other group of `server.global` is kept.
pub(crate) fn aggregate_group(server: &mut ServerState, updates: &[(usize, Update)], group: SegmentGroup) -> Result<()> {
    let ups = segment_updates(updates, group)?;
    server.global = weighted_average(&ups, Some(group), &server.global)?;
    Ok(())
}

pub(crate) fn model_update(client: &ClientState, params: ParamVector, loss: f64) -> Update {
    Update {
        body: UpdateBody::Model(params),
        num_samples: client.n_train(),
        train_loss: loss,
    }
}

pub(crate) fn segment_update(client: &ClientState, params: ParamVector, group: SegmentGroup, loss: f64) -> Update {
    Update {
        body: UpdateBody::Segments { params, group },
        num_samples: client.n_train(),
        train_loss: loss,
    }
}

/// `a` with the `group` segments replaced by those of `b`.
pub(crate) fn splice(a: &ParamVector, b: &ParamVector, group: SegmentGroup) -> Result<ParamVector> {
    let mut out = a.clone();
    out.copy_group_from(b, group)?;
    Ok(out)
}

/// Weighted mean of class vectors per class, over tables that hold the class.
/// `weight` maps an entry's count to its aggregation weight.
pub(crate) fn merge_tables<'a>(
    tables: impl IntoIterator<Item = &'a ClassTable>,
    dim: usize,
    weight: impl Fn(usize) -> f64,
) -> Result<ClassTable> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<usize, (Vec<f64>, f64, usize)> = BTreeMap::new();
    for t in tables {
        if t.dim() != dim {
            return Err(Error::Shape(format!("class table of width {} where {dim} expected", t.dim())));
        }
        for (c, e) in t.iter() {
            let w = weight(e.count);
            let slot = acc.entry(c).or_insert_with(|| (vec![0.0; dim], 0.0, 0));
            for (s, v) in slot.0.iter_mut().zip(&e.vector) {
                *s += w * v;
            }
            slot.1 += w;
            slot.2 += e.count;
        }
    }
    let mut out = ClassTable::new(dim);
    for (c, (sum, w, n)) in acc {
        out.insert(c, sum.into_iter().map(|s| s / w).collect(), n)?;
    }
    Ok(out)
}
