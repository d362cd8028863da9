use super::common::{epoch_batches, model_update, model_updates, protocol, run_sgd, STREAM_MAIN};
use super::{Algorithm, LocalContext, Payload, Prediction, Update};
use crate::engine::{weighted_average, ClientState, HyperParams, ServerState};
use crate::numcore::{sq_norm, Matrix, ParamVector};
use crate::Result;

/// Attention matrix `ξ`: `ξ_ij = α·exp(−‖w_i − w_j‖²/σ)` off the diagonal and
/// `ξ_ii = 1 − Σ_{j≠i} ξ_ij`. A row whose off-diagonal mass reaches 1 is
/// rescaled so it sums to `(N − 1)/N`, leaving `ξ_ii = 1/N`.
pub fn attention_weights(models: &[ParamVector], sigma: f64, alpha: f64) -> Result<Vec<Vec<f64>>> {
    let n = models.len();
    let mut xi = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = sq_norm(&models[i].sub(&models[j])?);
                xi[i][j] = alpha * (-d / sigma).exp();
            }
        }
        let off: f64 = xi[i].iter().sum();
        if off >= 1.0 {
            let s = (n - 1) as f64 / n as f64 / off;
            xi[i].iter_mut().for_each(|x| *x *= s);
        }
        xi[i][i] = 1.0 - xi[i].iter().sum::<f64>();
    }
    Ok(xi)
}

/// `u_i = w_i + Σ_{j≠i} ξ_ij (w_j − w_i)`, which equals `Σ_j ξ_ij w_j` when
/// rows of `ξ` sum to one.
pub fn cloud_models(models: &[ParamVector], xi: &[Vec<f64>]) -> Result<Vec<ParamVector>> {
    let mut out = Vec::with_capacity(models.len());
    for (i, wi) in models.iter().enumerate() {
        let mut u = wi.clone();
        for (j, wj) in models.iter().enumerate() {
            if i != j && xi[i][j] != 0.0 {
                u.axpy_in_place(xi[i][j], &wj.sub(wi)?)?;
            }
        }
        out.push(u);
    }
    Ok(out)
}

/// Attention-weighted personalized cloud models.
#[derive(Debug, Clone, Copy)]
pub struct FedAmp {
    pub sigma: f64,
    pub lambda: f64,
    pub alpha_amp: f64,
}

impl FedAmp {
    pub fn from_hyper(h: &HyperParams) -> Result<Self> {
        Ok(Self {
            sigma: h.positive("sigma", 1.0)?,
            lambda: h.non_negative("lambda", 1.0)?,
            alpha_amp: h.non_negative("alpha_amp", 0.1)?,
        })
    }
}

impl Algorithm for FedAmp {
    fn name(&self) -> &'static str {
        "FedAMP"
    }

    fn init(&self, server: &mut ServerState, clients: &mut [ClientState]) -> Result<()> {
        server.client_models = clients.iter().map(|c| c.model.clone()).collect();
        server.cloud = server.client_models.clone();
        Ok(())
    }

    fn server_payload(&self, server: &ServerState, client: usize) -> Payload {
        Payload::Cloud(server.cloud.get(client).cloned().unwrap_or_else(|| server.global.clone()))
    }

    fn local_train(&self, client: &mut ClientState, payload: Payload, ctx: &LocalContext) -> Result<Update> {
        let Payload::Cloud(u) = payload else {
            return Err(protocol(client.id, "expected a cloud model payload"));
        };
        let mut v = client.model.clone();
        let batches = epoch_batches(client.n_train(), ctx.batch_size, ctx.local_epochs, &mut ctx.rng(STREAM_MAIN));
        let lambda = self.lambda;
        let loss = run_sgd(&mut v, &client.train, &batches, ctx.lr, None, |p, b| {
            let (l, mut g) = ctx.shape.loss_and_grad(p, b)?;
            g.axpy_in_place(lambda, &p.sub(&u)?)?;
            Ok((l, g))
        })?;
        client.model = v.clone();
        Ok(model_update(client, v, loss))
    }

    fn aggregate(&self, server: &mut ServerState, updates: &[(usize, Update)]) -> Result<()> {
        let ups = model_updates(updates)?;
        for ((id, _), (p, _)) in updates.iter().zip(&ups) {
            let slot = server
                .client_models
                .get_mut(*id)
                .ok_or_else(|| protocol(*id, "client has no cloud slot"))?;
            *slot = (*p).clone();
        }
        let xi = attention_weights(&server.client_models, self.sigma, self.alpha_amp)?;
        server.cloud = cloud_models(&server.client_models, &xi)?;
        server.global = weighted_average(&ups, None, &server.global)?;
        Ok(())
    }

    fn predict(&self, server: &ServerState, client: &ClientState, inputs: &Matrix) -> Result<Prediction> {
        Ok(Prediction::direct(server.shape.predict(&client.model, inputs)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{Layout, SegmentGroup};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn pv(v: Vec<f64>) -> ParamVector {
        let l = Arc::new(Layout::new([("v", v.len(), SegmentGroup::Head)]).unwrap());
        ParamVector::from_vec(l, v).unwrap()
    }

    #[test]
    fn two_client_oracle() {
        let ms = vec![pv(vec![0.0]), pv(vec![1.0])];
        let xi = attention_weights(&ms, 1.0, 0.1).unwrap();
        let e = 0.1 * (-1.0f64).exp();
        assert!((xi[0][1] - e).abs() < 1e-12);
        assert!((xi[0][0] - (1.0 - e)).abs() < 1e-12);
        let u = cloud_models(&ms, &xi).unwrap();
        assert!((u[0].as_slice()[0] - 0.036_787_944_117_144_23).abs() < 1e-9);
        assert!((u[0].as_slice()[0] - 0.0368).abs() < 1e-4);
    }

    #[test]
    fn consensus_and_small_sigma() {
        let ms = vec![pv(vec![0.5, -2.0]); 3];
        let xi = attention_weights(&ms, 1.0, 0.1).unwrap();
        assert_eq!(cloud_models(&ms, &xi).unwrap(), ms);
        let ms = vec![pv(vec![0.0]), pv(vec![1.0])];
        let xi = attention_weights(&ms, 1e-6, 0.1).unwrap();
        assert_eq!(xi[0][1], 0.0);
        assert_eq!(cloud_models(&ms, &xi).unwrap()[0].as_slice(), &[0.0]);
    }

    #[test]
    fn renormalizes_heavy_rows() {
        let ms = vec![pv(vec![0.0]); 4];
        let xi = attention_weights(&ms, 1.0, 0.9).unwrap();
        for (i, row) in xi.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((row[i] - 0.25).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(
            vals in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 2..7),
            sigma in 0.01f64..10.0,
            alpha in 0.0f64..2.0,
        ) {
            let ms: Vec<ParamVector> = vals.into_iter().map(pv).collect();
            let xi = attention_weights(&ms, sigma, alpha).unwrap();
            for row in &xi {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|&x| x >= 0.0));
            }
        }
    }
}
