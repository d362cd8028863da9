//! JSON-in, JSON-out operations behind the static demo page. Each exported
//! function has a plain Rust twin so it can be tested on the host.

use pfl_core::datagen::{label_entropy, partition, synth_gaussian, PartitionKind, PartitionSpec, Scenario};
use pfl_core::engine::{RunConfig, Simulation};
use pfl_core::numcore::{Matrix, MlpShape};
use pfl_core::privacy::{dlg_attack, dp_privatize_slice, head_gradient, DpConfig};
use pfl_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Upper bounds that keep a browser call interactive.
pub const MAX_CLIENTS: usize = 50;
pub const MAX_ROUNDS: usize = 200;
pub const MAX_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub kind: String,
    pub clients: usize,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub spread: f64,
    pub alpha: f64,
    pub classes_per_client: usize,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            kind: "practical".into(),
            clients: 10,
            classes: 10,
            dim: 16,
            per_class: 60,
            spread: 1.0,
            alpha: 0.1,
            classes_per_client: 2,
            seed: 0,
        }
    }
}

impl ScenarioParams {
    fn build(&self) -> Result<Scenario, String> {
        if self.clients > MAX_CLIENTS || self.classes * self.per_class > MAX_SAMPLES {
            return Err(format!("at most {MAX_CLIENTS} clients and {MAX_SAMPLES} samples"));
        }
        let kind: PartitionKind = self.kind.parse().map_err(|e: pfl_core::Error| e.to_string())?;
        let ds = synth_gaussian(self.classes, self.dim, self.per_class, self.spread, self.seed).map_err(|e| e.to_string())?;
        let spec = PartitionSpec {
            alpha: self.alpha,
            classes_per_client: self.classes_per_client,
            min_samples_per_client: 4,
            ..PartitionSpec::new(kind, self.clients, self.seed)
        };
        partition(&ds, &spec, "synthetic").map_err(|e| e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct Histogram {
    pub hist: Vec<Vec<usize>>,
    pub entropy: Vec<f64>,
    pub mean_entropy: f64,
}

pub fn histogram(params: &ScenarioParams) -> Result<Histogram, String> {
    let s = params.build()?;
    let hist: Vec<Vec<usize>> = s.manifest.per_client.iter().map(|c| c.class_hist.clone()).collect();
    Ok(Histogram {
        entropy: hist.iter().map(|h| label_entropy(h)).collect(),
        mean_entropy: s.mean_label_entropy(),
        hist,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct CurveParams {
    #[serde(flatten)]
    pub scenario: ScenarioParams,
    pub algo: String,
    pub rounds: usize,
    pub hidden: usize,
    pub lr: f64,
}

impl Default for CurveParams {
    fn default() -> Self {
        Self {
            scenario: ScenarioParams::default(),
            algo: "FedAvg".into(),
            rounds: 30,
            hidden: 16,
            lr: 0.05,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub algo: String,
    pub round: Vec<usize>,
    pub global_acc: Vec<f64>,
    pub personal_acc: Vec<f64>,
}

pub fn curve(params: &CurveParams) -> Result<Curve, String> {
    if params.rounds > MAX_ROUNDS {
        return Err(format!("at most {MAX_ROUNDS} rounds"));
    }
    let s = params.scenario.build()?;
    let mut cfg = RunConfig::new(params.algo.as_str(), s.clients.len());
    cfg.num_rounds = params.rounds;
    cfg.learning_rate = params.lr;
    cfg.seed = params.scenario.seed;
    let shape = MlpShape::new(params.scenario.dim, params.hidden, params.scenario.classes).map_err(|e| e.to_string())?;
    let mut sim = Simulation::new(&s, shape, cfg).map_err(|e| e.to_string())?;
    sim.run().map_err(|e| e.to_string())?;
    let h = sim.history();
    Ok(Curve {
        algo: sim.algorithm().name().to_string(),
        round: h.iter().map(|m| m.round).collect(),
        global_acc: h.iter().map(|m| m.global_acc).collect(),
        personal_acc: h.iter().map(|m| m.personal_acc).collect(),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct PsnrParams {
    pub dim: usize,
    pub classes: usize,
    pub sigmas: Vec<f64>,
    pub clip: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Default for PsnrParams {
    fn default() -> Self {
        Self {
            dim: 64,
            classes: 10,
            sigmas: vec![0.0, 0.001, 0.01, 0.1, 1.0],
            clip: 1.0,
            trials: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PsnrCurve {
    pub sigma: Vec<f64>,
    /// Mean over trials with finite PSNR; `None` when every trial was exact.
    pub psnr_mean: Vec<Option<f64>>,
    pub exact: Vec<u64>,
    pub label_accuracy: Vec<f64>,
}

/// Closed-form gradient inversion of a random linear-softmax head, with the
/// gradient clipped and noised at each sigma.
pub fn psnr_curve(p: &PsnrParams) -> Result<PsnrCurve, String> {
    if p.dim == 0 || p.classes < 2 || p.trials == 0 || p.trials > 1000 {
        return Err("need dim ≥ 1, classes ≥ 2 and 1..=1000 trials".into());
    }
    let mut out = PsnrCurve {
        sigma: p.sigmas.clone(),
        psnr_mean: Vec::new(),
        exact: Vec::new(),
        label_accuracy: Vec::new(),
    };
    for (si, &sigma) in p.sigmas.iter().enumerate() {
        let cfg = DpConfig::new(p.clip, sigma).map_err(|e| e.to_string())?;
        let (mut sum, mut finite, mut exact, mut correct) = (0.0, 0u64, 0u64, 0u64);
        for t in 0..p.trials {
            let mut r = rng::stream(p.seed, &[t]);
            let x: Vec<f64> = (0..p.dim).map(|_| r.random_range(0.0..1.0)).collect();
            let w: Vec<f64> = (0..p.dim * p.classes).map(|_| r.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..p.classes).map(|_| r.random_range(-1.0..1.0)).collect();
            let y = r.random_range(0..p.classes);
            let (gw, gb) = head_gradient(&x, y, &w, &b).map_err(|e| e.to_string())?;
            let mut flat = gw.as_slice().to_vec();
            flat.extend_from_slice(&gb);
            dp_privatize_slice(&mut flat, &cfg, &mut rng::stream(p.seed, &[t, si as u64, 1]));
            let (fw, fb) = flat.split_at(gw.as_slice().len());
            let gw = Matrix::from_vec(gw.rows(), gw.cols(), fw.to_vec()).map_err(|e| e.to_string())?;
            let Ok(res) = dlg_attack(&gw, fb, &x, 1.0) else { continue };
            correct += u64::from(res.label == y);
            if res.psnr_db.is_finite() {
                sum += res.psnr_db;
                finite += 1;
            } else {
                exact += 1;
            }
        }
        out.psnr_mean.push((finite > 0).then(|| sum / finite as f64));
        out.exact.push(exact);
        out.label_accuracy.push(correct as f64 / p.trials as f64);
    }
    Ok(out)
}

fn run_json<P, T>(json: &str, f: impl FnOnce(&P) -> Result<T, String>) -> Result<String, String>
where
    P: for<'de> Deserialize<'de>,
    T: Serialize,
{
    let params: P = serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))?;
    serde_json::to_string(&f(&params)?).map_err(|e| e.to_string())
}

pub fn partition_histogram_json(json: &str) -> Result<String, String> {
    run_json(json, histogram)
}

pub fn accuracy_curve_json(json: &str) -> Result<String, String> {
    run_json(json, curve)
}

pub fn psnr_vs_sigma_json(json: &str) -> Result<String, String> {
    run_json(json, psnr_curve)
}

/// Per-client class histograms and label entropies for a generated scenario.
#[wasm_bindgen]
pub fn partition_histogram(params: &str) -> Result<String, JsValue> {
    partition_histogram_json(params).map_err(|e| JsValue::from_str(&e))
}

/// Global and personalized accuracy per round for one algorithm.
#[wasm_bindgen]
pub fn accuracy_curve(params: &str) -> Result<String, JsValue> {
    accuracy_curve_json(params).map_err(|e| JsValue::from_str(&e))
}

/// Reconstruction PSNR of the gradient-inversion attack for each noise level.
#[wasm_bindgen]
pub fn psnr_vs_sigma(params: &str) -> Result<String, JsValue> {
    psnr_vs_sigma_json(params).map_err(|e| JsValue::from_str(&e))
}
