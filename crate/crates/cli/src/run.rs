use std::fs;
use std::path::Path;

use pfl_core::datagen::load_scenario;
use pfl_core::engine::{write_metrics_csv, RoundMetrics, Simulation};
use pfl_core::numcore::{Matrix, ParamVector};
use pfl_core::privacy::{dlg_attack, dp_privatize_slice, head_gradient, DpConfig};
use pfl_core::{rng, Error as CoreError};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::summary::{mean_std, AttackReport, DpSummary, PsnrStats, Summary};

const ATTACK_STREAM: u64 = 0xa7;

/// Writes via a temporary sibling and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

fn fingerprint(dir: &Path) -> Result<String> {
    let path = dir.join("manifest.json");
    let bytes = fs::read(&path).map_err(CliError::io(&path))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// Inverts the head gradient of each client's first training sample under
/// the final global model. Gradients pass through `dp` first. The target is
/// the head input, i.e. the hidden representation for MLPs.
pub fn attack_clients(sim: &Simulation, dp: &DpConfig, seed: u64) -> Result<Vec<AttackReport>> {
    let server = sim.server();
    let shape = server.shape;
    let global: &ParamVector = &server.global;
    let seg = |name: &str| {
        global
            .segment(name)
            .ok_or_else(|| CoreError::Layout(format!("global model lacks `{name}`")))
    };
    let (w, b) = (seg("W2")?, seg("b2")?);
    let mut out = Vec::new();
    for c in sim.clients() {
        let x = Matrix::from_vec(1, shape.input_dim, c.train.inputs().row(0).to_vec())?;
        let label = c.train.labels()[0];
        let rep = shape.represent(global, &x)?;
        let (gw, gb) = head_gradient(rep.row(0), label, w, b)?;
        let mut flat = gw.as_slice().to_vec();
        flat.extend_from_slice(&gb);
        dp_privatize_slice(&mut flat, dp, &mut rng::stream(seed, &[ATTACK_STREAM, c.id as u64]));
        let (fw, fb) = flat.split_at(gw.as_slice().len());
        let gw = Matrix::from_vec(gw.rows(), gw.cols(), fw.to_vec())?;
        let peak = rep.row(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        match dlg_attack(&gw, fb, rep.row(0), if peak > 0.0 { peak } else { 1.0 }) {
            Ok(r) => out.push(AttackReport {
                client: c.id,
                round: server.round,
                psnr_db: r.psnr_db,
                label_correct: r.label == label,
            }),
            Err(CoreError::Degenerate(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

struct RepOutcome {
    final_row: RoundMetrics,
    best_personal: f64,
    uplink: usize,
    attacks: Vec<AttackReport>,
}

/// Runs every repetition (seed, seed+1, ...), writing `metrics_rep<r>.csv`,
/// optional `attack_rep<r>.json` and `summary.json` into the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Summary> {
    let scenario = load_scenario(&cfg.scenario)?;
    let src = &scenario.manifest.source;
    let shape = cfg.shape(src.dim, src.num_classes)?;
    fs::create_dir_all(&cfg.out).map_err(CliError::io(&cfg.out))?;

    let mut outcomes = Vec::with_capacity(cfg.reps);
    let mut seeds = Vec::with_capacity(cfg.reps);
    for r in 0..cfg.reps {
        let mut run = cfg.run.clone();
        run.num_clients = scenario.clients.len();
        run.seed = cfg.run.seed + r as u64;
        seeds.push(run.seed);
        let mut sim = Simulation::new(&scenario, shape, run.clone())?
            .with_threads(cfg.threads)
            .with_dp(cfg.dp)?;
        sim.run()?;
        let history = sim.history();
        let final_row = history
            .last()
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("eval_interval {} never evaluates", run.eval_interval)))?;
        let mut csv = Vec::new();
        write_metrics_csv(&mut csv, history).map_err(CliError::io(&cfg.out))?;
        write_atomic(&cfg.out.join(format!("metrics_rep{r}.csv")), &csv)?;

        let attacks = if cfg.dp_attack {
            let a = attack_clients(&sim, &cfg.dp, run.seed)?;
            let mut json = serde_json::to_string_pretty(&a).map_err(|e| CliError::Report(e.to_string()))?;
            json.push('\n');
            write_atomic(&cfg.out.join(format!("attack_rep{r}.json")), json.as_bytes())?;
            a
        } else {
            Vec::new()
        };
        outcomes.push(RepOutcome {
            best_personal: history.iter().map(|m| m.personal_acc).fold(f64::NEG_INFINITY, f64::max),
            uplink: history.iter().map(|m| m.uplink_floats).sum(),
            final_row,
            attacks,
        });
    }

    let finals: Vec<f64> = outcomes.iter().map(|o| o.final_row.personal_acc).collect();
    let globals: Vec<f64> = outcomes.iter().map(|o| o.final_row.global_acc).collect();
    let bests: Vec<f64> = outcomes.iter().map(|o| o.best_personal).collect();
    let (final_acc_mean, final_acc_std) = mean_std(&finals);
    let (best_acc_mean, best_acc_std) = mean_std(&bests);
    let (final_global_mean, final_global_std) = mean_std(&globals);
    let attacks: Vec<AttackReport> = outcomes.iter().flat_map(|o| o.attacks.clone()).collect();
    let summary = Summary {
        algo: pfl_core::algorithms::canonical_name(&cfg.run.algorithm)?.to_string(),
        scenario: cfg.scenario_name.clone(),
        scenario_fingerprint: fingerprint(&cfg.scenario)?,
        reps: cfg.reps,
        seeds,
        rounds: cfg.run.num_rounds,
        final_accs: finals,
        final_acc_mean,
        final_acc_std,
        best_acc_mean,
        best_acc_std,
        final_global_mean,
        final_global_std,
        final_personal_mean: final_acc_mean,
        final_personal_std: final_acc_std,
        total_uplink_floats: outcomes.iter().map(|o| o.uplink).sum(),
        dp: cfg.dp.enabled.then_some(DpSummary {
            clip_norm: cfg.dp.clip_norm,
            sigma: cfg.dp.sigma,
        }),
        psnr: cfg.dp_attack.then(|| PsnrStats::from_reports(&attacks)),
    };
    let mut json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Report(e.to_string()))?;
    json.push('\n');
    write_atomic(&cfg.out.join("summary.json"), json.as_bytes())?;
    Ok(summary)
}
