use serde::{Deserialize, Serialize, Serializer};

/// Mean and population standard deviation (divides by `n`).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn psnr_value<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn psnr_from<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad psnr `{t}`"))),
    }
}

/// One gradient-inversion attempt. An exact reconstruction has
/// `psnr_db = +∞`, written as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub client: usize,
    pub round: usize,
    #[serde(serialize_with = "psnr_value", deserialize_with = "psnr_from")]
    pub psnr_db: f64,
    pub label_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsnrStats {
    pub attacks: usize,
    /// Reconstructions with zero error (infinite PSNR), excluded from mean/std.
    pub exact: usize,
    pub mean_db: Option<f64>,
    pub std_db: Option<f64>,
    pub label_accuracy: f64,
}

impl PsnrStats {
    pub fn from_reports(reports: &[AttackReport]) -> Self {
        let finite: Vec<f64> = reports.iter().map(|r| r.psnr_db).filter(|v| v.is_finite()).collect();
        let (m, s) = mean_std(&finite);
        let correct = reports.iter().filter(|r| r.label_correct).count();
        Self {
            attacks: reports.len(),
            exact: reports.len() - finite.len(),
            mean_db: (!finite.is_empty()).then_some(m),
            std_db: (!finite.is_empty()).then_some(s),
            label_accuracy: correct as f64 / reports.len().max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSummary {
    pub clip_norm: f64,
    pub sigma: f64,
}

/// Written to `summary.json`. Accuracies are fractions in [0, 1]; std is
/// over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algo: String,
    pub scenario: String,
    /// Hash of the scenario manifest.
    pub scenario_fingerprint: String,
    pub reps: usize,
    pub seeds: Vec<u64>,
    pub rounds: usize,
    /// Final-round accuracy of each client's designated model, per repetition.
    pub final_accs: Vec<f64>,
    pub final_acc_mean: f64,
    pub final_acc_std: f64,
    pub best_acc_mean: f64,
    pub best_acc_std: f64,
    pub final_global_mean: f64,
    pub final_global_std: f64,
    pub final_personal_mean: f64,
    pub final_personal_std: f64,
    pub total_uplink_floats: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<PsnrStats>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std_by_hand() {
        // mean 0.8, deviations -0.1, 0, 0.1 → var 0.02/3
        let (m, s) = mean_std(&[0.7, 0.8, 0.9]);
        assert!((m - 0.8).abs() < 1e-15);
        assert!((s - (0.02f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }

    #[test]
    fn infinite_psnr_round_trips() {
        let r = AttackReport {
            client: 1,
            round: 5,
            psnr_db: f64::INFINITY,
            label_correct: true,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"client":1,"round":5,"psnr_db":"inf","label_correct":true}"#);
        assert_eq!(serde_json::from_str::<AttackReport>(&s).unwrap(), r);
        let stats = PsnrStats::from_reports(&[r.clone(), AttackReport { psnr_db: 30.0, label_correct: false, ..r }]);
        assert_eq!((stats.attacks, stats.exact, stats.mean_db), (2, 1, Some(30.0)));
        assert_eq!(stats.label_accuracy, 0.5);
    }
}
