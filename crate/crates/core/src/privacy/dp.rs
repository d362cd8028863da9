use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numcore::ParamVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub clip_norm: f64,
    pub sigma: f64,
    pub enabled: bool,
}

impl DpConfig {
    pub fn new(clip_norm: f64, sigma: f64) -> Result<Self> {
        let cfg = Self {
            clip_norm,
            sigma,
            enabled: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn disabled() -> Self {
        Self {
            clip_norm: 1.0,
            sigma: 0.0,
            enabled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(Error::Config(format!("dp clip_norm must be positive, got {}", self.clip_norm)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("dp sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Clips `u` to `clip_norm` in place, then adds `N(0, (sigma·clip_norm)²)`
/// to every coordinate. A disabled config leaves `u` untouched.
pub fn dp_privatize_slice<R: Rng + ?Sized>(u: &mut [f64], cfg: &DpConfig, rng: &mut R) {
    if !cfg.enabled {
        return;
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > cfg.clip_norm {
        let s = cfg.clip_norm / norm;
        u.iter_mut().for_each(|v| *v *= s);
    }
    if cfg.sigma > 0.0 {
        let std = cfg.sigma * cfg.clip_norm;
        for v in u.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += std * z;
        }
    }
}

pub fn dp_privatize<R: Rng + ?Sized>(update: &ParamVector, cfg: &DpConfig, rng: &mut R) -> ParamVector {
    let mut out = update.clone();
    dp_privatize_slice(out.as_mut_slice(), cfg, rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{Layout, SegmentGroup};
    use crate::rng;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn pv(v: Vec<f64>) -> ParamVector {
        let l = Arc::new(Layout::new([("x", v.len(), SegmentGroup::Head)]).unwrap());
        ParamVector::from_vec(l, v).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_inside_ball() {
        let u = pv(vec![0.3, -0.4]);
        let cfg = DpConfig::new(1.0, 0.0).unwrap();
        assert_eq!(dp_privatize(&u, &cfg, &mut rng::seeded(0)), u);
    }

    #[test]
    fn clips_to_norm() {
        let u = pv(vec![1.2, -1.6]);
        let cfg = DpConfig::new(1.0, 0.0).unwrap();
        let out = dp_privatize(&u, &cfg, &mut rng::seeded(0));
        assert!((norm(out.as_slice()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_std_matches() {
        let u = pv(vec![0.0; 10_000]);
        let cfg = DpConfig::new(1.0, 0.1).unwrap();
        let out = dp_privatize(&u, &cfg, &mut rng::seeded(3));
        let v = out.as_slice();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.005, "std {}", var.sqrt());
    }

    #[test]
    fn config_checks() {
        assert!(DpConfig::new(0.0, 1.0).is_err());
        assert!(DpConfig::new(1.0, -1.0).is_err());
        let u = pv(vec![5.0]);
        assert_eq!(dp_privatize(&u, &DpConfig::disabled(), &mut rng::seeded(0)), u);
    }

    proptest! {
        #[test]
        fn clipped_part_within_bound(v in proptest::collection::vec(-100.0f64..100.0, 1..40), clip in 0.01f64..10.0) {
            let cfg = DpConfig::new(clip, 0.0).unwrap();
            let out = dp_privatize(&pv(v), &cfg, &mut rng::seeded(0));
            prop_assert!(norm(out.as_slice()) <= clip * (1.0 + 1e-12));
        }
    }
}
