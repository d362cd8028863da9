use pfl_core::numcore::Matrix;
use pfl_core::privacy::{dlg_attack, dlg_invert, dp_privatize_slice, head_gradient, psnr, DpConfig};
use pfl_core::rng;
use rand::Rng;

struct Instance {
    x: Vec<f64>,
    label: usize,
    grad_w: Matrix,
    grad_b: Vec<f64>,
}

fn instance(seed: u64) -> Instance {
    let mut r = rng::seeded(seed);
    let d = r.random_range(1..=32);
    let c = r.random_range(2..=10);
    let x: Vec<f64> = (0..d).map(|_| r.random_range(0.0..1.0)).collect();
    let w: Vec<f64> = (0..d * c).map(|_| r.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..c).map(|_| r.random_range(-1.0..1.0)).collect();
    let label = r.random_range(0..c);
    let (grad_w, grad_b) = head_gradient(&x, label, &w, &b).unwrap();
    Instance { x, label, grad_w, grad_b }
}

#[test]
fn noiseless_inversion_is_exact_on_1000_instances() {
    for seed in 0..1000 {
        let inst = instance(seed);
        let (x, y) = dlg_invert(&inst.grad_w, &inst.grad_b).unwrap();
        assert_eq!(y, inst.label, "seed {seed}");
        let err = x.iter().zip(&inst.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "seed {seed}: {err}");
    }
}

fn noised_psnr(inst: &Instance, sigma: f64, noise_seed: u64) -> f64 {
    let mut flat = inst.grad_w.as_slice().to_vec();
    flat.extend_from_slice(&inst.grad_b);
    if sigma > 0.0 {
        let cfg = DpConfig::new(1.0, sigma).unwrap();
        dp_privatize_slice(&mut flat, &cfg, &mut rng::seeded(noise_seed));
    }
    let (w, b) = flat.split_at(inst.grad_w.as_slice().len());
    let gw = Matrix::from_vec(inst.grad_w.rows(), inst.grad_w.cols(), w.to_vec()).unwrap();
    dlg_attack(&gw, b, &inst.x, 1.0).unwrap().psnr_db
}

#[test]
fn mean_psnr_does_not_rise_with_sigma() {
    let sigmas = [0.0, 0.01, 0.1, 1.0];
    let means: Vec<f64> = sigmas
        .iter()
        .map(|&s| (0..20).map(|seed| noised_psnr(&instance(seed), s, 500 + seed)).sum::<f64>() / 20.0)
        .collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0], "{means:?}");
    }
}

#[test]
fn dp_noise_strictly_lowers_psnr_on_20_seeds() {
    for seed in 0..20 {
        let inst = instance(seed);
        let clean = noised_psnr(&inst, 0.0, 0);
        let noisy = noised_psnr(&inst, 0.1, 900 + seed);
        assert!(noisy < clean, "seed {seed}: {noisy} vs {clean}");
    }
}

#[test]
fn psnr_spot_values_are_exact() {
    let a = vec![0.0; 4];
    let b = vec![0.1; 4];
    assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-12);
    assert_eq!(psnr(&[0.0, 0.0], &[255.0, 255.0], 255.0).unwrap(), 0.0);
    assert_eq!(psnr(&b, &b, 1.0).unwrap(), f64::INFINITY);
    assert!(psnr(&a, &b[..3], 1.0).is_err());
}
