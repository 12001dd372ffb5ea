mod common;

use calibrex::continuous::{kdece_top, silverman_bandwidth, Bandwidth, KdeConfig};
use calibrex::predictions::TopLabel;
use common::kdece_simpson_ref;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn calibrated(n: usize, seed: u64) -> TopLabel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let confidences: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let correct = confidences.iter().map(|&c| rng.gen::<f64>() < c).collect();
    TopLabel { confidences, correct }
}

#[test]
fn calibrated_large_sample_is_small() {
    let top = calibrated(50_000, 7);
    let v = kdece_top(&top, &KdeConfig::default()).unwrap();
    assert!(v <= 0.02, "{v}");
}

#[test]
fn miscalibrated_sample_is_large() {
    let mut top = calibrated(5_000, 8);
    // always right: error is the mean distance to 1
    top.correct.iter_mut().for_each(|c| *c = true);
    let v = kdece_top(&top, &KdeConfig::default()).unwrap();
    assert!((v - 0.4).abs() < 0.02, "{v}");
}

#[test]
fn agrees_with_refined_simpson_integral() {
    for seed in 0..5 {
        let top = calibrated(300, 100 + seed);
        let h = silverman_bandwidth(&top.confidences);
        let lib = kdece_top(&top, &KdeConfig::default()).unwrap();
        let fine = kdece_simpson_ref(&top.confidences, &top.correct, h, 10 * 1023 + 1);
        assert!((lib - fine).abs() < 1e-3, "{lib} vs {fine}");
        let fixed = KdeConfig { bandwidth: Bandwidth::Fixed(0.05), ..KdeConfig::default() };
        let lib = kdece_top(&top, &fixed).unwrap();
        let fine = kdece_simpson_ref(&top.confidences, &top.correct, 0.05, 10 * 1023 + 1);
        assert!((lib - fine).abs() < 1e-3, "{lib} vs {fine}");
    }
}
