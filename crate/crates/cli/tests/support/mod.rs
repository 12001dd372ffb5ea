#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use calibrex::predictions::{write_logits_file, PredictionSet, ScoreKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn calibrex() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_calibrex"));
    c.env_remove("CALIBREX_SEED");
    c
}

pub fn run(args: &[&str]) -> Output {
    calibrex().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A logits file of `n` rows whose labels follow the softmax at
/// temperature 2.
pub fn logits_file(dir: &Path, name: &str, n: usize, k: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..k).map(|_| (rng.gen_range(-4.0f32..4.0)) as f64).collect();
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.iter().map(|v| ((v - m) / 2.0).exp()).collect();
        let s: f64 = e.iter().sum();
        let u: f64 = rng.gen::<f64>() * s;
        let mut acc = 0.0;
        let mut y = k - 1;
        for (j, v) in e.iter().enumerate() {
            acc += v;
            if u < acc {
                y = j;
                break;
            }
        }
        labels.push(y);
        scores.extend(z);
    }
    let set = PredictionSet::new(scores, labels, k, ScoreKind::Logits).unwrap();
    let path = dir.join(name);
    write_logits_file(&set, &path).unwrap();
    path
}

pub fn confidence_file(dir: &Path, name: &str, n: usize, hi: f64, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text: String = (0..n).map(|_| format!("{}\n", rng.gen_range(0.1..hi))).collect();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}
