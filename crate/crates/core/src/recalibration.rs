//! Temperature scaling fitted by validation NLL.
//!
//! The fit is a golden-section search on `log T` over `[0.05, 20]`. Validation
//! NLL is convex in `1/T`, hence unimodal in `log T`, so the bracketed search
//! finds the global minimum; tests still check it against a dense grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictions::{softmax_row, PredictionSet, ScoreKind};

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
/// Final bracket width in `T` units.
pub const T_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temperature {
    pub value: f64,
    /// Validation NLL at `value`.
    pub fit_nll: f64,
    pub iterations: usize,
}

/// Exact mean NLL of `softmax(z / t)`, via log-sum-exp.
pub fn nll_at_temperature(logits: &PredictionSet, t: f64) -> f64 {
    let inv = 1.0 / t;
    let total: f64 = logits
        .rows()
        .zip(logits.labels())
        .map(|(row, &y)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) * inv;
            let lse = row.iter().map(|&z| (z * inv - max).exp()).sum::<f64>().ln() + max;
            lse - row[y] * inv
        })
        .sum();
    total / logits.n_samples() as f64
}

pub fn fit_temperature(validation: &PredictionSet) -> Result<Temperature> {
    if validation.kind() != ScoreKind::Logits {
        return Err(Error::RequiresLogits);
    }
    let objective = |log_t: f64| nll_at_temperature(validation, log_t.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;

    let (mut a, mut b) = (T_MIN.ln(), T_MAX.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    let mut iterations = 0;
    while b.exp() - a.exp() >= T_TOLERANCE {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let (mut best_t, mut best) = if fc <= fd { (c.exp(), fc) } else { (d.exp(), fd) };
    for t in [T_MIN, T_MAX] {
        let f = nll_at_temperature(validation, t);
        if f < best {
            best_t = t;
            best = f;
        }
    }
    // prefer the identity whenever it is at least as good
    let at_one = nll_at_temperature(validation, 1.0);
    if at_one <= best {
        best_t = 1.0;
        best = at_one;
    }
    Ok(Temperature {
        value: best_t,
        fit_nll: best,
        iterations,
    })
}

/// Probabilities `softmax(z / t)` for every row.
pub fn apply_temperature(logits: &PredictionSet, t: f64) -> Result<PredictionSet> {
    if logits.kind() != ScoreKind::Logits {
        return Err(Error::RequiresLogits);
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("temperature", format!("{t} is not positive")));
    }
    let k = logits.n_classes();
    let mut scaled = vec![0.0; logits.scores().len()];
    let mut buf = vec![0.0; k];
    for (row, out) in logits.rows().zip(scaled.chunks_exact_mut(k)) {
        for (b, &z) in buf.iter_mut().zip(row) {
            *b = z / t;
        }
        softmax_row(&buf, out);
    }
    PredictionSet::new(
        scaled,
        logits.labels().to_vec(),
        k,
        ScoreKind::Probabilities,
    )
}
