//! Logistic regression trained by mini-batch SGD on standardized features,
//! with per-class loss weights (positives weighted by n_neg / n_pos) and L2
//! regularization on the weights (not the bias).

use crate::learn::matrix::FeatureMatrix;
use crate::learn::LogRegParams;
use crate::rng::SplitMix64;

const BATCH_SIZE: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogRegModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut z = self.bias;
        for ((&x, &w), (&m, &s)) in row
            .iter()
            .zip(&self.weights)
            .zip(self.means.iter().zip(&self.stds))
        {
            z += w * (x - m) / s;
        }
        sigmoid(z)
    }
}

pub struct LogRegFit {
    pub model: LogRegModel,
    pub loss_trace: Vec<f64>,
    pub converged: bool,
}

pub fn fit_logreg(m: &FeatureMatrix, labels: &[u8], params: &LogRegParams, seed: u64) -> LogRegFit {
    let n = m.n_rows();
    let d = m.n_cols();

    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for c in 0..d {
        let mut s = 0.0;
        for r in 0..n {
            s += m.value(r, c);
        }
        means[c] = s / n as f64;
        let mut v = 0.0;
        for r in 0..n {
            let x = m.value(r, c) - means[c];
            v += x * x;
        }
        let sd = (v / n as f64).sqrt();
        stds[c] = if sd > 1e-12 { sd } else { 1.0 };
    }

    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    let w_pos = if n_pos > 0 { n_neg as f64 / n_pos as f64 } else { 1.0 };

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut grad = vec![0.0; d];
    let mut loss_trace = Vec::with_capacity(params.epochs as usize);

    let full_loss = |weights: &[f64], bias: f64| -> f64 {
        let mut loss = 0.0;
        let mut wsum = 0.0;
        for r in 0..n {
            let row = m.row(r);
            let mut z = bias;
            for c in 0..d {
                z += weights[c] * (row[c] - means[c]) / stds[c];
            }
            let p = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
            let w = if labels[r] == 1 { w_pos } else { 1.0 };
            loss -= w * if labels[r] == 1 { p.ln() } else { (1.0 - p).ln() };
            wsum += w;
        }
        loss / wsum
    };

    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(BATCH_SIZE) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_bias = 0.0;
            let mut wsum = 0.0;
            for &r in batch {
                let r = r as usize;
                let row = m.row(r);
                let mut z = bias;
                for c in 0..d {
                    z += weights[c] * (row[c] - means[c]) / stds[c];
                }
                let w = if labels[r] == 1 { w_pos } else { 1.0 };
                let err = w * (sigmoid(z) - f64::from(labels[r]));
                for c in 0..d {
                    grad[c] += err * (row[c] - means[c]) / stds[c];
                }
                grad_bias += err;
                wsum += w;
            }
            for c in 0..d {
                weights[c] -= params.learning_rate * (grad[c] / wsum + params.l2 * weights[c]);
            }
            bias -= params.learning_rate * grad_bias / wsum;
        }
        loss_trace.push(full_loss(&weights, bias));
    }

    let finite = weights.iter().all(|w| w.is_finite()) && bias.is_finite();
    let improved = match (loss_trace.first(), loss_trace.last()) {
        (Some(first), Some(last)) => last.is_finite() && *last <= *first + 1e-9,
        _ => true,
    };
    let converged = finite && improved;
    if !finite {
        weights.iter_mut().for_each(|w| *w = 0.0);
        bias = 0.0;
    }
    LogRegFit {
        model: LogRegModel {
            weights,
            bias,
            means,
            stds,
        },
        loss_trace,
        converged,
    }
}
