//! Gradient-boosted decision stumps under weighted log loss.

use serde::{Deserialize, Serialize};

use super::logreg::sigmoid;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Contribution (already scaled by the learning rate) for `x <= threshold`.
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn value(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedStumps {
    pub init: f64,
    pub stumps: Vec<Stump>,
    /// Weighted log loss after the initial constant and after each round.
    pub loss_trace: Vec<f64>,
}

impl BoostedStumps {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.init + self.stumps.iter().map(|s| s.value(row)).sum::<f64>()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

fn weighted_log_loss(f: &[f64], y: &[u8], w: &[f64]) -> f64 {
    f.iter()
        .zip(y)
        .zip(w)
        .map(|((&z, &yi), &wi)| {
            if wi == 0.0 {
                0.0
            } else {
                wi * (z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(yi) * z)
            }
        })
        .sum()
}

/// Each round fits a stump to the pseudo-residuals `y - p` by weighted
/// squared error, sets Newton leaf values, shrinks them by `learning_rate`,
/// and halves them further if the round would increase the training loss.
pub fn fit_gboost(x: &FeatureMatrix, y: &[u8], w: &[f64], n_rounds: usize, learning_rate: f64) -> BoostedStumps {
    let n = x.n_rows();
    let (mut w0, mut w1) = (0.0, 0.0);
    for i in 0..n {
        if y[i] == 1 {
            w1 += w[i];
        } else {
            w0 += w[i];
        }
    }
    let init = (w1 / w0).ln();
    let mut f = vec![init; n];
    let mut loss = weighted_log_loss(&f, y, w);
    let mut loss_trace = vec![loss];

    let active: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    let sorted: Vec<Vec<usize>> = (0..x.n_cols())
        .map(|c| {
            let mut idx = active.clone();
            idx.sort_by(|&a, &b| x.get(a, c).total_cmp(&x.get(b, c)).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut stumps = Vec::with_capacity(n_rounds);
    let mut residual = vec![0.0; n];
    let mut hessian = vec![0.0; n];
    for _ in 0..n_rounds {
        for &i in &active {
            let p = sigmoid(f[i]);
            residual[i] = f64::from(y[i]) - p;
            hessian[i] = p * (1.0 - p);
        }
        let (total_w, total_r) = active
            .iter()
            .fold((0.0, 0.0), |(a, b), &i| (a + w[i], b + w[i] * residual[i]));

        let mut best: Option<(f64, usize, f64)> = None;
        for (c, order) in sorted.iter().enumerate() {
            let (mut lw, mut lr) = (0.0, 0.0);
            for k in 0..order.len().saturating_sub(1) {
                let i = order[k];
                lw += w[i];
                lr += w[i] * residual[i];
                let (v, next) = (x.get(i, c), x.get(order[k + 1], c));
                if v == next {
                    continue;
                }
                let rw = total_w - lw;
                if lw <= 0.0 || rw <= 0.0 {
                    continue;
                }
                let rr = total_r - lr;
                let gain = lr * lr / lw + rr * rr / rw;
                let threshold = v + (next - v) / 2.0;
                let better = match best {
                    None => true,
                    Some((g, bc, bt)) => gain > g || (gain == g && (c < bc || (c == bc && threshold < bt))),
                };
                if better {
                    best = Some((gain, c, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            break;
        };

        let (mut num_l, mut den_l, mut num_r, mut den_r) = (0.0, 0.0, 0.0, 0.0);
        for &i in &active {
            if x.get(i, feature) <= threshold {
                num_l += w[i] * residual[i];
                den_l += w[i] * hessian[i];
            } else {
                num_r += w[i] * residual[i];
                den_r += w[i] * hessian[i];
            }
        }
        let newton = |num: f64, den: f64| if den > 1e-150 { num / den } else { 0.0 };
        let mut left = learning_rate * newton(num_l, den_l);
        let mut right = learning_rate * newton(num_r, den_r);

        let mut candidate = f.clone();
        let mut new_loss;
        let mut halvings = 0;
        loop {
            for i in 0..n {
                candidate[i] = f[i] + if x.get(i, feature) <= threshold { left } else { right };
            }
            new_loss = weighted_log_loss(&candidate, y, w);
            if new_loss <= loss || halvings >= 60 {
                break;
            }
            left *= 0.5;
            right *= 0.5;
            halvings += 1;
        }
        if new_loss > loss {
            left = 0.0;
            right = 0.0;
            new_loss = loss;
        } else {
            f = candidate;
        }
        loss = new_loss;
        loss_trace.push(loss);
        stumps.push(Stump {
            feature,
            threshold,
            left,
            right,
        });
    }
    BoostedStumps {
        init,
        stumps,
        loss_trace,
    }
}
