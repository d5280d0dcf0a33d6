//! Weighted L2-penalised logistic regression.

use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticModel {
    pub fn zero(n_features: usize) -> Self {
        LogisticModel {
            intercept: 0.0,
            coefficients: vec![0.0; n_features],
            iterations: 0,
            converged: false,
        }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

struct Problem<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    w: &'a [f64],
    c: f64,
}

impl Problem<'_> {
    /// Objective `C * sum_i w_i * logloss_i + |beta|^2 / 2`; the intercept is
    /// the last parameter and is not penalised.
    fn objective(&self, theta: &[f64]) -> f64 {
        let p = self.x.n_cols();
        let (beta, b0) = (&theta[..p], theta[p]);
        let mut loss = 0.0;
        for i in 0..self.x.n_rows() {
            if self.w[i] == 0.0 {
                continue;
            }
            let z = b0 + dot(self.x.row(i), beta);
            loss += self.w[i] * (softplus(z) - f64::from(self.y[i]) * z);
        }
        self.c * loss + 0.5 * dot(beta, beta)
    }

    fn gradient(&self, theta: &[f64], grad: &mut [f64]) {
        let p = self.x.n_cols();
        let (beta, b0) = (&theta[..p], theta[p]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..self.x.n_rows() {
            if self.w[i] == 0.0 {
                continue;
            }
            let row = self.x.row(i);
            let r = self.c * self.w[i] * (sigmoid(b0 + dot(row, beta)) - f64::from(self.y[i]));
            for (g, x) in grad[..p].iter_mut().zip(row) {
                *g += r * x;
            }
            grad[p] += r;
        }
        for (g, b) in grad[..p].iter_mut().zip(beta) {
            *g += b;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Problem<'_> {
    /// Hessian of the objective, packed as a dense `(p+1) x (p+1)` matrix.
    fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.x.n_cols();
        let d = p + 1;
        let (beta, b0) = (&theta[..p], theta[p]);
        let mut h = vec![0.0; d * d];
        let mut ext = vec![1.0; d];
        for i in 0..self.x.n_rows() {
            if self.w[i] == 0.0 {
                continue;
            }
            let row = self.x.row(i);
            let s = sigmoid(b0 + dot(row, beta));
            let r = self.c * self.w[i] * s * (1.0 - s);
            if r == 0.0 {
                continue;
            }
            ext[..p].copy_from_slice(row);
            for a in 0..d {
                let ra = r * ext[a];
                if ra == 0.0 {
                    continue;
                }
                let hrow = &mut h[a * d..a * d + a + 1];
                for (hv, xb) in hrow.iter_mut().zip(&ext[..=a]) {
                    *hv += ra * xb;
                }
            }
        }
        for a in 0..d {
            if a < p {
                h[a * d + a] += 1.0;
            }
            for b in 0..a {
                h[b * d + a] = h[a * d + b];
            }
        }
        h
    }
}

/// Solves `h x = g` for symmetric positive definite `h` by Cholesky
/// factorisation, adding diagonal jitter if the factorisation breaks down.
fn solve_spd(h: &[f64], g: &[f64]) -> Vec<f64> {
    let d = g.len();
    let scale = (0..d).map(|i| h[i * d + i].abs()).fold(0.0, f64::max).max(1.0);
    let mut jitter = 0.0;
    loop {
        let mut l = vec![0.0; d * d];
        let mut ok = true;
        'outer: for i in 0..d {
            for j in 0..=i {
                let mut sum = h[i * d + j] - dot(&l[i * d..i * d + j], &l[j * d..j * d + j]);
                if i == j {
                    sum += jitter;
                    if sum <= 0.0 || !sum.is_finite() {
                        ok = false;
                        break 'outer;
                    }
                    l[i * d + i] = sum.sqrt();
                } else {
                    l[i * d + j] = sum / l[j * d + j];
                }
            }
        }
        if ok {
            let mut z = vec![0.0; d];
            for i in 0..d {
                z[i] = (g[i] - dot(&l[i * d..i * d + i], &z[..i])) / l[i * d + i];
            }
            let mut x = vec![0.0; d];
            for i in (0..d).rev() {
                let mut sum = z[i];
                for k in i + 1..d {
                    sum -= l[k * d + i] * x[k];
                }
                x[i] = sum / l[i * d + i];
            }
            return x;
        }
        jitter = if jitter == 0.0 { 1e-10 * scale } else { jitter * 10.0 };
    }
}

/// Damped Newton iterations with Armijo backtracking, stopping once the
/// largest gradient component falls below `tolerance`.
pub fn fit_logreg(
    x: &FeatureMatrix,
    y: &[u8],
    w: &[f64],
    c: f64,
    max_iterations: usize,
    tolerance: f64,
) -> LogisticModel {
    let p = x.n_cols();
    let problem = Problem { x, y, w, c };
    let mut theta = vec![0.0; p + 1];
    let mut grad = vec![0.0; p + 1];
    problem.gradient(&theta, &mut grad);
    let mut f = problem.objective(&theta);
    let max_abs = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut trial = vec![0.0; p + 1];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        if max_abs(&grad) < tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let step = solve_spd(&problem.hessian(&theta), &grad);
        let descent = dot(&grad, &step);
        let mut t = 1.0;
        let mut new_f;
        loop {
            for k in 0..=p {
                trial[k] = theta[k] - t * step[k];
            }
            new_f = problem.objective(&trial);
            if new_f <= f - 1e-4 * t * descent || t < 1e-12 {
                break;
            }
            t *= 0.5;
        }
        if new_f > f {
            break;
        }
        std::mem::swap(&mut theta, &mut trial);
        f = new_f;
        problem.gradient(&theta, &mut grad);
    }
    if !converged && max_abs(&grad) < tolerance {
        converged = true;
    }
    LogisticModel {
        intercept: theta[p],
        coefficients: theta[..p].to_vec(),
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (FeatureMatrix, Vec<u8>) {
        let rows = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            vec![2.0, 2.0],
            vec![3.0, 0.0],
            vec![0.5, 3.0],
            vec![2.5, 1.5],
        ];
        (FeatureMatrix::from_rows(&rows).unwrap(), vec![0, 0, 1, 1, 0, 1])
    }

    #[test]
    fn converges_to_stationary_point() {
        let (x, y) = toy();
        let w = vec![1.0; 6];
        let m = fit_logreg(&x, &y, &w, 1.0, 1000, 1e-6);
        assert!(m.converged);
        let problem = Problem {
            x: &x,
            y: &y,
            w: &w,
            c: 1.0,
        };
        let mut theta = m.coefficients.clone();
        theta.push(m.intercept);
        let mut g = vec![0.0; 3];
        problem.gradient(&theta, &mut g);
        assert!(g.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn zero_model_scores_half() {
        let m = LogisticModel::zero(3);
        assert_eq!(m.score(&[1.0, -2.0, 7.0]), 0.5);
    }

    #[test]
    fn stable_sigmoid_and_softplus() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0) >= 0.0);
    }
}

#[cfg(test)]
mod solver_tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let h = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x_true = [1.0, -2.0, 0.5];
        let g: Vec<f64> = (0..3).map(|i| dot(&h[i * 3..i * 3 + 3], &x_true)).collect();
        let x = solve_spd(&h, &g);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
