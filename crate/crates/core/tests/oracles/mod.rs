//! Brute-force and closed-form reference implementations used to check the
//! library. None of them share code with it.

use std::f64::consts::PI;

/// `erf` from the all-positive series `2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!`.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x > 6.0 {
        return 1.0;
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x * x / (2.0 * n + 1.0);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    2.0 / PI.sqrt() * (-x * x).exp() * sum
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / 2f64.sqrt()))
}

fn normal_pdf(z: f64) -> f64 {
    (-z * z / 2.0).exp() / (2.0 * PI).sqrt()
}

/// Chi-square upper tail for integer degrees of freedom, in closed form.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if df.is_multiple_of(2) {
        let h = x / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..df / 2 {
            term *= h / i as f64;
            sum += term;
        }
        (-h).exp() * sum
    } else {
        let r = x.sqrt();
        let mut sum = 0.0;
        let mut term = r;
        for k in 1..=(df - 1) / 2 {
            if k > 1 {
                term *= x / (2 * k - 1) as f64;
            }
            sum += term;
        }
        2.0 * (1.0 - normal_cdf(r)) + 2.0 * normal_pdf(r) * sum
    }
}

/// Pearson statistic and p-value against equal category probabilities.
pub fn chi_square(observed: &[u64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let k = observed.len() as f64;
    let mut stat = 0.0;
    for &o in observed {
        // (o - T/k)^2 / (T/k) = (k o - T)^2 / (k T)
        let d = k * o as f64 - total as f64;
        stat += d * d / (k * total as f64);
    }
    (stat, chi2_sf(stat, observed.len() - 1))
}

fn choose(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c
}

/// Two-sided exact binomial test by full enumeration. At `p0 = 0.5` the
/// comparison of outcome probabilities is done in integers.
pub fn binomial(k: u64, n: u64, p0: f64) -> f64 {
    if p0 == 0.5 {
        let obs = choose(n, k);
        let hits: u128 = (0..=n).map(|i| choose(n, i)).filter(|&c| c <= obs).sum();
        return hits as f64 / 2f64.powi(n as i32);
    }
    let pmf = |i: u64| choose(n, i) as f64 * p0.powi(i as i32) * (1.0 - p0).powi((n - i) as i32);
    let obs = pmf(k);
    let p: f64 = (0..=n).map(pmf).filter(|&q| q <= obs * (1.0 + 1e-7)).sum();
    p.min(1.0)
}

/// `P(K > lambda)` from the alternating series alone.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    let mut s = 0.0;
    for k in 1..=2000 {
        let kf = k as f64;
        let t = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// KS distance to the fitted normal, scanning both one-sided limits of the
/// empirical CDF at every observation by counting.
pub fn ks_normal(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut d: f64 = 0.0;
    for &x in values {
        let below = values.iter().filter(|&&v| v < x).count() as f64 / n;
        let at_or_below = values.iter().filter(|&&v| v <= x).count() as f64 / n;
        let f = normal_cdf((x - mean) / sd);
        d = d.max((f - below).abs()).max((at_or_below - f).abs());
    }
    (d, kolmogorov_sf(n.sqrt() * d))
}

/// Mid-ranks by counting smaller and equal values.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&x| {
            let less = values.iter().filter(|&&v| v < x).count() as f64;
            let equal = values.iter().filter(|&&v| v == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided Student t tail `P(|T| > t)` for integer `df`, in closed form.
pub fn student_t_two_sided(t: f64, df: usize) -> f64 {
    let theta = (t / (df as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let a = if df % 2 == 1 {
        let mut term = c;
        let mut sum = if df > 1 { c } else { 0.0 };
        for j in 1..=(df.saturating_sub(3)) / 2 {
            term *= c * c * (2 * j) as f64 / (2 * j + 1) as f64;
            sum += term;
        }
        2.0 / PI * (theta + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 4;
        while j <= df {
            term *= c * c * (j - 3) as f64 / (j - 2) as f64;
            sum += term;
            j += 2;
        }
        s * sum
    };
    (1.0 - a).clamp(0.0, 1.0)
}

pub fn spearman(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let rho = (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0);
    let df = x.len() - 2;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        student_t_two_sided(rho.abs() * (df as f64 / (1.0 - rho * rho)).sqrt(), df)
    };
    (rho, p)
}

/// Mann-Whitney AUC over all positive/negative pairs, ties counted half.
pub fn pairwise_auc(y: &[u8], s: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in (0..y.len()).filter(|&i| y[i] == 1) {
        for j in (0..y.len()).filter(|&j| y[j] == 0) {
            pairs += 1.0;
            if s[i] > s[j] {
                wins += 1.0;
            } else if s[i] == s[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
