//! Goodness-of-fit, normality and rank-correlation tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Pearson chi-square test that all categories are equally likely.
pub fn chi_square_gof(observed: &[u64]) -> Result<TestOutcome> {
    if observed.len() < 2 {
        return Err(Error::InvalidInput(
            "chi-square test needs at least 2 categories".into(),
        ));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("chi-square test of zero counts".into()));
    }
    let expected = total as f64 / observed.len() as f64;
    let statistic: f64 = observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let dist = ChiSquared::new(df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let p_value = if statistic <= 0.0 { 1.0 } else { dist.sf(statistic) };
    Ok(TestOutcome { statistic, p_value })
}

fn ln_binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    let (kf, nf) = (k as f64, n as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    let a = if k == 0 { 0.0 } else { kf * p.ln() };
    let b = if k == n { 0.0 } else { (nf - kf) * (1.0 - p).ln() };
    ln_choose + a + b
}

/// Exact two-sided binomial test: the total probability of every outcome no
/// more likely than the observed one.
pub fn binomial_test(successes: u64, n: u64, p0: f64) -> Result<f64> {
    if successes > n {
        return Err(Error::InvalidInput(format!("{successes} successes out of {n} trials")));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidInput(format!("null probability {p0} outside [0, 1]")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let observed = ln_binomial_pmf(successes, n, p0);
    // Relative slack so outcomes tied with the observed one in exact
    // arithmetic are not lost to rounding.
    let cutoff = observed + 1e-7;
    let mut terms: Vec<f64> = (0..=n)
        .map(|i| ln_binomial_pmf(i, n, p0))
        .filter(|&l| l <= cutoff)
        .map(f64::exp)
        .collect();
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>().min(1.0))
}

/// Upper tail of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * c).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    /// Asymptotic Kolmogorov p-value. Because mean and deviation are
    /// estimated from the same sample this is approximate (and conservative).
    pub p_value: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// One-sample Kolmogorov-Smirnov test against a normal with the sample's
/// own mean and standard deviation.
pub fn ks_normality(values: &[f64]) -> Result<KsOutcome> {
    let n = values.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!(
            "normality test needs at least 8 values, got {n}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("normality test of non-finite values".into()));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let std = var.sqrt();
    if std.is_nan() || std <= 1e-12 * mean.abs().max(1.0) {
        return Err(Error::Degenerate("normality test of a constant sample".into()));
    }
    let dist = Normal::new(mean, std).map_err(|e| Error::Degenerate(e.to_string()))?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = dist.cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(KsOutcome {
        statistic: d,
        p_value: kolmogorov_sf(nf.sqrt() * d),
        mean,
        std,
        n,
    })
}

/// Ranks starting at 1, with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with a two-sided p-value from the t
/// approximation on `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestOutcome> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "spearman inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData("spearman needs at least 3 pairs".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("spearman of non-finite values".into()));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::Degenerate("correlation undefined: a variable has constant ranks".into()))?;
    let df = (x.len() - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t2 = rho * rho * df / (1.0 - rho * rho);
        beta_reg(df / 2.0, 0.5, df / (df + t2))
    };
    Ok(TestOutcome {
        statistic: rho,
        p_value,
    })
}
