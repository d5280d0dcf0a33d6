//! Exponentiated-gradient reduction under pairwise FNR parity.
//!
//! Each ordered pair of groups `(g, h)` contributes the constraint
//! `FNR(g) - FNR(h) <= epsilon`. The multipliers live on the simplex scaled
//! by `multiplier_bound` (with one slack coordinate), and are updated by
//! `theta <- max(0, theta + (step_size / bound) * violation)`,
//! `lambda = bound * exp(theta) / (1 + sum(exp(theta)))`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::constraint::FairnessConstraint;
use crate::error::{Error, Result};
use crate::learners::{fit, predict_proba, threshold_scores, LearnerConfig, TrainedModel};
use crate::matrix::FeatureMatrix;
use crate::metrics::range_of;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MixtureRule {
    #[default]
    Uniform,
    /// All weight on the iterate with the lowest training Lagrangian under
    /// the final multipliers.
    BestIterate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EgParams {
    pub iterations: usize,
    pub step_size: f64,
    pub multiplier_bound: f64,
    pub mixture: MixtureRule,
    pub decision_threshold: f64,
}

impl Default for EgParams {
    fn default() -> Self {
        EgParams {
            iterations: 10,
            step_size: 2.0,
            multiplier_bound: 10.0,
            mixture: MixtureRule::Uniform,
            decision_threshold: 0.5,
        }
    }
}

impl EgParams {
    /// Increment applied to `theta` per unit of violation.
    pub fn theta_step(&self) -> f64 {
        self.step_size / self.multiplier_bound
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("EG needs at least one iteration".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config("EG step size must be positive".into()));
        }
        if !(self.multiplier_bound > 0.0 && self.multiplier_bound.is_finite()) {
            return Err(Error::Config("EG multiplier bound must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(Error::Config("decision threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One EG round: the multipliers used to train iterate `iteration`, and what
/// that iterate then measured on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierStep {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub group_fnr: BTreeMap<String, f64>,
    pub violations: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgTrainingSummary {
    pub group_fnr: BTreeMap<String, f64>,
    pub fnr_range: f64,
    /// `max(0, fnr_range - epsilon)`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EGEnsemble {
    pub params: EgParams,
    pub constraint: FairnessConstraint,
    pub pairs: Vec<(String, String)>,
    pub iterates: Vec<TrainedModel>,
    pub mixture_weights: Vec<f64>,
    pub multiplier_trace: Vec<MultiplierStep>,
    pub training: EgTrainingSummary,
}

/// Rows indexed by constraint group, with positive counts.
struct GroupIndex {
    names: Vec<String>,
    row_group: Vec<Option<usize>>,
    positives: Vec<u64>,
}

fn index_groups<S: AsRef<str>>(y: &[u8], groups: &[S], constraint: &FairnessConstraint) -> Result<GroupIndex> {
    if groups.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} group labels for {} rows",
            groups.len(),
            y.len()
        )));
    }
    let names: Vec<String> = if constraint.groups.is_empty() {
        let mut v: Vec<String> = groups.iter().map(|g| g.as_ref().to_string()).collect();
        v.sort();
        v.dedup();
        v
    } else {
        constraint.groups.iter().cloned().collect()
    };
    let lookup: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let row_group: Vec<Option<usize>> = groups.iter().map(|g| lookup.get(g.as_ref()).copied()).collect();
    let mut positives = vec![0u64; names.len()];
    let mut seen = vec![false; names.len()];
    for (gi, &yi) in row_group.iter().zip(y) {
        if let Some(g) = *gi {
            seen[g] = true;
            positives[g] += u64::from(yi == 1);
        }
    }
    for (g, name) in names.iter().enumerate() {
        if !seen[g] {
            return Err(Error::InvalidInput(format!("constraint group {name} has no rows")));
        }
        if positives[g] == 0 {
            return Err(Error::InfeasibleConstraint(format!(
                "group {name} has no positive rows, so its FNR is undefined"
            )));
        }
    }
    Ok(GroupIndex {
        names,
        row_group,
        positives,
    })
}

fn pair_indices(index: &GroupIndex, pairs: &[(String, String)]) -> Vec<(usize, usize)> {
    let pos = |n: &str| index.names.iter().position(|m| m == n).expect("pair group is indexed");
    pairs.iter().map(|(g, h)| (pos(g), pos(h))).collect()
}

fn lambda_from_theta(theta: &[f64], bound: f64) -> Vec<f64> {
    let denom = 1.0 + theta.iter().map(|t| t.exp()).sum::<f64>();
    theta.iter().map(|t| bound * t.exp() / denom).collect()
}

/// Labels and weights of the cost-sensitive problem induced by `lambda`.
fn reweight(y: &[u8], index: &GroupIndex, pairs: &[(usize, usize)], lambda: &[f64]) -> (Vec<u8>, Vec<f64>) {
    let mut mu = vec![0.0; index.names.len()];
    for (&(g, h), &l) in pairs.iter().zip(lambda) {
        mu[g] += l;
        mu[h] -= l;
    }
    let n = y.len() as f64;
    let mut labels = Vec::with_capacity(y.len());
    let mut weights = Vec::with_capacity(y.len());
    for (&yi, gi) in y.iter().zip(&index.row_group) {
        if yi == 1 {
            let cost = match gi {
                Some(g) => 1.0 + n * mu[*g] / index.positives[*g] as f64,
                None => 1.0,
            };
            labels.push(u8::from(cost > 0.0));
            weights.push(cost.abs());
        } else {
            labels.push(0);
            weights.push(1.0);
        }
    }
    let mean = weights.iter().sum::<f64>() / n;
    if mean > 0.0 {
        for w in &mut weights {
            *w /= mean;
        }
    }
    (labels, weights)
}

fn group_fnr(y: &[u8], yhat: &[u8], index: &GroupIndex) -> Vec<f64> {
    let mut misses = vec![0u64; index.names.len()];
    for ((&yi, &pi), gi) in y.iter().zip(yhat).zip(&index.row_group) {
        if let Some(g) = *gi {
            if yi == 1 && pi == 0 {
                misses[g] += 1;
            }
        }
    }
    misses
        .iter()
        .zip(&index.positives)
        .map(|(&m, &p)| m as f64 / p as f64)
        .collect()
}

fn error_rate(y: &[u8], yhat: &[u8]) -> f64 {
    y.iter().zip(yhat).filter(|(a, b)| a != b).count() as f64 / y.len() as f64
}

struct Fitted {
    iterates: Vec<TrainedModel>,
    trace: Vec<MultiplierStep>,
}

/// Fitted iterates, the group index, pair indices and pair names.
type RunOutput = (Fitted, GroupIndex, Vec<(usize, usize)>, Vec<(String, String)>);

fn run<S: AsRef<str>>(
    learner: &LearnerConfig,
    x: &FeatureMatrix,
    y: &[u8],
    groups: &[S],
    constraint: &FairnessConstraint,
    params: &EgParams,
    recorded: Option<&[MultiplierStep]>,
) -> Result<RunOutput> {
    params.validate()?;
    if y.len() != x.n_rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} rows",
            y.len(),
            x.n_rows()
        )));
    }
    let index = index_groups(y, groups, constraint)?;
    let names = FairnessConstraint {
        groups: index.names.iter().cloned().collect(),
        ..constraint.clone()
    };
    let pair_names = names.pairs();
    let pairs = pair_indices(&index, &pair_names);

    let mut theta = vec![0.0; pairs.len()];
    let mut iterates = Vec::with_capacity(params.iterations);
    let mut trace = Vec::with_capacity(params.iterations);
    for t in 0..params.iterations {
        let lambda = match recorded {
            Some(steps) => {
                let step = steps
                    .get(t)
                    .ok_or_else(|| Error::InvalidInput(format!("multiplier trace has no entry for iteration {t}")))?;
                theta.clone_from(&step.theta);
                step.lambda.clone()
            }
            None => lambda_from_theta(&theta, params.multiplier_bound),
        };
        let (labels, weights) = reweight(y, &index, &pairs, &lambda);
        let model = fit(learner, x, &labels, Some(&weights))?;
        let yhat = threshold_scores(&predict_proba(&model, x)?, params.decision_threshold)?;
        let fnr = group_fnr(y, &yhat, &index);
        let violations: Vec<f64> = pairs
            .iter()
            .map(|&(g, h)| fnr[g] - fnr[h] - constraint.epsilon)
            .collect();
        log::debug!(
            "EG iteration {t}: max violation {:.4}",
            violations.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        );
        trace.push(MultiplierStep {
            iteration: t,
            theta: theta.clone(),
            lambda,
            group_fnr: index.names.iter().cloned().zip(fnr).collect(),
            violations: violations.clone(),
            error: error_rate(y, &yhat),
        });
        for (th, v) in theta.iter_mut().zip(&violations) {
            *th = (*th + params.theta_step() * v).max(0.0);
        }
        iterates.push(model);
    }
    Ok((Fitted { iterates, trace }, index, pairs, pair_names))
}

fn mixture(params: &EgParams, trace: &[MultiplierStep]) -> Vec<f64> {
    let t = trace.len();
    match params.mixture {
        MixtureRule::Uniform => vec![1.0 / t as f64; t],
        MixtureRule::BestIterate => {
            let last = &trace[t - 1];
            let mut theta = last.theta.clone();
            for (th, v) in theta.iter_mut().zip(&last.violations) {
                *th = (*th + params.theta_step() * v).max(0.0);
            }
            let lambda = lambda_from_theta(&theta, params.multiplier_bound);
            let lagrangian =
                |s: &MultiplierStep| s.error + lambda.iter().zip(&s.violations).map(|(l, v)| l * v).sum::<f64>();
            let mut best = 0;
            for (i, s) in trace.iter().enumerate() {
                if lagrangian(s) < lagrangian(&trace[best]) {
                    best = i;
                }
            }
            let mut w = vec![0.0; t];
            w[best] = 1.0;
            w
        }
    }
}

fn assemble(
    fitted: Fitted,
    index: &GroupIndex,
    pair_names: Vec<(String, String)>,
    x: &FeatureMatrix,
    y: &[u8],
    constraint: &FairnessConstraint,
    params: &EgParams,
) -> Result<EGEnsemble> {
    let mixture_weights = mixture(params, &fitted.trace);
    let mut ensemble = EGEnsemble {
        params: params.clone(),
        constraint: FairnessConstraint {
            groups: index.names.iter().cloned().collect(),
            ..constraint.clone()
        },
        pairs: pair_names,
        iterates: fitted.iterates,
        mixture_weights,
        multiplier_trace: fitted.trace,
        training: EgTrainingSummary {
            group_fnr: BTreeMap::new(),
            fnr_range: 0.0,
            slack: 0.0,
        },
    };
    let yhat = threshold_scores(&predict_eg(&ensemble, x)?, params.decision_threshold)?;
    let fnr = group_fnr(y, &yhat, index);
    let fnr_range = range_of(&fnr).unwrap_or(0.0);
    ensemble.training = EgTrainingSummary {
        group_fnr: index.names.iter().cloned().zip(fnr).collect(),
        fnr_range,
        slack: (fnr_range - constraint.epsilon).max(0.0),
    };
    Ok(ensemble)
}

/// Fits `params.iterations` cost-sensitive copies of `learner`, reweighting
/// positive rows of groups whose FNR exceeds another group's by more than
/// `epsilon`.
pub fn fit_exponentiated_gradient<S: AsRef<str>>(
    learner: &LearnerConfig,
    x: &FeatureMatrix,
    y: &[u8],
    groups: &[S],
    constraint: &FairnessConstraint,
    params: &EgParams,
) -> Result<EGEnsemble> {
    let (fitted, index, _, names) = run(learner, x, y, groups, constraint, params, None)?;
    assemble(fitted, &index, names, x, y, constraint, params)
}

/// Refits every iterate from the multipliers recorded in `ensemble`.
pub fn replay_exponentiated_gradient<S: AsRef<str>>(
    ensemble: &EGEnsemble,
    learner: &LearnerConfig,
    x: &FeatureMatrix,
    y: &[u8],
    groups: &[S],
) -> Result<EGEnsemble> {
    let (fitted, index, _, names) = run(
        learner,
        x,
        y,
        groups,
        &ensemble.constraint,
        &ensemble.params,
        Some(&ensemble.multiplier_trace),
    )?;
    assemble(fitted, &index, names, x, y, &ensemble.constraint, &ensemble.params)
}

/// Checks that each recorded multiplier vector follows from the previous
/// one and the violations measured in between.
pub fn verify_multiplier_trace(ensemble: &EGEnsemble) -> Result<()> {
    let p = &ensemble.params;
    let mut theta = vec![0.0; ensemble.pairs.len()];
    for step in &ensemble.multiplier_trace {
        if step.theta != theta || step.lambda != lambda_from_theta(&theta, p.multiplier_bound) {
            return Err(Error::InvalidInput(format!(
                "multiplier trace diverges at iteration {}",
                step.iteration
            )));
        }
        for (th, v) in theta.iter_mut().zip(&step.violations) {
            *th = (*th + p.theta_step() * v).max(0.0);
        }
    }
    Ok(())
}

/// Mixture-weighted average of the iterate scores.
pub fn predict_eg(ensemble: &EGEnsemble, x: &FeatureMatrix) -> Result<Vec<f64>> {
    let per_iterate = ensemble
        .iterates
        .iter()
        .map(|m| predict_proba(m, x))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..x.n_rows())
        .map(|i| {
            let first = per_iterate[0][i];
            if per_iterate.iter().all(|s| s[i] == first) {
                return first;
            }
            per_iterate
                .iter()
                .zip(&ensemble.mixture_weights)
                .map(|(s, w)| w * s[i])
                .sum()
        })
        .collect())
}

/// Scores from one iterate per row, drawn from the mixture weights.
pub fn predict_eg_randomized(ensemble: &EGEnsemble, x: &FeatureMatrix, seed: u64) -> Result<Vec<f64>> {
    let dist = WeightedIndex::new(&ensemble.mixture_weights)
        .map_err(|e| Error::InvalidInput(format!("mixture weights: {e}")))?;
    let per_iterate = ensemble
        .iterates
        .iter()
        .map(|m| predict_proba(m, x))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = stream_rng(seed, 0);
    Ok((0..x.n_rows()).map(|i| per_iterate[dist.sample(&mut rng)][i]).collect())
}

impl EGEnsemble {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
