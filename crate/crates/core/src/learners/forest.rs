//! Random forest over weighted bootstrap samples.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use super::tree::{grow_tree, DecisionTree, TreeParams};
use crate::matrix::FeatureMatrix;
use crate::rng::stream_rng;

/// Bootstrap multiplicities: `n` draws with probability proportional to `w`.
fn bootstrap_counts<R: Rng>(w: &[f64], rng: &mut R) -> Vec<f64> {
    let n = w.len();
    let mut counts = vec![0.0; n];
    let uniform = w.iter().all(|&v| v == w[0]);
    if uniform {
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1.0;
        }
    } else {
        let dist = WeightedIndex::new(w).expect("weights validated before fitting");
        for _ in 0..n {
            counts[dist.sample(rng)] += 1.0;
        }
    }
    counts
}

pub fn fit_forest(
    x: &FeatureMatrix,
    y: &[u8],
    w: &[f64],
    n_trees: usize,
    params: TreeParams,
    seed: u64,
) -> Vec<DecisionTree> {
    (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let counts = bootstrap_counts(w, &mut rng);
            grow_tree(x, y, &counts, params, &mut rng)
        })
        .collect()
}

/// Mean leaf frequency over the trees.
/// Mean tree score. Scores are summed in sorted order so the result does
/// not depend on the order of `trees`.
pub fn forest_score(trees: &[DecisionTree], row: &[f64]) -> f64 {
    let mut scores: Vec<f64> = trees.iter().map(|t| t.score(row)).collect();
    scores.sort_unstable_by(f64::total_cmp);
    scores.iter().sum::<f64>() / trees.len() as f64
}
