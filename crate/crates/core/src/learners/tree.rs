//! Weighted CART trees with Gini splits.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Weighted class totals of the training rows reaching the leaf.
    Leaf { w0: f64, w1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(&self, row: &[f64]) -> (f64, f64) {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { w0, w1 } => return (*w0, *w1),
            }
        }
    }

    /// Positive-class frequency of the leaf `row` falls into.
    pub fn score(&self, row: &[f64]) -> f64 {
        let (w0, w1) = self.leaf(row);
        w1 / (w0 + w1)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: usize,
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

fn is_better(score: f64, feature: usize, threshold: f64, best: &Option<Best>) -> bool {
    match best {
        None => true,
        Some(b) => {
            score > b.score
                || (score == b.score && (feature < b.feature || (feature == b.feature && threshold < b.threshold)))
        }
    }
}

fn class_totals(y: &[u8], w: &[f64], rows: &[usize]) -> (f64, f64) {
    rows.iter().fold(
        (0.0, 0.0),
        |(a, b), &i| {
            if y[i] == 1 {
                (a, b + w[i])
            } else {
                (a + w[i], b)
            }
        },
    )
}

/// Grows a tree on the rows with positive weight. Children are scored by
/// `sum_k (l_k^2 / W_l) + (r_k^2 / W_r)`, which ranks splits exactly as the
/// weighted Gini decrease does.
pub fn grow_tree(x: &FeatureMatrix, y: &[u8], w: &[f64], params: TreeParams, rng: &mut ChaCha8Rng) -> DecisionTree {
    let root: Vec<usize> = (0..x.n_rows()).filter(|&i| w[i] > 0.0).collect();
    let mut nodes = vec![Node::Leaf { w0: 0.0, w1: 0.0 }];
    let mut stack = vec![(0usize, root, 0usize)];
    let mut features: Vec<usize> = (0..x.n_cols()).collect();
    let mut column: Vec<(f64, usize)> = Vec::new();

    while let Some((id, rows, depth)) = stack.pop() {
        let (w0, w1) = class_totals(y, w, &rows);
        let leaf = Node::Leaf { w0, w1 };
        let can_split = w0 > 0.0
            && w1 > 0.0
            && rows.len() >= params.min_samples_split
            && params.max_depth.is_none_or(|d| depth < d);
        if !can_split {
            nodes[id] = leaf;
            continue;
        }

        features.shuffle(rng);
        let mut best: Option<Best> = None;
        let mut evaluated = 0;
        for &f in &features {
            if evaluated >= params.max_features && best.is_some() {
                break;
            }
            column.clear();
            column.extend(rows.iter().map(|&i| (x.get(i, f), i)));
            column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if column[0].0 == column[column.len() - 1].0 {
                continue;
            }
            evaluated += 1;
            let (mut l0, mut l1) = (0.0, 0.0);
            for k in 0..column.len() - 1 {
                let i = column[k].1;
                if y[i] == 1 {
                    l1 += w[i];
                } else {
                    l0 += w[i];
                }
                let (v, next) = (column[k].0, column[k + 1].0);
                if v == next {
                    continue;
                }
                let (r0, r1) = (w0 - l0, w1 - l1);
                let (wl, wr) = (l0 + l1, r0 + r1);
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr;
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                if is_better(score, f, threshold, &best) {
                    best = Some(Best {
                        score,
                        feature: f,
                        threshold,
                    });
                }
            }
        }

        let Some(split) = best else {
            nodes[id] = leaf;
            continue;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { w0: 0.0, w1: 0.0 });
        nodes.push(Node::Leaf { w0: 0.0, w1: 0.0 });
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }
    DecisionTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn params(max_features: usize) -> TreeParams {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            max_features,
        }
    }

    #[test]
    fn separates_a_threshold_concept() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 12)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let t = grow_tree(&x, &y, &[1.0; 20], params(2), &mut stream_rng(0, 0));
        assert_eq!(
            t.nodes[0],
            Node::Split {
                feature: 0,
                threshold: 11.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(t.n_leaves(), 2);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(t.score(r), f64::from(y[i]));
        }
    }

    #[test]
    fn leaf_weights_sum_to_training_weight() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 11) as f64, (i % 4) as f64]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let w: Vec<f64> = (0..30).map(|i| (i % 5) as f64).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let t = grow_tree(&x, &y, &w, params(1), &mut stream_rng(3, 1));
        let total: f64 = t
            .nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { w0, w1 } => w0 + w1,
                _ => 0.0,
            })
            .sum();
        assert_eq!(total, w.iter().sum::<f64>());
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Two identical columns: any split on column 1 is matched by column 0.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        for seed in 0..8 {
            let t = grow_tree(&x, &y, &[1.0; 10], params(2), &mut stream_rng(seed, 0));
            assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
        }
    }

    #[test]
    fn depth_limit() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..16).map(|i| (i % 2) as u8).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let p = TreeParams {
            max_depth: Some(2),
            min_samples_split: 2,
            max_features: 1,
        };
        let t = grow_tree(&x, &y, &[1.0; 16], p, &mut stream_rng(0, 0));
        assert!(t.depth() <= 2);
    }
}
