//! Stratified train/test partition and majority-class downsampling.

use rand::seq::{index, SliceRandom};

use super::encode::EncodedDataset;
use crate::error::{ClassLabel, Error, Result};
use crate::rng::stream_rng;

/// Row indices of a stratified partition, each sorted ascending.
///
/// Each class contributes `floor(count * train_fraction)` rows to train; the
/// remainder goes to test.
pub fn stratified_split_indices(labels: &[u8], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidInput("labels must be binary".into()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < 2 {
            return Err(Error::StratificationInfeasible(format!(
                "class {class} has {} row(s); at least 2 are needed",
                rows.len()
            )));
        }
        let mut rng = stream_rng(seed, u64::from(class));
        rows.shuffle(&mut rng);
        let k = (rows.len() as f64 * train_fraction).floor() as usize;
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(
    data: &EncodedDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(EncodedDataset, EncodedDataset)> {
    let (train, test) = stratified_split_indices(&data.labels, train_fraction, seed)?;
    let mut tr = data.subset(&train);
    let mut te = data.subset(&test);
    tr.seed = Some(seed);
    te.seed = Some(seed);
    Ok((tr, te))
}

/// Indices of a class-balanced subset: every minority row plus a uniform
/// sample, without replacement, of the majority class.
pub fn downsample_indices(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if pos.len() + neg.len() != labels.len() {
        return Err(Error::InvalidInput("labels must be binary".into()));
    }
    if pos.is_empty() {
        return Err(Error::MissingClass(ClassLabel::Positive));
    }
    if neg.is_empty() {
        return Err(Error::MissingClass(ClassLabel::Negative));
    }
    if pos.len() == neg.len() {
        return Ok((0..labels.len()).collect());
    }
    let (minority, majority) = if pos.len() < neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = stream_rng(seed, 0);
    let mut keep: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|k| majority[k])
        .collect();
    keep.extend_from_slice(&minority);
    keep.sort_unstable();
    Ok(keep)
}

pub fn downsample_majority(train: &EncodedDataset, seed: u64) -> Result<EncodedDataset> {
    let keep = downsample_indices(&train.labels, seed)?;
    if keep.len() == train.len() {
        return Ok(train.clone());
    }
    Ok(train.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: usize, neg: usize) -> Vec<u8> {
        let mut v = vec![1u8; pos];
        v.extend(vec![0u8; neg]);
        v
    }

    #[test]
    fn preserves_class_proportions() {
        let y = labels(40, 60);
        let (train, test) = stratified_split_indices(&y, 0.5, 3).unwrap();
        assert_eq!(train.iter().filter(|&&i| y[i] == 1).count(), 20);
        assert_eq!(train.iter().filter(|&&i| y[i] == 0).count(), 30);
        assert_eq!(train.len() + test.len(), 100);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn odd_counts_put_remainder_in_test() {
        let y = labels(7, 9);
        let (train, test) = stratified_split_indices(&y, 0.5, 1).unwrap();
        assert_eq!(train.len(), 3 + 4);
        assert_eq!(test.len(), 4 + 5);
    }

    #[test]
    fn split_is_seeded() {
        let y = labels(30, 50);
        assert_eq!(
            stratified_split_indices(&y, 0.5, 9).unwrap(),
            stratified_split_indices(&y, 0.5, 9).unwrap()
        );
        assert_ne!(
            stratified_split_indices(&y, 0.5, 9).unwrap(),
            stratified_split_indices(&y, 0.5, 10).unwrap()
        );
    }

    #[test]
    fn tiny_class_is_infeasible() {
        assert!(matches!(
            stratified_split_indices(&labels(1, 10), 0.5, 0),
            Err(Error::StratificationInfeasible(_))
        ));
    }

    #[test]
    fn downsample_balances() {
        let y = labels(10, 100);
        let keep = downsample_indices(&y, 5).unwrap();
        assert_eq!(keep.len(), 20);
        assert_eq!(keep.iter().filter(|&&i| y[i] == 1).count(), 10);
        assert_eq!(keep, downsample_indices(&y, 5).unwrap());

        let y = labels(6275, 9846);
        assert_eq!(downsample_indices(&y, 1).unwrap().len(), 12_550);
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let y = labels(40, 40);
        assert_eq!(downsample_indices(&y, 0).unwrap(), (0..80).collect::<Vec<_>>());
        assert!(matches!(
            downsample_indices(&labels(0, 5), 0),
            Err(Error::MissingClass(ClassLabel::Positive))
        ));
    }
}
