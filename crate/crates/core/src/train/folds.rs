use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::nearest_rank;
use crate::rng;

pub const FOLDS: usize = 5;

/// Disjoint case-ID lists that together cover the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: Vec<Vec<String>>,
}

impl FoldSplit {
    /// (training IDs, validation IDs) for fold `k`.
    pub fn train_val(&self, k: usize) -> (Vec<String>, Vec<String>) {
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        (train, self.folds.get(k).cloned().unwrap_or_default())
    }
}

/// Seeded shuffle followed by round-robin assignment to `k` folds.
pub fn k_fold_split(case_ids: &[String], k: usize, seed: u64) -> Result<FoldSplit> {
    if k == 0 {
        return Err(Error::InvalidArgument("fold count must be >= 1".into()));
    }
    let mut ids = case_ids.to_vec();
    ids.sort();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("case IDs must be unique".into()));
    }
    ids.shuffle(&mut rng::seeded(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    Ok(FoldSplit { folds })
}

pub fn five_fold_split(case_ids: &[String], seed: u64) -> Result<FoldSplit> {
    k_fold_split(case_ids, FOLDS, seed)
}

/// Keep cases whose final loss is not strictly above the nearest-rank
/// `quantile` of all final losses. Order of the input is preserved.
pub fn filter_training_set(losses: &[(String, f64)], quantile: f64) -> Result<Vec<String>> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile {quantile} not in (0,1]"
        )));
    }
    if losses.iter().any(|(_, l)| !l.is_finite()) {
        return Err(Error::NonFinite("case loss".into()));
    }
    if losses.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<f64> = losses.iter().map(|&(_, l)| l).collect();
    sorted.sort_by(f64::total_cmp);
    let cut = nearest_rank(&sorted, quantile);
    Ok(losses
        .iter()
        .filter(|&&(_, l)| l <= cut)
        .map(|(id, _)| id.clone())
        .collect())
}

/// Index of the lowest loss; the earliest wins ties.
pub fn select_best_epoch(val_losses: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &l) in val_losses.iter().enumerate() {
        if best.map_or(true, |b| l < val_losses[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("case{i:03}")).collect()
    }

    #[test]
    fn fold_sizes() {
        let s = five_fold_split(&ids(10), 1).unwrap();
        assert!(s.folds.iter().all(|f| f.len() == 2));
        let s = five_fold_split(&ids(11), 1).unwrap();
        let mut sizes: Vec<usize> = s.folds.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        let (tr, va) = s.train_val(0);
        assert_eq!(tr.len() + va.len(), 11);
        assert!(five_fold_split(&["a".into(), "a".into()], 0).is_err());
    }

    #[test]
    fn filtering() {
        let losses: Vec<(String, f64)> = ids(10)
            .into_iter()
            .zip([0.1, 0.5, 0.2, 0.9, 0.3, 0.4, 0.25, 0.15, 0.35, 0.45])
            .collect();
        assert_eq!(filter_training_set(&losses, 1.0).unwrap().len(), 10);
        let kept = filter_training_set(&losses, 0.9).unwrap();
        assert_eq!(kept.len(), 9);
        assert!(!kept.contains(&"case003".to_string()));
        let flat: Vec<(String, f64)> = ids(4).into_iter().map(|i| (i, 0.7)).collect();
        assert_eq!(filter_training_set(&flat, 0.5).unwrap().len(), 4);
    }

    #[test]
    fn best_epoch_ties_go_early() {
        assert_eq!(select_best_epoch(&[3.0, 2.0, 1.0]), Some(2));
        assert_eq!(select_best_epoch(&[3.0, 1.0, 2.0, 1.0]), Some(1));
        assert_eq!(select_best_epoch(&[]), None);
    }
}
