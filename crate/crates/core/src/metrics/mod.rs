//! Segmentation metrics: Dice, sensitivity, specificity and the 95th
//! percentile Hausdorff distance, with per-dataset aggregation.
//!
//! Empty-mask conventions:
//!
//! | case                   | dice | sensitivity | specificity | hd95            |
//! |------------------------|------|-------------|-------------|-----------------|
//! | both masks empty       | 1    | 1           | as counted  | 0               |
//! | exactly one mask empty | 0    | as counted  | as counted  | volume diagonal |
//!
//! Sensitivity with no reference positives is 1; specificity with no
//! reference negatives is 1.

mod distance;
mod report;

pub use distance::{
    directed_distances, hausdorff, hd95, squared_distance_transform, surface_voxels,
    volume_diagonal,
};
pub use report::{
    aggregate, evaluate_case, CaseMetrics, MeanStd, MetricReport, RegionMetrics, RegionSummary,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(pred: &[bool], reference: &[bool]) -> Result<ConfusionCounts> {
    if pred.len() != reference.len() {
        return Err(Error::Shape(format!(
            "prediction has {} voxels, reference {}",
            pred.len(),
            reference.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &r) in pred.iter().zip(reference) {
        match (p, r) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `2tp / (2tp + fp + fn)`, 1 when both masks are empty.
pub fn dice(c: &ConfusionCounts) -> f64 {
    let den = 2 * c.tp + c.fp + c.fn_;
    if den == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / den as f64
    }
}

pub fn sensitivity(c: &ConfusionCounts) -> f64 {
    let den = c.tp + c.fn_;
    if den == 0 {
        1.0
    } else {
        c.tp as f64 / den as f64
    }
}

pub fn specificity(c: &ConfusionCounts) -> f64 {
    let den = c.tn + c.fp;
    if den == 0 {
        1.0
    } else {
        c.tn as f64 / den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_cases() {
        let c = ConfusionCounts {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 10,
        };
        assert!((dice(&c) - 6.0 / 9.0).abs() < 1e-15);
        assert_eq!(sensitivity(&c), 0.6);
        assert!((specificity(&c) - 10.0 / 11.0).abs() < 1e-15);
        let empty = ConfusionCounts {
            tn: 5,
            ..Default::default()
        };
        assert_eq!(
            (dice(&empty), sensitivity(&empty), specificity(&empty)),
            (1.0, 1.0, 1.0)
        );
        let missed = ConfusionCounts {
            fn_: 4,
            tn: 1,
            ..Default::default()
        };
        assert_eq!(dice(&missed), 0.0);
    }

    #[test]
    fn all_positive_prediction() {
        let r = [true, false, true, false];
        let c = confusion(&[true; 4], &r).unwrap();
        assert_eq!((sensitivity(&c), specificity(&c)), (1.0, 0.0));
        assert_eq!(c.total(), 4);
        assert!(confusion(&[true], &r).is_err());
    }
}
