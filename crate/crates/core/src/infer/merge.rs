use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volio::{LabelMap, LABEL_BACKGROUND, LABEL_EDEMA, LABEL_ET, LABEL_NET};

/// Label order used to index the merge table.
pub const MERGE_LABELS: [u8; 4] = [LABEL_BACKGROUND, LABEL_NET, LABEL_EDEMA, LABEL_ET];

/// Output label for each (model B row, model A column) pair, both in
/// [`MERGE_LABELS`] order. ET and NET from A are kept; background and edema
/// from A are replaced by B's edema or background.
pub const MERGE_TABLE: [[u8; 4]; 4] = [[0, 1, 0, 4], [0, 1, 2, 4], [2, 1, 2, 4], [0, 1, 2, 4]];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergePolicy {
    pub table: [[u8; 4]; 4],
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy { table: MERGE_TABLE }
    }
}

fn label_index(l: u8) -> Result<usize> {
    MERGE_LABELS
        .iter()
        .position(|&m| m == l)
        .ok_or_else(|| Error::InvalidArgument(format!("label {l} is not one of 0, 1, 2, 4")))
}

impl MergePolicy {
    pub fn resolve(&self, a: u8, b: u8) -> Result<u8> {
        Ok(self.table[label_index(b)?][label_index(a)?])
    }
}

pub fn merge_labelmaps_with(policy: &MergePolicy, a: &LabelMap, b: &LabelMap) -> Result<LabelMap> {
    if a.spatial() != b.spatial() {
        return Err(Error::Shape(format!(
            "labelmaps {:?} and {:?} differ",
            a.spatial(),
            b.spatial()
        )));
    }
    let labels = a
        .labels()
        .iter()
        .zip(b.labels())
        .map(|(&la, &lb)| policy.resolve(la, lb))
        .collect::<Result<Vec<_>>>()?;
    LabelMap::new(a.spatial(), a.spacing(), labels)
}

/// Voxelwise merge of pipeline A's map with pipeline B's map.
pub fn merge_labelmaps(a: &LabelMap, b: &LabelMap) -> Result<LabelMap> {
    merge_labelmaps_with(&MergePolicy::default(), a, b)
}
