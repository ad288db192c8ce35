use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{confusion, dice, hd95, sensitivity, specificity};
use crate::error::{Error, Result};
use crate::volio::{labelmap_to_regions, LabelMap, Region};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub dice: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub hd95_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case: String,
    #[serde(rename = "ET")]
    pub et: RegionMetrics,
    #[serde(rename = "TC")]
    pub tc: RegionMetrics,
    #[serde(rename = "WT")]
    pub wt: RegionMetrics,
}

impl CaseMetrics {
    pub fn get(&self, r: Region) -> &RegionMetrics {
        match r {
            Region::Et => &self.et,
            Region::Tc => &self.tc,
            Region::Wt => &self.wt,
        }
    }
}

/// Metrics of every region of `pred` against `reference`.
pub fn evaluate_case(
    case: &str,
    pred: &LabelMap,
    reference: &LabelMap,
    spacing: [f64; 3],
) -> Result<CaseMetrics> {
    if pred.spatial() != reference.spatial() {
        return Err(Error::Shape(format!(
            "prediction {:?} and reference {:?} differ",
            pred.spatial(),
            reference.spatial()
        )));
    }
    let (p, r) = (labelmap_to_regions(pred), labelmap_to_regions(reference));
    let dims = reference.spatial();
    let one = |reg: Region| -> Result<RegionMetrics> {
        let c = confusion(p.get(reg), r.get(reg))?;
        Ok(RegionMetrics {
            dice: dice(&c),
            sensitivity: sensitivity(&c),
            specificity: specificity(&c),
            hd95_mm: hd95(p.get(reg), r.get(reg), dims, spacing)?,
        })
    };
    Ok(CaseMetrics {
        case: case.to_string(),
        et: one(Region::Et)?,
        tc: one(Region::Tc)?,
        wt: one(Region::Wt)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub dice: MeanStd,
    pub sensitivity: MeanStd,
    pub specificity: MeanStd,
    pub hd95_mm: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cases: Vec<CaseMetrics>,
    #[serde(rename = "ET")]
    pub et: RegionSummary,
    #[serde(rename = "TC")]
    pub tc: RegionSummary,
    #[serde(rename = "WT")]
    pub wt: RegionSummary,
}

/// Per-region means and population standard deviations.
pub fn aggregate(cases: &[CaseMetrics]) -> Result<MetricReport> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    let summary = |r: Region| {
        let col = |f: fn(&RegionMetrics) -> f64| {
            MeanStd::of(&cases.iter().map(|c| f(c.get(r))).collect::<Vec<_>>())
        };
        RegionSummary {
            dice: col(|m| m.dice),
            sensitivity: col(|m| m.sensitivity),
            specificity: col(|m| m.specificity),
            hd95_mm: col(|m| m.hd95_mm),
        }
    };
    Ok(MetricReport {
        cases: cases.to_vec(),
        et: summary(Region::Et),
        tc: summary(Region::Tc),
        wt: summary(Region::Wt),
    })
}

impl MetricReport {
    pub fn summary(&self, r: Region) -> &RegionSummary {
        match r {
            Region::Et => &self.et,
            Region::Tc => &self.tc,
            Region::Wt => &self.wt,
        }
    }

    /// Plain-text table of the means: metrics as rows, ET/WT/TC as columns.
    pub fn to_table(&self) -> String {
        let cols = [Region::Et, Region::Wt, Region::Tc];
        let rows: [(&str, fn(&RegionSummary) -> f64); 4] = [
            ("Dice", |s| s.dice.mean),
            ("Sensitivity", |s| s.sensitivity.mean),
            ("Specificity", |s| s.specificity.mean),
            ("Hausdorff (95%)", |s| s.hd95_mm.mean),
        ];
        let mut out = format!("{:<16}", "Metric (mean)");
        for c in cols {
            let _ = write!(out, "{:>10}", c.name());
        }
        out.push('\n');
        for (name, f) in rows {
            let _ = write!(out, "{name:<16}");
            for c in cols {
                let _ = write!(out, "{:>10.5}", f(self.summary(c)));
            }
            out.push('\n');
        }
        out
    }
}
