//! Confusion counts, per-class precision/recall/F1 and aggregate reports.

mod render;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{FeatureSet, Label, Tissue};
use crate::gateway::Outcome;

pub use render::{render_report, sort_reports, ReportFormat, REPORT_VERSION};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("predictions ({preds}) and gold labels ({golds}) differ in length")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("nothing to score")]
    Empty,
}

/// Confusion counts for one positive class. Unparseable predictions are scored as the
/// class opposite to gold and also tallied separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub unparseable: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(
    preds: &[Outcome],
    golds: &[Label],
    positive: Label,
) -> Result<ConfusionCounts, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&pred, &gold) in preds.iter().zip(golds) {
        let called = pred.label().unwrap_or_else(|| {
            c.unparseable += 1;
            gold.opposite()
        });
        match (called == positive, gold == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 with every zero denominator mapped to 0.
pub fn class_metrics(c: &ConfusionCounts) -> ClassMetrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if c.tp == 0 || precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    ZeroShot,
    FineTuned,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::ZeroShot => "zero_shot",
            Setting::FineTuned => "fine_tuned",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "zero_shot" => Ok(Setting::ZeroShot),
            "fine_tuned" | "finetuned" => Ok(Setting::FineTuned),
            other => Err(format!("unknown setting `{other}`")),
        }
    }
}

/// Metrics for one (tissue, setting, feature set) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tissue: Tissue,
    pub setting: Setting,
    pub feature_set: FeatureSet,
    pub per_class: BTreeMap<Label, ClassMetrics>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// Counts with `sensitive` as the positive class.
    pub counts: ConfusionCounts,
    pub n: u64,
}

impl EvalReport {
    pub fn f1(&self, label: Label) -> f64 {
        self.per_class.get(&label).map_or(0.0, |m| m.f1)
    }
}

pub fn build_report(
    preds: &[Outcome],
    golds: &[Label],
    tissue: Tissue,
    setting: Setting,
    feature_set: FeatureSet,
) -> Result<EvalReport, EvalError> {
    let mut per_class = BTreeMap::new();
    let mut counts = ConfusionCounts::default();
    for label in Label::ALL {
        let c = confusion(preds, golds, label)?;
        if label == Label::Sensitive {
            counts = c;
        }
        per_class.insert(label, class_metrics(&c));
    }

    let n = golds.len() as u64;
    let macro_f1 = per_class.values().map(|m| m.f1).sum::<f64>() / per_class.len() as f64;
    let weighted_f1 = per_class
        .iter()
        .map(|(label, m)| {
            let support = golds.iter().filter(|g| *g == label).count() as f64;
            support * m.f1
        })
        .sum::<f64>()
        / n as f64;
    let accuracy = ratio(counts.tp + counts.tn, n);

    Ok(EvalReport {
        tissue,
        setting,
        feature_set,
        per_class,
        macro_f1,
        weighted_f1,
        accuracy,
        counts,
        n,
    })
}
