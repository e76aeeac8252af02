//! Drug / cell-line pair records, response labeling and cohort construction.

mod annotate;
mod features;
mod ingest;
mod smiles;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotate::{attach_annotations, load_mutation_map, load_smiles_map, AnnotationMaps};
pub use features::{Feature, FeatureSet};
pub use ingest::{ingest_pairs, Ingested, RowDiagnostic, SchemaMap};
pub use smiles::validate_smiles_lite;
pub use split::{stratified_split, SplitResult, SplitSpec};

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("input table is empty (no header row)")]
    EmptyInput,
    #[error("schema error: column `{column}` mapped for `{field}` is not in the header")]
    MissingColumn { field: &'static str, column: String },
    #[error("schema error: no column mapped for required field `{0}`")]
    UnmappedField(&'static str),
    #[error("ln(IC50) must be finite, got {0}")]
    NonFinite(f64),
    #[error("invalid label threshold {0}: must be finite")]
    InvalidTheta(f64),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("cannot split a cohort of {n} record(s): train has {train}, test has {test}")]
    Split { n: usize, train: usize, test: usize },
    #[error("invalid feature set: {0}")]
    FeatureSet(String),
    #[error("invalid fine-tune spec: {0}")]
    Finetune(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Tissue cohort code. The five named cohorts are listed in reporting order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tissue {
    Luad,
    Brca,
    Coread,
    Thca,
    Lgg,
    Other(String),
}

impl Tissue {
    pub const NAMED: [Tissue; 5] = [
        Tissue::Luad,
        Tissue::Brca,
        Tissue::Coread,
        Tissue::Thca,
        Tissue::Lgg,
    ];

    pub fn code(&self) -> &str {
        match self {
            Tissue::Luad => "LUAD",
            Tissue::Brca => "BRCA",
            Tissue::Coread => "COREAD",
            Tissue::Thca => "THCA",
            Tissue::Lgg => "LGG",
            Tissue::Other(code) => code,
        }
    }
}

impl fmt::Display for Tissue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Tissue {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.trim().to_ascii_uppercase();
        Ok(match code.as_str() {
            "LUAD" => Tissue::Luad,
            "BRCA" => Tissue::Brca,
            "COREAD" => Tissue::Coread,
            "THCA" => Tissue::Thca,
            "LGG" => Tissue::Lgg,
            _ => Tissue::Other(code),
        })
    }
}

impl Serialize for Tissue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Tissue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().unwrap_or_else(|never| match never {}))
    }
}

/// One drug / cell-line observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub drug_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drug_target: Option<String>,
    pub cell_line: String,
    pub tissue: Tissue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smiles: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutations: Option<Vec<String>>,
    /// Natural log of the micromolar IC50.
    pub ln_ic50: f64,
}

impl PairRecord {
    pub fn new(drug_name: &str, cell_line: &str, tissue: Tissue, ln_ic50: f64) -> Self {
        Self {
            drug_name: normalize_text(drug_name),
            drug_target: None,
            cell_line: normalize_text(cell_line),
            tissue,
            smiles: None,
            mutations: None,
            ln_ic50,
        }
    }

    pub fn with_target(mut self, target: &str) -> Self {
        self.drug_target = non_empty(normalize_text(target));
        self
    }

    /// SMILES strings are case-significant and kept verbatim apart from trimming.
    pub fn with_smiles(mut self, smiles: &str) -> Self {
        self.smiles = non_empty(smiles.trim().to_string());
        self
    }

    pub fn with_mutations<I, S>(mut self, genes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.mutations = normalize_genes(genes);
        self
    }

    /// Whether the optional field behind `feature` is present and non-empty.
    pub fn has_feature(&self, feature: Feature) -> bool {
        match feature {
            Feature::Drug => !self.drug_name.is_empty(),
            Feature::CellLine => !self.cell_line.is_empty(),
            Feature::Target => self.drug_target.as_deref().is_some_and(|t| !t.is_empty()),
            Feature::Smiles => self.smiles.as_deref().is_some_and(|s| !s.is_empty()),
            Feature::Mutation => self.mutations.as_ref().is_some_and(|m| !m.is_empty()),
        }
    }
}

pub(crate) fn normalize_text(s: &str) -> String {
    s.trim().to_lowercase()
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

/// Lowercase, drop blanks, sort and dedupe a gene list.
pub(crate) fn normalize_genes<I, S>(genes: I) -> Option<Vec<String>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out: Vec<String> = genes
        .into_iter()
        .map(|g| normalize_text(g.as_ref()))
        .filter(|g| !g.is_empty())
        .collect();
    out.sort();
    out.dedup();
    (!out.is_empty()).then_some(out)
}

/// Binary drug response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Resistant,
    Sensitive,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Resistant, Label::Sensitive];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sensitive => "sensitive",
            Label::Resistant => "resistant",
        }
    }

    pub fn opposite(self) -> Label {
        match self {
            Label::Sensitive => Label::Resistant,
            Label::Resistant => Label::Sensitive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sensitive" => Ok(Label::Sensitive),
            "resistant" => Ok(Label::Resistant),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}

/// Threshold rule: sensitive iff ln(IC50) < theta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPolicy {
    theta: f64,
}

impl LabelPolicy {
    pub const DEFAULT_THETA: f64 = -2.0;

    pub fn new(theta: f64) -> Result<Self, CohortError> {
        if theta.is_finite() {
            Ok(Self { theta })
        } else {
            Err(CohortError::InvalidTheta(theta))
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl Default for LabelPolicy {
    fn default() -> Self {
        Self {
            theta: Self::DEFAULT_THETA,
        }
    }
}

/// Binarize a response. A value exactly at the threshold is resistant.
pub fn binarize_response(ln_ic50: f64, policy: &LabelPolicy) -> Result<Label, CohortError> {
    if !ln_ic50.is_finite() {
        return Err(CohortError::NonFinite(ln_ic50));
    }
    Ok(if ln_ic50 < policy.theta {
        Label::Sensitive
    } else {
        Label::Resistant
    })
}

/// Fine-tune job metadata recorded next to exported JSONL. Jobs are run externally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSpec {
    pub model_id: String,
    pub epochs: u32,
    pub provider: String,
}

impl FinetuneSpec {
    pub fn validate(&self) -> Result<(), CohortError> {
        if self.epochs == 0 {
            return Err(CohortError::Finetune("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for FinetuneSpec {
    fn default() -> Self {
        Self {
            model_id: "ada".into(),
            epochs: 4,
            provider: "openai".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub record: PairRecord,
    pub label: Label,
}

/// The labeled rows of one tissue, in ingestion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub tissue: Tissue,
    pub records: Vec<LabeledRecord>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.records.iter().map(|r| r.label)
    }

    pub fn class_counts(&self) -> [(Label, usize); 2] {
        let sensitive = self.labels().filter(|l| *l == Label::Sensitive).count();
        [
            (Label::Resistant, self.len() - sensitive),
            (Label::Sensitive, sensitive),
        ]
    }
}

pub fn build_cohort(
    records: &[PairRecord],
    tissue: &Tissue,
    policy: &LabelPolicy,
) -> Result<Cohort, CohortError> {
    let records = records
        .iter()
        .filter(|r| &r.tissue == tissue)
        .map(|r| {
            Ok(LabeledRecord {
                label: binarize_response(r.ln_ic50, policy)?,
                record: r.clone(),
            })
        })
        .collect::<Result<Vec<_>, CohortError>>()?;
    Ok(Cohort {
        tissue: tissue.clone(),
        records,
    })
}

/// Keep only records carrying every optional field flagged in `fs`.
pub fn filter_by_features(cohort: &Cohort, fs: FeatureSet) -> Cohort {
    Cohort {
        tissue: cohort.tissue.clone(),
        records: cohort
            .records
            .iter()
            .filter(|r| fs.iter().all(|f| r.record.has_feature(f)))
            .cloned()
            .collect(),
    }
}
