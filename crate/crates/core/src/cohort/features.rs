use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CohortError;

/// One input column a prompt can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Drug,
    Target,
    CellLine,
    Smiles,
    Mutation,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::Drug,
        Feature::Target,
        Feature::CellLine,
        Feature::Smiles,
        Feature::Mutation,
    ];

    /// Identifier used in flags, config files and artifact paths.
    pub fn key(self) -> &'static str {
        match self {
            Feature::Drug => "drug",
            Feature::Target => "target",
            Feature::CellLine => "cell_line",
            Feature::Smiles => "smiles",
            Feature::Mutation => "mutation",
        }
    }

    /// Name used in ablation listings, e.g. "drug + cell line + smile".
    pub fn display_name(self) -> &'static str {
        match self {
            Feature::Drug => "drug",
            Feature::Target => "drug target",
            Feature::CellLine => "cell line",
            Feature::Smiles => "smile",
            Feature::Mutation => "mutation",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl FromStr for Feature {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_")
            .as_str()
        {
            "drug" | "drug_name" => Ok(Feature::Drug),
            "target" | "drug_target" => Ok(Feature::Target),
            "cell_line" | "cellline" | "cell" => Ok(Feature::CellLine),
            "smiles" | "smile" | "drug_smile" => Ok(Feature::Smiles),
            "mutation" | "mutations" | "gene_mutation" => Ok(Feature::Mutation),
            other => Err(CohortError::FeatureSet(format!(
                "unknown feature `{other}`"
            ))),
        }
    }
}

/// Set of input columns for one ablation variant. Always contains [`Feature::Drug`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSet(u8);

impl FeatureSet {
    pub fn drug_only() -> Self {
        FeatureSet(Feature::Drug.bit())
    }

    pub fn from_features<I: IntoIterator<Item = Feature>>(
        features: I,
    ) -> Result<Self, CohortError> {
        let bits = features.into_iter().fold(0u8, |acc, f| acc | f.bit());
        if bits & Feature::Drug.bit() == 0 {
            return Err(CohortError::FeatureSet(
                "feature set must include `drug`".into(),
            ));
        }
        Ok(FeatureSet(bits))
    }

    /// Every feature.
    pub fn full() -> Self {
        FeatureSet(Feature::ALL.iter().fold(0, |acc, f| acc | f.bit()))
    }

    /// The four LUAD ablation combinations, in listing order.
    pub fn ablation_variants() -> [FeatureSet; 4] {
        use Feature::*;
        let base = FeatureSet(Drug.bit() | CellLine.bit());
        [
            base,
            base.with(Smiles),
            base.with(Mutation),
            base.with(Smiles).with(Mutation),
        ]
    }

    pub fn with(self, f: Feature) -> Self {
        FeatureSet(self.0 | f.bit())
    }

    pub fn contains(self, f: Feature) -> bool {
        self.0 & f.bit() != 0
    }

    /// Members in canonical order.
    pub fn iter(self) -> impl Iterator<Item = Feature> {
        Feature::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Path-safe slug, e.g. `drug+cell_line+smiles`.
    pub fn slug(self) -> String {
        self.iter().map(Feature::key).collect::<Vec<_>>().join("+")
    }

    /// Listing name, e.g. `drug + cell line + smile`.
    pub fn display_name(self) -> String {
        self.iter()
            .map(Feature::display_name)
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

/// Parses comma- or plus-separated keys: `drug,cell_line,smiles`.
impl FromStr for FeatureSet {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let features = s
            .split([',', '+'])
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Feature>, _>>()?;
        FeatureSet::from_features(features)
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            List(Vec<Feature>),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::List(list) => FeatureSet::from_features(list),
            Repr::Text(text) => text.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}
