//! Zero-shot sentence prompts, fine-tune prompt/completion pairs and their JSONL container.

mod jsonl;

use std::borrow::Cow;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{Feature, FeatureSet, Label, PairRecord};

pub use jsonl::{emit_finetune_jsonl, read_finetune_jsonl, JsonlError};

/// Task instruction placed before the serialized record.
pub const INSTRUCTION: &str =
    "Decide in a single word if the drug's response to the target is sensitive or resistant.";

/// Trailing cue left open for the model to complete.
pub const RESPONSE_CUE: &str = "Drug response:";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("feature `{0}` is flagged but the record has no value for it")]
    MissingField(&'static str),
    #[error("feature `{0}` is flagged but not in the serialization order")]
    NotInOrder(&'static str),
    #[error("invalid serialization order: {0}")]
    InvalidOrder(String),
    #[error("invalid completion {0:?}: expected \" sensitive\" or \" resistant\"")]
    Vocabulary(String),
    #[error("prompt contains a blank line")]
    BlankLine,
}

/// Anything that can supply feature values to the serializers.
pub trait FeatureSource {
    fn feature_value(&self, feature: Feature) -> Option<Cow<'_, str>>;
}

fn present(s: &Option<String>) -> Option<Cow<'_, str>> {
    s.as_deref().filter(|s| !s.is_empty()).map(Cow::Borrowed)
}

impl FeatureSource for PairRecord {
    fn feature_value(&self, feature: Feature) -> Option<Cow<'_, str>> {
        match feature {
            Feature::Drug => Some(Cow::Borrowed(self.drug_name.as_str())).filter(|s| !s.is_empty()),
            Feature::CellLine => {
                Some(Cow::Borrowed(self.cell_line.as_str())).filter(|s| !s.is_empty())
            }
            Feature::Target => present(&self.drug_target),
            Feature::Smiles => present(&self.smiles),
            Feature::Mutation => self
                .mutations
                .as_ref()
                .filter(|m| !m.is_empty())
                .map(|m| Cow::Owned(m.join(", "))),
        }
    }
}

/// Order in which features appear in a prompt. Drug always comes first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct SerializationOrder(Vec<Feature>);

impl SerializationOrder {
    pub fn new(order: Vec<Feature>) -> Result<Self, PromptError> {
        if order.first() != Some(&Feature::Drug) {
            return Err(PromptError::InvalidOrder("`drug` must come first".into()));
        }
        for (i, f) in order.iter().enumerate() {
            if order[..i].contains(f) {
                return Err(PromptError::InvalidOrder(format!("`{}` repeated", f.key())));
            }
        }
        Ok(Self(order))
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    fn select<'a, S: FeatureSource>(
        &'a self,
        record: &'a S,
        fs: FeatureSet,
    ) -> Result<Vec<(Feature, Cow<'a, str>)>, PromptError> {
        if let Some(f) = fs.iter().find(|f| !self.0.contains(f)) {
            return Err(PromptError::NotInOrder(f.key()));
        }
        self.0
            .iter()
            .filter(|f| fs.contains(**f))
            .map(|&f| {
                record
                    .feature_value(f)
                    .map(|v| (f, v))
                    .ok_or(PromptError::MissingField(f.key()))
            })
            .collect()
    }
}

impl Default for SerializationOrder {
    fn default() -> Self {
        Self(vec![
            Feature::Drug,
            Feature::Target,
            Feature::CellLine,
            Feature::Smiles,
            Feature::Mutation,
        ])
    }
}

impl TryFrom<Vec<Feature>> for SerializationOrder {
    type Error = PromptError;

    fn try_from(v: Vec<Feature>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<SerializationOrder> for Vec<Feature> {
    fn from(o: SerializationOrder) -> Self {
        o.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotPrompt {
    pub instruction: String,
    pub body: String,
    pub full_text: String,
}

fn sentence_phrase(f: Feature) -> &'static str {
    match f {
        Feature::Drug => "drug name",
        Feature::Target => "drug target",
        Feature::CellLine => "cell line",
        Feature::Smiles => "drug smile",
        Feature::Mutation => "gene mutation",
    }
}

fn line_key(f: Feature) -> &'static str {
    match f {
        Feature::Drug => "drug",
        Feature::Target => "drug target",
        Feature::CellLine => "cell line",
        Feature::Smiles => "drug smile",
        Feature::Mutation => "gene mutation",
    }
}

/// Render a record as "The drug name is x. ... Drug response:" preceded by the
/// instruction on its own line.
pub fn serialize_zero_shot<S: FeatureSource>(
    record: &S,
    fs: FeatureSet,
    order: &SerializationOrder,
) -> Result<ZeroShotPrompt, PromptError> {
    let mut body = String::new();
    for (f, value) in order.select(record, fs)? {
        body.push_str("The ");
        body.push_str(sentence_phrase(f));
        body.push_str(" is ");
        body.push_str(&value);
        body.push_str(". ");
    }
    body.push_str(RESPONSE_CUE);
    let full_text = format!("{INSTRUCTION}\n{body}");
    Ok(ZeroShotPrompt {
        instruction: INSTRUCTION.to_string(),
        body,
        full_text,
    })
}

/// Render a record as newline-delimited `column: value` lines.
pub fn serialize_finetune_prompt<S: FeatureSource>(
    record: &S,
    fs: FeatureSet,
    order: &SerializationOrder,
) -> Result<String, PromptError> {
    let lines: Vec<String> = order
        .select(record, fs)?
        .into_iter()
        .map(|(f, v)| format!("{}: {}", line_key(f), v))
        .collect();
    Ok(lines.join("\n"))
}

/// Completion text for a label. The leading space follows the completions fine-tune
/// convention of separating prompt and completion tokens.
pub fn make_completion(label: Label) -> &'static str {
    match label {
        Label::Sensitive => " sensitive",
        Label::Resistant => " resistant",
    }
}

/// Exact inverse of [`make_completion`].
pub fn parse_completion(text: &str) -> Result<Label, PromptError> {
    match text {
        " sensitive" => Ok(Label::Sensitive),
        " resistant" => Ok(Label::Resistant),
        other => Err(PromptError::Vocabulary(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetunePromptPair {
    pub prompt: String,
    pub completion: String,
}

impl FinetunePromptPair {
    pub fn new(prompt: String, label: Label) -> Result<Self, PromptError> {
        let pair = Self {
            prompt,
            completion: make_completion(label).to_string(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn from_record(
        record: &PairRecord,
        label: Label,
        fs: FeatureSet,
        order: &SerializationOrder,
    ) -> Result<Self, PromptError> {
        Self::new(serialize_finetune_prompt(record, fs, order)?, label)
    }

    pub fn label(&self) -> Result<Label, PromptError> {
        parse_completion(&self.completion)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.prompt.split('\n').any(|line| line.trim().is_empty()) {
            return Err(PromptError::BlankLine);
        }
        self.label().map(|_| ())
    }
}

/// Write `(id, prompt)` rows as CSV for auditing what was sent to the backend.
pub fn write_prompt_csv<W: Write>(rows: &[(usize, String)], sink: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["id", "prompt"])?;
    for (id, prompt) in rows {
        writer.write_record([id.to_string().as_str(), prompt.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Tissue;

    const PCI_SMILES: &str = "COC1=CC=C(C=C1)CN2C=CC3=C2C=C(C=C3)C(=O)NO";

    fn pci() -> PairRecord {
        PairRecord::new("pci-34051", "nci-h1299", Tissue::Luad, -3.1)
            .with_target("hdac1")
            .with_smiles(PCI_SMILES)
            .with_mutations(["crebbp"])
    }

    fn fs(s: &str) -> FeatureSet {
        s.parse().unwrap()
    }

    #[test]
    fn zero_shot_worked_example() {
        let p = serialize_zero_shot(
            &pci(),
            fs("drug,target,smiles,mutation"),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(
            p.body,
            "The drug name is pci-34051. The drug target is hdac1. The drug smile is \
             COC1=CC=C(C=C1)CN2C=CC3=C2C=C(C=C3)C(=O)NO. The gene mutation is crebbp. \
             Drug response:"
        );
        assert_eq!(p.full_text, format!("{INSTRUCTION}\n{}", p.body));
    }

    #[test]
    fn zero_shot_drug_and_cell_line() {
        let r = PairRecord::new("cisplatin", "mcf7", Tissue::Brca, 0.0);
        let p = serialize_zero_shot(&r, fs("drug,cell_line"), &Default::default()).unwrap();
        assert_eq!(
            p.body,
            "The drug name is cisplatin. The cell line is mcf7. Drug response:"
        );
    }

    #[test]
    fn zero_shot_drug_only() {
        let r = PairRecord::new("x", "c", Tissue::Luad, 0.0);
        let p = serialize_zero_shot(&r, FeatureSet::drug_only(), &Default::default()).unwrap();
        assert_eq!(p.body, "The drug name is x. Drug response:");
    }

    #[test]
    fn missing_field_is_named() {
        let r = PairRecord::new("x", "c", Tissue::Luad, 0.0);
        let err = serialize_zero_shot(&r, fs("drug,smiles"), &Default::default()).unwrap_err();
        assert_eq!(err, PromptError::MissingField("smiles"));
        let err =
            serialize_finetune_prompt(&r, fs("drug,mutation"), &Default::default()).unwrap_err();
        assert_eq!(err, PromptError::MissingField("mutation"));
    }

    #[test]
    fn finetune_worked_example() {
        let got =
            serialize_finetune_prompt(&pci(), fs("drug,target,mutation"), &Default::default())
                .unwrap();
        assert_eq!(
            got,
            "drug: pci-34051\ndrug target: hdac1\ngene mutation: crebbp"
        );
    }

    #[test]
    fn finetune_single_line() {
        let r = PairRecord::new("x", "c", Tissue::Luad, 0.0);
        let got =
            serialize_finetune_prompt(&r, FeatureSet::drug_only(), &Default::default()).unwrap();
        assert_eq!(got, "drug: x");
    }

    #[test]
    fn finetune_four_lines_in_order() {
        let r = pci().with_mutations(["tp53", "crebbp"]);
        let got = serialize_finetune_prompt(
            &r,
            fs("mutation,smiles,cell_line,drug"),
            &Default::default(),
        )
        .unwrap();
        let lines: Vec<_> = got.split('\n').collect();
        assert_eq!(
            lines,
            [
                "drug: pci-34051",
                "cell line: nci-h1299",
                &format!("drug smile: {PCI_SMILES}"),
                "gene mutation: crebbp, tp53",
            ]
        );
    }

    #[test]
    fn custom_order_and_validation() {
        let order =
            SerializationOrder::new(vec![Feature::Drug, Feature::Mutation, Feature::Target])
                .unwrap();
        let got = serialize_finetune_prompt(&pci(), fs("drug,target,mutation"), &order).unwrap();
        assert_eq!(
            got,
            "drug: pci-34051\ngene mutation: crebbp\ndrug target: hdac1"
        );
        assert_eq!(
            serialize_finetune_prompt(&pci(), fs("drug,smiles"), &order).unwrap_err(),
            PromptError::NotInOrder("smiles")
        );
        assert!(SerializationOrder::new(vec![Feature::Target, Feature::Drug]).is_err());
        assert!(SerializationOrder::new(vec![Feature::Drug, Feature::Drug]).is_err());
    }

    #[test]
    fn completions_round_trip() {
        assert_eq!(make_completion(Label::Sensitive), " sensitive");
        assert_eq!(make_completion(Label::Resistant), " resistant");
        for label in Label::ALL {
            let text = make_completion(label).trim();
            let title = text[..1].to_uppercase() + &text[1..];
            assert_eq!(title.parse::<Label>().unwrap(), label);
            assert_eq!(parse_completion(make_completion(label)).unwrap(), label);
        }
        assert!(parse_completion("sensitive").is_err());
    }

    #[test]
    fn pair_rejects_blank_lines() {
        assert_eq!(
            FinetunePromptPair::new("drug: x\n\ngene mutation: y".into(), Label::Sensitive),
            Err(PromptError::BlankLine)
        );
    }

    #[test]
    fn prompt_csv_quotes_newlines() {
        let mut out = Vec::new();
        write_prompt_csv(&[(3, "a\nb, c".into())], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "id,prompt\n3,\"a\nb, c\"\n"
        );
    }
}
