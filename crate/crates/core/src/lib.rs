//! Drug-sensitivity prediction with completions models on GDSC-style pharmacogenomic
//! tables: cohort construction and labeling, prompt serialization, a cached and retried
//! completions gateway, and per-class F1 evaluation.

pub mod cohort;
pub mod eval;
pub mod gateway;
pub mod parallel;
pub mod prompt;

pub use cohort::{
    Cohort, Feature, FeatureSet, FinetuneSpec, Label, LabelPolicy, PairRecord, Tissue,
};
pub use eval::{EvalReport, Setting};
pub use gateway::{BackendConfig, Gateway, Outcome, Prediction};
pub use prompt::{FinetunePromptPair, SerializationOrder, ZeroShotPrompt};
