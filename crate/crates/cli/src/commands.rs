//! One function per subcommand. Each reads upstream artifacts, checks their digest and
//! rewrites its own outputs only when their content changes.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use drugsense::cohort::{
    attach_annotations, build_cohort, filter_by_features, ingest_pairs, load_mutation_map,
    load_smiles_map, stratified_split, AnnotationMaps, RowDiagnostic,
};
use drugsense::eval::{build_report, render_report, sort_reports, ReportFormat};
use drugsense::gateway::{batch_predict, prompt_digest, BatchItem, Gateway, ResponseCache};
use drugsense::prompt::{
    emit_finetune_jsonl, serialize_finetune_prompt, serialize_zero_shot, write_prompt_csv,
};
use drugsense::{
    Cohort, EvalReport, FeatureSet, FinetunePromptPair, FinetuneSpec, Label, Setting, Tissue,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{self, write_if_changed, Layout};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub struct Context<'a> {
    pub config: RunConfig,
    pub digest: String,
    pub layout: Layout,
    pub stdout: &'a mut dyn Write,
}

macro_rules! say {
    ($ctx:expr, $($arg:tt)*) => {
        let _ = writeln!($ctx.stdout, $($arg)*);
    };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub sensitive: usize,
    pub resistant: usize,
}

impl ClassCounts {
    fn of(labels: impl Iterator<Item = Label>) -> Self {
        labels.fold(Self::default(), |mut c, l| {
            match l {
                Label::Sensitive => c.sensitive += 1,
                Label::Resistant => c.resistant += 1,
            }
            c
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TissueSummary {
    pub tissue: Tissue,
    pub pairs: usize,
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: Vec<RowDiagnostic>,
    pub tissues: Vec<TissueSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationVariant {
    pub feature_set: FeatureSet,
    pub pairs: usize,
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSummary {
    pub tissue: Tissue,
    pub pairs: usize,
    pub variants: Vec<AblationVariant>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train_counts: ClassCounts,
    pub test_counts: ClassCounts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptEntry {
    /// Row index in the feature-set cohort.
    pub id: usize,
    pub prompt: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptsArtifact {
    pub setting: Setting,
    pub feature_set: FeatureSet,
    pub entries: Vec<PromptEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonlFile {
    pub file: String,
    pub pairs: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinetuneArtifact {
    pub spec: FinetuneSpec,
    pub feature_set: FeatureSet,
    pub train: JsonlFile,
    pub test: JsonlFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub id: usize,
    pub item: BatchItem,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionsArtifact {
    pub model_id: String,
    pub setting: Setting,
    pub feature_set: FeatureSet,
    pub items: Vec<PredictionEntry>,
    /// Ids whose completion failed after retries.
    pub failed: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub reports: Vec<EvalReport>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

impl Context<'_> {
    fn cells(&self) -> Vec<(Tissue, FeatureSet)> {
        let mut cells = Vec::new();
        for t in &self.config.tissues {
            for fs in &self.config.feature_sets {
                cells.push((t.clone(), *fs));
            }
        }
        cells
    }

    fn save<T: Serialize>(&self, path: &Path, body: &T) -> Result<()> {
        artifacts::save(path, &self.digest, body)
    }

    fn load<T: for<'de> Deserialize<'de>>(&self, path: &Path, producer: &str) -> Result<T> {
        artifacts::load(path, &self.digest, producer)
    }

    fn cell_cohort(&self, t: &Tissue, fs: FeatureSet) -> Result<Cohort> {
        self.load(&self.layout.cell(t, fs).join("cohort.json"), "ablate")
    }

    fn split_of(&self, t: &Tissue, fs: FeatureSet) -> Result<SplitArtifact> {
        self.load(&self.layout.cell(t, fs).join("split.json"), "split")
    }
}

pub fn ingest(ctx: &mut Context) -> Result<()> {
    let c = &ctx.config;
    let ingested = ingest_pairs(open(&c.paths.pairs)?, &c.schema).map_err(CliError::invalid)?;
    for d in &ingested.rejected {
        tracing::warn!(row = d.row, "rejected: {}", d.message);
    }

    let mut maps = AnnotationMaps::default();
    if let Some(path) = &c.paths.smiles {
        maps.smiles = load_smiles_map(open(path)?).map_err(CliError::invalid)?;
    }
    if let Some(path) = &c.paths.mutations {
        maps.mutations = load_mutation_map(open(path)?).map_err(CliError::invalid)?;
    }
    let records = attach_annotations(&ingested.records, &maps);
    let policy = c.policy_spec()?;

    let mut tissues = Vec::new();
    for t in &c.tissues {
        let cohort = build_cohort(&records, t, &policy).map_err(CliError::invalid)?;
        if cohort.is_empty() {
            tracing::warn!(tissue = %t, "no pairs for tissue");
        }
        ctx.save(&ctx.layout.tissue(t).join("cohort.json"), &cohort)?;
        tissues.push(TissueSummary {
            tissue: t.clone(),
            pairs: cohort.len(),
            counts: ClassCounts::of(cohort.labels()),
        });
    }

    let summary = IngestSummary {
        rows: ingested.records.len() + ingested.rejected.len(),
        accepted: ingested.records.len(),
        rejected: ingested.rejected,
        tissues,
    };
    ctx.save(&ctx.layout.root().join("ingest.json"), &summary)?;
    say!(
        ctx,
        "ingested {} rows ({} rejected)",
        summary.rows,
        summary.rejected.len()
    );
    for t in &summary.tissues {
        say!(
            ctx,
            "{}: {} pairs ({} sensitive, {} resistant)",
            t.tissue,
            t.pairs,
            t.counts.sensitive,
            t.counts.resistant
        );
    }
    Ok(())
}

pub fn ablate(ctx: &mut Context) -> Result<()> {
    for t in ctx.config.tissues.clone() {
        let cohort: Cohort = ctx.load(&ctx.layout.tissue(&t).join("cohort.json"), "ingest")?;
        let mut variants = Vec::new();
        say!(ctx, "{t}:");
        for fs in ctx.config.feature_sets.clone() {
            let sub = filter_by_features(&cohort, fs);
            ctx.save(&ctx.layout.cell(&t, fs).join("cohort.json"), &sub)?;
            say!(ctx, "  {} ({})", fs.display_name(), sub.len());
            variants.push(AblationVariant {
                feature_set: fs,
                pairs: sub.len(),
                counts: ClassCounts::of(sub.labels()),
            });
        }
        let summary = AblationSummary {
            tissue: t.clone(),
            pairs: cohort.len(),
            variants,
        };
        ctx.save(&ctx.layout.tissue(&t).join("ablation.json"), &summary)?;
    }
    Ok(())
}

pub fn split(ctx: &mut Context) -> Result<()> {
    let spec = ctx.config.split_spec()?;
    for (t, fs) in ctx.cells() {
        let cohort = ctx.cell_cohort(&t, fs)?;
        let result = stratified_split(&cohort, &spec)
            .map_err(|e| CliError::invalid(format!("{t} {}: {e}", fs.display_name())))?;
        let counts = |idx: &[usize]| ClassCounts::of(idx.iter().map(|&i| cohort.records[i].label));
        let artifact = SplitArtifact {
            seed: spec.seed,
            train_fraction: spec.train_fraction(),
            train_counts: counts(&result.train_indices),
            test_counts: counts(&result.test_indices),
            train_indices: result.train_indices,
            test_indices: result.test_indices,
        };
        ctx.save(&ctx.layout.cell(&t, fs).join("split.json"), &artifact)?;
        say!(
            ctx,
            "{t} {}: train {} / test {}",
            fs.display_name(),
            artifact.train_indices.len(),
            artifact.test_indices.len()
        );
    }
    Ok(())
}

pub fn prompts(ctx: &mut Context) -> Result<()> {
    let setting = ctx.config.pipeline.setting;
    let order = ctx.config.pipeline.serialization_order.clone();
    for (t, fs) in ctx.cells() {
        let cohort = ctx.cell_cohort(&t, fs)?;
        let split = ctx.split_of(&t, fs)?;
        let entries = split
            .test_indices
            .iter()
            .map(|&id| {
                let record = &cohort.records[id].record;
                let prompt = match setting {
                    Setting::ZeroShot => {
                        serialize_zero_shot(record, fs, &order).map(|p| p.full_text)
                    }
                    Setting::FineTuned => serialize_finetune_prompt(record, fs, &order),
                };
                prompt
                    .map(|prompt| PromptEntry { id, prompt })
                    .map_err(|e| CliError::invalid(format!("{t} row {id}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;

        let dir = ctx.layout.cell(&t, fs);
        let rows: Vec<(usize, String)> = entries.iter().map(|e| (e.id, e.prompt.clone())).collect();
        let mut csv = Vec::new();
        write_prompt_csv(&rows, &mut csv).map_err(CliError::invalid)?;
        write_if_changed(&dir.join("prompts.csv"), &csv)?;
        let artifact = PromptsArtifact {
            setting,
            feature_set: fs,
            entries,
        };
        ctx.save(&dir.join("prompts.json"), &artifact)?;
        say!(
            ctx,
            "{t} {}: {} {setting} prompts",
            fs.display_name(),
            artifact.entries.len()
        );
    }
    Ok(())
}

fn jsonl_file(dir: &Path, name: &str, pairs: &[FinetunePromptPair]) -> Result<JsonlFile> {
    let mut bytes = Vec::new();
    emit_finetune_jsonl(pairs, &mut bytes).map_err(CliError::invalid)?;
    write_if_changed(&dir.join(name), &bytes)?;
    Ok(JsonlFile {
        file: name.to_string(),
        pairs: pairs.len(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

pub fn export_finetune(ctx: &mut Context) -> Result<()> {
    let order = ctx.config.pipeline.serialization_order.clone();
    for (t, fs) in ctx.cells() {
        let cohort = ctx.cell_cohort(&t, fs)?;
        let split = ctx.split_of(&t, fs)?;
        let pairs = |idx: &[usize]| {
            idx.iter()
                .map(|&i| {
                    let r = &cohort.records[i];
                    FinetunePromptPair::from_record(&r.record, r.label, fs, &order)
                        .map_err(|e| CliError::invalid(format!("{t} row {i}: {e}")))
                })
                .collect::<Result<Vec<_>>>()
        };
        let dir = ctx.layout.cell(&t, fs);
        let artifact = FinetuneArtifact {
            spec: ctx.config.finetune.clone(),
            feature_set: fs,
            train: jsonl_file(&dir, "train.jsonl", &pairs(&split.train_indices)?)?,
            test: jsonl_file(&dir, "test.jsonl", &pairs(&split.test_indices)?)?,
        };
        ctx.save(&dir.join("finetune.json"), &artifact)?;
        say!(
            ctx,
            "{t} {}: {} train / {} test pairs",
            fs.display_name(),
            artifact.train.pairs,
            artifact.test.pairs
        );
    }
    Ok(())
}

pub fn predict(ctx: &mut Context) -> Result<()> {
    let gateway = Gateway::from_config(&ctx.config.backend)
        .map_err(|e| CliError::invalid(format!("backend: {e}")))?;
    let cache_dir = ctx.config.cache_dir();
    let cache = ResponseCache::open(&cache_dir).map_err(|e| CliError::io(&cache_dir, e))?;
    let mut failures = 0;
    for (t, fs) in ctx.cells() {
        let dir = ctx.layout.cell(&t, fs);
        let prompts: PromptsArtifact = ctx.load(&dir.join("prompts.json"), "prompts")?;
        let texts: Vec<String> = prompts.entries.iter().map(|e| e.prompt.clone()).collect();
        let outcome = batch_predict(&gateway, &texts, ctx.config.pipeline.parallelism, &cache);

        let ids: Vec<usize> = prompts.entries.iter().map(|e| e.id).collect();
        let artifact = PredictionsArtifact {
            model_id: gateway.model_id().to_string(),
            setting: prompts.setting,
            feature_set: fs,
            failed: outcome.failed.iter().map(|&i| ids[i]).collect(),
            items: ids
                .iter()
                .zip(outcome.items)
                .map(|(&id, item)| PredictionEntry { id, item })
                .collect(),
        };
        ctx.save(&dir.join("predictions.json"), &artifact)?;
        failures += artifact.failed.len();
        say!(
            ctx,
            "{t} {}: {} predictions ({} failed, {} sent to backend)",
            fs.display_name(),
            artifact.items.len(),
            artifact.failed.len(),
            outcome.backend_requests
        );
    }
    if failures > 0 {
        return Err(CliError::Backend(format!(
            "{failures} predictions failed after retries; re-run `predict` to retry them"
        )));
    }
    Ok(())
}

fn evaluate_cell(ctx: &Context, t: &Tissue, fs: FeatureSet) -> Result<EvalReport> {
    let dir = ctx.layout.cell(t, fs);
    let cohort = ctx.cell_cohort(t, fs)?;
    let prompts: PromptsArtifact = ctx.load(&dir.join("prompts.json"), "prompts")?;
    let preds: PredictionsArtifact = ctx.load(&dir.join("predictions.json"), "predict")?;

    let mismatch = || {
        CliError::invalid(format!(
            "{}: predictions do not match prompts.json; re-run `predict`",
            dir.display()
        ))
    };
    if preds.items.len() != prompts.entries.len() || preds.setting != prompts.setting {
        return Err(mismatch());
    }
    if !preds.failed.is_empty() {
        return Err(CliError::Backend(format!(
            "{}: {} predictions failed; re-run `predict`",
            dir.display(),
            preds.failed.len()
        )));
    }

    let mut outcomes = Vec::with_capacity(preds.items.len());
    let mut golds = Vec::with_capacity(preds.items.len());
    for (entry, pred) in prompts.entries.iter().zip(&preds.items) {
        let p = pred.item.prediction().ok_or_else(mismatch)?;
        if entry.id != pred.id || p.prompt_digest != prompt_digest(&entry.prompt) {
            return Err(mismatch());
        }
        let gold = cohort.records.get(entry.id).ok_or_else(mismatch)?.label;
        outcomes.push(p.outcome);
        golds.push(gold);
    }
    build_report(&outcomes, &golds, t.clone(), preds.setting, fs).map_err(CliError::invalid)
}

fn write_reports(ctx: &Context, dir: &Path, reports: &mut [EvalReport]) -> Result<()> {
    sort_reports(reports);
    ctx.save(
        &dir.join("report.json"),
        &ReportArtifact {
            reports: reports.to_vec(),
        },
    )?;
    for format in [ReportFormat::Csv, ReportFormat::Markdown] {
        let path = dir.join(format!("report.{}", format.extension()));
        write_if_changed(&path, &render_report(reports, format))?;
    }
    Ok(())
}

pub fn evaluate(ctx: &mut Context) -> Result<()> {
    for (t, fs) in ctx.cells() {
        let report = evaluate_cell(ctx, &t, fs)?;
        write_reports(ctx, &ctx.layout.cell(&t, fs), &mut [report.clone()])?;
        let unparseable = report.counts.unparseable;
        say!(
            ctx,
            "{t} {}: F1-sensitive {:.4}, F1-resistant {:.4}, n {}, unparseable {unparseable}",
            fs.display_name(),
            report.f1(Label::Sensitive),
            report.f1(Label::Resistant),
            report.n
        );
    }
    Ok(())
}

pub fn report(ctx: &mut Context, show: ReportFormat) -> Result<()> {
    let mut reports = Vec::new();
    for (t, fs) in ctx.cells() {
        let cell: ReportArtifact =
            ctx.load(&ctx.layout.cell(&t, fs).join("report.json"), "evaluate")?;
        reports.extend(cell.reports);
    }
    let root = ctx.layout.root().to_path_buf();
    write_reports(ctx, &root, &mut reports)?;
    let shown = match show {
        ReportFormat::Json => std::fs::read(root.join("report.json"))
            .map_err(|e| CliError::io(&root.join("report.json"), e))?,
        other => render_report(&reports, other),
    };
    let _ = ctx.stdout.write_all(&shown);
    Ok(())
}

pub fn serve(ctx: &mut Context, port: Option<u16>) -> Result<()> {
    let mut config = ctx.config.service_config();
    if let Some(port) = port {
        config.port = port;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io(Path::new("<runtime>"), e))?;
    say!(
        ctx,
        "serving on 0.0.0.0:{} (backend {})",
        config.port,
        config.backend.kind.as_str()
    );
    let _ = ctx.stdout.flush();
    runtime
        .block_on(drugsense_service::serve(config))
        .map_err(|e| CliError::io(Path::new("<listener>"), e))
}
