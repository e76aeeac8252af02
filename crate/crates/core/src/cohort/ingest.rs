use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{normalize_text, CohortError, PairRecord, Tissue};

/// Maps record fields to header names of the input table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMap {
    pub drug_name: String,
    pub drug_target: Option<String>,
    pub cell_line: String,
    pub tissue: String,
    pub ln_ic50: String,
}

impl Default for SchemaMap {
    fn default() -> Self {
        Self {
            drug_name: "drug_name".into(),
            drug_target: Some("drug_target".into()),
            cell_line: "cell_line".into(),
            tissue: "tissue".into(),
            ln_ic50: "ln_ic50".into(),
        }
    }
}

/// A data row that could not become a [`PairRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    /// 1-based data row (the header is not counted).
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub records: Vec<PairRecord>,
    pub rejected: Vec<RowDiagnostic>,
}

struct Columns {
    drug_name: usize,
    drug_target: Option<usize>,
    cell_line: usize,
    tissue: usize,
    ln_ic50: usize,
}

fn locate(
    headers: &csv::StringRecord,
    field: &'static str,
    name: &str,
) -> Result<usize, CohortError> {
    if name.trim().is_empty() {
        return Err(CohortError::UnmappedField(field));
    }
    headers
        .iter()
        .position(|h| h.trim() == name.trim())
        .ok_or_else(|| CohortError::MissingColumn {
            field,
            column: name.to_string(),
        })
}

/// Read a comma-separated table with a header row into pair records.
///
/// Rows whose response does not parse to a finite number, or that lack a drug,
/// cell line or tissue, are reported in [`Ingested::rejected`] rather than dropped.
pub fn ingest_pairs<R: Read>(source: R, schema: &SchemaMap) -> Result<Ingested, CohortError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(CohortError::EmptyInput);
    }

    let cols = Columns {
        drug_name: locate(&headers, "drug_name", &schema.drug_name)?,
        drug_target: match &schema.drug_target {
            Some(name) => Some(locate(&headers, "drug_target", name)?),
            None => None,
        },
        cell_line: locate(&headers, "cell_line", &schema.cell_line)?,
        tissue: locate(&headers, "tissue", &schema.tissue)?,
        ln_ic50: locate(&headers, "ln_ic50", &schema.ln_ic50)?,
    };

    let mut out = Ingested::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                out.rejected.push(RowDiagnostic {
                    row: row_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match parse_row(&row, &cols) {
            Ok(record) => out.records.push(record),
            Err(message) => {
                tracing::debug!(row = row_no, %message, "rejected input row");
                out.rejected.push(RowDiagnostic {
                    row: row_no,
                    message,
                });
            }
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> Result<PairRecord, String> {
    let field = |idx: usize, name: &str| {
        row.get(idx)
            .map(str::trim)
            .ok_or_else(|| format!("missing value for `{name}`"))
    };
    let required = |idx: usize, name: &str| {
        let v = field(idx, name)?;
        if v.is_empty() {
            Err(format!("empty `{name}`"))
        } else {
            Ok(v)
        }
    };

    let drug = required(cols.drug_name, "drug_name")?;
    let cell_line = required(cols.cell_line, "cell_line")?;
    let tissue: Tissue = required(cols.tissue, "tissue")?
        .parse()
        .unwrap_or_else(|never| match never {});
    let raw = field(cols.ln_ic50, "ln_ic50")?;
    let ln_ic50: f64 = raw
        .parse()
        .map_err(|_| format!("unparseable ln_ic50 `{raw}`"))?;
    if !ln_ic50.is_finite() {
        return Err(format!("non-finite ln_ic50 `{raw}`"));
    }

    let mut record = PairRecord::new(drug, cell_line, tissue, ln_ic50);
    if let Some(idx) = cols.drug_target {
        let target = normalize_text(row.get(idx).unwrap_or(""));
        record.drug_target = (!target.is_empty()).then_some(target);
    }
    Ok(record)
}
