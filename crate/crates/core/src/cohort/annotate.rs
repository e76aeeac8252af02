use std::collections::HashMap;
use std::io::Read;

use super::{normalize_genes, normalize_text, CohortError, PairRecord};

/// Drug → SMILES and cell line → mutated genes lookups. Keys are lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationMaps {
    pub smiles: HashMap<String, String>,
    pub mutations: HashMap<String, Vec<String>>,
}

fn two_column_rows<R: Read>(source: R) -> Result<Vec<(String, String)>, CohortError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row?;
        let key = normalize_text(row.get(0).unwrap_or(""));
        let value = row.get(1).unwrap_or("").trim().to_string();
        if !key.is_empty() && !value.is_empty() {
            rows.push((key, value));
        }
    }
    Ok(rows)
}

/// Load a `drug,smiles` table (header row first). The first entry per drug wins.
pub fn load_smiles_map<R: Read>(source: R) -> Result<HashMap<String, String>, CohortError> {
    let mut map = HashMap::new();
    for (drug, smiles) in two_column_rows(source)? {
        map.entry(drug).or_insert(smiles);
    }
    Ok(map)
}

/// Load a `cell_line,gene` table (header row first); a cell line may repeat, one gene per row.
pub fn load_mutation_map<R: Read>(source: R) -> Result<HashMap<String, Vec<String>>, CohortError> {
    let mut map: HashMap<String, Vec<String>> = HashMap::new();
    for (cell_line, gene) in two_column_rows(source)? {
        map.entry(cell_line).or_default().push(gene);
    }
    for genes in map.values_mut() {
        *genes = normalize_genes(genes.iter()).unwrap_or_default();
    }
    Ok(map)
}

/// Attach SMILES and mutation annotations by drug name and cell line. Missing keys leave
/// the field unset.
pub fn attach_annotations(records: &[PairRecord], maps: &AnnotationMaps) -> Vec<PairRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some(smiles) = maps.smiles.get(&r.drug_name) {
                r = r.with_smiles(smiles);
            }
            if let Some(genes) = maps.mutations.get(&r.cell_line) {
                r = r.with_mutations(genes);
            }
            r
        })
        .collect()
}
