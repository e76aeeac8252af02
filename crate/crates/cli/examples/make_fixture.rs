//! Regenerates the bundled LUAD fixture under `fixtures/`:
//! 40 drugs x 25 cell lines = 1000 pairs, exactly 400 sensitive at theta = -2.
//!
//!     cargo run -p drugsense-cli --example make_fixture

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use drugsense::cohort::validate_smiles_lite;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMED_DRUGS: [(&str, &str, &str); 12] = [
    (
        "PCI-34051",
        "HDAC1",
        "COC1=CC=C(C=C1)CN2C=CC3=C2C=C(C=C3)C(=O)NO",
    ),
    ("Cisplatin", "", "N.N.Cl[Pt]Cl"),
    (
        "Erlotinib",
        "EGFR",
        "COCCOC1=C(C=C2C(=C1)C(=NC=N2)NC3=CC=CC(=C3)C#C)OCCOC",
    ),
    (
        "Gefitinib",
        "EGFR",
        "COC1=C(C=C2C(=C1)N=CN=C2NC3=CC(=C(C=C3)F)Cl)OCCCN4CCOCC4",
    ),
    ("Vorinostat", "HDAC1", "C1=CC=C(C=C1)NC(=O)CCCCCCC(=O)NO"),
    (
        "Olaparib",
        "PARP1",
        "C1CC1C(=O)N2CCN(CC2)C(=O)C3=C(C=CC(=C3)CC4=NNC(=O)C5=CC=CC=C54)F",
    ),
    ("5-Fluorouracil", "TYMS", "C1=C(C(=O)NC(=O)N1)F"),
    (
        "Gemcitabine",
        "RRM1",
        "C1=CN(C(=O)N=C1N)C2C(C(C(O2)CO)O)(F)F",
    ),
    (
        "Trametinib",
        "MAP2K1",
        "CC1=C2C(=C(N(C1=O)C)NC3=C(C=C(C=C3)I)F)C(=O)N(C(=O)N2C4=CC=CC(=C4)NC(=O)C)C5CC5",
    ),
    (
        "Dabrafenib",
        "BRAF",
        "CC(C)(C)C1=NC(=C(S1)C2=NC(=NC=C2)N)C3=C(C(=CC=C3)NS(=O)(=O)C4=C(C=CC=C4F)F)F",
    ),
    (
        "Afatinib",
        "ERBB2",
        "CN(C)C/C=C/C(=O)NC1=C(C=C2C(=C1)C(=NC=N2)NC3=CC(=C(C=C3)F)Cl)OC4CCOC4",
    ),
    (
        "Entinostat",
        "HDAC3",
        "C1=CC=C(C(=C1)N)NC(=O)C2=CC=C(C=C2)CNC(=O)OCC3=CN=CC=C3",
    ),
];

const CELL_LINES: [&str; 25] = [
    "A549",
    "NCI-H1299",
    "NCI-H1975",
    "NCI-H2228",
    "Calu-3",
    "HCC827",
    "NCI-H358",
    "NCI-H441",
    "PC-9",
    "NCI-H1650",
    "NCI-H23",
    "NCI-H2009",
    "NCI-H1437",
    "NCI-H1573",
    "NCI-H1792",
    "NCI-H1838",
    "NCI-H2030",
    "NCI-H2087",
    "NCI-H2122",
    "NCI-H322M",
    "HCC4006",
    "HCC2935",
    "Calu-6",
    "SK-LU-1",
    "NCI-H1395",
];

const MUTATIONS: [(&str, &[&str]); 15] = [
    ("A549", &["KRAS", "STK11", "KEAP1"]),
    ("NCI-H1299", &["CREBBP"]),
    ("NCI-H1975", &["EGFR", "TP53"]),
    ("HCC827", &["EGFR"]),
    ("PC-9", &["EGFR", "EGFR"]),
    ("NCI-H358", &["KRAS"]),
    ("NCI-H23", &["KRAS", "STK11"]),
    ("NCI-H2228", &["TP53"]),
    ("Calu-3", &["ERBB2", "TP53"]),
    ("NCI-H441", &["KRAS", "TP53"]),
    ("NCI-H1650", &["EGFR"]),
    ("NCI-H2009", &["KRAS", "TP53"]),
    ("NCI-H1437", &["TP53"]),
    ("NCI-H2122", &["KRAS", "STK11"]),
    ("HCC4006", &["EGFR", "CREBBP"]),
];

const TARGETS: [&str; 8] = [
    "PIK3CA", "MTOR", "CDK4", "AURKA", "PLK1", "HSP90AA1", "TOP2A", "",
];
const SENSITIVE: usize = 400;
const BOUNDARY_ROWS: usize = 6;

fn main() -> std::io::Result<()> {
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_230_601);

    let mut drugs: Vec<(String, String, Option<String>)> = NAMED_DRUGS
        .iter()
        .map(|(d, t, s)| (d.to_string(), t.to_string(), Some(s.to_string())))
        .collect();
    for i in 0..28 {
        let target = TARGETS[i % TARGETS.len()].to_string();
        // Two in three synthetic compounds get a structure.
        let smiles = (i % 3 != 2).then(|| {
            let chain = "C".repeat(1 + i % 5);
            match i % 4 {
                0 => format!("{chain}C(=O)NC1=CC=CC=C1"),
                1 => format!("O=C(O){chain}C1CCN(CC1)C"),
                2 => format!("{chain}OC1=CC2=C(C=C1)N=CN2"),
                _ => format!("N#C{chain}C1=CC=C(Cl)C=C1"),
            }
        });
        drugs.push((format!("GDSC-CMPD-{:03}", 100 + i), target, smiles));
    }

    let n = drugs.len() * CELL_LINES.len();
    let mut labels: Vec<bool> = (0..n).map(|i| i < SENSITIVE).collect();
    labels.shuffle(&mut rng);
    let mut boundary: Vec<usize> = (0..n).filter(|i| !labels[*i]).collect();
    boundary.shuffle(&mut rng);
    boundary.truncate(BOUNDARY_ROWS);

    let mut table = String::from("drug_name,drug_target,cell_line,tissue,ln_ic50\n");
    let mut row = 0;
    for (drug, target, _) in &drugs {
        for cell in CELL_LINES {
            let value = if boundary.contains(&row) {
                "-2.0".to_string()
            } else if labels[row] {
                format!("{:.6}", rng.random_range(-6.5..-2.05))
            } else {
                format!("{:.6}", rng.random_range(-1.95..4.5))
            };
            writeln!(table, "{drug},{target},{cell},LUAD,{value}").unwrap();
            row += 1;
        }
    }
    fs::write(out.join("luad_pairs.csv"), table)?;

    let mut smiles = String::from("drug,smiles\n");
    for (drug, _, s) in &drugs {
        if let Some(s) = s {
            assert!(validate_smiles_lite(s), "{s}");
            writeln!(smiles, "{drug},{s}").unwrap();
        }
    }
    fs::write(out.join("drug_smiles.csv"), smiles)?;

    let mut muts = String::from("cell_line,gene\n");
    for (cell, genes) in MUTATIONS {
        for gene in genes {
            writeln!(muts, "{cell},{gene}").unwrap();
        }
    }
    fs::write(out.join("cell_mutations.csv"), muts)?;
    println!("wrote {n} pairs to {}", out.display());
    Ok(())
}
