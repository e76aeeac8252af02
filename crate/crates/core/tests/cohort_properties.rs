use drugsense::cohort::{
    binarize_response, build_cohort, filter_by_features, stratified_split, Cohort, Feature,
    FeatureSet, Label, LabelPolicy, LabeledRecord, PairRecord, SplitSpec, Tissue,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cohort_with(labels: &[Label]) -> Cohort {
    Cohort {
        tissue: Tissue::Luad,
        records: labels
            .iter()
            .enumerate()
            .map(|(i, &label)| LabeledRecord {
                record: PairRecord::new(&format!("drug{i}"), "cl", Tissue::Luad, 0.0),
                label,
            })
            .collect(),
    }
}

#[test]
fn binarization_matches_strict_comparison_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let policy = LabelPolicy::default();
    for _ in 0..1000 {
        let x: f64 = rng.random_range(-12.0..8.0);
        let oracle = if x < -2.0 {
            Label::Sensitive
        } else {
            Label::Resistant
        };
        assert_eq!(binarize_response(x, &policy).unwrap(), oracle, "x = {x}");
    }
    assert_eq!(binarize_response(-2.0, &policy).unwrap(), Label::Resistant);
}

proptest! {
    #[test]
    fn binarization_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6, theta in -10f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let policy = LabelPolicy::new(theta).unwrap();
        if binarize_response(hi, &policy).unwrap() == Label::Sensitive {
            prop_assert_eq!(binarize_response(lo, &policy).unwrap(), Label::Sensitive);
        }
    }

    #[test]
    fn split_partitions_and_stratifies(
        labels in prop::collection::vec(prop::bool::ANY, 2..300),
        seed in any::<u64>(),
        fraction in 0.05f64..0.95,
    ) {
        let labels: Vec<Label> = labels
            .into_iter()
            .map(|s| if s { Label::Sensitive } else { Label::Resistant })
            .collect();
        let cohort = cohort_with(&labels);
        let spec = SplitSpec::new(fraction, seed).unwrap();
        let Ok(split) = stratified_split(&cohort, &spec) else {
            // Refused only when the train quota is empty or everything.
            let target = (labels.len() as f64 * fraction).round() as usize;
            prop_assert!(target == 0 || target == labels.len());
            return Ok(());
        };
        let n = labels.len();
        prop_assert_eq!(split.train_indices.len() + split.test_indices.len(), n);
        let mut all: Vec<usize> = split.train_indices.iter().chain(&split.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(split.train_indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(split.test_indices.windows(2).all(|w| w[0] < w[1]));

        for class in Label::ALL {
            let n_c = labels.iter().filter(|l| **l == class).count() as f64;
            let train_c = split.train_indices.iter().filter(|&&i| labels[i] == class).count() as f64;
            prop_assert!((train_c - n_c * fraction).abs() < 1.0, "class {class}: {train_c} vs {}", n_c * fraction);
        }
        prop_assert_eq!(stratified_split(&cohort, &spec).unwrap(), split);
    }
}

#[test]
fn seeds_change_membership() {
    let labels: Vec<Label> = (0..100)
        .map(|i| {
            if i % 3 == 0 {
                Label::Sensitive
            } else {
                Label::Resistant
            }
        })
        .collect();
    let cohort = cohort_with(&labels);
    let base = stratified_split(&cohort, &SplitSpec::new(0.8, 0).unwrap()).unwrap();
    let differing = (1..=5)
        .filter(|&seed| {
            stratified_split(&cohort, &SplitSpec::new(0.8, seed).unwrap()).unwrap() != base
        })
        .count();
    assert!(differing >= 1);
}

fn fixture_records() -> Vec<PairRecord> {
    (0..20)
        .map(|i| {
            let mut r = PairRecord::new(
                &format!("d{i}"),
                &format!("c{}", i % 7),
                Tissue::Luad,
                i as f64 / 2.0 - 5.0,
            );
            if i % 3 != 0 {
                r = r.with_smiles("CCO");
            }
            if i % 4 != 1 {
                r = r.with_mutations(["tp53"]);
            }
            if i % 5 == 0 {
                r = r.with_target("egfr");
            }
            r
        })
        .collect()
}

#[test]
fn ablation_filter_matches_independent_scan() {
    let records = fixture_records();
    let cohort = build_cohort(&records, &Tissue::Luad, &LabelPolicy::default()).unwrap();
    let fs = FeatureSet::from_features([
        Feature::Drug,
        Feature::CellLine,
        Feature::Smiles,
        Feature::Mutation,
    ])
    .unwrap();
    let filtered = filter_by_features(&cohort, fs);

    let expected: Vec<&str> = records
        .iter()
        .filter(|r| r.smiles.is_some() && r.mutations.as_ref().is_some_and(|m| !m.is_empty()))
        .map(|r| r.drug_name.as_str())
        .collect();
    let got: Vec<&str> = filtered
        .records
        .iter()
        .map(|r| r.record.drug_name.as_str())
        .collect();
    assert_eq!(got, expected);
    assert_eq!(
        cohort.len() - filtered.len(),
        records.len() - expected.len()
    );

    for fs in FeatureSet::ablation_variants()
        .into_iter()
        .chain([fs.with(Feature::Target)])
    {
        let out = filter_by_features(&cohort, fs);
        for r in &out.records {
            assert!(fs.iter().all(|f| r.record.has_feature(f)));
        }
        let scan = cohort
            .records
            .iter()
            .filter(|r| {
                (!fs.contains(Feature::Smiles) || r.record.smiles.is_some())
                    && (!fs.contains(Feature::Mutation) || r.record.mutations.is_some())
                    && (!fs.contains(Feature::Target) || r.record.drug_target.is_some())
            })
            .count();
        assert_eq!(out.len(), scan, "{fs}");
    }
}
