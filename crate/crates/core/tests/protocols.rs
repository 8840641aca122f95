mod common;

use synth_eval::harness::distinguishability;
use synth_eval::learners::ClassifierSpec;

use common::{gaussian_table, mixed_table};

#[test]
fn exact_copy_is_indistinguishable() {
    let real = mixed_table(1000, 21);
    let mut aucs = Vec::new();
    for seed in 0..20 {
        let r = distinguishability(&real, &real, &ClassifierSpec::forest(seed), seed).unwrap();
        aucs.push(r.roc_auc);
    }
    for auc in &aucs {
        assert!((0.45..=0.55).contains(auc), "{aucs:?}");
    }
}

#[test]
fn disjoint_value_range_is_separable() {
    let real = gaussian_table(500, 4, 2, 1.0, 0.0, 22);
    let synth = gaussian_table(500, 4, 2, 1.0, 100.0, 23);
    for spec in [ClassifierSpec::forest(1), ClassifierSpec::logistic()] {
        let r = distinguishability(&real, &synth, &spec, 1).unwrap();
        assert!(r.roc_auc >= 0.99, "{}: {}", r.classifier, r.roc_auc);
    }
}
