mod common;

use common::{criteria, oracles};
use proptest::prelude::*;
use tweetstack_core::eval::{confusion, precision_recall_f1, row_normalize};
use tweetstack_core::{Label, NUM_CLASSES};

#[test]
fn algebra_on_random_predictions() {
    println!("{}", criteria::confusion_algebra(300, 17).unwrap());
}

proptest! {
    #[test]
    fn counts_match_cell_scan(pairs in prop::collection::vec((0..NUM_CLASSES, 0..NUM_CLASSES), 1..100)) {
        let (preds, golds): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = confusion(&preds, &golds, &Label::names()).unwrap();
        prop_assert_eq!(&m.counts, &oracles::confusion(&preds, &golds, NUM_CLASSES));
        prop_assert_eq!(m.total(), preds.len() as u64);
        let f = row_normalize(&m);
        for (g, row) in f.fractions.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if golds.contains(&g) {
                prop_assert!((s - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(s, 0.0);
            }
        }
        for (c, s) in precision_recall_f1(&m).iter().enumerate() {
            if golds.contains(&c) {
                let tp = m.counts[c][c] as f64;
                let gold_total: u64 = m.counts[c].iter().sum();
                prop_assert!((s.recall - tp / gold_total as f64).abs() < 1e-12);
            }
        }
    }
}
