mod common;

use common::criteria;

#[test]
fn calibrated_converging_and_reproducible() {
    println!("{}", criteria::tsne_check(200, 21).unwrap());
}
