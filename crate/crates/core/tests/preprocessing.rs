mod common;

use common::criteria;
use proptest::prelude::*;
use tweetstack_core::corpus::{normalize, tokenize, is_valid_token};

#[test]
fn golden_pairs_and_fuzzed_idempotence() {
    let summary = criteria::golden_and_fuzz(1000, 7).unwrap();
    println!("{summary}");
}

#[test]
fn golden_tokens_are_valid() {
    for (_, expected) in criteria::golden_pairs() {
        for tok in tokenize(expected) {
            assert!(is_valid_token(&tok), "{tok:?} from {expected:?}");
        }
    }
}

#[test]
fn tokenize_detaches_punctuation_runs() {
    assert_eq!(tokenize("user_tag hi!!"), ["user_tag", "hi", "!!"]);
    assert_eq!(tokenize("can't stop..."), ["can", "'", "t", "stop", "..."]);
    assert_eq!(tokenize("web_link (ok)"), ["web_link", "(", "ok", ")"]);
}

proptest! {
    #[test]
    fn normalize_is_idempotent(s in "[ a-zA-Z0-9@#_.!?'~/:\\-é]{0,40}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn tokens_rejoin_to_pieces(s in "[ a-z@#.!?,]{0,40}") {
        let norm = normalize(&s);
        let tokens = tokenize(&norm);
        prop_assert_eq!(tokens.concat(), norm.replace(' ', ""));
    }
}
