mod common;

use common::oracle;
use kic::metrics::{align_unigrams, bleu, meteor, score_pair, tokenize, BleuConfig, MeteorConfig};
use proptest::prelude::*;

const ALPHABET: [&str; 5] = ["a", "b", "c", "d", "e"];

fn sentence(max_len: usize) -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(&ALPHABET[..]), 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bleu_matches_brute_force(pred in sentence(8), reference in sentence(8)) {
        let got = bleu(&tokenize(&pred.join(" ")), &tokenize(&reference.join(" ")), &BleuConfig::default()).unwrap();
        let want = oracle::bleu(&pred, &reference, 4);
        prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn alignment_matches_brute_force(pred in sentence(8), reference in sentence(8)) {
        let a = align_unigrams(&tokenize(&pred.join(" ")), &tokenize(&reference.join(" ")));
        prop_assert_eq!((a.match_count, a.chunk_count), oracle::align(&pred, &reference));
    }

    #[test]
    fn meteor_matches_brute_force(pred in sentence(8), reference in sentence(8)) {
        let got = meteor(&tokenize(&pred.join(" ")), &tokenize(&reference.join(" ")), &MeteorConfig::default());
        prop_assert!((got - oracle::meteor(&pred, &reference)).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn scores_stay_in_unit_interval(p in "[a-e .,]{0,40}", r in "[a-e]{1,3}( [a-e.]{1,3}){0,8}") {
        let s = score_pair(&p, &r, &BleuConfig::default(), &MeteorConfig::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.bleu));
        prop_assert!((0.0..=1.0).contains(&s.meteor));
    }

    #[test]
    fn bleu_identity(words in sentence(12)) {
        let s = tokenize(&words.join(" "));
        prop_assert_eq!(bleu(&s, &s, &BleuConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_vocabularies_score_zero(a in sentence(6), b in sentence(6)) {
        let upper: Vec<String> = b.iter().map(|w| format!("{w}{w}")).collect();
        let s = score_pair(&a.join(" "), &upper.join(" "), &BleuConfig::default(), &MeteorConfig::default()).unwrap();
        prop_assert_eq!((s.bleu, s.meteor), (0.0, 0.0));
    }

    #[test]
    fn brevity_never_rewards_short_predictions(words in sentence(10), cut in 1usize..10) {
        let reference = tokenize(&words.join(" "));
        let cut = cut.min(words.len());
        let prefix = tokenize(&words[..cut].join(" "));
        let b = bleu(&prefix, &reference, &BleuConfig::default()).unwrap();
        prop_assert!(b <= cut as f64 / words.len() as f64 + 1e-12);
    }
}

#[test]
fn worked_examples() {
    let cfg = BleuConfig::default();
    let m = MeteorConfig::default();
    let short = bleu(&tokenize("the cat"), &tokenize("the cat sat on the mat"), &cfg).unwrap();
    assert!((short - 1.0 / 3.0).abs() < 1e-12);
    let s = tokenize("the cat sat");
    assert!((meteor(&s, &s, &m) - (1.0 - 0.5 / 27.0)).abs() < 1e-12);
    assert_eq!(meteor(&tokenize("cat the"), &tokenize("the cat"), &m), 0.5);
}

#[test]
fn case_and_punctuation_are_tokens() {
    let s = score_pair("The cat sat.", "the CAT sat .", &BleuConfig::default(), &MeteorConfig::default()).unwrap();
    assert_eq!(s.bleu, 1.0);
    assert_eq!((s.match_count, s.chunk_count), (4, 1));
}
