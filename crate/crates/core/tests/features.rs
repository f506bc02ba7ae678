use aggrolab_core::corpus::{Document, Source};
use aggrolab_core::features::emoticon::EmoticonTfidfModel;
use aggrolab_core::features::{
    emotion_scores, extract_features, pos_frequencies, sentiment_scores, topic_signals,
    FeatureProfile,
};
use aggrolab_core::pipeline::{process, raw_features, FittedFeatures};
use aggrolab_core::preprocess::normalize;
use aggrolab_core::resources::Resources;
use proptest::prelude::*;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn labelled(id: &str, text: &str, label: usize) -> Document {
    Document {
        id: id.into(),
        raw_text: text.into(),
        label: Some(label),
        source: Source::Other,
    }
}

fn fitted_emoticons(res: &Resources) -> EmoticonTfidfModel {
    let docs = [
        ("a", Some(0), "you idiot :( :("),
        ("b", Some(1), "sure :) genius"),
        ("c", Some(2), "love it :) <3"),
    ];
    EmoticonTfidfModel::fit(docs, 3, &res.emoticons).unwrap()
}

#[test]
fn pos_frequencies_of_the_tagged_fixture() {
    let res = Resources::bundled();
    let f = pos_frequencies(
        &toks("angry man quickly kicked the ball and hit his dog"),
        &res.pos,
    );
    let want = [0.3, 0.1, 0.2, 0.1];
    for (g, w) in f.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{f:?}");
    }
}

#[test]
fn empty_document_features() {
    let res = Resources::bundled();
    let p = normalize("e", "", &res.rules());
    let v = extract_features(
        &p,
        &res,
        FeatureProfile::Trac,
        Some(&fitted_emoticons(&res)),
    )
    .unwrap();
    let names = FeatureProfile::Trac.names();
    for (name, value) in names.iter().zip(&v) {
        let want = if name == "sentiment_neu" { 1.0 } else { 0.0 };
        assert_eq!(*value, want, "{name}");
    }
}

#[test]
fn vector_lengths_match_the_profiles() {
    let res = Resources::bundled();
    let p = normalize("x", "You are SO stupid!!! :( go away", &res.rules());
    let trac = extract_features(
        &p,
        &res,
        FeatureProfile::Trac,
        Some(&fitted_emoticons(&res)),
    )
    .unwrap();
    assert_eq!(trac.len(), 24);
    let kaggle = extract_features(&p, &res, FeatureProfile::Kaggle, None).unwrap();
    assert_eq!(kaggle.len(), 20);
    assert_eq!(FeatureProfile::Trac.names().len(), 24);
    assert_eq!(FeatureProfile::Kaggle.names().len(), 20);
    let punct = FeatureProfile::Trac
        .names()
        .iter()
        .position(|n| n == "punctuation")
        .unwrap();
    assert_eq!(trac[punct], 3.0);
    let kaggle_names = FeatureProfile::Kaggle.names();
    let trac_only: Vec<_> = trac
        .iter()
        .zip(FeatureProfile::Trac.names())
        .filter(|(_, n)| kaggle_names.contains(n))
        .map(|(v, _)| *v)
        .collect();
    assert_eq!(trac_only, kaggle);
}

#[test]
fn trac_profile_needs_a_three_class_emoticon_model() {
    let res = Resources::bundled();
    let p = normalize("x", "hello :)", &res.rules());
    assert!(extract_features(&p, &res, FeatureProfile::Trac, None).is_err());
    let binary = EmoticonTfidfModel::fit(
        [("a", Some(0), ":)"), ("b", Some(1), ":(")],
        2,
        &res.emoticons,
    )
    .unwrap();
    assert!(extract_features(&p, &res, FeatureProfile::Trac, Some(&binary)).is_err());
    let docs = vec![labelled("a", "hi :)", 0), labelled("b", "bye :(", 1)];
    let processed = process(&docs, &res.rules());
    assert!(FittedFeatures::fit(&docs, &processed, &res, FeatureProfile::Trac, 2).is_err());
    assert!(FittedFeatures::fit(&docs, &processed, &res, FeatureProfile::Kaggle, 2).is_ok());
}

#[test]
fn emoticon_weights_reward_class_specific_emoticons() {
    let res = Resources::bundled();
    let m = fitted_emoticons(&res);
    let sad = m.transform(":(", &res.emoticons).unwrap();
    assert!(sad[0] > 0.0 && sad[1] == 0.0 && sad[2] == 0.0);
    let smile = m.transform(":)", &res.emoticons).unwrap();
    assert!(smile[0] == 0.0 && smile[1] > 0.0 && smile[2] > 0.0);
    assert_eq!(
        m.transform("no emoticons here", &res.emoticons).unwrap(),
        vec![0.0; 3]
    );
    assert!(EmoticonTfidfModel::default()
        .transform(":)", &res.emoticons)
        .is_err());
}

#[test]
fn fitted_features_are_standardized_on_the_training_documents() {
    let res = Resources::bundled();
    let docs = vec![
        labelled("a", "you stupid idiot!!! :(", 0),
        labelled("b", "oh sure, what a genius :)", 1),
        labelled("c", "thanks friend, lovely morning", 2),
        labelled("d", "I hate this trash", 0),
    ];
    let processed = process(&docs, &res.rules());
    let fitted = FittedFeatures::fit(&docs, &processed, &res, FeatureProfile::Trac, 3).unwrap();
    let scaled = fitted.transform(&processed, &res).unwrap();
    for j in 0..24 {
        let col: Vec<f64> = scaled.iter().map(|v| v[j]).collect();
        let mean = col.iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-9, "column {j} mean {mean}");
    }
    let raw = raw_features(
        &processed,
        &res,
        FeatureProfile::Trac,
        fitted.emoticons.as_ref(),
    )
    .unwrap();
    assert_eq!(raw.len(), 4);
}

#[test]
fn emotion_scores_average_known_words() {
    let res = Resources::bundled();
    assert_eq!(emotion_scores(&toks("qwzx plonk"), &res.emotion), [0.0; 7]);
    let s = emotion_scores(&toks("hate"), &res.emotion);
    assert!(s.iter().any(|&v| v > 0.0));
}

const WORDS: [&str; 14] = [
    "kill", "hate", "angry", "man", "good", "bad", "not", "very", "the", "fight", "love", "stupid",
    "quickly", "zzq",
];

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(WORDS.to_vec()).prop_map(String::from),
        0..15,
    )
}

proptest! {
    #[test]
    fn pos_and_topic_frequencies_lie_in_unit_interval(words in sentence()) {
        let res = Resources::bundled();
        let pos = pos_frequencies(&words, &res.pos);
        prop_assert!(pos.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(pos.iter().sum::<f64>() <= 1.0 + 1e-12);
        let topics = topic_signals(&words, &res.categories);
        prop_assert!(topics.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sentiment_is_a_distribution(words in sentence(), bang in any::<bool>()) {
        let res = Resources::bundled();
        let mut text = words.join(" ");
        if bang {
            text.push_str("!!");
        }
        let s = sentiment_scores(&text, &res.sentiment);
        prop_assert!(s.iter().all(|v| *v >= 0.0));
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn emoticon_features_add_over_concatenation(
        a in prop::collection::vec(prop::sample::select(vec![":)", ":(", "<3", "xD", "ok", "no"]), 0..6),
        b in prop::collection::vec(prop::sample::select(vec![":)", ":(", "<3", "xD", "ok", "no"]), 0..6),
    ) {
        let res = Resources::bundled();
        let m = fitted_emoticons(&res);
        let (ta, tb) = (a.join(" "), b.join(" "));
        let joined = format!("{ta} {tb}");
        let fa = m.transform(&ta, &res.emoticons).unwrap();
        let fb = m.transform(&tb, &res.emoticons).unwrap();
        let fj = m.transform(&joined, &res.emoticons).unwrap();
        for c in 0..3 {
            prop_assert!((fa[c] + fb[c] - fj[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_is_idempotent_on_its_tokens(text in "[A-Za-z!?.,:) ]{0,60}") {
        let rules = Resources::bundled().rules();
        let once = normalize("x", &text, &rules);
        let twice = normalize("x", &once.tokens.join(" "), &rules);
        prop_assert_eq!(once.tokens, twice.tokens);
    }

    #[test]
    fn snapshot_keeps_punctuation_that_tokens_drop(words in sentence()) {
        let rules = Resources::bundled().rules();
        let text = format!("{}?! :)", words.join(" "));
        let p = normalize("x", &text, &rules);
        prop_assert!(p.snapshot_text.contains("?!"));
        prop_assert!(p.tokens.iter().all(|t| !t.contains('!') && !t.contains('?')));
    }
}
