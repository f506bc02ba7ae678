//! Handcrafted psycho-linguistic features: emotion, part of speech,
//! punctuation, sentiment, topic signals and per-class emoticon TF-IDF.

pub mod emoticon;
pub mod lexicon;
pub mod scaler;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::preprocess::ProcessedDocument;
use crate::resources::Resources;
use emoticon::EmoticonTfidfModel;
use lexicon::{
    CategoryLexicon, EmotionLexicon, PosTagger, SentimentLexicon, EMOTIONS, POS_GROUPS, TOPICS,
};

pub use emoticon::EmoticonTable;
pub use scaler::FeatureScaler;

/// Number of emoticon TF-IDF columns in the TRAC profile.
pub const TRAC_CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureProfile {
    /// All 24 features.
    Trac,
    /// 20 features: no punctuation count, no emoticon TF-IDF.
    Kaggle,
}

impl FeatureProfile {
    pub fn dim(self) -> usize {
        self.names().len()
    }

    /// Column names in extraction order.
    pub fn names(self) -> Vec<String> {
        let mut names: Vec<String> = EMOTIONS.iter().map(|e| format!("emotion_{e}")).collect();
        names.extend(POS_GROUPS.iter().map(|p| format!("pos_{p}")));
        if self == FeatureProfile::Trac {
            names.push("punctuation".into());
        }
        names.extend(["sentiment_pos", "sentiment_neg", "sentiment_neu"].map(String::from));
        names.extend(TOPICS.iter().map(|t| format!("topic_{t}")));
        if self == FeatureProfile::Trac {
            names.extend((0..TRAC_CLASSES).map(|c| format!("emoticon_tfidf_{c}")));
        }
        names
    }

    pub fn uses_emoticons(self) -> bool {
        self == FeatureProfile::Trac
    }
}

impl std::str::FromStr for FeatureProfile {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trac" => Ok(FeatureProfile::Trac),
            "kaggle" => Ok(FeatureProfile::Kaggle),
            other => Err(CoreError::invalid("profile", format!("`{other}`"))),
        }
    }
}

/// Mean lexicon row over the tokens the lexicon knows; zeros if it knows none.
pub fn emotion_scores(tokens: &[String], lexicon: &EmotionLexicon) -> [f64; 7] {
    let mut sum = [0.0; 7];
    let mut n = 0usize;
    for row in tokens.iter().filter_map(|t| lexicon.get(t)) {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
        n += 1;
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    sum
}

/// Shares of tokens tagged noun, adjective, verb and adverb.
pub fn pos_frequencies(tokens: &[String], tagger: &PosTagger) -> [f64; 4] {
    let mut counts = [0.0; 4];
    for t in tokens {
        if let Some(g) = PosTagger::group(tagger.tag(t)) {
            counts[g] += 1.0;
        }
    }
    if !tokens.is_empty() {
        for c in &mut counts {
            *c /= tokens.len() as f64;
        }
    }
    counts
}

/// Occurrences of `!` and `?`.
pub fn punctuation_count(snapshot: &str) -> f64 {
    snapshot.chars().filter(|&c| c == '!' || c == '?').count() as f64
}

fn sentiment_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|&c| c != '\'' && c != '\u{2019}')
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

const BOOSTER_DECAY: [f64; 3] = [1.0, 0.95, 0.9];

/// `(pos, neg, neu)` shares. Each scored word's valence is pushed away from
/// zero by boosters among the three preceding tokens (nearest counts most)
/// and flipped by a negator among them; `neu` counts words of zero valence.
pub fn sentiment_scores(snapshot: &str, lexicon: &SentimentLexicon) -> [f64; 3] {
    let tokens = sentiment_tokens(snapshot);
    let (mut pos, mut neg, mut neu) = (0.0, 0.0, 0.0);
    for (i, tok) in tokens.iter().enumerate() {
        if lexicon.negators.contains(tok) || lexicon.boosters.contains_key(tok) {
            continue;
        }
        let v = lexicon.valence.get(tok).copied().unwrap_or(0.0);
        if v == 0.0 {
            neu += 1.0;
            continue;
        }
        let window = &tokens[i.saturating_sub(3)..i];
        let mut s = v;
        let mut negated = false;
        for (d, prev) in window.iter().rev().enumerate() {
            if let Some(b) = lexicon.boosters.get(prev) {
                s += v.signum() * b * BOOSTER_DECAY[d];
            }
            negated |= lexicon.negators.contains(prev);
        }
        if negated {
            s = -s;
        }
        if s > 0.0 {
            pos += s;
        } else if s < 0.0 {
            neg -= s;
        } else {
            neu += 1.0;
        }
    }
    let total = pos + neg + neu;
    if total == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    [pos / total, neg / total, neu / total]
}

/// Per category, the share of tokens in its word set.
pub fn topic_signals(tokens: &[String], lexicon: &CategoryLexicon) -> [f64; 6] {
    let mut out = [0.0; 6];
    if tokens.is_empty() {
        return out;
    }
    for (o, (_, words)) in out.iter_mut().zip(lexicon.categories()) {
        *o = tokens.iter().filter(|t| words.contains(*t)).count() as f64 / tokens.len() as f64;
    }
    out
}

/// Unscaled feature vector in [`FeatureProfile::names`] order.
pub fn extract_features(
    doc: &ProcessedDocument,
    resources: &Resources,
    profile: FeatureProfile,
    emoticons: Option<&EmoticonTfidfModel>,
) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(profile.dim());
    v.extend(emotion_scores(&doc.tokens, &resources.emotion));
    v.extend(pos_frequencies(&doc.tokens, &resources.pos));
    if profile == FeatureProfile::Trac {
        v.push(punctuation_count(&doc.snapshot_text));
    }
    v.extend(sentiment_scores(&doc.snapshot_text, &resources.sentiment));
    v.extend(topic_signals(&doc.tokens, &resources.categories));
    if profile.uses_emoticons() {
        let model = emoticons.ok_or_else(|| {
            CoreError::invalid("features", "trac profile needs a fitted emoticon model")
        })?;
        if model.classes != TRAC_CLASSES {
            return Err(CoreError::invalid(
                "features",
                format!(
                    "trac profile needs {TRAC_CLASSES} emoticon classes, model has {}",
                    model.classes
                ),
            ));
        }
        v.extend(model.transform(&doc.snapshot_text, &resources.emoticons)?);
    }
    debug_assert_eq!(v.len(), profile.dim());
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(CoreError::invalid(
            "features",
            format!("non-finite value in column {j}"),
        ));
    }
    Ok(v)
}
