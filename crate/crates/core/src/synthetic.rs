//! Keyword-separable three-class corpus for desk-scale training checks.

use aggrolab_numerics::{rng_stream, Rng};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::corpus::{Document, Source};

pub const OVERT: [&str; 8] = [
    "idiot", "stupid", "kill", "hate", "shut", "moron", "loser", "trash",
];
pub const COVERT: [&str; 8] = [
    "apparently",
    "genius",
    "clearly",
    "sure",
    "wow",
    "obviously",
    "pretend",
    "whatever",
];
pub const NEUTRAL: [&str; 8] = [
    "thanks", "great", "friend", "happy", "love", "welcome", "morning", "lovely",
];
pub const FILLER: [&str; 16] = [
    "the", "a", "this", "is", "was", "it", "people", "today", "post", "video", "news", "time",
    "we", "they", "about", "really",
];

/// Keywords of each class in schema order (OAG, CAG, NAG).
pub const KEYWORDS: [[&str; 8]; 3] = [OVERT, COVERT, NEUTRAL];

/// `per_class` documents for each of the three classes, interleaved by class.
/// Each has 6 to 12 tokens: two or three keywords of its class among filler.
pub fn keyword_corpus(per_class: usize, rng: &mut Rng, id_prefix: &str) -> Vec<Document> {
    let mut docs = Vec::with_capacity(3 * per_class);
    for i in 0..per_class {
        for (label, keywords) in KEYWORDS.iter().enumerate() {
            let len = rng.random_range(6..=12);
            let n_kw = rng.random_range(2..=3);
            let mut words: Vec<&str> = (0..n_kw)
                .map(|_| *keywords.choose(rng).expect("non-empty"))
                .collect();
            words.extend((n_kw..len).map(|_| *FILLER.choose(rng).expect("non-empty")));
            words.shuffle(rng);
            docs.push(Document {
                id: format!("{id_prefix}{}", 3 * i + label),
                raw_text: words.join(" "),
                label: Some(label),
                source: Source::Other,
            });
        }
    }
    docs
}

/// The 90-document training pool.
pub fn training_pool(seed: u64) -> Vec<Document> {
    keyword_corpus(30, &mut rng_stream(seed, &[0x5E_ED]), "syn_")
}

/// Held-out documents drawn from a different stream than [`training_pool`].
pub fn held_out(seed: u64, per_class: usize) -> Vec<Document> {
    keyword_corpus(per_class, &mut rng_stream(seed, &[0x4E1D]), "held_")
}
