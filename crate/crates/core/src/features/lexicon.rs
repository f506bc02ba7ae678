//! Word-level lexicons: emotion distributions, topic categories, sentiment
//! valences, and the part-of-speech tagger.

use std::collections::{HashMap, HashSet};

use crate::error::{CoreError, Result};

pub const EMOTIONS: [&str; 7] = [
    "disgust", "surprise", "neutral", "anger", "sad", "happy", "fear",
];
pub const TOPICS: [&str; 6] = [
    "violence",
    "hate",
    "anger",
    "aggression",
    "social_media",
    "dispute",
];
pub const POS_GROUPS: [&str; 4] = ["noun", "adjective", "verb", "adverb"];

fn resource_error(file: &str, line: usize, reason: impl Into<String>) -> CoreError {
    CoreError::Resource {
        file: file.to_string(),
        reason: format!("line {line}: {}", reason.into()),
    }
}

/// Non-empty, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// `key<TAB>value` lines.
pub fn parse_pairs<'a>(text: &'a str, file: &str) -> Result<Vec<(usize, &'a str, &'a str)>> {
    content_lines(text)
        .map(|(n, l)| {
            let (k, v) = l
                .split_once('\t')
                .ok_or_else(|| resource_error(file, n, "missing tab"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(resource_error(file, n, "empty key"));
            }
            Ok((n, k, v.trim()))
        })
        .collect()
}

pub fn parse_word_list(text: &str) -> Vec<String> {
    content_lines(text)
        .map(|(_, l)| l.trim().to_lowercase())
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct EmotionLexicon {
    rows: HashMap<String, [f64; 7]>,
}

impl EmotionLexicon {
    pub fn new(rows: HashMap<String, [f64; 7]>) -> Self {
        EmotionLexicon { rows }
    }

    /// CSV with header `word,disgust,surprise,neutral,anger,sad,happy,fear`.
    pub fn parse_csv(text: &str, file: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (_, header) = lines
            .next()
            .ok_or_else(|| resource_error(file, 1, "missing header"))?;
        let expected = std::iter::once("word")
            .chain(EMOTIONS)
            .collect::<Vec<_>>()
            .join(",");
        if header.replace(' ', "") != expected {
            return Err(resource_error(
                file,
                1,
                format!("header must be `{expected}`"),
            ));
        }
        let mut rows = HashMap::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 8 {
                return Err(resource_error(
                    file,
                    n,
                    format!("{} fields, expected 8", fields.len()),
                ));
            }
            let mut row = [0.0; 7];
            for (slot, f) in row.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| resource_error(file, n, format!("bad score `{f}`")))?;
            }
            rows.insert(fields[0].to_lowercase(), row);
        }
        Ok(EmotionLexicon { rows })
    }

    pub fn get(&self, word: &str) -> Option<&[f64; 7]> {
        self.rows.get(word)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CategoryLexicon {
    categories: Vec<(String, HashSet<String>)>,
}

impl CategoryLexicon {
    /// `category<TAB>word1,word2,...`; every category of [`TOPICS`] must be present.
    pub fn parse_tsv(text: &str, file: &str) -> Result<Self> {
        let mut found: HashMap<String, HashSet<String>> = HashMap::new();
        for (n, cat, words) in parse_pairs(text, file)? {
            if !TOPICS.contains(&cat) {
                return Err(resource_error(file, n, format!("unknown category `{cat}`")));
            }
            let set = found.entry(cat.to_string()).or_default();
            set.extend(
                words
                    .split(',')
                    .map(|w| w.trim().to_lowercase())
                    .filter(|w| !w.is_empty()),
            );
        }
        let categories = TOPICS
            .iter()
            .map(|&c| {
                found
                    .remove(c)
                    .map(|s| (c.to_string(), s))
                    .ok_or_else(|| CoreError::Resource {
                        file: file.to_string(),
                        reason: format!("missing category `{c}`"),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(CategoryLexicon { categories })
    }

    /// Categories in [`TOPICS`] order.
    pub fn categories(&self) -> &[(String, HashSet<String>)] {
        &self.categories
    }
}

#[derive(Clone, Debug, Default)]
pub struct SentimentLexicon {
    pub valence: HashMap<String, f64>,
    pub negators: HashSet<String>,
    pub boosters: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn parse(valence: &str, negators: &str, boosters: &str) -> Result<Self> {
        let num = |file: &str, n: usize, v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| resource_error(file, n, format!("bad number `{v}`")))
        };
        let mut lex = SentimentLexicon::default();
        for (n, w, v) in parse_pairs(valence, "sentiment.tsv")? {
            let x = num("sentiment.tsv", n, v)?;
            if !(-4.0..=4.0).contains(&x) {
                return Err(resource_error(
                    "sentiment.tsv",
                    n,
                    format!("valence {x} outside [-4, 4]"),
                ));
            }
            lex.valence.insert(w.to_lowercase(), x);
        }
        lex.negators = parse_word_list(negators).into_iter().collect();
        for (n, w, v) in parse_pairs(boosters, "boosters.tsv")? {
            lex.boosters
                .insert(w.to_lowercase(), num("boosters.tsv", n, v)?);
        }
        if let Some(w) = lex.negators.iter().find(|w| lex.boosters.contains_key(*w)) {
            return Err(CoreError::Resource {
                file: "boosters.tsv".into(),
                reason: format!("`{w}` is also a negator"),
            });
        }
        Ok(lex)
    }
}

/// Deterministic part-of-speech tagger: closed-class lexicon, then suffix
/// rules, then noun. Emits Penn Treebank tags.
#[derive(Clone, Debug, Default)]
pub struct PosTagger {
    lexicon: HashMap<String, String>,
}

const SUFFIX_RULES: [(&str, &str); 12] = [
    ("ly", "RB"),
    ("ing", "VBG"),
    ("ed", "VBD"),
    ("ous", "JJ"),
    ("ful", "JJ"),
    ("ive", "JJ"),
    ("able", "JJ"),
    ("ible", "JJ"),
    ("less", "JJ"),
    ("ish", "JJ"),
    ("ize", "VB"),
    ("ise", "VB"),
];

impl PosTagger {
    pub fn parse_tsv(text: &str, file: &str) -> Result<Self> {
        let mut lexicon = HashMap::new();
        for (n, w, tag) in parse_pairs(text, file)? {
            if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_uppercase() || c == '$') {
                return Err(resource_error(file, n, format!("bad tag `{tag}`")));
            }
            if let Some(prev) = lexicon.insert(w.to_lowercase(), tag.to_string()) {
                if prev != tag {
                    return Err(resource_error(
                        file,
                        n,
                        format!("`{w}` tagged both {prev} and {tag}"),
                    ));
                }
            }
        }
        Ok(PosTagger { lexicon })
    }

    pub fn tag(&self, word: &str) -> &str {
        if let Some(t) = self.lexicon.get(word) {
            return t;
        }
        if word.chars().all(|c| c.is_numeric()) {
            return "CD";
        }
        let len = word.chars().count();
        for (suffix, tag) in SUFFIX_RULES {
            if word.ends_with(suffix) && len >= suffix.len() + 3 {
                return tag;
            }
        }
        "NN"
    }

    /// Index into [`POS_GROUPS`] for a Penn tag, if it belongs to one.
    pub fn group(tag: &str) -> Option<usize> {
        if tag.starts_with("NN") {
            Some(0)
        } else if tag.starts_with("JJ") {
            Some(1)
        } else if tag.starts_with("VB") {
            Some(2)
        } else if tag.starts_with("RB") {
            Some(3)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagger_rules() {
        let t = PosTagger::parse_tsv("the\tDT\nfamily\tNN\n", "pos.tsv").unwrap();
        assert_eq!(t.tag("the"), "DT");
        assert_eq!(t.tag("family"), "NN");
        assert_eq!(t.tag("quickly"), "RB");
        assert_eq!(t.tag("running"), "VBG");
        assert_eq!(t.tag("kicked"), "VBD");
        assert_eq!(t.tag("famous"), "JJ");
        assert_eq!(t.tag("red"), "NN");
        assert_eq!(t.tag("2019"), "CD");
        assert_eq!(PosTagger::group("NNS"), Some(0));
        assert_eq!(PosTagger::group("PRP$"), None);
        assert!(PosTagger::parse_tsv("a\tDT\na\tNN\n", "pos.tsv").is_err());
    }

    #[test]
    fn category_file_needs_all_topics() {
        assert!(CategoryLexicon::parse_tsv("violence\tkill\n", "empath.tsv").is_err());
        let full: String = TOPICS.iter().map(|t| format!("{t}\tw_{t}\n")).collect();
        let lex = CategoryLexicon::parse_tsv(&full, "empath.tsv").unwrap();
        assert_eq!(lex.categories().len(), 6);
        assert!(
            CategoryLexicon::parse_tsv(&format!("{full}sports\tball\n"), "empath.tsv").is_err()
        );
    }

    #[test]
    fn emotion_csv_validation() {
        let ok = "word,disgust,surprise,neutral,anger,sad,happy,fear\nrage,0,0,0,1,0,0,0\n";
        assert_eq!(EmotionLexicon::parse_csv(ok, "e.csv").unwrap().len(), 1);
        assert!(EmotionLexicon::parse_csv("word,a\nx,1\n", "e.csv").is_err());
        let neg = "word,disgust,surprise,neutral,anger,sad,happy,fear\nrage,0,0,0,-1,0,0,0\n";
        assert!(EmotionLexicon::parse_csv(neg, "e.csv").is_err());
    }

    #[test]
    fn sentiment_rejects_overlap_and_range() {
        assert!(SentimentLexicon::parse("good\t1.9\n", "not\n", "not\t0.3\n").is_err());
        assert!(SentimentLexicon::parse("good\t9\n", "", "").is_err());
        let lex = SentimentLexicon::parse("good\t1.9\n", "not\n", "very\t0.293\n").unwrap();
        assert_eq!(lex.valence["good"], 1.9);
    }
}
