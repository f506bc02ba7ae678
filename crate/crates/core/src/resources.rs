//! Lexicon and normalization resources. A default set is compiled in; a
//! directory may override any subset of the files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::features::emoticon::EmoticonTable;
use crate::features::lexicon::{
    parse_pairs, CategoryLexicon, EmotionLexicon, PosTagger, SentimentLexicon,
};
use crate::preprocess::{EmojiMap, NormalizationRules};

pub const RESOURCES_ENV: &str = "AGGROLAB_RESOURCES";

pub const FILES: [&str; 9] = [
    "abbrev.tsv",
    "emoji.tsv",
    "emotion.csv",
    "empath.tsv",
    "sentiment.tsv",
    "negators.txt",
    "boosters.tsv",
    "emoticons.txt",
    "pos_lexicon.tsv",
];

fn bundled_text(file: &str) -> &'static str {
    match file {
        "abbrev.tsv" => include_str!("../resources/abbrev.tsv"),
        "emoji.tsv" => include_str!("../resources/emoji.tsv"),
        "emotion.csv" => include_str!("../resources/emotion.csv"),
        "empath.tsv" => include_str!("../resources/empath.tsv"),
        "sentiment.tsv" => include_str!("../resources/sentiment.tsv"),
        "negators.txt" => include_str!("../resources/negators.txt"),
        "boosters.tsv" => include_str!("../resources/boosters.tsv"),
        "emoticons.txt" => include_str!("../resources/emoticons.txt"),
        "pos_lexicon.tsv" => include_str!("../resources/pos_lexicon.tsv"),
        other => unreachable!("no bundled resource `{other}`"),
    }
}

#[derive(Clone, Debug)]
pub struct Resources {
    pub abbreviations: BTreeMap<String, String>,
    pub emoji: EmojiMap,
    pub emotion: EmotionLexicon,
    pub categories: CategoryLexicon,
    pub sentiment: SentimentLexicon,
    pub pos: PosTagger,
    pub emoticons: EmoticonTable,
}

impl Resources {
    pub fn bundled() -> Self {
        Self::load(|f| Ok(bundled_text(f).to_string())).expect("bundled resources are valid")
    }

    /// Reads each file from `dir` when present, otherwise uses the bundled copy.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(CoreError::invalid(
                "resources",
                format!("{} is not a directory", dir.display()),
            ));
        }
        Self::load(|f| {
            let path = dir.join(f);
            if path.exists() {
                fs::read_to_string(&path).map_err(|e| CoreError::io(path, e))
            } else {
                Ok(bundled_text(f).to_string())
            }
        })
    }

    /// `from_dir` on `dir`, else on `$AGGROLAB_RESOURCES`, else the bundled set.
    pub fn locate(dir: Option<&Path>) -> Result<Self> {
        match dir {
            Some(d) => Self::from_dir(d),
            None => match std::env::var_os(RESOURCES_ENV) {
                Some(d) if !d.is_empty() => Self::from_dir(Path::new(&d)),
                _ => Ok(Self::bundled()),
            },
        }
    }

    fn load(read: impl Fn(&str) -> Result<String>) -> Result<Self> {
        let abbrev_text = read("abbrev.tsv")?;
        let mut abbreviations = BTreeMap::new();
        for (_, k, v) in parse_pairs(&abbrev_text, "abbrev.tsv")? {
            let key: String = k.to_lowercase().chars().filter(|&c| c != '\'').collect();
            abbreviations.insert(key, v.to_lowercase());
        }
        if let Some((k, v)) = abbreviations
            .iter()
            .find(|(_, v)| v.split_whitespace().any(|w| abbreviations.contains_key(w)))
        {
            return Err(CoreError::Resource {
                file: "abbrev.tsv".into(),
                reason: format!("expansion `{v}` of `{k}` contains another key"),
            });
        }
        Ok(Resources {
            abbreviations,
            emoji: EmojiMap::parse_tsv(&read("emoji.tsv")?, "emoji.tsv")?,
            emotion: EmotionLexicon::parse_csv(&read("emotion.csv")?, "emotion.csv")?,
            categories: CategoryLexicon::parse_tsv(&read("empath.tsv")?, "empath.tsv")?,
            sentiment: SentimentLexicon::parse(
                &read("sentiment.tsv")?,
                &read("negators.txt")?,
                &read("boosters.tsv")?,
            )?,
            pos: PosTagger::parse_tsv(&read("pos_lexicon.tsv")?, "pos_lexicon.tsv")?,
            emoticons: EmoticonTable::new(parse_word_list_raw(&read("emoticons.txt")?)),
        })
    }

    pub fn rules(&self) -> NormalizationRules {
        NormalizationRules::new(self.abbreviations.clone(), self.emoji.clone())
    }
}

/// Emoticons are case-sensitive, so unlike other word lists they keep their case.
fn parse_word_list_raw(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim_end_matches('\r').trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}
