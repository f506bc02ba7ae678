//! Text normalization: translation hook, emoji descriptions, lowercasing,
//! abbreviation expansion, URL and punctuation removal, tokenization.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use regex::Regex;

use crate::error::{CoreError, Result};

pub const DEFAULT_MAX_LEN: usize = 200;
pub const DEFAULT_URL_PATTERN: &str = r"(?i)(?:https?://|www\.)\S+";

/// Text-to-text hook applied before anything else, e.g. a machine translator.
pub trait Translator: Send + Sync {
    fn translate(&self, text: &str) -> String;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, text: &str) -> String {
        text.to_string()
    }
}

/// Emoji codepoint sequences and their text descriptions, matched longest first.
#[derive(Clone, Debug, Default)]
pub struct EmojiMap {
    entries: HashMap<String, String>,
    max_chars: usize,
}

impl EmojiMap {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut map = EmojiMap::default();
        for (seq, desc) in entries {
            if seq.is_empty() {
                return Err(CoreError::invalid("emoji map", "empty codepoint sequence"));
            }
            if desc.chars().any(is_emoji_char) || desc.trim().is_empty() {
                return Err(CoreError::invalid(
                    "emoji map",
                    format!("bad description `{desc}`"),
                ));
            }
            map.max_chars = map.max_chars.max(seq.chars().count());
            map.entries.insert(seq, desc.trim().to_string());
        }
        Ok(map)
    }

    /// Parses `hex codepoints<TAB>description` lines, e.g. `2764 FE0F<TAB>red heart`.
    pub fn parse_tsv(text: &str, file: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| CoreError::Resource {
                file: file.to_string(),
                reason: format!("line {}: {reason}", i + 1),
            };
            let (codes, desc) = line
                .split_once('\t')
                .ok_or_else(|| bad("missing tab".into()))?;
            let seq = codes
                .split_whitespace()
                .map(|h| {
                    u32::from_str_radix(h.trim_start_matches("U+"), 16)
                        .ok()
                        .and_then(char::from_u32)
                        .ok_or_else(|| bad(format!("bad codepoint `{h}`")))
                })
                .collect::<Result<String>>()?;
            entries.push((seq, desc.to_string()));
        }
        EmojiMap::new(entries).map_err(|e| CoreError::Resource {
            file: file.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Pictographic ranges treated as emoji even when the map has no description for them.
pub fn is_emoji_char(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2B00..=0x2BFF
        | 0x2300..=0x23FF
        | 0xFE0F
        | 0x200D
        | 0x20E3
        | 0xE0020..=0xE007F)
}

#[derive(Clone)]
pub struct NormalizationRules {
    /// Lowercase keys without apostrophes.
    pub abbreviations: BTreeMap<String, String>,
    pub emoji: EmojiMap,
    pub url_pattern: Regex,
    pub translator: Arc<dyn Translator>,
    pub max_len: usize,
}

impl fmt::Debug for NormalizationRules {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalizationRules")
            .field("abbreviations", &self.abbreviations.len())
            .field("emoji", &self.emoji.len())
            .field("url_pattern", &self.url_pattern.as_str())
            .field("max_len", &self.max_len)
            .finish()
    }
}

impl NormalizationRules {
    pub fn new(abbreviations: BTreeMap<String, String>, emoji: EmojiMap) -> Self {
        NormalizationRules {
            abbreviations,
            emoji,
            url_pattern: Regex::new(DEFAULT_URL_PATTERN).expect("valid pattern"),
            translator: Arc::new(IdentityTranslator),
            max_len: DEFAULT_MAX_LEN,
        }
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn with_translator(mut self, translator: Arc<dyn Translator>) -> Self {
        self.translator = translator;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessedDocument {
    pub id: String,
    /// Translated text before any stripping; punctuation and emoticons intact.
    pub snapshot_text: String,
    pub tokens: Vec<String>,
    /// Token count before truncation.
    pub original_length: usize,
}

pub fn normalize(id: &str, raw: &str, rules: &NormalizationRules) -> ProcessedDocument {
    let translated = rules.translator.translate(raw);
    let described = emoji_to_description(&translated, &rules.emoji);
    let lowered = described.to_lowercase();
    let expanded = expand_abbreviations(&lowered, &rules.abbreviations, &rules.url_pattern);
    let no_urls = rules.url_pattern.replace_all(&expanded, " ");
    let stripped = strip_punctuation(&no_urls);
    let mut tokens = tokenize(&stripped);
    let original_length = tokens.len();
    tokens.truncate(rules.max_len);
    ProcessedDocument {
        id: id.to_string(),
        snapshot_text: translated,
        tokens,
        original_length,
    }
}

/// Splits on Unicode whitespace, dropping empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Replaces every mapped emoji sequence with its description and removes
/// unmapped emoji, keeping words separated by single spaces where needed.
pub fn emoji_to_description(text: &str, map: &EmojiMap) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    let mut i = 0;
    while i < chars.len() {
        let mut matched = None;
        for len in (1..=map.max_chars.min(chars.len() - i)).rev() {
            let seq: String = chars[i..i + len].iter().collect();
            if let Some(desc) = map.entries.get(&seq) {
                matched = Some((len, desc));
                break;
            }
        }
        if let Some((len, desc)) = matched {
            if out.chars().next_back().is_some_and(|c| !c.is_whitespace()) {
                out.push(' ');
            }
            out.push_str(desc);
            pending_space = true;
            i += len;
            continue;
        }
        let c = chars[i];
        i += 1;
        if is_emoji_char(c) {
            pending_space = true;
            continue;
        }
        if pending_space
            && !c.is_whitespace()
            && out.chars().next_back().is_some_and(|p| !p.is_whitespace())
        {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Expands maximal runs of letters, digits and apostrophes whose
/// apostrophe-free form is a key; whitespace-delimited URLs are left alone.
fn expand_abbreviations(text: &str, map: &BTreeMap<String, String>, url: &Regex) -> String {
    if map.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let ws_end = rest
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(rest.len());
        out.push_str(&rest[..ws_end]);
        rest = &rest[ws_end..];
        let tok_end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let token = &rest[..tok_end];
        rest = &rest[tok_end..];
        if url.is_match(token) {
            out.push_str(token);
            continue;
        }
        let mut t = token;
        while !t.is_empty() {
            let start = t.find(is_word_char).unwrap_or(t.len());
            out.push_str(&t[..start]);
            t = &t[start..];
            let end = t.find(|c: char| !is_word_char(c)).unwrap_or(t.len());
            let word = &t[..end];
            let key: String = word.chars().filter(|&c| c != '\'').collect();
            match map.get(&key) {
                Some(exp) => out.push_str(exp),
                None => out.push_str(word),
            }
            t = &t[end..];
        }
    }
    out
}

/// Deletes apostrophes and turns every other non-alphanumeric, non-space character into a space.
fn strip_punctuation(text: &str) -> String {
    text.chars()
        .filter(|&c| c != '\'' && c != '\u{2019}')
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect()
}
