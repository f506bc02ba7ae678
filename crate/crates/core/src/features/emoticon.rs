//! ASCII emoticon detection and the per-class emoticon TF-IDF model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Emoticons tried longest first at every position of the text.
#[derive(Clone, Debug, Default)]
pub struct EmoticonTable {
    by_length: Vec<Vec<char>>,
}

impl EmoticonTable {
    pub fn new<S: AsRef<str>>(emoticons: impl IntoIterator<Item = S>) -> Self {
        let set: BTreeSet<String> = emoticons
            .into_iter()
            .map(|e| e.as_ref().trim().to_string())
            .filter(|e| !e.is_empty())
            .collect();
        let mut by_length: Vec<Vec<char>> = set.into_iter().map(|e| e.chars().collect()).collect();
        by_length.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        EmoticonTable { by_length }
    }

    pub fn len(&self) -> usize {
        self.by_length.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_length.is_empty()
    }

    /// Non-overlapping occurrences, scanning left to right. An emoticon that
    /// starts or ends with a letter or digit must not touch another one there,
    /// so `xD` is not found inside `xDD` or `boxD`.
    pub fn find_all(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut found = Vec::new();
        let mut i = 0;
        'scan: while i < chars.len() {
            for e in &self.by_length {
                let end = i + e.len();
                if end > chars.len() || chars[i..end] != e[..] {
                    continue;
                }
                let left_ok = !e[0].is_alphanumeric() || i == 0 || !chars[i - 1].is_alphanumeric();
                let right_ok = !e[e.len() - 1].is_alphanumeric()
                    || end == chars.len()
                    || !chars[end].is_alphanumeric();
                if left_ok && right_ok {
                    found.push(e.iter().collect());
                    i = end;
                    continue 'scan;
                }
            }
            i += 1;
        }
        found
    }
}

/// Per-class emoticon weights `tf(e, c) * idf(e)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmoticonTfidfModel {
    pub classes: usize,
    pub weights: BTreeMap<String, Vec<f64>>,
    pub fitted: bool,
}

impl EmoticonTfidfModel {
    /// `tf(e, c)` is the share of class `c`'s emoticon occurrences that are `e`;
    /// `idf(e) = ln((1 + K) / (1 + k_e)) + 1` where `k_e` counts classes containing `e`.
    pub fn fit<'a>(
        docs: impl IntoIterator<Item = (&'a str, Option<usize>, &'a str)>,
        classes: usize,
        table: &EmoticonTable,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(CoreError::invalid(
                "emoticon model",
                format!("{classes} classes"),
            ));
        }
        let mut counts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut totals = vec![0.0; classes];
        for (id, label, snapshot) in docs {
            let label = label.ok_or_else(|| CoreError::Unlabeled(id.to_string()))?;
            if label >= classes {
                return Err(CoreError::invalid(
                    "label",
                    format!("`{id}` has class {label} of {classes}"),
                ));
            }
            for e in table.find_all(snapshot) {
                counts.entry(e).or_insert_with(|| vec![0.0; classes])[label] += 1.0;
                totals[label] += 1.0;
            }
        }
        let k = classes as f64;
        let weights = counts
            .into_iter()
            .map(|(e, c)| {
                let k_e = c.iter().filter(|&&v| v > 0.0).count() as f64;
                let idf = ((1.0 + k) / (1.0 + k_e)).ln() + 1.0;
                let w = c
                    .iter()
                    .zip(&totals)
                    .map(|(&n, &t)| if t > 0.0 { n / t * idf } else { 0.0 })
                    .collect();
                (e, w)
            })
            .collect();
        Ok(EmoticonTfidfModel {
            classes,
            weights,
            fitted: true,
        })
    }

    /// Sum of class weights over every emoticon occurrence in `snapshot`.
    pub fn transform(&self, snapshot: &str, table: &EmoticonTable) -> Result<Vec<f64>> {
        if !self.fitted {
            return Err(CoreError::invalid(
                "emoticon model",
                "transform called before fit",
            ));
        }
        let mut out = vec![0.0; self.classes];
        for e in table.find_all(snapshot) {
            if let Some(w) = self.weights.get(&e) {
                for (o, v) in out.iter_mut().zip(w) {
                    *o += v;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmoticonTable {
        EmoticonTable::new([":)", ":-)", ":(", "xD", "<3", "</3", ":D"])
    }

    #[test]
    fn longest_match_and_boundaries() {
        let t = table();
        assert_eq!(t.find_all("ok :-) fine :)"), [":-)", ":)"]);
        assert_eq!(t.find_all("</3"), ["</3"]);
        assert_eq!(t.find_all("xD xDD boxD"), ["xD"]);
        assert_eq!(t.find_all("haha:D"), [":D"]);
        assert!(t.find_all("http://x.co").is_empty());
    }

    #[test]
    fn single_class_emoticon_weight() {
        let t = table();
        let docs = [
            ("a", Some(0), "so funny :)"),
            ("b", Some(1), "meh"),
            ("c", Some(2), "ok"),
        ];
        let m = EmoticonTfidfModel::fit(docs, 3, &t).unwrap();
        let w = &m.weights[":)"];
        let idf = (4.0f64 / 2.0).ln() + 1.0;
        assert!((w[0] - idf).abs() < 1e-12);
        assert_eq!(&w[1..], &[0.0, 0.0]);
        let v = m.transform("hi :) :)", &t).unwrap();
        assert!((v[0] - 2.0 * idf).abs() < 1e-12);
    }

    #[test]
    fn emoticon_in_every_class_has_unit_idf() {
        let t = table();
        let docs = [
            ("a", Some(0), ":("),
            ("b", Some(1), ":("),
            ("c", Some(2), ":( :)"),
        ];
        let m = EmoticonTfidfModel::fit(docs, 3, &t).unwrap();
        assert_eq!(m.weights[":("], vec![1.0, 1.0, 0.5]);
    }

    #[test]
    fn unfitted_and_unlabeled_are_errors() {
        let t = table();
        assert!(EmoticonTfidfModel::default().transform(":)", &t).is_err());
        assert!(matches!(
            EmoticonTfidfModel::fit([("z", None, ":)")], 3, &t),
            Err(CoreError::Unlabeled(id)) if id == "z"
        ));
    }

    #[test]
    fn no_emoticons_gives_empty_table_and_zeros() {
        let t = table();
        let m = EmoticonTfidfModel::fit([("a", Some(0), "plain"), ("b", Some(1), "text")], 3, &t)
            .unwrap();
        assert!(m.weights.is_empty());
        assert_eq!(m.transform("still plain :)", &t).unwrap(), vec![0.0; 3]);
    }
}
