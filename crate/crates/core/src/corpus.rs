//! Labeled datasets: TRAC-style CSV, Kaggle-style JSON lines, and the
//! canonical `id,text,label,source` CSV every loader converts into.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use aggrolab_numerics::rng_stream;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Ordered class names. The order fixes the class indices used everywhere.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    names: Vec<String>,
}

impl LabelSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if !(2..=3).contains(&names.len()) {
            return Err(CoreError::invalid(
                "label schema",
                format!("{} classes, expected 2 or 3", names.len()),
            ));
        }
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(CoreError::invalid("label schema", "duplicate class name"));
        }
        Ok(LabelSchema { names })
    }

    /// OAG, CAG, NAG.
    pub fn trac() -> Self {
        LabelSchema::new(["OAG", "CAG", "NAG"]).expect("valid schema")
    }

    /// NAG, AGG.
    pub fn kaggle() -> Self {
        LabelSchema::new(["NAG", "AGG"]).expect("valid schema")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Facebook,
    Twitter,
    Other,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Facebook => "facebook",
            Source::Twitter => "twitter",
            Source::Other => "other",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "facebook" | "fb" => Some(Source::Facebook),
            "twitter" | "tw" => Some(Source::Twitter),
            "other" | "" => Some(Source::Other),
            _ => None,
        }
    }

    /// TRAC ids carry the platform as a prefix, e.g. `facebook_corpus_msr_1723796`.
    fn from_id(id: &str) -> Self {
        let id = id.to_ascii_lowercase();
        if id.starts_with("facebook") || id.starts_with("fb") {
            Source::Facebook
        } else if id.starts_with("twitter") || id.starts_with("tw") {
            Source::Twitter
        } else {
            Source::Other
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub label: Option<usize>,
    pub source: Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocFormat {
    TracCsv,
    KaggleJsonl,
    CanonicalCsv,
}

impl std::str::FromStr for DocFormat {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trac_csv" => Ok(DocFormat::TracCsv),
            "kaggle_jsonl" => Ok(DocFormat::KaggleJsonl),
            "canonical_csv" => Ok(DocFormat::CanonicalCsv),
            other => Err(CoreError::invalid("format", format!("`{other}`"))),
        }
    }
}

pub fn load_documents(
    path: &Path,
    format: DocFormat,
    schema: &LabelSchema,
) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let docs = read_documents(file, path, format, schema)?;
    if docs.is_empty() {
        log::warn!("{}: no documents", path.display());
    }
    Ok(docs)
}

/// Parses documents from any reader; `path` is only used in error messages.
pub fn read_documents(
    reader: impl Read,
    path: &Path,
    format: DocFormat,
    schema: &LabelSchema,
) -> Result<Vec<Document>> {
    match format {
        DocFormat::TracCsv => read_trac(reader, path, schema),
        DocFormat::KaggleJsonl => read_kaggle(reader, path, schema),
        DocFormat::CanonicalCsv => read_canonical(reader, path, schema),
    }
}

fn malformed(path: &Path, row: usize, reason: impl Into<String>) -> CoreError {
    CoreError::MalformedRow {
        path: path.to_path_buf(),
        row,
        reason: reason.into(),
    }
}

fn checked_text(path: &Path, row: usize, text: &str) -> Result<String> {
    if text.trim().is_empty() {
        return Err(malformed(path, row, "empty text"));
    }
    Ok(text.to_string())
}

fn parse_label(
    path: &Path,
    row: usize,
    label: &str,
    schema: &LabelSchema,
) -> Result<Option<usize>> {
    let label = label.trim();
    if label.is_empty() {
        return Ok(None);
    }
    schema
        .index_of(label)
        .map(Some)
        .ok_or_else(|| CoreError::UnknownLabel {
            path: path.to_path_buf(),
            row,
            label: label.to_string(),
        })
}

fn csv_reader(reader: impl Read, has_headers: bool) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .from_reader(reader)
}

fn csv_row_error(path: &Path, row: usize, e: csv::Error) -> CoreError {
    malformed(path, row, e.to_string())
}

/// Headerless `id,text[,label]` rows.
fn read_trac(reader: impl Read, path: &Path, schema: &LabelSchema) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, rec) in csv_reader(reader, false).records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_row_error(path, row, e))?;
        if !(2..=3).contains(&rec.len()) {
            return Err(malformed(
                path,
                row,
                format!("{} columns, expected 2 or 3", rec.len()),
            ));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(malformed(path, row, "empty id"));
        }
        docs.push(Document {
            source: Source::from_id(&id),
            raw_text: checked_text(path, row, &rec[1])?,
            label: match rec.get(2) {
                Some(l) => parse_label(path, row, l, schema)?,
                None => None,
            },
            id,
        });
    }
    Ok(docs)
}

#[derive(Deserialize)]
struct KaggleRecord {
    content: String,
    annotation: Option<KaggleAnnotation>,
}

#[derive(Deserialize)]
struct KaggleAnnotation {
    label: Vec<String>,
}

/// One `{"content": .., "annotation": {"label": ["0" | "1"]}}` object per line; "1" is AGG.
fn read_kaggle(reader: impl Read, path: &Path, schema: &LabelSchema) -> Result<Vec<Document>> {
    if schema.k() != 2 {
        return Err(CoreError::SchemaMismatch(format!(
            "kaggle_jsonl needs a 2-class schema, got {:?}",
            schema.names()
        )));
    }
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: KaggleRecord =
            serde_json::from_str(&line).map_err(|e| malformed(path, row, e.to_string()))?;
        let label = match rec.annotation.as_ref().and_then(|a| a.label.first()) {
            None => None,
            Some(l) => Some(match l.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(CoreError::UnknownLabel {
                        path: path.to_path_buf(),
                        row,
                        label: other.to_string(),
                    })
                }
            }),
        };
        docs.push(Document {
            id: format!("kaggle_{row}"),
            raw_text: checked_text(path, row, &rec.content)?,
            label,
            source: Source::Twitter,
        });
    }
    Ok(docs)
}

pub const CANONICAL_HEADER: [&str; 4] = ["id", "text", "label", "source"];

fn read_canonical(reader: impl Read, path: &Path, schema: &LabelSchema) -> Result<Vec<Document>> {
    let mut rdr = csv_reader(reader, true);
    let header = rdr
        .headers()
        .map_err(|e| csv_row_error(path, 0, e))?
        .clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header.iter().collect::<Vec<_>>() != CANONICAL_HEADER {
        return Err(malformed(
            path,
            0,
            format!("header must be `{}`", CANONICAL_HEADER.join(",")),
        ));
    }
    let mut docs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_row_error(path, row, e))?;
        if rec.len() != 4 {
            return Err(malformed(
                path,
                row,
                format!("{} columns, expected 4", rec.len()),
            ));
        }
        docs.push(Document {
            id: rec[0].to_string(),
            raw_text: checked_text(path, row, &rec[1])?,
            label: parse_label(path, row, &rec[2], schema)?,
            source: Source::parse(&rec[3])
                .ok_or_else(|| malformed(path, row, format!("unknown source `{}`", &rec[3])))?,
        });
    }
    Ok(docs)
}

pub fn write_canonical(path: &Path, docs: &[Document], schema: &LabelSchema) -> Result<()> {
    let file = File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| CoreError::io(PathBuf::from(path), e.into());
    w.write_record(CANONICAL_HEADER).map_err(io)?;
    for d in docs {
        let label = d.label.map(|l| schema.name(l)).unwrap_or("");
        w.write_record([d.id.as_str(), d.raw_text.as_str(), label, d.source.as_str()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Document>,
    pub validation: Vec<Document>,
    pub test: Vec<Document>,
    pub seed: u64,
}

/// Shuffles `pool` under `seed` and holds out `round(fraction * n)` documents
/// (at least one, leaving at least one for training) as validation.
pub fn make_split(
    pool: Vec<Document>,
    validation_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(CoreError::invalid(
            "validation fraction",
            format!("{validation_fraction} not in (0, 1)"),
        ));
    }
    if pool.len() < 2 {
        return Err(CoreError::invalid(
            "split",
            format!("pool of {} documents, need at least 2", pool.len()),
        ));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = pool.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err(CoreError::invalid(
            "split",
            format!("duplicate document id `{}`", dup.id),
        ));
    }
    let n = pool.len();
    let n_val = ((validation_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut pool = pool;
    pool.shuffle(&mut rng_stream(seed, &[0x5_9117]));
    let train = pool.split_off(n_val);
    Ok(DatasetSplit {
        train,
        validation: pool,
        test: Vec::new(),
        seed,
    })
}

pub fn class_distribution(docs: &[Document], schema: &LabelSchema) -> Result<Vec<usize>> {
    let mut counts = vec![0; schema.k()];
    for d in docs {
        let label = d.label.ok_or_else(|| CoreError::Unlabeled(d.id.clone()))?;
        if label >= schema.k() {
            return Err(CoreError::invalid(
                "label",
                format!("`{}` has class {label} of {}", d.id, schema.k()),
            ));
        }
        counts[label] += 1;
    }
    Ok(counts)
}

/// Labels of `docs`, failing on the first unlabeled one.
pub fn gold_labels(docs: &[Document]) -> Result<Vec<usize>> {
    docs.iter()
        .map(|d| d.label.ok_or_else(|| CoreError::Unlabeled(d.id.clone())))
        .collect()
}
