//! Documents, labels, and corpus I/O.
//!
//! A corpus is a set of resume and job documents plus a set of binary
//! compatibility labels over (resume, job) pairs. Documents are ordered lists
//! of named text fields; [`flatten_document`] renders one into the single
//! text sequence that downstream embedding and lexical scoring consume.

pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

// ======================================================
// Documents
// ======================================================

/// Whether a document is a resume or a job post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Resume,
    Job,
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocKind::Resume => write!(f, "resume"),
            DocKind::Job => write!(f, "job"),
        }
    }
}

/// One resume or job post: an id plus an ordered list of named text fields.
///
/// Field order is significant and preserved through serialization; repeated
/// field names are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub kind: DocKind,
    pub fields: Vec<(String, String)>,
}

impl Document {
    pub fn new(id: impl Into<String>, kind: DocKind, fields: Vec<(String, String)>) -> Self {
        Document { id: id.into(), kind, fields }
    }
}

/// Render a document as a single text sequence.
///
/// Each field becomes a `## <name>` header line followed by the value and a
/// newline, concatenated in field order. Values are passed through verbatim,
/// including any internal whitespace. The mapping is injective on field lists
/// as long as no value contains a line that itself looks like a field header.
pub fn flatten_document(doc: &Document) -> String {
    let mut out = String::new();
    for (name, value) in &doc.fields {
        out.push_str("## ");
        out.push_str(name);
        out.push('\n');
        out.push_str(value);
        out.push('\n');
    }
    out
}

// ======================================================
// Labels
// ======================================================

/// Dataset split a labeled pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Valid => write!(f, "valid"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One labeled (resume, job) pair. `label` is 1 for accept, 0 for reject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub resume_id: String,
    pub job_id: String,
    pub label: u8,
    pub split: Split,
}

impl LabelEntry {
    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// All labeled pairs of a corpus, with lookup helpers.
///
/// Construction rejects non-binary labels and duplicate (resume, job) pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    entries: Vec<LabelEntry>,
}

impl LabelSet {
    /// Build a label set, validating label values and pair uniqueness.
    pub fn new(entries: Vec<LabelEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.label > 1 {
                return Err(Error::InvalidLabel {
                    resume_id: e.resume_id.clone(),
                    job_id: e.job_id.clone(),
                    label: i64::from(e.label),
                });
            }
            if !seen.insert((e.resume_id.clone(), e.job_id.clone())) {
                return Err(Error::DuplicateLabel {
                    resume_id: e.resume_id.clone(),
                    job_id: e.job_id.clone(),
                });
            }
        }
        Ok(LabelSet { entries })
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries restricted to one split.
    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &LabelEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// A new label set holding only one split's entries.
    pub fn restrict_to_split(&self, split: Split) -> LabelSet {
        LabelSet { entries: self.split_entries(split).cloned().collect() }
    }

    /// True if the pair is labeled positive in any split.
    pub fn is_positive_pair(&self, resume_id: &str, job_id: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.resume_id == resume_id && e.job_id == job_id && e.is_positive())
    }

    /// Job ids labeled positive for a resume, optionally restricted to a split.
    pub fn positive_jobs(&self, resume_id: &str, split: Option<Split>) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| {
                e.resume_id == resume_id
                    && e.is_positive()
                    && split.map_or(true, |s| e.split == s)
            })
            .map(|e| e.job_id.clone())
            .collect()
    }

    /// Resume ids labeled positive for a job, optionally restricted to a split.
    pub fn positive_resumes(&self, job_id: &str, split: Option<Split>) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| {
                e.job_id == job_id && e.is_positive() && split.map_or(true, |s| e.split == s)
            })
            .map(|e| e.resume_id.clone())
            .collect()
    }

    /// Job ids labeled negative (rejected) for a resume across all splits.
    pub fn rejected_jobs(&self, resume_id: &str) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| e.resume_id == resume_id && !e.is_positive())
            .map(|e| e.job_id.clone())
            .collect()
    }

    /// Resume ids labeled negative (rejected) for a job across all splits.
    pub fn rejected_resumes(&self, job_id: &str) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| e.job_id == job_id && !e.is_positive())
            .map(|e| e.resume_id.clone())
            .collect()
    }

    /// Positive (resume_id, job_id) pairs of one split, in entry order.
    pub fn positive_pairs(&self, split: Split) -> Vec<(String, String)> {
        self.split_entries(split)
            .filter(|e| e.is_positive())
            .map(|e| (e.resume_id.clone(), e.job_id.clone()))
            .collect()
    }

    /// Verify that every label references a document in `docs`.
    pub fn validate_against(&self, docs: &[Document]) -> Result<()> {
        let ids: BTreeSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
        for e in &self.entries {
            for id in [&e.resume_id, &e.job_id] {
                if !ids.contains(id.as_str()) {
                    return Err(Error::DanglingLabel {
                        resume_id: e.resume_id.clone(),
                        job_id: e.job_id.clone(),
                        missing: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

// ======================================================
// Attributes
// ======================================================

/// One demographic or categorical attribute value attached to a document.
/// The attribute map may cover only part of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub doc_id: String,
    pub attribute: String,
    pub value: String,
}

/// Load attribute records from a JSONL file.
pub fn load_attributes(path: &Path) -> Result<Vec<AttributeRecord>> {
    jsonl::read_jsonl(path)
}

/// Project attribute records onto one attribute name: doc id -> value.
pub fn attribute_map(records: &[AttributeRecord], attribute: &str) -> BTreeMap<String, String> {
    records
        .iter()
        .filter(|r| r.attribute == attribute)
        .map(|r| (r.doc_id.clone(), r.value.clone()))
        .collect()
}

// ======================================================
// Corpus I/O
// ======================================================

/// Load documents from a JSONL file, rejecting duplicate ids.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let docs: Vec<Document> = jsonl::read_jsonl(path)?;
    let mut seen = BTreeSet::new();
    for d in &docs {
        if !seen.insert(d.id.clone()) {
            return Err(Error::DuplicateDocId { id: d.id.clone() });
        }
    }
    Ok(docs)
}

/// Load labels from a JSONL file and validate them against `docs`.
pub fn load_labels(path: &Path, docs: &[Document]) -> Result<LabelSet> {
    let entries: Vec<LabelEntry> = jsonl::read_jsonl(path)?;
    let labels = LabelSet::new(entries)?;
    labels.validate_against(docs)?;
    Ok(labels)
}

/// Load a corpus from `documents.jsonl` and `labels.jsonl` paths.
pub fn load_corpus(docs_path: &Path, labels_path: &Path) -> Result<(Vec<Document>, LabelSet)> {
    let docs = load_documents(docs_path)?;
    let labels = load_labels(labels_path, &docs)?;
    Ok((docs, labels))
}

/// Write a corpus back to `documents.jsonl` and `labels.jsonl` paths.
/// Loading what was saved reproduces the inputs exactly.
pub fn save_corpus(
    docs_path: &Path,
    labels_path: &Path,
    docs: &[Document],
    labels: &LabelSet,
) -> Result<()> {
    jsonl::write_jsonl(docs_path, docs)?;
    jsonl::write_jsonl(labels_path, labels.entries())
}
