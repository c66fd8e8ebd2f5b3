//! Documents, distinct sentences, their occurrences and translations.
//!
//! Sentences are looked up through an MD5 index over their text and then
//! compared exactly, so hash collisions are harmless and sentences of any
//! length are indexable. Concurrent ingestion may insert the same sentence
//! twice; [`Repository::dedup_pass`] merges such rows afterwards (lowest id
//! wins).

mod memory;
mod sqlite;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::PlainText;
use crate::tokenizer::Tokenizer;

pub use memory::MemoryStore;
pub use sqlite::SqliteStore;

macro_rules! id_type {
    ($name:ident, $kind:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl $name {
            pub const KIND: &'static str = $kind;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                s.parse()
                    .map($name)
                    .map_err(|_| Error::Validation(format!("invalid {} id {s:?}", $kind)))
            }
        }
    };
}

id_type!(DocumentId, "document");
id_type!(SentenceId, "sentence");
id_type!(TranslationId, "translation");

/// 128-bit MD5 digest, rendered as 32 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Md5Hash(pub [u8; 16]);

impl Md5Hash {
    pub fn of(text: &str) -> Self {
        Md5Hash(Md5::digest(text.as_bytes()).into())
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(32);
        for b in self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

impl fmt::Display for Md5Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Md5Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Md5Hash({})", self.to_hex())
    }
}

impl FromStr for Md5Hash {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("invalid md5 hex {s:?}"));
        if s.len() != 32 || !s.is_ascii() {
            return Err(bad());
        }
        let mut out = [0u8; 16];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        Ok(Md5Hash(out))
    }
}

impl Serialize for Md5Hash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Md5Hash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// MD5 of the UTF-8 bytes of `text`, as lowercase hex.
pub fn compute_md5(text: &str) -> String {
    Md5Hash::of(text).to_hex()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Document {
    pub id: DocumentId,
    pub source_tag: String,
    pub name: String,
    pub mime_type: String,
    pub language_tag: String,
    pub content: PlainText,
    pub text_character_count: u64,
    pub byte_count: u64,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentSummary {
    pub id: DocumentId,
    pub source_tag: String,
    pub name: String,
    pub mime_type: String,
    pub language_tag: String,
    pub text_character_count: u64,
    pub byte_count: u64,
    pub sentence_count: u64,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentRef {
    pub id: DocumentId,
    pub source_tag: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sentence {
    pub id: SentenceId,
    pub plain_text: String,
    pub md5hash: Md5Hash,
    pub language_tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceSource {
    pub document_id: DocumentId,
    pub sentence_id: SentenceId,
    pub start_offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceTranslation {
    pub id: TranslationId,
    pub sentence_id: SentenceId,
    pub target_language: String,
    pub translated_text: String,
    pub contributor: String,
    pub votes: u64,
    pub created_at: DateTime<Utc>,
}

/// Input to ingestion: a document whose content is already normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct NewDocument {
    pub source_tag: String,
    pub name: String,
    pub mime_type: String,
    pub language_tag: String,
    pub content: PlainText,
}

impl NewDocument {
    pub fn new(
        source_tag: impl Into<String>,
        name: impl Into<String>,
        mime_type: impl Into<String>,
        language_tag: impl Into<String>,
        content: PlainText,
    ) -> Self {
        Self {
            source_tag: source_tag.into(),
            name: name.into(),
            mime_type: mime_type.into(),
            language_tag: language_tag.into(),
            content,
        }
    }

    /// Plain-text document in `en`.
    pub fn text(source_tag: impl Into<String>, name: impl Into<String>, content: &str) -> Self {
        Self::new(source_tag, name, crate::extraction::MIME_PLAIN, "en", PlainText::new(content))
    }
}

/// A tokenized sentence with its hash, computed before any store access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedSentence {
    pub text: String,
    pub md5hash: Md5Hash,
}

impl PreparedSentence {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let md5hash = Md5Hash::of(&text);
        Self { text, md5hash }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestStats {
    pub sentences: u64,
    pub new_distinct: u64,
    pub reused_distinct: u64,
}

impl std::ops::AddAssign for IngestStats {
    fn add_assign(&mut self, rhs: Self) {
        self.sentences += rhs.sentences;
        self.new_distinct += rhs.new_distinct;
        self.reused_distinct += rhs.reused_distinct;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentFilter {
    pub source_tag: Option<String>,
    pub name_substring: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceFilter {
    pub text_substring: Option<String>,
    pub language_tag: Option<String>,
    pub min_occurrences: Option<u64>,
}

pub const DEFAULT_PAGE_SIZE: u32 = 20;
pub const MAX_PAGE_SIZE: u32 = 1000;

/// Zero-based page request; results are ordered by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PageRequest {
    pub page: u32,
    pub page_size: u32,
}

impl Default for PageRequest {
    fn default() -> Self {
        Self {
            page: 0,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl PageRequest {
    pub fn new(page: u32, page_size: u32) -> Result<Self> {
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(Error::Validation(format!(
                "pageSize must be between 1 and {MAX_PAGE_SIZE}"
            )));
        }
        Ok(Self { page, page_size })
    }

    pub fn offset(&self) -> u64 {
        self.page as u64 * self.page_size as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: u32,
    pub page_size: u32,
    pub total: u64,
}

impl<T> Page<T> {
    fn from_all(all: Vec<T>, req: PageRequest) -> Self {
        let total = all.len() as u64;
        let items = all
            .into_iter()
            .skip(req.offset().min(usize::MAX as u64) as usize)
            .take(req.page_size as usize)
            .collect();
        Page {
            items,
            page: req.page,
            page_size: req.page_size,
            total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceSummary {
    #[serde(flatten)]
    pub sentence: Sentence,
    pub occurrence_count: u64,
}

/// One sentence of a document, in sequence order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentSentence {
    pub start_offset: u32,
    pub sentence_id: SentenceId,
    pub plain_text: String,
    pub occurrence_count: u64,
    pub document_count: u64,
    /// A few other documents containing the sentence.
    pub other_documents: Vec<DocumentRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentDetail {
    pub document: Document,
    pub sentences: Vec<DocumentSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceDetail {
    pub sentence: Sentence,
    pub occurrence_count: u64,
    pub documents: Vec<DocumentRef>,
    pub translations: Vec<SentenceTranslation>,
}

/// Maximum number of sample documents listed per sentence in a document view.
pub const SAMPLE_DOCUMENTS: usize = 5;

/// Which documents a statistic is computed over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", content = "value")]
pub enum Scope {
    All,
    Source(String),
    Documents(Vec<DocumentId>),
}

/// Occurrence counts of every sentence referenced within a scope.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeOccurrences {
    pub documents: u64,
    pub text_characters: u64,
    pub text_bytes: u64,
    pub counts: HashMap<SentenceId, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Ok,
    Violation,
}

/// One line of a consistency audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditRecord {
    pub check: String,
    pub status: AuditStatus,
    pub detail: String,
}

impl AuditRecord {
    pub fn ok(check: &str, detail: impl Into<String>) -> Self {
        Self {
            check: check.to_string(),
            status: AuditStatus::Ok,
            detail: detail.into(),
        }
    }

    pub fn violation(check: &str, detail: impl Into<String>) -> Self {
        Self {
            check: check.to_string(),
            status: AuditStatus::Violation,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub records: Vec<AuditRecord>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.records.iter().all(|r| r.status == AuditStatus::Ok)
    }

    pub fn violations(&self) -> impl Iterator<Item = &AuditRecord> {
        self.records.iter().filter(|r| r.status == AuditStatus::Violation)
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("audit record serializes") + "\n")
            .collect()
    }
}

/// Storage contract shared by the in-memory and SQLite stores.
///
/// Sentence ids are only canonical for a `(language, text)` pair after a
/// dedup pass; statistics assume a quiesced, deduplicated store.
pub trait Repository: Send + Sync {
    /// Stores one document and its sentence occurrences atomically.
    fn ingest_prepared(
        &self,
        doc: &NewDocument,
        sentences: &[PreparedSentence],
    ) -> Result<(DocumentId, IngestStats)>;

    /// Exact lookup among the sentences stored under `md5hash`; the lowest id
    /// wins when duplicates exist.
    fn find_sentence_hashed(
        &self,
        plain_text: &str,
        language_tag: &str,
        md5hash: &Md5Hash,
    ) -> Result<Option<Sentence>>;

    fn find_sentence(&self, plain_text: &str, language_tag: &str) -> Result<Option<Sentence>> {
        self.find_sentence_hashed(plain_text, language_tag, &Md5Hash::of(plain_text))
    }

    /// Merges sentence rows with equal `(language, text)`; returns the number
    /// of rows deleted. Must not run concurrently with ingestion of the same
    /// language.
    fn dedup_pass(&self, language_tag: Option<&str>) -> Result<u64>;

    fn list_documents(&self, filter: &DocumentFilter, page: PageRequest) -> Result<Page<DocumentSummary>>;
    fn get_document(&self, id: DocumentId) -> Result<DocumentDetail>;
    fn list_sentences(&self, filter: &SentenceFilter, page: PageRequest) -> Result<Page<SentenceSummary>>;
    fn get_sentence(&self, id: SentenceId) -> Result<SentenceDetail>;
    fn sentences_by_id(&self, ids: &[SentenceId]) -> Result<Vec<Sentence>>;

    /// Adds a translation, or endorses (votes + 1) an identical existing one.
    fn add_translation(
        &self,
        sentence: SentenceId,
        target_language: &str,
        text: &str,
        contributor: &str,
    ) -> Result<SentenceTranslation>;
    fn vote_translation(&self, id: TranslationId) -> Result<SentenceTranslation>;
    /// Translations of `sentence`, unordered, optionally for one language.
    fn translations(&self, sentence: SentenceId, target_language: Option<&str>) -> Result<Vec<SentenceTranslation>>;

    fn source_tags(&self) -> Result<Vec<String>>;
    /// Every document as `(id, source, name)`, by id.
    fn document_refs(&self) -> Result<Vec<DocumentRef>>;
    fn scope_occurrences(&self, scope: &Scope) -> Result<ScopeOccurrences>;

    /// Cached validity for the given rule-set version; missing entries are
    /// absent from the map.
    fn cached_validity(&self, ids: &[SentenceId], rule_set_version: &str) -> Result<HashMap<SentenceId, bool>>;
    fn store_validity(&self, entries: &[(SentenceId, bool)], rule_set_version: &str) -> Result<()>;

    fn audit(&self) -> Result<AuditReport>;

    /// Inserts a sentence row with a caller-supplied hash, bypassing lookup.
    /// For tests and repair tooling only.
    #[doc(hidden)]
    fn insert_sentence_raw(&self, plain_text: &str, language_tag: &str, md5hash: Md5Hash) -> Result<SentenceId>;

    /// Inserts a document whose occurrences point at existing sentence ids.
    #[doc(hidden)]
    fn insert_document_raw(&self, doc: &NewDocument, sentences: &[SentenceId]) -> Result<DocumentId>;
}

/// Tokenizes and hashes `doc`, then stores it.
pub fn ingest_document(
    repo: &dyn Repository,
    tokenizer: &Tokenizer,
    doc: &NewDocument,
) -> Result<(DocumentId, IngestStats)> {
    let sentences = prepare_sentences(tokenizer, &doc.content);
    repo.ingest_prepared(doc, &sentences)
}

pub fn prepare_sentences(tokenizer: &Tokenizer, content: &str) -> Vec<PreparedSentence> {
    tokenizer
        .split(content)
        .into_vec()
        .into_iter()
        .map(PreparedSentence::new)
        .collect()
}

/// Orders translation candidates best first: most votes, then newest.
pub fn rank_translations(candidates: &mut [SentenceTranslation]) {
    candidates.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(b.created_at.cmp(&a.created_at))
            .then(b.id.cmp(&a.id))
    });
}

fn validate_new_document(doc: &NewDocument) -> Result<()> {
    if doc.source_tag.trim().is_empty() {
        return Err(Error::Validation("sourceTag must not be empty".into()));
    }
    if doc.name.trim().is_empty() {
        return Err(Error::Validation("document name must not be empty".into()));
    }
    if doc.language_tag.trim().is_empty() {
        return Err(Error::Validation("language tag must not be empty".into()));
    }
    Ok(())
}

fn validate_translation_text(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::Validation("translated text must not be empty".into()));
    }
    Ok(())
}

pub(crate) fn push_check(report: &mut AuditReport, check: &str, checked: u64, violations: Vec<String>) {
    const MAX_LISTED: usize = 100;
    if violations.is_empty() {
        report.records.push(AuditRecord::ok(check, format!("{checked} checked")));
        return;
    }
    let extra = violations.len().saturating_sub(MAX_LISTED);
    for v in violations.into_iter().take(MAX_LISTED) {
        report.records.push(AuditRecord::violation(check, v));
    }
    if extra > 0 {
        report
            .records
            .push(AuditRecord::violation(check, format!("{extra} further violations not listed")));
    }
}

#[cfg(test)]
mod tests;
