use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::Utc;
use parking_lot::RwLock;

use super::*;

/// Process-local store.
///
/// Ingestion resolves sentences under a shared read lock and commits under
/// the write lock without re-checking, so two documents ingested at the same
/// time can both insert a new sentence. [`Repository::dedup_pass`] merges them.
#[derive(Debug, Default)]
pub struct MemoryStore {
    inner: RwLock<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    next_document: u64,
    next_sentence: u64,
    next_translation: u64,
    documents: BTreeMap<DocumentId, Document>,
    document_keys: HashMap<(String, String), DocumentId>,
    /// Sentence ids of each document in sequence order.
    document_sentences: HashMap<DocumentId, Vec<SentenceId>>,
    sentences: BTreeMap<SentenceId, Sentence>,
    hash_index: HashMap<Md5Hash, Vec<SentenceId>>,
    /// One entry per occurrence.
    occurrences: HashMap<SentenceId, Vec<DocumentId>>,
    translations: BTreeMap<TranslationId, SentenceTranslation>,
    sentence_translations: HashMap<SentenceId, Vec<TranslationId>>,
    validity: HashMap<SentenceId, (String, bool)>,
}

enum Resolved {
    Existing(SentenceId),
    /// Index into the list of sentences this document inserts.
    New(usize),
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Inner {
    fn lookup(&self, text: &str, language: &str, hash: &Md5Hash) -> Option<SentenceId> {
        self.hash_index.get(hash)?.iter().copied().find(|id| {
            let s = &self.sentences[id];
            s.language_tag == language && s.plain_text == text
        })
    }

    fn insert_sentence(&mut self, text: &str, language: &str, hash: Md5Hash) -> SentenceId {
        self.next_sentence += 1;
        let id = SentenceId(self.next_sentence);
        self.sentences.insert(
            id,
            Sentence {
                id,
                plain_text: text.to_string(),
                md5hash: hash,
                language_tag: language.to_string(),
            },
        );
        // Buckets stay sorted because ids only grow.
        self.hash_index.entry(hash).or_default().push(id);
        id
    }

    fn insert_document(&mut self, doc: &NewDocument, sentence_ids: Vec<SentenceId>) -> DocumentId {
        self.next_document += 1;
        let id = DocumentId(self.next_document);
        self.documents.insert(
            id,
            Document {
                id,
                source_tag: doc.source_tag.clone(),
                name: doc.name.clone(),
                mime_type: doc.mime_type.clone(),
                language_tag: doc.language_tag.clone(),
                content: doc.content.clone(),
                text_character_count: doc.content.char_count(),
                byte_count: doc.content.len() as u64,
                created_at: Utc::now(),
            },
        );
        self.document_keys
            .insert((doc.source_tag.clone(), doc.name.clone()), id);
        for sid in &sentence_ids {
            self.occurrences.entry(*sid).or_default().push(id);
        }
        self.document_sentences.insert(id, sentence_ids);
        id
    }

    fn check_new_key(&self, doc: &NewDocument) -> Result<()> {
        if self
            .document_keys
            .contains_key(&(doc.source_tag.clone(), doc.name.clone()))
        {
            return Err(Error::AlreadyIngested {
                source_tag: doc.source_tag.clone(),
                name: doc.name.clone(),
            });
        }
        Ok(())
    }

    fn document_ref(&self, id: DocumentId) -> DocumentRef {
        let d = &self.documents[&id];
        DocumentRef {
            id,
            source_tag: d.source_tag.clone(),
            name: d.name.clone(),
        }
    }

    fn distinct_documents(&self, sentence: SentenceId) -> BTreeSet<DocumentId> {
        self.occurrences
            .get(&sentence)
            .map(|docs| docs.iter().copied().collect())
            .unwrap_or_default()
    }

    fn occurrence_count(&self, sentence: SentenceId) -> u64 {
        self.occurrences.get(&sentence).map_or(0, |v| v.len() as u64)
    }

    fn summary(&self, doc: &Document) -> DocumentSummary {
        DocumentSummary {
            id: doc.id,
            source_tag: doc.source_tag.clone(),
            name: doc.name.clone(),
            mime_type: doc.mime_type.clone(),
            language_tag: doc.language_tag.clone(),
            text_character_count: doc.text_character_count,
            byte_count: doc.byte_count,
            sentence_count: self.document_sentences.get(&doc.id).map_or(0, |v| v.len() as u64),
            created_at: doc.created_at,
        }
    }

    fn translations_of(&self, sentence: SentenceId) -> Vec<SentenceTranslation> {
        self.sentence_translations
            .get(&sentence)
            .map(|ids| ids.iter().map(|t| self.translations[t].clone()).collect())
            .unwrap_or_default()
    }

    fn scope_documents(&self, scope: &Scope) -> Result<Vec<DocumentId>> {
        match scope {
            Scope::All => Ok(self.documents.keys().copied().collect()),
            Scope::Source(tag) => {
                let ids: Vec<_> = self
                    .documents
                    .values()
                    .filter(|d| &d.source_tag == tag)
                    .map(|d| d.id)
                    .collect();
                if ids.is_empty() {
                    return Err(Error::UnknownSource(tag.clone()));
                }
                Ok(ids)
            }
            Scope::Documents(ids) => {
                let set: BTreeSet<_> = ids.iter().copied().collect();
                for id in &set {
                    if !self.documents.contains_key(id) {
                        return Err(Error::not_found(DocumentId::KIND, id));
                    }
                }
                Ok(set.into_iter().collect())
            }
        }
    }

    /// Moves every reference from `old` to `survivor` and deletes `old`.
    fn merge_sentence(&mut self, old: SentenceId, survivor: SentenceId) {
        if let Some(docs) = self.occurrences.remove(&old) {
            let distinct: BTreeSet<_> = docs.iter().copied().collect();
            for doc in distinct {
                if let Some(list) = self.document_sentences.get_mut(&doc) {
                    for sid in list.iter_mut().filter(|s| **s == old) {
                        *sid = survivor;
                    }
                }
            }
            self.occurrences.entry(survivor).or_default().extend(docs);
        }

        for tid in self.sentence_translations.remove(&old).unwrap_or_default() {
            let t = self.translations[&tid].clone();
            let clash = self.sentence_translations.get(&survivor).is_some_and(|ids| {
                ids.iter().any(|other| {
                    let o = &self.translations[other];
                    o.target_language == t.target_language && o.translated_text == t.translated_text
                })
            });
            if clash {
                self.translations.remove(&tid);
            } else {
                self.translations.get_mut(&tid).expect("translation exists").sentence_id = survivor;
                self.sentence_translations.entry(survivor).or_default().push(tid);
            }
        }

        self.validity.remove(&old);
        if let Some(s) = self.sentences.remove(&old) {
            if let Some(bucket) = self.hash_index.get_mut(&s.md5hash) {
                bucket.retain(|id| *id != old);
                if bucket.is_empty() {
                    self.hash_index.remove(&s.md5hash);
                }
            }
        }
    }
}

impl Repository for MemoryStore {
    fn ingest_prepared(
        &self,
        doc: &NewDocument,
        sentences: &[PreparedSentence],
    ) -> Result<(DocumentId, IngestStats)> {
        validate_new_document(doc)?;
        let language = doc.language_tag.as_str();

        // Resolve against committed state only; new rows stay private until commit.
        let mut resolved = Vec::with_capacity(sentences.len());
        let mut fresh: Vec<&PreparedSentence> = Vec::new();
        {
            let inner = self.inner.read();
            inner.check_new_key(doc)?;
            let mut local: HashMap<&str, usize> = HashMap::new();
            for s in sentences {
                if let Some(id) = inner.lookup(&s.text, language, &s.md5hash) {
                    resolved.push(Resolved::Existing(id));
                } else if let Some(&i) = local.get(s.text.as_str()) {
                    resolved.push(Resolved::New(i));
                } else {
                    local.insert(&s.text, fresh.len());
                    resolved.push(Resolved::New(fresh.len()));
                    fresh.push(s);
                }
            }
        }

        let mut inner = self.inner.write();
        inner.check_new_key(doc)?;
        let mut fresh_ids = Vec::with_capacity(fresh.len());
        for s in &fresh {
            fresh_ids.push(inner.insert_sentence(&s.text, language, s.md5hash));
        }
        let mut ids = Vec::with_capacity(resolved.len());
        for (r, s) in resolved.iter().zip(sentences) {
            let id = match *r {
                Resolved::Existing(id) if inner.sentences.contains_key(&id) => id,
                // Removed by a dedup pass between resolution and commit.
                Resolved::Existing(_) => match inner.lookup(&s.text, language, &s.md5hash) {
                    Some(id) => id,
                    None => inner.insert_sentence(&s.text, language, s.md5hash),
                },
                Resolved::New(i) => fresh_ids[i],
            };
            ids.push(id);
        }
        let stats = IngestStats {
            sentences: sentences.len() as u64,
            new_distinct: fresh.len() as u64,
            reused_distinct: (sentences.len() - fresh.len()) as u64,
        };
        let id = inner.insert_document(doc, ids);
        Ok((id, stats))
    }

    fn find_sentence_hashed(
        &self,
        plain_text: &str,
        language_tag: &str,
        md5hash: &Md5Hash,
    ) -> Result<Option<Sentence>> {
        let inner = self.inner.read();
        Ok(inner
            .lookup(plain_text, language_tag, md5hash)
            .map(|id| inner.sentences[&id].clone()))
    }

    fn dedup_pass(&self, language_tag: Option<&str>) -> Result<u64> {
        let mut inner = self.inner.write();
        let mut merges = Vec::new();
        for bucket in inner.hash_index.values() {
            if bucket.len() < 2 {
                continue;
            }
            let mut groups: BTreeMap<(&str, &str), Vec<SentenceId>> = BTreeMap::new();
            for id in bucket {
                let s = &inner.sentences[id];
                if language_tag.is_some_and(|l| l != s.language_tag) {
                    continue;
                }
                groups
                    .entry((s.language_tag.as_str(), s.plain_text.as_str()))
                    .or_default()
                    .push(*id);
            }
            for mut ids in groups.into_values().filter(|g| g.len() > 1) {
                ids.sort();
                let survivor = ids[0];
                merges.extend(ids[1..].iter().map(|old| (*old, survivor)));
            }
        }
        for (old, survivor) in &merges {
            inner.merge_sentence(*old, *survivor);
        }
        Ok(merges.len() as u64)
    }

    fn list_documents(&self, filter: &DocumentFilter, page: PageRequest) -> Result<Page<DocumentSummary>> {
        let inner = self.inner.read();
        let all = inner
            .documents
            .values()
            .filter(|d| filter.source_tag.as_ref().map_or(true, |t| &d.source_tag == t))
            .filter(|d| {
                filter
                    .name_substring
                    .as_ref()
                    .map_or(true, |q| d.name.contains(q.as_str()))
            })
            .map(|d| inner.summary(d))
            .collect();
        Ok(Page::from_all(all, page))
    }

    fn get_document(&self, id: DocumentId) -> Result<DocumentDetail> {
        let inner = self.inner.read();
        let document = inner
            .documents
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found(DocumentId::KIND, id))?;
        let sentences = inner.document_sentences[&id]
            .iter()
            .enumerate()
            .map(|(offset, sid)| {
                let docs = inner.distinct_documents(*sid);
                DocumentSentence {
                    start_offset: offset as u32,
                    sentence_id: *sid,
                    plain_text: inner.sentences[sid].plain_text.clone(),
                    occurrence_count: inner.occurrence_count(*sid),
                    document_count: docs.len() as u64,
                    other_documents: docs
                        .into_iter()
                        .filter(|d| *d != id)
                        .take(SAMPLE_DOCUMENTS)
                        .map(|d| inner.document_ref(d))
                        .collect(),
                }
            })
            .collect();
        Ok(DocumentDetail { document, sentences })
    }

    fn list_sentences(&self, filter: &SentenceFilter, page: PageRequest) -> Result<Page<SentenceSummary>> {
        let inner = self.inner.read();
        let all = inner
            .sentences
            .values()
            .filter(|s| filter.language_tag.as_ref().map_or(true, |l| &s.language_tag == l))
            .filter(|s| {
                filter
                    .text_substring
                    .as_ref()
                    .map_or(true, |q| s.plain_text.contains(q.as_str()))
            })
            .map(|s| SentenceSummary {
                sentence: s.clone(),
                occurrence_count: inner.occurrence_count(s.id),
            })
            .filter(|s| filter.min_occurrences.map_or(true, |m| s.occurrence_count >= m))
            .collect();
        Ok(Page::from_all(all, page))
    }

    fn get_sentence(&self, id: SentenceId) -> Result<SentenceDetail> {
        let inner = self.inner.read();
        let sentence = inner
            .sentences
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found(SentenceId::KIND, id))?;
        let mut translations = inner.translations_of(id);
        rank_translations(&mut translations);
        Ok(SentenceDetail {
            sentence,
            occurrence_count: inner.occurrence_count(id),
            documents: inner
                .distinct_documents(id)
                .into_iter()
                .map(|d| inner.document_ref(d))
                .collect(),
            translations,
        })
    }

    fn sentences_by_id(&self, ids: &[SentenceId]) -> Result<Vec<Sentence>> {
        let inner = self.inner.read();
        ids.iter()
            .map(|id| {
                inner
                    .sentences
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::not_found(SentenceId::KIND, id))
            })
            .collect()
    }

    fn add_translation(
        &self,
        sentence: SentenceId,
        target_language: &str,
        text: &str,
        contributor: &str,
    ) -> Result<SentenceTranslation> {
        validate_translation_text(text)?;
        let mut inner = self.inner.write();
        if !inner.sentences.contains_key(&sentence) {
            return Err(Error::not_found(SentenceId::KIND, sentence));
        }
        let existing = inner.sentence_translations.get(&sentence).and_then(|ids| {
            ids.iter().copied().find(|t| {
                let t = &inner.translations[t];
                t.target_language == target_language && t.translated_text == text
            })
        });
        if let Some(tid) = existing {
            let t = inner.translations.get_mut(&tid).expect("indexed translation");
            t.votes += 1;
            return Ok(t.clone());
        }
        inner.next_translation += 1;
        let id = TranslationId(inner.next_translation);
        let t = SentenceTranslation {
            id,
            sentence_id: sentence,
            target_language: target_language.to_string(),
            translated_text: text.to_string(),
            contributor: contributor.to_string(),
            votes: 0,
            created_at: Utc::now(),
        };
        inner.translations.insert(id, t.clone());
        inner.sentence_translations.entry(sentence).or_default().push(id);
        Ok(t)
    }

    fn vote_translation(&self, id: TranslationId) -> Result<SentenceTranslation> {
        let mut inner = self.inner.write();
        let t = inner
            .translations
            .get_mut(&id)
            .ok_or_else(|| Error::not_found(TranslationId::KIND, id))?;
        t.votes += 1;
        Ok(t.clone())
    }

    fn translations(&self, sentence: SentenceId, target_language: Option<&str>) -> Result<Vec<SentenceTranslation>> {
        let inner = self.inner.read();
        Ok(inner
            .translations_of(sentence)
            .into_iter()
            .filter(|t| target_language.map_or(true, |l| t.target_language == l))
            .collect())
    }

    fn source_tags(&self) -> Result<Vec<String>> {
        let inner = self.inner.read();
        let tags: BTreeSet<_> = inner.documents.values().map(|d| d.source_tag.clone()).collect();
        Ok(tags.into_iter().collect())
    }

    fn document_refs(&self) -> Result<Vec<DocumentRef>> {
        let inner = self.inner.read();
        Ok(inner.documents.keys().map(|id| inner.document_ref(*id)).collect())
    }

    fn scope_occurrences(&self, scope: &Scope) -> Result<ScopeOccurrences> {
        let inner = self.inner.read();
        let mut out = ScopeOccurrences::default();
        for id in inner.scope_documents(scope)? {
            let d = &inner.documents[&id];
            out.documents += 1;
            out.text_characters += d.text_character_count;
            out.text_bytes += d.byte_count;
            for sid in &inner.document_sentences[&id] {
                *out.counts.entry(*sid).or_default() += 1;
            }
        }
        Ok(out)
    }

    fn cached_validity(&self, ids: &[SentenceId], rule_set_version: &str) -> Result<HashMap<SentenceId, bool>> {
        let inner = self.inner.read();
        Ok(ids
            .iter()
            .filter_map(|id| match inner.validity.get(id) {
                Some((v, valid)) if v == rule_set_version => Some((*id, *valid)),
                _ => None,
            })
            .collect())
    }

    fn store_validity(&self, entries: &[(SentenceId, bool)], rule_set_version: &str) -> Result<()> {
        let mut inner = self.inner.write();
        for (id, valid) in entries {
            if inner.sentences.contains_key(id) {
                inner.validity.insert(*id, (rule_set_version.to_string(), *valid));
            }
        }
        Ok(())
    }

    fn audit(&self) -> Result<AuditReport> {
        let inner = self.inner.read();
        let mut report = AuditReport::default();

        let mut dangling = Vec::new();
        let mut sources = 0u64;
        for (doc, list) in &inner.document_sentences {
            if !inner.documents.contains_key(doc) {
                dangling.push(format!("occurrence list for missing document {doc}"));
            }
            for (offset, sid) in list.iter().enumerate() {
                sources += 1;
                if !inner.sentences.contains_key(sid) {
                    dangling.push(format!("document {doc} offset {offset} -> missing sentence {sid}"));
                }
            }
        }
        for t in inner.translations.values() {
            if !inner.sentences.contains_key(&t.sentence_id) {
                dangling.push(format!("translation {} -> missing sentence {}", t.id, t.sentence_id));
            }
        }
        push_check(&mut report, "referential_integrity", sources, dangling);

        let bad_hash = inner
            .sentences
            .values()
            .filter(|s| Md5Hash::of(&s.plain_text) != s.md5hash)
            .map(|s| format!("sentence {} stores {} but text hashes to {}", s.id, s.md5hash, Md5Hash::of(&s.plain_text)))
            .collect();
        push_check(&mut report, "hash_integrity", inner.sentences.len() as u64, bad_hash);

        let indexed: u64 = inner.occurrences.values().map(|v| v.len() as u64).sum();
        let conservation = if indexed == sources {
            Vec::new()
        } else {
            vec![format!("{sources} occurrences in documents but {indexed} in sentence index")]
        };
        push_check(&mut report, "occurrence_conservation", sources, conservation);

        let bad_chars = inner
            .documents
            .values()
            .filter(|d| d.content.char_count() != d.text_character_count)
            .map(|d| format!("document {} records {} characters, content has {}", d.id, d.text_character_count, d.content.char_count()))
            .collect();
        push_check(&mut report, "character_count", inner.documents.len() as u64, bad_chars);

        let mut seen: HashMap<(&str, &str), SentenceId> = HashMap::new();
        let mut dups = Vec::new();
        for s in inner.sentences.values() {
            if let Some(first) = seen.insert((&s.language_tag, &s.plain_text), s.id) {
                dups.push(format!("sentence {} duplicates {first}; run dedup", s.id));
            }
        }
        push_check(&mut report, "duplicate_sentences", inner.sentences.len() as u64, dups);

        Ok(report)
    }

    fn insert_sentence_raw(&self, plain_text: &str, language_tag: &str, md5hash: Md5Hash) -> Result<SentenceId> {
        Ok(self.inner.write().insert_sentence(plain_text, language_tag, md5hash))
    }

    fn insert_document_raw(&self, doc: &NewDocument, sentences: &[SentenceId]) -> Result<DocumentId> {
        validate_new_document(doc)?;
        let mut inner = self.inner.write();
        inner.check_new_key(doc)?;
        if let Some(missing) = sentences.iter().find(|s| !inner.sentences.contains_key(s)) {
            return Err(Error::not_found(SentenceId::KIND, missing));
        }
        Ok(inner.insert_document(doc, sentences.to_vec()))
    }
}
