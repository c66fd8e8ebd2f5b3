use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use parking_lot::Mutex;
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};

use super::*;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS document (
    id INTEGER PRIMARY KEY,
    source_tag TEXT NOT NULL,
    name TEXT NOT NULL,
    mime_type TEXT NOT NULL,
    language_tag TEXT NOT NULL,
    content TEXT NOT NULL,
    text_character_count INTEGER NOT NULL,
    byte_count INTEGER NOT NULL,
    created_at TEXT NOT NULL,
    UNIQUE (source_tag, name)
);
CREATE TABLE IF NOT EXISTS sentence (
    id INTEGER PRIMARY KEY,
    plain_text TEXT NOT NULL,
    md5hash BLOB NOT NULL,
    language_tag TEXT NOT NULL,
    valid_version TEXT,
    valid INTEGER
);
CREATE INDEX IF NOT EXISTS sentence_md5 ON sentence (md5hash, language_tag);
CREATE TABLE IF NOT EXISTS sentence_source (
    document_id INTEGER NOT NULL REFERENCES document (id),
    start_offset INTEGER NOT NULL,
    sentence_id INTEGER NOT NULL REFERENCES sentence (id),
    PRIMARY KEY (document_id, start_offset)
) WITHOUT ROWID;
CREATE INDEX IF NOT EXISTS sentence_source_sentence ON sentence_source (sentence_id, document_id);
CREATE TABLE IF NOT EXISTS sentence_translation (
    id INTEGER PRIMARY KEY,
    sentence_id INTEGER NOT NULL REFERENCES sentence (id),
    target_language TEXT NOT NULL,
    translated_text TEXT NOT NULL,
    contributor TEXT NOT NULL,
    votes INTEGER NOT NULL DEFAULT 0,
    created_at TEXT NOT NULL,
    UNIQUE (sentence_id, target_language, translated_text)
);
";

/// Single-file relational store.
///
/// Writes are serialized through one connection, so each document's
/// resolution and commit happen in one transaction and no duplicate sentence
/// rows arise from concurrent ingestion. Callers parallelize extraction,
/// tokenization and hashing before calling in.
pub struct SqliteStore {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for SqliteStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqliteStore").finish_non_exhaustive()
    }
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Nanos, true)
}

fn parse_timestamp(s: &str) -> rusqlite::Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn hash_from_blob(blob: Vec<u8>) -> rusqlite::Result<Md5Hash> {
    let bytes: [u8; 16] = blob.try_into().map_err(|b: Vec<u8>| {
        rusqlite::Error::FromSqlConversionFailure(
            b.len(),
            rusqlite::types::Type::Blob,
            "md5hash must be 16 bytes".into(),
        )
    })?;
    Ok(Md5Hash(bytes))
}

fn sentence_row(row: &Row<'_>) -> rusqlite::Result<Sentence> {
    Ok(Sentence {
        id: SentenceId(row.get::<_, i64>(0)? as u64),
        plain_text: row.get(1)?,
        md5hash: hash_from_blob(row.get(2)?)?,
        language_tag: row.get(3)?,
    })
}

fn translation_row(row: &Row<'_>) -> rusqlite::Result<SentenceTranslation> {
    Ok(SentenceTranslation {
        id: TranslationId(row.get::<_, i64>(0)? as u64),
        sentence_id: SentenceId(row.get::<_, i64>(1)? as u64),
        target_language: row.get(2)?,
        translated_text: row.get(3)?,
        contributor: row.get(4)?,
        votes: row.get::<_, i64>(5)? as u64,
        created_at: parse_timestamp(&row.get::<_, String>(6)?)?,
    })
}

fn document_ref_row(row: &Row<'_>) -> rusqlite::Result<DocumentRef> {
    Ok(DocumentRef {
        id: DocumentId(row.get::<_, i64>(0)? as u64),
        source_tag: row.get(1)?,
        name: row.get(2)?,
    })
}

const SENTENCE_COLUMNS: &str = "id, plain_text, md5hash, language_tag";
const TRANSLATION_COLUMNS: &str =
    "id, sentence_id, target_language, translated_text, contributor, votes, created_at";

impl SqliteStore {
    pub fn open(path: &Path) -> Result<Self> {
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.execute_batch(
            "PRAGMA journal_mode = WAL;
             PRAGMA synchronous = NORMAL;
             PRAGMA foreign_keys = ON;
             PRAGMA temp_store = MEMORY;
             PRAGMA cache_size = -65536;",
        )?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
        })
    }

    fn lookup(tx: &Transaction<'_>, text: &str, language: &str, hash: &Md5Hash) -> Result<Option<SentenceId>> {
        let mut stmt = tx.prepare_cached(
            "SELECT id, plain_text FROM sentence WHERE md5hash = ?1 AND language_tag = ?2 ORDER BY id",
        )?;
        let mut rows = stmt.query(params![&hash.0[..], language])?;
        while let Some(row) = rows.next()? {
            let stored: String = row.get(1)?;
            if stored == text {
                return Ok(Some(SentenceId(row.get::<_, i64>(0)? as u64)));
            }
        }
        Ok(None)
    }

    fn insert_sentence(tx: &Transaction<'_>, text: &str, language: &str, hash: &Md5Hash) -> Result<SentenceId> {
        tx.prepare_cached("INSERT INTO sentence (plain_text, md5hash, language_tag) VALUES (?1, ?2, ?3)")?
            .execute(params![text, &hash.0[..], language])?;
        Ok(SentenceId(tx.last_insert_rowid() as u64))
    }

    fn insert_document(tx: &Transaction<'_>, doc: &NewDocument) -> Result<DocumentId> {
        let exists: Option<i64> = tx
            .prepare_cached("SELECT id FROM document WHERE source_tag = ?1 AND name = ?2")?
            .query_row(params![doc.source_tag, doc.name], |r| r.get(0))
            .optional()?;
        if exists.is_some() {
            return Err(Error::AlreadyIngested {
                source_tag: doc.source_tag.clone(),
                name: doc.name.clone(),
            });
        }
        tx.prepare_cached(
            "INSERT INTO document (source_tag, name, mime_type, language_tag, content,
                                   text_character_count, byte_count, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
        )?
        .execute(params![
            doc.source_tag,
            doc.name,
            doc.mime_type,
            doc.language_tag,
            doc.content.as_str(),
            doc.content.char_count() as i64,
            doc.content.len() as i64,
            timestamp(&Utc::now()),
        ])?;
        Ok(DocumentId(tx.last_insert_rowid() as u64))
    }

    fn insert_source(tx: &Transaction<'_>, doc: DocumentId, offset: usize, sentence: SentenceId) -> Result<()> {
        tx.prepare_cached("INSERT INTO sentence_source (document_id, start_offset, sentence_id) VALUES (?1, ?2, ?3)")?
            .execute(params![doc.0 as i64, offset as i64, sentence.0 as i64])?;
        Ok(())
    }

    fn sentence(conn: &Connection, id: SentenceId) -> Result<Sentence> {
        conn.prepare_cached(&format!("SELECT {SENTENCE_COLUMNS} FROM sentence WHERE id = ?1"))?
            .query_row([id.0 as i64], sentence_row)
            .optional()?
            .ok_or_else(|| Error::not_found(SentenceId::KIND, id))
    }

    fn occurrence_count(conn: &Connection, id: SentenceId) -> Result<u64> {
        let n: i64 = conn
            .prepare_cached("SELECT COUNT(*) FROM sentence_source WHERE sentence_id = ?1")?
            .query_row([id.0 as i64], |r| r.get(0))?;
        Ok(n as u64)
    }

    fn translations_of(conn: &Connection, id: SentenceId, language: Option<&str>) -> Result<Vec<SentenceTranslation>> {
        let mut stmt = conn.prepare_cached(&format!(
            "SELECT {TRANSLATION_COLUMNS} FROM sentence_translation
             WHERE sentence_id = ?1 AND (?2 IS NULL OR target_language = ?2) ORDER BY id"
        ))?;
        let rows = stmt.query_map(params![id.0 as i64, language], translation_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    fn translation(conn: &Connection, id: TranslationId) -> Result<SentenceTranslation> {
        conn.prepare_cached(&format!("SELECT {TRANSLATION_COLUMNS} FROM sentence_translation WHERE id = ?1"))?
            .query_row([id.0 as i64], translation_row)
            .optional()?
            .ok_or_else(|| Error::not_found(TranslationId::KIND, id))
    }

    fn merge_sentence(tx: &Transaction<'_>, old: i64, survivor: i64) -> Result<()> {
        tx.prepare_cached("UPDATE sentence_source SET sentence_id = ?2 WHERE sentence_id = ?1")?
            .execute(params![old, survivor])?;
        let moved: Vec<(i64, String, String)> = tx
            .prepare_cached(
                "SELECT id, target_language, translated_text FROM sentence_translation
                 WHERE sentence_id = ?1 ORDER BY id",
            )?
            .query_map([old], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))?
            .collect::<rusqlite::Result<_>>()?;
        for (tid, lang, text) in moved {
            let clash: Option<i64> = tx
                .prepare_cached(
                    "SELECT id FROM sentence_translation
                     WHERE sentence_id = ?1 AND target_language = ?2 AND translated_text = ?3",
                )?
                .query_row(params![survivor, lang, text], |r| r.get(0))
                .optional()?;
            if clash.is_some() {
                tx.prepare_cached("DELETE FROM sentence_translation WHERE id = ?1")?
                    .execute([tid])?;
            } else {
                tx.prepare_cached("UPDATE sentence_translation SET sentence_id = ?2 WHERE id = ?1")?
                    .execute(params![tid, survivor])?;
            }
        }
        tx.prepare_cached("DELETE FROM sentence WHERE id = ?1")?.execute([old])?;
        Ok(())
    }

    fn scope_counts(conn: &Connection, sql: &str, param: Option<&dyn rusqlite::ToSql>, out: &mut ScopeOccurrences) -> Result<()> {
        let mut stmt = conn.prepare_cached(sql)?;
        let params: &[&dyn rusqlite::ToSql] = match &param {
            Some(p) => std::slice::from_ref(p),
            None => &[],
        };
        let mut rows = stmt.query(params)?;
        while let Some(row) = rows.next()? {
            let id = SentenceId(row.get::<_, i64>(0)? as u64);
            *out.counts.entry(id).or_default() += row.get::<_, i64>(1)? as u64;
        }
        Ok(())
    }
}

impl Repository for SqliteStore {
    fn ingest_prepared(
        &self,
        doc: &NewDocument,
        sentences: &[PreparedSentence],
    ) -> Result<(DocumentId, IngestStats)> {
        validate_new_document(doc)?;
        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        let doc_id = Self::insert_document(&tx, doc)?;
        let mut stats = IngestStats {
            sentences: sentences.len() as u64,
            ..Default::default()
        };
        let mut local: HashMap<&str, SentenceId> = HashMap::new();
        for (offset, s) in sentences.iter().enumerate() {
            let id = match local.get(s.text.as_str()) {
                Some(id) => {
                    stats.reused_distinct += 1;
                    *id
                }
                None => {
                    let id = match Self::lookup(&tx, &s.text, &doc.language_tag, &s.md5hash)? {
                        Some(id) => {
                            stats.reused_distinct += 1;
                            id
                        }
                        None => {
                            stats.new_distinct += 1;
                            Self::insert_sentence(&tx, &s.text, &doc.language_tag, &s.md5hash)?
                        }
                    };
                    local.insert(&s.text, id);
                    id
                }
            };
            Self::insert_source(&tx, doc_id, offset, id)?;
        }
        tx.commit()?;
        Ok((doc_id, stats))
    }

    fn find_sentence_hashed(
        &self,
        plain_text: &str,
        language_tag: &str,
        md5hash: &Md5Hash,
    ) -> Result<Option<Sentence>> {
        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        let found = match Self::lookup(&tx, plain_text, language_tag, md5hash)? {
            Some(id) => Some(Self::sentence(&tx, id)?),
            None => None,
        };
        tx.commit()?;
        Ok(found)
    }

    fn dedup_pass(&self, language_tag: Option<&str>) -> Result<u64> {
        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        let merges: Vec<(i64, i64)> = tx
            .prepare(
                "SELECT a.id, MIN(b.id) FROM sentence a
                 JOIN sentence b ON b.md5hash = a.md5hash AND b.language_tag = a.language_tag
                                 AND b.plain_text = a.plain_text AND b.id < a.id
                 WHERE ?1 IS NULL OR a.language_tag = ?1
                 GROUP BY a.id ORDER BY a.id",
            )?
            .query_map([language_tag], |r| Ok((r.get(0)?, r.get(1)?)))?
            .collect::<rusqlite::Result<_>>()?;
        for (old, survivor) in &merges {
            Self::merge_sentence(&tx, *old, *survivor)?;
        }
        tx.commit()?;
        Ok(merges.len() as u64)
    }

    fn list_documents(&self, filter: &DocumentFilter, page: PageRequest) -> Result<Page<DocumentSummary>> {
        let conn = self.conn.lock();
        let where_clause = "WHERE (?1 IS NULL OR source_tag = ?1) AND (?2 IS NULL OR instr(name, ?2) > 0)";
        let total: i64 = conn.query_row(
            &format!("SELECT COUNT(*) FROM document {where_clause}"),
            params![filter.source_tag, filter.name_substring],
            |r| r.get(0),
        )?;
        let mut stmt = conn.prepare_cached(&format!(
            "SELECT id, source_tag, name, mime_type, language_tag, text_character_count, byte_count, created_at,
                    (SELECT COUNT(*) FROM sentence_source ss WHERE ss.document_id = document.id)
             FROM document {where_clause} ORDER BY id LIMIT ?3 OFFSET ?4"
        ))?;
        let items = stmt
            .query_map(
                params![
                    filter.source_tag,
                    filter.name_substring,
                    page.page_size as i64,
                    page.offset() as i64
                ],
                |r| {
                    Ok(DocumentSummary {
                        id: DocumentId(r.get::<_, i64>(0)? as u64),
                        source_tag: r.get(1)?,
                        name: r.get(2)?,
                        mime_type: r.get(3)?,
                        language_tag: r.get(4)?,
                        text_character_count: r.get::<_, i64>(5)? as u64,
                        byte_count: r.get::<_, i64>(6)? as u64,
                        created_at: parse_timestamp(&r.get::<_, String>(7)?)?,
                        sentence_count: r.get::<_, i64>(8)? as u64,
                    })
                },
            )?
            .collect::<rusqlite::Result<_>>()?;
        Ok(Page {
            items,
            page: page.page,
            page_size: page.page_size,
            total: total as u64,
        })
    }

    fn get_document(&self, id: DocumentId) -> Result<DocumentDetail> {
        let conn = self.conn.lock();
        let document = conn
            .query_row(
                "SELECT id, source_tag, name, mime_type, language_tag, content, text_character_count,
                        byte_count, created_at
                 FROM document WHERE id = ?1",
                [id.0 as i64],
                |r| {
                    Ok(Document {
                        id: DocumentId(r.get::<_, i64>(0)? as u64),
                        source_tag: r.get(1)?,
                        name: r.get(2)?,
                        mime_type: r.get(3)?,
                        language_tag: r.get(4)?,
                        content: PlainText::new(&r.get::<_, String>(5)?),
                        text_character_count: r.get::<_, i64>(6)? as u64,
                        byte_count: r.get::<_, i64>(7)? as u64,
                        created_at: parse_timestamp(&r.get::<_, String>(8)?)?,
                    })
                },
            )
            .optional()?
            .ok_or_else(|| Error::not_found(DocumentId::KIND, id))?;

        let rows: Vec<(u32, i64, String)> = conn
            .prepare_cached(
                "SELECT ss.start_offset, s.id, s.plain_text FROM sentence_source ss
                 JOIN sentence s ON s.id = ss.sentence_id
                 WHERE ss.document_id = ?1 ORDER BY ss.start_offset",
            )?
            .query_map([id.0 as i64], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))?
            .collect::<rusqlite::Result<_>>()?;

        let mut sentences = Vec::with_capacity(rows.len());
        for (start_offset, sid, plain_text) in rows {
            let (occurrences, documents): (i64, i64) = conn
                .prepare_cached(
                    "SELECT COUNT(*), COUNT(DISTINCT document_id) FROM sentence_source WHERE sentence_id = ?1",
                )?
                .query_row([sid], |r| Ok((r.get(0)?, r.get(1)?)))?;
            let other_documents = conn
                .prepare_cached(
                    "SELECT DISTINCT d.id, d.source_tag, d.name FROM sentence_source ss
                     JOIN document d ON d.id = ss.document_id
                     WHERE ss.sentence_id = ?1 AND ss.document_id <> ?2 ORDER BY d.id LIMIT ?3",
                )?
                .query_map(params![sid, id.0 as i64, SAMPLE_DOCUMENTS as i64], document_ref_row)?
                .collect::<rusqlite::Result<_>>()?;
            sentences.push(DocumentSentence {
                start_offset,
                sentence_id: SentenceId(sid as u64),
                plain_text,
                occurrence_count: occurrences as u64,
                document_count: documents as u64,
                other_documents,
            });
        }
        Ok(DocumentDetail { document, sentences })
    }

    fn list_sentences(&self, filter: &SentenceFilter, page: PageRequest) -> Result<Page<SentenceSummary>> {
        let conn = self.conn.lock();
        let inner = "SELECT s.id, s.plain_text, s.md5hash, s.language_tag,
                            (SELECT COUNT(*) FROM sentence_source ss WHERE ss.sentence_id = s.id) AS occ
                     FROM sentence s
                     WHERE (?1 IS NULL OR s.language_tag = ?1) AND (?2 IS NULL OR instr(s.plain_text, ?2) > 0)";
        let min = filter.min_occurrences.unwrap_or(0) as i64;
        let total: i64 = conn.query_row(
            &format!("SELECT COUNT(*) FROM ({inner}) WHERE occ >= ?3"),
            params![filter.language_tag, filter.text_substring, min],
            |r| r.get(0),
        )?;
        let mut stmt = conn.prepare_cached(&format!(
            "SELECT * FROM ({inner}) WHERE occ >= ?3 ORDER BY id LIMIT ?4 OFFSET ?5"
        ))?;
        let items = stmt
            .query_map(
                params![
                    filter.language_tag,
                    filter.text_substring,
                    min,
                    page.page_size as i64,
                    page.offset() as i64
                ],
                |r| {
                    Ok(SentenceSummary {
                        sentence: sentence_row(r)?,
                        occurrence_count: r.get::<_, i64>(4)? as u64,
                    })
                },
            )?
            .collect::<rusqlite::Result<_>>()?;
        Ok(Page {
            items,
            page: page.page,
            page_size: page.page_size,
            total: total as u64,
        })
    }

    fn get_sentence(&self, id: SentenceId) -> Result<SentenceDetail> {
        let conn = self.conn.lock();
        let sentence = Self::sentence(&conn, id)?;
        let occurrence_count = Self::occurrence_count(&conn, id)?;
        let documents = conn
            .prepare_cached(
                "SELECT DISTINCT d.id, d.source_tag, d.name FROM sentence_source ss
                 JOIN document d ON d.id = ss.document_id WHERE ss.sentence_id = ?1 ORDER BY d.id",
            )?
            .query_map([id.0 as i64], document_ref_row)?
            .collect::<rusqlite::Result<_>>()?;
        let mut translations = Self::translations_of(&conn, id, None)?;
        rank_translations(&mut translations);
        Ok(SentenceDetail {
            sentence,
            occurrence_count,
            documents,
            translations,
        })
    }

    fn sentences_by_id(&self, ids: &[SentenceId]) -> Result<Vec<Sentence>> {
        let conn = self.conn.lock();
        ids.iter().map(|id| Self::sentence(&conn, *id)).collect()
    }

    fn add_translation(
        &self,
        sentence: SentenceId,
        target_language: &str,
        text: &str,
        contributor: &str,
    ) -> Result<SentenceTranslation> {
        validate_translation_text(text)?;
        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        Self::sentence(&tx, sentence)?;
        let existing: Option<i64> = tx
            .query_row(
                "SELECT id FROM sentence_translation
                 WHERE sentence_id = ?1 AND target_language = ?2 AND translated_text = ?3",
                params![sentence.0 as i64, target_language, text],
                |r| r.get(0),
            )
            .optional()?;
        let id = match existing {
            Some(id) => {
                tx.execute("UPDATE sentence_translation SET votes = votes + 1 WHERE id = ?1", [id])?;
                id
            }
            None => {
                tx.execute(
                    "INSERT INTO sentence_translation
                         (sentence_id, target_language, translated_text, contributor, votes, created_at)
                     VALUES (?1, ?2, ?3, ?4, 0, ?5)",
                    params![
                        sentence.0 as i64,
                        target_language,
                        text,
                        contributor,
                        timestamp(&Utc::now())
                    ],
                )?;
                tx.last_insert_rowid()
            }
        };
        let t = Self::translation(&tx, TranslationId(id as u64))?;
        tx.commit()?;
        Ok(t)
    }

    fn vote_translation(&self, id: TranslationId) -> Result<SentenceTranslation> {
        let conn = self.conn.lock();
        let n = conn.execute(
            "UPDATE sentence_translation SET votes = votes + 1 WHERE id = ?1",
            [id.0 as i64],
        )?;
        if n == 0 {
            return Err(Error::not_found(TranslationId::KIND, id));
        }
        Self::translation(&conn, id)
    }

    fn translations(&self, sentence: SentenceId, target_language: Option<&str>) -> Result<Vec<SentenceTranslation>> {
        let conn = self.conn.lock();
        Self::translations_of(&conn, sentence, target_language)
    }

    fn source_tags(&self) -> Result<Vec<String>> {
        let conn = self.conn.lock();
        let mut stmt = conn.prepare_cached("SELECT DISTINCT source_tag FROM document ORDER BY source_tag")?;
        let tags = stmt.query_map([], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
        Ok(tags)
    }

    fn document_refs(&self) -> Result<Vec<DocumentRef>> {
        let conn = self.conn.lock();
        let mut stmt = conn.prepare_cached("SELECT id, source_tag, name FROM document ORDER BY id")?;
        let refs = stmt.query_map([], document_ref_row)?.collect::<rusqlite::Result<_>>()?;
        Ok(refs)
    }

    fn scope_occurrences(&self, scope: &Scope) -> Result<ScopeOccurrences> {
        let conn = self.conn.lock();
        let mut out = ScopeOccurrences::default();
        let doc_totals = |sql: &str, p: &[&dyn rusqlite::ToSql]| -> Result<(u64, u64, u64)> {
            Ok(conn.query_row(sql, p, |r| {
                Ok((
                    r.get::<_, i64>(0)? as u64,
                    r.get::<_, Option<i64>>(1)?.unwrap_or(0) as u64,
                    r.get::<_, Option<i64>>(2)?.unwrap_or(0) as u64,
                ))
            })?)
        };
        match scope {
            Scope::All => {
                (out.documents, out.text_characters, out.text_bytes) = doc_totals(
                    "SELECT COUNT(*), SUM(text_character_count), SUM(byte_count) FROM document",
                    &[],
                )?;
                Self::scope_counts(
                    &conn,
                    "SELECT sentence_id, COUNT(*) FROM sentence_source GROUP BY sentence_id",
                    None,
                    &mut out,
                )?;
            }
            Scope::Source(tag) => {
                (out.documents, out.text_characters, out.text_bytes) = doc_totals(
                    "SELECT COUNT(*), SUM(text_character_count), SUM(byte_count) FROM document WHERE source_tag = ?1",
                    &[tag],
                )?;
                if out.documents == 0 {
                    return Err(Error::UnknownSource(tag.clone()));
                }
                Self::scope_counts(
                    &conn,
                    "SELECT ss.sentence_id, COUNT(*) FROM sentence_source ss
                     JOIN document d ON d.id = ss.document_id
                     WHERE d.source_tag = ?1 GROUP BY ss.sentence_id",
                    Some(tag),
                    &mut out,
                )?;
            }
            Scope::Documents(ids) => {
                let set: std::collections::BTreeSet<_> = ids.iter().copied().collect();
                for id in set {
                    let id_param = id.0 as i64;
                    let (n, chars, bytes) = doc_totals(
                        "SELECT COUNT(*), SUM(text_character_count), SUM(byte_count) FROM document WHERE id = ?1",
                        &[&id_param],
                    )?;
                    if n == 0 {
                        return Err(Error::not_found(DocumentId::KIND, id));
                    }
                    out.documents += 1;
                    out.text_characters += chars;
                    out.text_bytes += bytes;
                    Self::scope_counts(
                        &conn,
                        "SELECT sentence_id, COUNT(*) FROM sentence_source WHERE document_id = ?1 GROUP BY sentence_id",
                        Some(&id_param),
                        &mut out,
                    )?;
                }
            }
        }
        Ok(out)
    }

    fn cached_validity(&self, ids: &[SentenceId], rule_set_version: &str) -> Result<HashMap<SentenceId, bool>> {
        let conn = self.conn.lock();
        let mut stmt = conn.prepare_cached("SELECT valid FROM sentence WHERE id = ?1 AND valid_version = ?2")?;
        let mut out = HashMap::new();
        for id in ids {
            if let Some(valid) = stmt
                .query_row(params![id.0 as i64, rule_set_version], |r| r.get::<_, bool>(0))
                .optional()?
            {
                out.insert(*id, valid);
            }
        }
        Ok(out)
    }

    fn store_validity(&self, entries: &[(SentenceId, bool)], rule_set_version: &str) -> Result<()> {
        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        {
            let mut stmt = tx.prepare_cached("UPDATE sentence SET valid_version = ?2, valid = ?3 WHERE id = ?1")?;
            for (id, valid) in entries {
                stmt.execute(params![id.0 as i64, rule_set_version, valid])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    fn audit(&self) -> Result<AuditReport> {
        let conn = self.conn.lock();
        let mut report = AuditReport::default();
        let count = |sql: &str| -> Result<u64> { Ok(conn.query_row(sql, [], |r| r.get::<_, i64>(0))? as u64) };
        let listed = |sql: &str| -> Result<Vec<String>> {
            let mut stmt = conn.prepare(sql)?;
            let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
            Ok(rows.collect::<rusqlite::Result<_>>()?)
        };

        let sources = count("SELECT COUNT(*) FROM sentence_source")?;
        let mut dangling = listed(
            "SELECT 'document ' || ss.document_id || ' offset ' || ss.start_offset || ' -> missing sentence ' || ss.sentence_id
             FROM sentence_source ss LEFT JOIN sentence s ON s.id = ss.sentence_id WHERE s.id IS NULL",
        )?;
        dangling.extend(listed(
            "SELECT 'occurrence at offset ' || ss.start_offset || ' for missing document ' || ss.document_id
             FROM sentence_source ss LEFT JOIN document d ON d.id = ss.document_id WHERE d.id IS NULL",
        )?);
        dangling.extend(listed(
            "SELECT 'translation ' || t.id || ' -> missing sentence ' || t.sentence_id
             FROM sentence_translation t LEFT JOIN sentence s ON s.id = t.sentence_id WHERE s.id IS NULL",
        )?);
        push_check(&mut report, "referential_integrity", sources, dangling);

        let mut bad_hash = Vec::new();
        let mut checked = 0;
        {
            let mut stmt = conn.prepare(&format!("SELECT {SENTENCE_COLUMNS} FROM sentence ORDER BY id"))?;
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                let s = sentence_row(row)?;
                checked += 1;
                let actual = Md5Hash::of(&s.plain_text);
                if actual != s.md5hash {
                    bad_hash.push(format!("sentence {} stores {} but text hashes to {actual}", s.id, s.md5hash));
                }
            }
        }
        push_check(&mut report, "hash_integrity", checked, bad_hash);

        let gaps = listed(
            "SELECT 'document ' || document_id || ' has ' || COUNT(*) || ' occurrences but max offset ' || MAX(start_offset)
             FROM sentence_source GROUP BY document_id HAVING MAX(start_offset) + 1 <> COUNT(*)",
        )?;
        push_check(&mut report, "occurrence_conservation", sources, gaps);

        let mut bad_chars = Vec::new();
        let documents = count("SELECT COUNT(*) FROM document")?;
        {
            let mut stmt = conn.prepare("SELECT id, content, text_character_count FROM document ORDER BY id")?;
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                let id: i64 = row.get(0)?;
                let content: String = row.get(1)?;
                let recorded: i64 = row.get(2)?;
                let actual = content.chars().count() as i64;
                if actual != recorded {
                    bad_chars.push(format!("document {id} records {recorded} characters, content has {actual}"));
                }
            }
        }
        push_check(&mut report, "character_count", documents, bad_chars);

        let dups = listed(
            "SELECT 'sentence ' || a.id || ' duplicates ' || MIN(b.id) || '; run dedup' FROM sentence a
             JOIN sentence b ON b.md5hash = a.md5hash AND b.language_tag = a.language_tag
                             AND b.plain_text = a.plain_text AND b.id < a.id
             GROUP BY a.id ORDER BY a.id",
        )?;
        push_check(&mut report, "duplicate_sentences", checked, dups);

        Ok(report)
    }

    fn insert_sentence_raw(&self, plain_text: &str, language_tag: &str, md5hash: Md5Hash) -> Result<SentenceId> {
        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        let id = Self::insert_sentence(&tx, plain_text, language_tag, &md5hash)?;
        tx.commit()?;
        Ok(id)
    }

    fn insert_document_raw(&self, doc: &NewDocument, sentences: &[SentenceId]) -> Result<DocumentId> {
        validate_new_document(doc)?;
        let mut conn = self.conn.lock();
        let tx = conn.transaction()?;
        for s in sentences {
            Self::sentence(&tx, *s)?;
        }
        let id = Self::insert_document(&tx, doc)?;
        for (offset, s) in sentences.iter().enumerate() {
            Self::insert_source(&tx, id, offset, *s)?;
        }
        tx.commit()?;
        Ok(id)
    }
}
