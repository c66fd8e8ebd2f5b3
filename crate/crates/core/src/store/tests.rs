use super::*;
use crate::testdata::{EXAMPLE, PARROT};

fn stores() -> Vec<(&'static str, Box<dyn Repository>)> {
    vec![
        ("memory", Box::new(MemoryStore::new())),
        ("sqlite", Box::new(SqliteStore::open_in_memory().unwrap())),
    ]
}

fn ingest(repo: &dyn Repository, name: &str, text: &str) -> (DocumentId, IngestStats) {
    ingest_document(repo, &Tokenizer::default(), &NewDocument::text("src", name, text)).unwrap()
}

#[test]
fn md5_vectors() {
    assert_eq!(compute_md5(""), "d41d8cd98f00b204e9800998ecf8427e");
    assert_eq!(compute_md5("abc"), "900150983cd24fb0d6963f7d28e17f72");
    let h = Md5Hash::of("abc");
    assert_eq!(h.to_hex().parse::<Md5Hash>().unwrap(), h);
    assert_eq!(serde_json::to_string(&h).unwrap(), "\"900150983cd24fb0d6963f7d28e17f72\"");
}

#[test]
fn example_ingest_stats() {
    for (name, repo) in stores() {
        let (_, first) = ingest(repo.as_ref(), "parrots", EXAMPLE);
        assert_eq!(
            first,
            IngestStats { sentences: 4, new_distinct: 3, reused_distinct: 1 },
            "{name}"
        );
        let (_, second) = ingest(repo.as_ref(), "parrots-copy", EXAMPLE);
        assert_eq!(
            second,
            IngestStats { sentences: 4, new_distinct: 0, reused_distinct: 4 },
            "{name}"
        );
        assert!(repo.audit().unwrap().is_clean(), "{name}");
    }
}

#[test]
fn empty_document_is_stored() {
    for (name, repo) in stores() {
        let (id, stats) = ingest(repo.as_ref(), "empty", "");
        assert_eq!(stats, IngestStats::default(), "{name}");
        let detail = repo.get_document(id).unwrap();
        assert!(detail.sentences.is_empty());
        assert_eq!(detail.document.text_character_count, 0);
    }
}

#[test]
fn duplicate_document_rejected() {
    for (name, repo) in stores() {
        ingest(repo.as_ref(), "a", EXAMPLE);
        let err = ingest_document(repo.as_ref(), &Tokenizer::default(), &NewDocument::text("src", "a", "x"));
        assert!(matches!(err, Err(Error::AlreadyIngested { .. })), "{name}");
        // The same name under another source is a different document.
        ingest_document(repo.as_ref(), &Tokenizer::default(), &NewDocument::text("other", "a", "x")).unwrap();
    }
}

#[test]
fn empty_source_tag_rejected() {
    for (_, repo) in stores() {
        let err = repo.ingest_prepared(&NewDocument::text(" ", "a", "x"), &[]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }
}

#[test]
fn find_sentence_and_counts() {
    for (name, repo) in stores() {
        ingest(repo.as_ref(), "parrots", EXAMPLE);
        let s = repo.find_sentence(PARROT, "en").unwrap().expect(name);
        assert_eq!(s.md5hash, Md5Hash::of(PARROT));
        let detail = repo.get_sentence(s.id).unwrap();
        assert_eq!(detail.occurrence_count, 2, "{name}");
        assert_eq!(detail.documents.len(), 1);
        assert!(repo.find_sentence(PARROT, "pt").unwrap().is_none());
        assert!(repo.find_sentence("Not there.", "en").unwrap().is_none());
    }
}

#[test]
fn hash_collision_resolved_by_text() {
    for (name, repo) in stores() {
        let forced = Md5Hash([7; 16]);
        let a = repo.insert_sentence_raw("First.", "en", forced).unwrap();
        let b = repo.insert_sentence_raw("Second.", "en", forced).unwrap();
        let found = repo.find_sentence_hashed("Second.", "en", &forced).unwrap().unwrap();
        assert_eq!(found.id, b, "{name}");
        let found = repo.find_sentence_hashed("First.", "en", &forced).unwrap().unwrap();
        assert_eq!(found.id, a, "{name}");
        assert!(repo.find_sentence_hashed("Third.", "en", &forced).unwrap().is_none());
        // Stored hashes disagree with the text, which the audit must report.
        let report = repo.audit().unwrap();
        assert_eq!(
            report.violations().filter(|r| r.check == "hash_integrity").count(),
            2,
            "{name}"
        );
    }
}

#[test]
fn dedup_merges_into_lowest_id() {
    for (name, repo) in stores() {
        let h = Md5Hash::of("A.");
        let keep = repo.insert_sentence_raw("A.", "en", h).unwrap();
        let dup = repo.insert_sentence_raw("A.", "en", h).unwrap();
        let other = repo.insert_sentence_raw("B.", "en", Md5Hash::of("B.")).unwrap();
        repo.insert_document_raw(&NewDocument::text("s", "d1", "A. A. B."), &[keep, dup, other])
            .unwrap();
        repo.insert_document_raw(&NewDocument::text("s", "d2", "A."), &[dup]).unwrap();
        repo.add_translation(keep, "pt", "A-pt.", "x").unwrap();
        repo.add_translation(dup, "pt", "A-pt.", "y").unwrap();
        repo.add_translation(dup, "pt", "Outro.", "y").unwrap();
        assert!(!repo.audit().unwrap().is_clean());

        assert_eq!(repo.dedup_pass(None).unwrap(), 1, "{name}");
        let detail = repo.get_sentence(keep).unwrap();
        assert_eq!(detail.occurrence_count, 3, "{name}");
        assert_eq!(detail.documents.len(), 2);
        assert_eq!(detail.translations.len(), 2, "{name}");
        assert!(matches!(repo.get_sentence(dup), Err(Error::NotFound { .. })));
        assert!(repo.audit().unwrap().is_clean(), "{name}");
        assert_eq!(repo.dedup_pass(None).unwrap(), 0);
    }
}

#[test]
fn dedup_respects_language_filter() {
    for (name, repo) in stores() {
        for lang in ["en", "pt"] {
            let h = Md5Hash::of("A.");
            repo.insert_sentence_raw("A.", lang, h).unwrap();
            repo.insert_sentence_raw("A.", lang, h).unwrap();
        }
        assert_eq!(repo.dedup_pass(Some("pt")).unwrap(), 1, "{name}");
        assert_eq!(repo.dedup_pass(None).unwrap(), 1, "{name}");
    }
}

#[test]
fn pagination() {
    for (name, repo) in stores() {
        for i in 0..7 {
            ingest(repo.as_ref(), &format!("doc{i}"), &format!("Sentence number {i}. Shared one."));
        }
        let all = repo
            .list_documents(&DocumentFilter::default(), PageRequest::new(0, 1000).unwrap())
            .unwrap();
        assert_eq!(all.total, 7);
        let mut seen = Vec::new();
        for p in 0..3 {
            let page = repo
                .list_documents(&DocumentFilter::default(), PageRequest::new(p, 3).unwrap())
                .unwrap();
            seen.extend(page.items.iter().map(|d| d.id));
        }
        assert_eq!(seen, all.items.iter().map(|d| d.id).collect::<Vec<_>>(), "{name}");
        let past = repo
            .list_documents(&DocumentFilter::default(), PageRequest::new(9, 3).unwrap())
            .unwrap();
        assert!(past.items.is_empty());
        assert_eq!(past.total, 7);

        let filtered = repo
            .list_documents(
                &DocumentFilter { source_tag: None, name_substring: Some("doc3".into()) },
                PageRequest::default(),
            )
            .unwrap();
        assert_eq!(filtered.total, 1);
        assert_eq!(filtered.items[0].sentence_count, 2);

        let shared = repo
            .list_sentences(
                &SentenceFilter { min_occurrences: Some(2), ..Default::default() },
                PageRequest::default(),
            )
            .unwrap();
        assert_eq!(shared.total, 1, "{name}");
        assert_eq!(shared.items[0].sentence.plain_text, "Shared one.");
        assert_eq!(shared.items[0].occurrence_count, 7);
        let search = repo
            .list_sentences(
                &SentenceFilter { text_substring: Some("number".into()), ..Default::default() },
                PageRequest::default(),
            )
            .unwrap();
        assert_eq!(search.total, 7);
    }
    assert!(PageRequest::new(0, 0).is_err());
    assert!(PageRequest::new(0, MAX_PAGE_SIZE + 1).is_err());
}

#[test]
fn document_detail() {
    for (name, repo) in stores() {
        let (a, _) = ingest(repo.as_ref(), "a", EXAMPLE);
        let (b, _) = ingest(repo.as_ref(), "b", PARROT);
        let detail = repo.get_document(a).unwrap();
        assert_eq!(detail.document.text_character_count, 140, "{name}");
        assert_eq!(detail.document.mime_type, "text/plain");
        let offsets: Vec<u32> = detail.sentences.iter().map(|s| s.start_offset).collect();
        assert_eq!(offsets, vec![0, 1, 2, 3]);
        let first = &detail.sentences[0];
        assert_eq!(first.plain_text, PARROT);
        assert_eq!(first.occurrence_count, 3);
        assert_eq!(first.document_count, 2);
        assert_eq!(first.other_documents.iter().map(|d| d.id).collect::<Vec<_>>(), vec![b]);
        assert!(detail.sentences[1].other_documents.is_empty());
        assert!(matches!(repo.get_document(DocumentId(999)), Err(Error::NotFound { .. })));
        assert!(matches!(repo.get_sentence(SentenceId(999)), Err(Error::NotFound { .. })));
    }
}

#[test]
fn translations_endorse_and_vote() {
    for (name, repo) in stores() {
        ingest(repo.as_ref(), "a", EXAMPLE);
        let s = repo.find_sentence(PARROT, "en").unwrap().unwrap();
        let t = repo.add_translation(s.id, "pt", "Quando papagaios o fazem, é papaguear.", "ana").unwrap();
        assert_eq!(t.votes, 0);
        let again = repo.add_translation(s.id, "pt", "Quando papagaios o fazem, é papaguear.", "rui").unwrap();
        assert_eq!(again.id, t.id, "{name}");
        assert_eq!(again.votes, 1);
        assert_eq!(again.contributor, "ana");
        let other = repo.add_translation(s.id, "pt", "Outra.", "rui").unwrap();
        assert_ne!(other.id, t.id);
        assert_eq!(repo.translations(s.id, Some("pt")).unwrap().len(), 2);
        assert!(repo.translations(s.id, Some("es")).unwrap().is_empty());
        assert_eq!(repo.vote_translation(other.id).unwrap().votes, 1);
        assert_eq!(repo.vote_translation(other.id).unwrap().votes, 2);
        let detail = repo.get_sentence(s.id).unwrap();
        assert_eq!(detail.translations[0].id, other.id, "{name}");
        assert!(matches!(repo.vote_translation(TranslationId(999)), Err(Error::NotFound { .. })));
        assert!(matches!(
            repo.add_translation(SentenceId(999), "pt", "x", "y"),
            Err(Error::NotFound { .. })
        ));
        assert!(matches!(repo.add_translation(s.id, "pt", "  ", "y"), Err(Error::Validation(_))));
    }
}

#[test]
fn scope_occurrences() {
    for (name, repo) in stores() {
        let (a, _) = ingest(repo.as_ref(), "a", EXAMPLE);
        ingest_document(repo.as_ref(), &Tokenizer::default(), &NewDocument::text("other", "b", PARROT)).unwrap();
        let all = repo.scope_occurrences(&Scope::All).unwrap();
        assert_eq!(all.documents, 2);
        assert_eq!(all.counts.values().sum::<u64>(), 5, "{name}");
        let src = repo.scope_occurrences(&Scope::Source("src".into())).unwrap();
        assert_eq!(src.text_characters, 140);
        assert_eq!(src.counts.len(), 3);
        let docs = repo.scope_occurrences(&Scope::Documents(vec![a, a])).unwrap();
        assert_eq!(docs.documents, 1, "{name}");
        assert_eq!(docs.counts.values().sum::<u64>(), 4);
        assert!(matches!(
            repo.scope_occurrences(&Scope::Source("nope".into())),
            Err(Error::UnknownSource(_))
        ));
        assert!(matches!(
            repo.scope_occurrences(&Scope::Documents(vec![DocumentId(77)])),
            Err(Error::NotFound { .. })
        ));
        assert_eq!(repo.source_tags().unwrap(), vec!["other".to_string(), "src".to_string()]);
    }
}

#[test]
fn validity_cache() {
    for (name, repo) in stores() {
        ingest(repo.as_ref(), "a", EXAMPLE);
        let ids: Vec<SentenceId> = repo.scope_occurrences(&Scope::All).unwrap().counts.into_keys().collect();
        assert!(repo.cached_validity(&ids, "v1").unwrap().is_empty());
        let entries: Vec<_> = ids.iter().map(|id| (*id, id.0 % 2 == 0)).collect();
        repo.store_validity(&entries, "v1").unwrap();
        let cached = repo.cached_validity(&ids, "v1").unwrap();
        assert_eq!(cached.len(), 3, "{name}");
        assert!(entries.iter().all(|(id, v)| cached[id] == *v));
        assert!(repo.cached_validity(&ids, "v2").unwrap().is_empty());
    }
}

#[test]
fn sqlite_persists_across_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.db");
    {
        let repo = SqliteStore::open(&path).unwrap();
        ingest(&repo, "a", EXAMPLE);
    }
    let repo = SqliteStore::open(&path).unwrap();
    assert!(repo.find_sentence(PARROT, "en").unwrap().is_some());
    assert_eq!(repo.document_refs().unwrap().len(), 1);
}

#[test]
fn concurrent_ingest_then_dedup() {
    use std::sync::Arc;
    let texts: Vec<String> = (0..40)
        .map(|i| format!("Shared start. Item {}. Shared end.", i % 5))
        .collect();
    for (name, repo) in stores() {
        let repo: Arc<dyn Repository> = Arc::from(repo);
        std::thread::scope(|scope| {
            for chunk in texts.chunks(5).enumerate() {
                let repo = Arc::clone(&repo);
                scope.spawn(move || {
                    for (j, t) in chunk.1.iter().enumerate() {
                        ingest(repo.as_ref(), &format!("d{}-{j}", chunk.0), t);
                    }
                });
            }
        });
        repo.dedup_pass(None).unwrap();
        let occ = repo.scope_occurrences(&Scope::All).unwrap();
        assert_eq!(occ.counts.len(), 7, "{name}");
        assert_eq!(occ.counts.values().sum::<u64>(), 120);
        assert!(repo.audit().unwrap().is_clean());
    }
}
