//! Search-only translation: every input sentence is looked up verbatim and
//! reported with its stored translations, if any. Segments are returned in
//! order; paragraphs are not reconstructed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::PlainText;
use crate::store::{rank_translations, Repository, SentenceId, SentenceTranslation, TranslationId};
use crate::tokenizer::Tokenizer;

/// Supported `(source, target)` language pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguagePairs(BTreeSet<(String, String)>);

impl Default for LanguagePairs {
    fn default() -> Self {
        "en-pt,pt-en".parse().expect("default pairs parse")
    }
}

impl std::str::FromStr for LanguagePairs {
    type Err = Error;

    /// Comma-separated `src-tgt` entries, e.g. `en-pt,pt-en`.
    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = BTreeSet::new();
        for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (src, tgt) = entry
                .split_once('-')
                .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                .ok_or_else(|| Error::Config(format!("language pair {entry:?} is not of the form src-tgt")))?;
            pairs.insert((src.to_string(), tgt.to_string()));
        }
        if pairs.is_empty() {
            return Err(Error::Config("no language pairs configured".into()));
        }
        Ok(Self(pairs))
    }
}

impl LanguagePairs {
    pub fn supports(&self, source: &str, target: &str) -> bool {
        self.0.contains(&(source.to_string(), target.to_string()))
    }

    pub fn describe(&self) -> Vec<String> {
        self.0.iter().map(|(s, t)| format!("{s}-{t}")).collect()
    }

    pub fn check(&self, source: &str, target: &str) -> Result<()> {
        if self.supports(source, target) {
            return Ok(());
        }
        Err(Error::UnsupportedLanguagePair {
            source_lang: source.to_string(),
            target_lang: target.to_string(),
            supported: self.describe(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentStatus {
    Translated,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslationSegment {
    pub sentence_text: String,
    pub start_offset: u32,
    pub status: SegmentStatus,
    /// Set when the sentence is stored, even without translations.
    pub sentence_id: Option<SentenceId>,
    /// Best first.
    pub candidates: Vec<SentenceTranslation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslationResult {
    pub segments: Vec<TranslationSegment>,
    pub coverage_pct: Option<f64>,
    pub source_language: String,
    pub target_language: String,
}

pub fn translate_text(
    repo: &dyn Repository,
    tokenizer: &Tokenizer,
    pairs: &LanguagePairs,
    text: &PlainText,
    source_language: &str,
    target_language: &str,
) -> Result<TranslationResult> {
    pairs.check(source_language, target_language)?;
    let sentences = tokenizer.split(text);
    let mut segments = Vec::with_capacity(sentences.len());
    for (start_offset, sentence) in sentences.iter() {
        let stored = repo.find_sentence(sentence, source_language)?;
        let mut candidates = match &stored {
            Some(s) => repo.translations(s.id, Some(target_language))?,
            None => Vec::new(),
        };
        rank_translations(&mut candidates);
        segments.push(TranslationSegment {
            sentence_text: sentence.to_string(),
            start_offset,
            status: if candidates.is_empty() {
                SegmentStatus::Missing
            } else {
                SegmentStatus::Translated
            },
            sentence_id: stored.map(|s| s.id),
            candidates,
        });
    }
    let translated = segments
        .iter()
        .filter(|s| s.status == SegmentStatus::Translated)
        .count();
    Ok(TranslationResult {
        coverage_pct: (!segments.is_empty()).then(|| 100.0 * translated as f64 / segments.len() as f64),
        segments,
        source_language: source_language.to_string(),
        target_language: target_language.to_string(),
    })
}

/// Stores a translation, or endorses an identical one. The sentence's
/// language and `target_language` must form a supported pair.
pub fn add_translation(
    repo: &dyn Repository,
    pairs: &LanguagePairs,
    sentence: SentenceId,
    target_language: &str,
    text: &str,
    contributor: &str,
) -> Result<SentenceTranslation> {
    let stored = repo
        .sentences_by_id(&[sentence])?
        .pop()
        .ok_or_else(|| Error::not_found(SentenceId::KIND, sentence))?;
    pairs.check(&stored.language_tag, target_language)?;
    if contributor.trim().is_empty() {
        return Err(Error::Validation("contributor must not be empty".into()));
    }
    repo.add_translation(sentence, target_language, text.trim(), contributor.trim())
}

pub fn vote_translation(repo: &dyn Repository, id: TranslationId) -> Result<SentenceTranslation> {
    repo.vote_translation(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{ingest_document, MemoryStore, NewDocument};
    use crate::testdata::{EXAMPLE, PARROT};

    fn setup() -> (MemoryStore, Tokenizer, LanguagePairs) {
        let repo = MemoryStore::new();
        let t = Tokenizer::default();
        ingest_document(&repo, &t, &NewDocument::text("s", "parrots", EXAMPLE)).unwrap();
        (repo, t, LanguagePairs::default())
    }

    fn translate(repo: &MemoryStore, t: &Tokenizer, p: &LanguagePairs, text: &str) -> TranslationResult {
        translate_text(repo, t, p, &PlainText::new(text), "en", "pt").unwrap()
    }

    #[test]
    fn half_covered_example() {
        let (repo, t, p) = setup();
        let parrot = repo.find_sentence(PARROT, "en").unwrap().unwrap();
        add_translation(&repo, &p, parrot.id, "pt", "Quando papagaios o fazem, é papaguear.", "ana").unwrap();
        let r = translate(&repo, &t, &p, EXAMPLE);
        let status: Vec<SegmentStatus> = r.segments.iter().map(|s| s.status).collect();
        use SegmentStatus::*;
        assert_eq!(status, vec![Translated, Missing, Missing, Translated]);
        assert_eq!(r.coverage_pct, Some(50.0));
        assert!(r.segments[1].sentence_id.is_some());
    }

    #[test]
    fn empty_and_full_coverage() {
        let (repo, t, p) = setup();
        let r = translate(&repo, &t, &p, "");
        assert!(r.segments.is_empty());
        assert_eq!(r.coverage_pct, None);
        let s = repo.find_sentence(PARROT, "en").unwrap().unwrap();
        add_translation(&repo, &p, s.id, "pt", "Papagaios.", "x").unwrap();
        assert_eq!(translate(&repo, &t, &p, PARROT).coverage_pct, Some(100.0));
        let unknown = translate(&repo, &t, &p, "Never stored.");
        assert_eq!(unknown.segments[0].sentence_id, None);
    }

    #[test]
    fn ranking_follows_votes() {
        let (repo, t, p) = setup();
        let s = repo.find_sentence(PARROT, "en").unwrap().unwrap();
        let a = add_translation(&repo, &p, s.id, "pt", "Primeira.", "x").unwrap();
        let b = add_translation(&repo, &p, s.id, "pt", "Segunda.", "y").unwrap();
        let r = translate(&repo, &t, &p, PARROT);
        assert_eq!(r.segments[0].candidates[0].id, b.id, "newest first on equal votes");
        for _ in 0..3 {
            vote_translation(&repo, a.id).unwrap();
        }
        vote_translation(&repo, b.id).unwrap();
        let r = translate(&repo, &t, &p, PARROT);
        assert_eq!(r.segments[0].candidates[0].id, a.id);
        assert_eq!(r.segments[0].candidates[0].votes, 3);
    }

    #[test]
    fn unsupported_pairs() {
        let (repo, t, p) = setup();
        let err = translate_text(&repo, &t, &p, &PlainText::new(PARROT), "en", "de").unwrap_err();
        match err {
            Error::UnsupportedLanguagePair { supported, .. } => assert_eq!(supported, vec!["en-pt", "pt-en"]),
            other => panic!("unexpected {other:?}"),
        }
        let s = repo.find_sentence(PARROT, "en").unwrap().unwrap();
        assert!(add_translation(&repo, &p, s.id, "de", "Papageien.", "x").is_err());
        assert!(add_translation(&repo, &p, s.id, "pt", "Ok.", " ").is_err());
        assert!("en".parse::<LanguagePairs>().is_err());
        assert!("en-de, de-en".parse::<LanguagePairs>().unwrap().supports("de", "en"));
    }
}
