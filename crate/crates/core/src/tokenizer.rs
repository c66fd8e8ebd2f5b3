//! Rule-based sentence splitting.
//!
//! A boundary is placed after `.`, `!` or `?` (optionally followed by closing
//! quotes or brackets) when the next word starts with an uppercase letter, a
//! digit, or an opening quote or bracket. Blank lines always end a sentence,
//! and so does the end of the text. Words from the abbreviation list never end
//! a sentence, and an ellipsis ends one only before an uppercase letter.
//!
//! Splitting must be stable across runs: every repetition count depends on it.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', '\u{bb}', ')', ']', '}'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '\u{ab}', '(', '['];
const TERMINATORS: &[char] = &['.', '!', '?'];
const ELLIPSIS: char = '\u{2026}';

/// Sentences in text order; a sentence's position is its sequence number.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SentenceList {
    sentences: Vec<String>,
}

impl SentenceList {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// `(start_offset, sentence)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (i as u32, s.as_str()))
    }

    pub fn as_slice(&self) -> &[String] {
        &self.sentences
    }

    pub fn into_vec(self) -> Vec<String> {
        self.sentences
    }
}

impl std::ops::Index<usize> for SentenceList {
    type Output = str;

    fn index(&self, i: usize) -> &str {
        &self.sentences[i]
    }
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    abbreviations: HashSet<String>,
    multiword: Vec<Vec<String>>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::from_abbreviations(DEFAULT_ABBREVIATIONS)
    }
}

impl Tokenizer {
    /// Builds a tokenizer from an abbreviation list: one entry per line, `#`
    /// starts a comment line.
    pub fn from_abbreviations(list: &str) -> Self {
        let mut abbreviations = HashSet::new();
        let mut multiword = Vec::new();
        for line in list.lines() {
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            let words: Vec<String> = entry.split_whitespace().map(str::to_string).collect();
            if words.len() > 1 {
                multiword.push(words);
            } else {
                if let Some(cap) = capitalized(entry) {
                    abbreviations.insert(cap);
                }
                abbreviations.insert(entry.to_string());
            }
        }
        Self {
            abbreviations,
            multiword,
        }
    }

    pub fn from_abbreviation_file(path: &Path) -> Result<Self> {
        Ok(Self::from_abbreviations(&std::fs::read_to_string(path)?))
    }

    pub fn split(&self, text: &str) -> SentenceList {
        let mut sentences = Vec::new();
        let mut words: Vec<&str> = Vec::new();
        for line in text.split('\n') {
            if line.trim().is_empty() {
                self.split_paragraph(&words, &mut sentences);
                words.clear();
            } else {
                words.extend(line.split_whitespace());
            }
        }
        self.split_paragraph(&words, &mut sentences);
        SentenceList { sentences }
    }

    fn split_paragraph(&self, words: &[&str], out: &mut Vec<String>) {
        let mut start = 0;
        for i in 0..words.len() {
            let ends = match words.get(i + 1) {
                Some(next) => self.is_boundary(&words[start..=i], next),
                None => true,
            };
            if ends {
                out.push(words[start..=i].join(" "));
                start = i + 1;
            }
        }
    }

    /// `sentence` is the current sentence so far, ending in the candidate word.
    fn is_boundary(&self, sentence: &[&str], next: &str) -> bool {
        let word = sentence[sentence.len() - 1];
        let core = word.trim_end_matches(CLOSERS);
        let Some(last) = core.chars().last() else {
            return false;
        };

        let next_first = next.chars().next().unwrap_or(' ');
        let next_upper = next_first.is_uppercase();

        if last == ELLIPSIS || core.ends_with("..") {
            return next_upper;
        }
        if !TERMINATORS.contains(&last) {
            return false;
        }
        if last == '.' && self.is_abbreviation(sentence) {
            return false;
        }
        next_upper || next_first.is_ascii_digit() || OPENERS.contains(&next_first)
    }

    fn is_abbreviation(&self, sentence: &[&str]) -> bool {
        let word = sentence[sentence.len() - 1]
            .trim_end_matches(CLOSERS)
            .trim_start_matches(OPENERS);
        if self.abbreviations.contains(word) {
            return true;
        }
        self.multiword.iter().any(|entry| {
            entry.len() <= sentence.len()
                && entry
                    .iter()
                    .rev()
                    .zip(sentence.iter().rev())
                    .enumerate()
                    .all(|(i, (want, got))| {
                        let got = got.trim_start_matches(OPENERS);
                        let got = if i == 0 { got.trim_end_matches(CLOSERS) } else { got };
                        got == want || capitalized(want).as_deref() == Some(got)
                    })
        })
    }
}

fn capitalized(word: &str) -> Option<String> {
    let mut chars = word.chars();
    let first = chars.next()?;
    if !first.is_lowercase() {
        return None;
    }
    Some(first.to_uppercase().chain(chars).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use crate::testdata::EXAMPLE;

    fn split(text: &str) -> Vec<String> {
        Tokenizer::default().split(text).into_vec()
    }

    #[test]
    fn example_document_has_four_sentences() {
        let s = split(EXAMPLE);
        assert_eq!(s.len(), 4);
        assert_eq!(s[0], "When parrots do it, it's parroting.");
        assert_eq!(s[3], s[0]);
    }

    #[test]
    fn empty_input() {
        assert!(split("").is_empty());
        assert!(split(" \n\n\t ").is_empty());
    }

    #[test]
    fn abbreviation_suppresses_boundary() {
        assert_eq!(split("Dr. Smith arrived. He left."), vec!["Dr. Smith arrived.", "He left."]);
        assert_eq!(
            split("See the results of Smith et al. The end."),
            vec!["See the results of Smith et al. The end."]
        );
        assert_eq!(split("Apples, e.g. Fuji. Pears."), vec!["Apples, e.g. Fuji.", "Pears."]);
        assert_eq!(split("E.g. this works. Yes."), vec!["E.g. this works.", "Yes."]);
    }

    #[test]
    fn trailing_fragment_kept() {
        assert_eq!(split("No terminator"), vec!["No terminator"]);
    }

    #[test]
    fn blank_line_always_splits() {
        assert_eq!(split("Title\n\nBody starts here"), vec!["Title", "Body starts here"]);
        assert_eq!(split("a line\n   \nanother"), vec!["a line", "another"]);
    }

    #[test]
    fn single_line_break_joins() {
        assert_eq!(
            split("This sentence wraps\nonto the next line. Then   another."),
            vec!["This sentence wraps onto the next line.", "Then another."]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(split("It costs 3.5 dollars. really?"), vec!["It costs 3.5 dollars. really?"]);
    }

    #[test]
    fn quotes_digits_and_brackets() {
        assert_eq!(split("He said \"Stop.\" Then ran."), vec!["He said \"Stop.\"", "Then ran."]);
        assert_eq!(split("Count it. 42 items."), vec!["Count it.", "42 items."]);
        assert_eq!(split("Wow! \"Really?\" (Yes.)"), vec!["Wow!", "\"Really?\"", "(Yes.)"]);
    }

    #[test]
    fn ellipsis_needs_uppercase() {
        assert_eq!(split("Wait... \"what\" now."), vec!["Wait... \"what\" now."]);
        assert_eq!(split("Wait... 3 times."), vec!["Wait... 3 times."]);
        assert_eq!(split("Wait... Then go."), vec!["Wait...", "Then go."]);
        assert_eq!(split("Wait\u{2026} Then go."), vec!["Wait\u{2026}", "Then go."]);
    }

    #[test]
    fn custom_list() {
        let t = Tokenizer::from_abbreviations("# comment\nabc.\n");
        assert_eq!(t.split("Take abc. Then stop. Dr. Who.").len(), 3);
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    proptest! {
        #[test]
        fn deterministic_and_conserves_words(text in "[A-Za-z.!?\"' \n]{0,200}") {
            let t = Tokenizer::default();
            let a = t.split(&text);
            prop_assert_eq!(&a, &t.split(&text));
            let mut joined: Vec<String> = a.as_slice().iter().flat_map(|s| words(s)).collect();
            let mut original = words(&text);
            prop_assert_eq!(&joined, &original);
            joined.sort();
            original.sort();
            prop_assert_eq!(joined, original);
            prop_assert!(a.as_slice().iter().all(|s| !s.trim().is_empty() && s.trim() == s));
        }

        #[test]
        fn recovers_synthesized_sentences(
            parts in proptest::collection::vec(
                ("[A-Z][a-z]{0,7}", proptest::collection::vec("[a-z]{1,8}", 0..6), prop::sample::select(vec!['.', '!', '?'])),
                1..12)
        ) {
            let sentences: Vec<String> = parts
                .iter()
                .map(|(first, rest, end)| {
                    let mut s = std::iter::once(first.clone()).chain(rest.iter().cloned()).collect::<Vec<_>>().join(" ");
                    s.push(*end);
                    s
                })
                .collect();
            let t = Tokenizer::default();
            prop_assume!(sentences.iter().all(|s| {
                let w: Vec<&str> = s.split(' ').collect();
                !t.is_abbreviation(&w)
            }));
            let out = t.split(&sentences.join(" "));
            prop_assert_eq!(out.into_vec(), sentences);
        }
    }
}
