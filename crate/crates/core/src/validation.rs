//! Rule-based sentence validation.
//!
//! The rules are cheap structural checks aimed at extraction debris (stray
//! glyphs from tables, formulas and page furniture). They make no attempt at
//! grammar checking.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{compute_md5, Repository, Scope, Sentence, SentenceId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRule {
    pub rule_id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

fn enabled_default() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub valid: bool,
    pub failed_rule_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RuleKind {
    NonEmpty,
    MaxChars,
    TokenCount,
    AlphaRatio,
    FirstChar,
    TerminalPunctuation,
    SingleCharRun,
    BalancedPairs,
    MaxTokenLen,
}

impl RuleKind {
    fn from_id(id: &str) -> Option<Self> {
        Some(match id {
            "non_empty" => Self::NonEmpty,
            "max_chars" => Self::MaxChars,
            "token_count" => Self::TokenCount,
            "alpha_ratio" => Self::AlphaRatio,
            "first_char" => Self::FirstChar,
            "terminal_punctuation" => Self::TerminalPunctuation,
            "single_char_run" => Self::SingleCharRun,
            "balanced_pairs" => Self::BalancedPairs,
            "max_token_len" => Self::MaxTokenLen,
            _ => return None,
        })
    }

    fn required_parameters(self) -> &'static [&'static str] {
        match self {
            Self::MaxChars | Self::MaxTokenLen => &["max"],
            Self::TokenCount => &["min", "max"],
            Self::AlphaRatio => &["min"],
            Self::SingleCharRun => &["max_run"],
            _ => &[],
        }
    }
}

const OPENING_QUOTES: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '\u{ab}'];
const CLOSING_QUOTES: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', '\u{bb}'];

/// An ordered, versioned collection of rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub name: String,
    #[serde(rename = "rule")]
    pub rules: Vec<ValidationRule>,
}

impl Default for RuleSet {
    fn default() -> Self {
        let rule = |id: &str, description: &str, params: &[(&str, f64)]| ValidationRule {
            rule_id: id.to_string(),
            description: description.to_string(),
            enabled: true,
            parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        RuleSet {
            name: "default".into(),
            rules: vec![
                rule("non_empty", "not empty after trimming", &[]),
                rule("max_chars", "at most `max` characters", &[("max", 2000.0)]),
                rule("token_count", "between `min` and `max` tokens", &[("min", 1.0), ("max", 200.0)]),
                rule(
                    "alpha_ratio",
                    "share of alphabetic characters among non-whitespace is at least `min`",
                    &[("min", 0.5)],
                ),
                rule("first_char", "starts with a letter, digit or opening quote", &[]),
                rule(
                    "terminal_punctuation",
                    "ends with . ! or ?, optionally followed by closing quotes",
                    &[],
                ),
                rule(
                    "single_char_run",
                    "no run of `max_run` or more single-character tokens",
                    &[("max_run", 5.0)],
                ),
                rule("balanced_pairs", "balanced round brackets and double quotes", &[]),
                rule("max_token_len", "no token longer than `max` characters", &[("max", 50.0)]),
            ],
        }
    }
}

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<Self> {
        let set: RuleSet = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        set.check()?;
        Ok(set)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("rule set serializes")
    }

    fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.rules {
            let kind = RuleKind::from_id(&r.rule_id)
                .ok_or_else(|| Error::Config(format!("unknown rule {:?}", r.rule_id)))?;
            if !seen.insert(r.rule_id.as_str()) {
                return Err(Error::Config(format!("duplicate rule {:?}", r.rule_id)));
            }
            for p in kind.required_parameters() {
                if !r.parameters.contains_key(*p) {
                    return Err(Error::Config(format!("rule {:?} needs parameter {p:?}", r.rule_id)));
                }
            }
        }
        Ok(())
    }

    /// `name-xxxxxxxx`, where the suffix hashes the rule definitions, so any
    /// edit to ids, flags or parameters yields a new version.
    pub fn version(&self) -> String {
        let canonical: Vec<_> = self
            .rules
            .iter()
            .map(|r| (&r.rule_id, r.enabled, &r.parameters))
            .collect();
        let json = serde_json::to_string(&canonical).expect("rules serialize");
        format!("{}-{}", self.name, &compute_md5(&json)[..8])
    }

    pub fn set_enabled(&mut self, rule_id: &str, enabled: bool) -> Result<()> {
        let rule = self
            .rules
            .iter_mut()
            .find(|r| r.rule_id == rule_id)
            .ok_or_else(|| Error::Config(format!("unknown rule {rule_id:?}")))?;
        rule.enabled = enabled;
        Ok(())
    }
}

fn passes(kind: RuleKind, params: &BTreeMap<String, f64>, text: &str, tokens: &[&str]) -> bool {
    let p = |k: &str| params.get(k).copied().unwrap_or(0.0);
    let trimmed = text.trim();
    match kind {
        RuleKind::NonEmpty => !trimmed.is_empty(),
        RuleKind::MaxChars => text.chars().count() as f64 <= p("max"),
        RuleKind::TokenCount => {
            let n = tokens.len() as f64;
            n >= p("min") && n <= p("max")
        }
        RuleKind::AlphaRatio => {
            let (mut alpha, mut total) = (0usize, 0usize);
            for c in text.chars().filter(|c| !c.is_whitespace()) {
                total += 1;
                if c.is_alphabetic() {
                    alpha += 1;
                }
            }
            total > 0 && alpha as f64 >= p("min") * total as f64
        }
        RuleKind::FirstChar => trimmed
            .chars()
            .next()
            .is_some_and(|c| c.is_alphanumeric() || OPENING_QUOTES.contains(&c)),
        RuleKind::TerminalPunctuation => trimmed
            .trim_end_matches(CLOSING_QUOTES)
            .ends_with(['.', '!', '?']),
        RuleKind::SingleCharRun => {
            let limit = p("max_run");
            let mut run = 0.0;
            for t in tokens {
                if t.chars().count() == 1 {
                    run += 1.0;
                    if run >= limit {
                        return false;
                    }
                } else {
                    run = 0.0;
                }
            }
            true
        }
        RuleKind::BalancedPairs => {
            let mut depth = 0i64;
            let mut open_curly = 0i64;
            let mut straight = 0usize;
            for c in text.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth < 0 {
                            return false;
                        }
                    }
                    '"' => straight += 1,
                    '\u{201c}' => open_curly += 1,
                    '\u{201d}' => {
                        open_curly -= 1;
                        if open_curly < 0 {
                            return false;
                        }
                    }
                    _ => {}
                }
            }
            depth == 0 && open_curly == 0 && straight % 2 == 0
        }
        RuleKind::MaxTokenLen => tokens.iter().all(|t| t.chars().count() as f64 <= p("max")),
    }
}

/// Evaluates every enabled rule; the report lists all failures.
pub fn validate_sentence(text: &str, rules: &RuleSet) -> ValidationReport {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let failed_rule_ids: Vec<String> = rules
        .rules
        .iter()
        .filter(|r| r.enabled)
        .filter(|r| match RuleKind::from_id(&r.rule_id) {
            Some(kind) => !passes(kind, &r.parameters, text, &tokens),
            None => true,
        })
        .map(|r| r.rule_id.clone())
        .collect();
    ValidationReport {
        valid: failed_rule_ids.is_empty(),
        failed_rule_ids,
    }
}

/// Validity of each sentence id, served from the store's cache where the
/// rule-set version matches and computed (then cached) otherwise.
pub fn validity_map(repo: &dyn Repository, ids: &[SentenceId], rules: &RuleSet) -> Result<HashMap<SentenceId, bool>> {
    let version = rules.version();
    let mut out = repo.cached_validity(ids, &version)?;
    let missing: Vec<SentenceId> = ids.iter().filter(|id| !out.contains_key(id)).copied().collect();
    if missing.is_empty() {
        return Ok(out);
    }
    let sentences = repo.sentences_by_id(&missing)?;
    let fresh: Vec<(SentenceId, bool)> = sentences
        .par_iter()
        .map(|s| (s.id, validate_sentence(&s.plain_text, rules).valid))
        .collect();
    repo.store_validity(&fresh, &version)?;
    out.extend(fresh);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusValidation {
    pub distinct_checked: u64,
    pub distinct_valid: u64,
    pub valid_pct: Option<f64>,
    pub rule_set_version: String,
}

pub fn validate_corpus(repo: &dyn Repository, scope: &Scope, rules: &RuleSet) -> Result<CorpusValidation> {
    let ids: Vec<SentenceId> = repo.scope_occurrences(scope)?.counts.into_keys().collect();
    let validity = validity_map(repo, &ids, rules)?;
    let valid = validity.values().filter(|v| **v).count() as u64;
    let checked = ids.len() as u64;
    Ok(CorpusValidation {
        distinct_checked: checked,
        distinct_valid: valid,
        valid_pct: (checked > 0).then(|| 100.0 * valid as f64 / checked as f64),
        rule_set_version: rules.version(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampledReport {
    pub sentence: Sentence,
    pub report: ValidationReport,
}

/// Reports for the first `n` distinct sentences of the scope, by id.
pub fn sample_reports(repo: &dyn Repository, scope: &Scope, n: usize, rules: &RuleSet) -> Result<Vec<SampledReport>> {
    let mut ids: Vec<SentenceId> = repo.scope_occurrences(scope)?.counts.into_keys().collect();
    ids.sort();
    ids.truncate(n);
    Ok(repo
        .sentences_by_id(&ids)?
        .into_iter()
        .map(|sentence| {
            let report = validate_sentence(&sentence.plain_text, rules);
            SampledReport { sentence, report }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{ingest_document, MemoryStore, NewDocument};
    use crate::testdata::{EXAMPLE, PARROT};
    use crate::tokenizer::Tokenizer;
    use proptest::prelude::*;

    fn failed(text: &str) -> Vec<String> {
        validate_sentence(text, &RuleSet::default()).failed_rule_ids
    }

    #[test]
    fn well_formed_sentence_passes() {
        assert!(failed(PARROT).is_empty());
        assert!(failed("\u{201c}Quoted speech,\u{201d} she said.").is_empty());
        assert!(failed("He asked \"why?\"").is_empty());
        assert!(failed("42 is the answer.").is_empty());
    }

    #[test]
    fn garbage_excerpt_fails() {
        let f = failed("s c [ 3 v 1 0 0 0 0 .");
        assert!(f.contains(&"alpha_ratio".to_string()));
        assert!(f.contains(&"single_char_run".to_string()));
    }

    #[test]
    fn empty_fails() {
        let r = validate_sentence("", &RuleSet::default());
        assert!(!r.valid);
        assert!(r.failed_rule_ids.contains(&"non_empty".to_string()));
    }

    #[test]
    fn individual_rules() {
        assert_eq!(failed("no terminator here"), vec!["terminal_punctuation"]);
        assert_eq!(failed("- dash start."), vec!["first_char"]);
        assert_eq!(failed("Unbalanced (bracket."), vec!["balanced_pairs"]);
        assert_eq!(failed("Odd \"quote."), vec!["balanced_pairs"]);
        assert_eq!(failed(&format!("A {}.", "x".repeat(60))), vec!["max_token_len"]);
        assert_eq!(failed(&format!("{}.", "word ".repeat(250).trim())), vec!["token_count"]);
        assert!(failed(&format!("{}.", "abcdefghij ".repeat(220).trim())).contains(&"max_chars".to_string()));
        assert!(failed("The a b c d e end.").contains(&"single_char_run".to_string()));
        assert!(failed("The a b c d end.").is_empty());
    }

    #[test]
    fn toggling_and_versions() {
        let mut rules = RuleSet::default();
        let v1 = rules.version();
        assert!(v1.starts_with("default-"));
        assert_eq!(v1.len(), "default-".len() + 8);
        rules.set_enabled("terminal_punctuation", false).unwrap();
        assert_ne!(rules.version(), v1);
        assert!(validate_sentence("no terminator here", &rules).valid);
        assert!(rules.set_enabled("nope", false).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let rules = RuleSet::default();
        let text = rules.to_toml();
        let back = RuleSet::from_toml(&text).unwrap();
        assert_eq!(back, rules);
        assert_eq!(back.version(), rules.version());

        let custom = "name = \"strict\"\n[[rule]]\nrule_id = \"max_chars\"\nparameters = { max = 10 }\n";
        let strict = RuleSet::from_toml(custom).unwrap();
        assert!(!validate_sentence("Longer than ten.", &strict).valid);
        assert!(RuleSet::from_toml("name = \"x\"\n[[rule]]\nrule_id = \"bogus\"\n").is_err());
        assert!(RuleSet::from_toml("name = \"x\"\n[[rule]]\nrule_id = \"max_chars\"\n").is_err());
        let dup = "name = \"x\"\n[[rule]]\nrule_id = \"non_empty\"\n[[rule]]\nrule_id = \"non_empty\"\n";
        assert!(RuleSet::from_toml(dup).is_err());
    }

    #[test]
    fn corpus_validation_with_cache() {
        let repo = MemoryStore::new();
        let t = Tokenizer::default();
        ingest_document(&repo, &t, &NewDocument::text("s", "parrots", EXAMPLE)).unwrap();
        let rules = RuleSet::default();
        let r = validate_corpus(&repo, &Scope::All, &rules).unwrap();
        assert_eq!((r.distinct_checked, r.distinct_valid), (3, 3));
        assert_eq!(r.valid_pct, Some(100.0));
        let ids: Vec<_> = repo.scope_occurrences(&Scope::All).unwrap().counts.into_keys().collect();
        assert_eq!(repo.cached_validity(&ids, &rules.version()).unwrap().len(), 3);
        assert_eq!(sample_reports(&repo, &Scope::All, 2, &rules).unwrap().len(), 2);
    }

    #[test]
    fn half_garbage_corpus() {
        let repo = MemoryStore::new();
        let t = Tokenizer::default();
        let mut text = String::new();
        for i in 0..20 {
            text.push_str(&format!("Clean sentence number {i} reads well.\n\n"));
            text.push_str(&format!("s c [ {i} v 1 0 0 .\n\n"));
            text.push_str(&format!("x {i} = ( y .\n\n"));
        }
        for i in 0..20 {
            text.push_str(&format!("Another clean line {i} is here.\n\n"));
        }
        ingest_document(&repo, &t, &NewDocument::text("s", "mix", &text)).unwrap();
        let r = validate_corpus(&repo, &Scope::All, &RuleSet::default()).unwrap();
        assert_eq!(r.distinct_checked, 80);
        assert_eq!(r.valid_pct, Some(50.0));
    }

    proptest! {
        #[test]
        fn deterministic(text in "\\PC{0,80}") {
            let rules = RuleSet::default();
            let a = validate_sentence(&text, &rules);
            prop_assert_eq!(&a, &validate_sentence(&text, &rules));
            prop_assert_eq!(a.valid, a.failed_rule_ids.is_empty());
        }
    }
}
