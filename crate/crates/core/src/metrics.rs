//! Sentence-repetition statistics over a scope of documents.
//!
//! A distinct sentence "has repetitions" when it occurs more than once inside
//! the requested scope, regardless of which documents the occurrences are in.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{Repository, SentenceId};
use crate::validation::{self, RuleSet};

pub use crate::store::Scope;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusMetrics {
    pub documents: u64,
    pub text_characters: u64,
    pub text_bytes: u64,
    pub sentences: u64,
    pub distinct_sentences: u64,
    pub distinct_pct: Option<f64>,
    pub d_sentences_with_repetitions: u64,
    pub with_repetitions_pct: Option<f64>,
    pub unique_d_sentences: u64,
    pub unique_pct: Option<f64>,
    pub non_unique_pct: Option<f64>,
    pub valid_only: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rule_set_version: Option<String>,
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

impl CorpusMetrics {
    /// Builds metrics from the per-sentence occurrence counts of a scope.
    pub fn from_counts(
        documents: u64,
        text_characters: u64,
        text_bytes: u64,
        counts: impl IntoIterator<Item = u64>,
    ) -> Self {
        let mut m = CorpusMetrics {
            documents,
            text_characters,
            text_bytes,
            ..Default::default()
        };
        for c in counts {
            if c == 0 {
                continue;
            }
            m.sentences += c;
            m.distinct_sentences += 1;
            if c == 1 {
                m.unique_d_sentences += 1;
            } else {
                m.d_sentences_with_repetitions += 1;
            }
        }
        m.distinct_pct = pct(m.distinct_sentences, m.sentences);
        m.with_repetitions_pct = pct(m.d_sentences_with_repetitions, m.distinct_sentences);
        m.unique_pct = pct(m.unique_d_sentences, m.distinct_sentences);
        m.non_unique_pct = pct(m.sentences - m.unique_d_sentences, m.sentences);
        m
    }

    /// Aligned two-column rendering with percentages at two decimals.
    pub fn render_table(&self) -> String {
        let fmt_pct = |p: Option<f64>| p.map_or_else(|| "-".to_string(), |v| format!("{v:.2}%"));
        let (d, dv) = if self.valid_only { ("d.v.", "valid ") } else { ("d.", "") };
        let rows = [
            ("documents".to_string(), self.documents.to_string()),
            ("#text characters".to_string(), self.text_characters.to_string()),
            (format!("#{dv}sentences"), self.sentences.to_string()),
            (format!("#{d}sentences"), self.distinct_sentences.to_string()),
            (format!("%{d}sentences"), fmt_pct(self.distinct_pct)),
            (
                format!("#{d}sentences with repetitions"),
                self.d_sentences_with_repetitions.to_string(),
            ),
            (format!("%{d}sentences with repetitions"), fmt_pct(self.with_repetitions_pct)),
            (format!("#unique {d}sentences"), self.unique_d_sentences.to_string()),
            (format!("%unique {d}sentences"), fmt_pct(self.unique_pct)),
            (format!("%non-unique {dv}sentences"), fmt_pct(self.non_unique_pct)),
        ];
        let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>14}");
        }
        if let Some(v) = &self.rule_set_version {
            let _ = writeln!(out, "{:<width$}  {v:>14}", "rule set");
        }
        out
    }
}

/// Computes metrics over `scope`; with `rules`, only sentences the rule set
/// accepts are counted.
pub fn compute_metrics(repo: &dyn Repository, scope: &Scope, rules: Option<&RuleSet>) -> Result<CorpusMetrics> {
    let occ = repo.scope_occurrences(scope)?;
    let Some(rules) = rules else {
        return Ok(CorpusMetrics::from_counts(
            occ.documents,
            occ.text_characters,
            occ.text_bytes,
            occ.counts.into_values(),
        ));
    };
    let ids: Vec<SentenceId> = occ.counts.keys().copied().collect();
    let validity = validation::validity_map(repo, &ids, rules)?;
    let counts = occ
        .counts
        .iter()
        .filter(|(id, _)| validity.get(id).copied().unwrap_or(false))
        .map(|(_, c)| *c);
    let mut m = CorpusMetrics::from_counts(occ.documents, occ.text_characters, occ.text_bytes, counts);
    m.valid_only = true;
    m.rule_set_version = Some(rules.version());
    Ok(m)
}

fn distinct_in_source(repo: &dyn Repository, source: &str) -> Result<HashSet<SentenceId>> {
    Ok(repo
        .scope_occurrences(&Scope::Source(source.to_string()))?
        .counts
        .into_keys()
        .collect())
}

/// Number of distinct sentences referenced by both sources.
pub fn common_distinct_sentences(repo: &dyn Repository, a: &str, b: &str) -> Result<u64> {
    let sa = distinct_in_source(repo, a)?;
    if a == b {
        return Ok(sa.len() as u64);
    }
    let sb = distinct_in_source(repo, b)?;
    Ok(sa.intersection(&sb).count() as u64)
}

/// Number of distinct sentences referenced by every listed source.
pub fn common_distinct_all(repo: &dyn Repository, sources: &[String]) -> Result<u64> {
    let Some((first, rest)) = sources.split_first() else {
        return Err(Error::Validation("at least one source is required".into()));
    };
    let mut common = distinct_in_source(repo, first)?;
    for s in rest {
        let other = distinct_in_source(repo, s)?;
        common.retain(|id| other.contains(id));
    }
    Ok(common.len() as u64)
}

/// Pairwise common-sentence counts, lower triangle including the diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommonMatrix {
    pub sources: Vec<String>,
    /// `rows[i][j]` for `j <= i`.
    pub rows: Vec<Vec<u64>>,
    pub all_sources: u64,
}

impl CommonMatrix {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        if j <= i {
            self.rows[i][j]
        } else {
            self.rows[j][i]
        }
    }

    pub fn render(&self) -> String {
        let w = self
            .sources
            .iter()
            .map(|s| s.chars().count())
            .chain(self.rows.iter().flatten().map(|n| n.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(11);
        let mut out = format!("{:<w$}", "");
        for s in &self.sources {
            let _ = write!(out, "  {s:>w$}");
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{:<w$}", self.sources[i]);
            for n in row {
                let _ = write!(out, "  {n:>w$}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{:<w$}  {:>w$}", "all sources", self.all_sources);
        out
    }
}

pub fn common_matrix(repo: &dyn Repository, sources: &[String]) -> Result<CommonMatrix> {
    if sources.is_empty() {
        return Err(Error::Validation("at least one source is required".into()));
    }
    let sets = sources
        .iter()
        .map(|s| distinct_in_source(repo, s))
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..sets.len())
        .map(|i| {
            (0..=i)
                .map(|j| sets[i].intersection(&sets[j]).count() as u64)
                .collect()
        })
        .collect();
    let mut all: HashSet<SentenceId> = sets[0].clone();
    for s in &sets[1..] {
        all.retain(|id| s.contains(id));
    }
    Ok(CommonMatrix {
        sources: sources.to_vec(),
        rows,
        all_sources: all.len() as u64,
    })
}

/// Occurrence counts of a scope keyed by sentence id, for callers that need
/// the raw distribution.
pub fn occurrence_histogram(repo: &dyn Repository, scope: &Scope) -> Result<HashMap<u64, u64>> {
    let mut hist = HashMap::new();
    for c in repo.scope_occurrences(scope)?.counts.into_values() {
        *hist.entry(c).or_default() += 1;
    }
    Ok(hist)
}
