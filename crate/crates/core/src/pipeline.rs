//! Bulk ingestion of files with a worker pool.
//!
//! Reading, extraction, tokenization and hashing run in parallel; each
//! document is then committed atomically by the store. Concurrent commits may
//! create duplicate sentence rows, which a later dedup pass merges.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::extraction::{extract, HtmlExtractor, MediaType, RawContent};
use crate::projection::SnapshotGroup;
use crate::store::{prepare_sentences, DocumentId, IngestStats, NewDocument, Repository};
use crate::tokenizer::Tokenizer;

/// One file to ingest and the document name it is stored under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestJob {
    pub path: PathBuf,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub source_tag: String,
    pub language_tag: String,
    /// Overrides detection from the file extension.
    pub format: Option<MediaType>,
    pub workers: usize,
    pub html: HtmlExtractor,
}

impl IngestOptions {
    pub fn new(source_tag: impl Into<String>, language_tag: impl Into<String>) -> Self {
        Self {
            source_tag: source_tag.into(),
            language_tag: language_tag.into(),
            format: None,
            workers: 1,
            html: HtmlExtractor::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FileResult {
    pub path: String,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub document_id: Option<DocumentId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<IngestStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BatchReport {
    pub files: Vec<FileResult>,
    pub totals: IngestStats,
    pub succeeded: usize,
    pub failed: usize,
}

/// Expands files and directories into jobs, sorted by name. Files found in a
/// directory are named by their path relative to it; files given directly
/// keep the path as given. Inside directories, files whose type cannot be
/// detected are skipped unless `format` is set.
pub fn collect_files(paths: &[PathBuf], format: Option<MediaType>) -> Result<Vec<IngestJob>> {
    let mut jobs = Vec::new();
    for root in paths {
        if root.is_dir() {
            for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
                let entry = entry.map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
                if !entry.file_type().is_file() {
                    continue;
                }
                let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
                if rel.components().any(|c| c.as_os_str().to_string_lossy().starts_with('.')) {
                    continue;
                }
                if format.is_none() && MediaType::from_path(entry.path()).is_none() {
                    continue;
                }
                let name = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                jobs.push(IngestJob {
                    path: entry.path().to_path_buf(),
                    name,
                });
            }
        } else {
            jobs.push(IngestJob {
                path: root.clone(),
                name: root.to_string_lossy().into_owned(),
            });
        }
    }
    Ok(jobs)
}

fn ingest_file(repo: &dyn Repository, tokenizer: &Tokenizer, job: &IngestJob, opts: &IngestOptions) -> Result<(DocumentId, IngestStats)> {
    let media = opts
        .format
        .or_else(|| MediaType::from_path(&job.path))
        .ok_or_else(|| Error::UnsupportedMedia(job.path.display().to_string()))?;
    let bytes = std::fs::read(&job.path)?;
    let raw = RawContent::new(bytes, media.mime(), job.name.clone());
    let content = extract(&raw, &opts.html)?;
    let sentences = prepare_sentences(tokenizer, &content);
    let doc = NewDocument::new(
        opts.source_tag.clone(),
        job.name.clone(),
        media.mime(),
        opts.language_tag.clone(),
        content,
    );
    repo.ingest_prepared(&doc, &sentences)
}

/// Short machine-readable code for an error.
pub fn error_code(e: &Error) -> &'static str {
    match e {
        Error::NotFound { .. } | Error::UnknownSource(_) => "not_found",
        Error::AlreadyIngested { .. } => "already_ingested",
        Error::Validation(_) | Error::Domain(_) | Error::UnsupportedLanguagePair { .. } | Error::Config(_) => {
            "validation_failed"
        }
        Error::UnsupportedMedia(_) => "unsupported_media",
        Error::DegenerateFit(_) => "degenerate_fit",
        Error::NonInvertibleTrend { .. } => "non_invertible_trend",
        Error::Io(_) => "io",
        Error::Storage(_) => "internal",
    }
}

/// Ingests every job; failures are recorded per file and do not stop the
/// batch. Results keep the order of `jobs`.
pub fn ingest_batch(repo: &dyn Repository, tokenizer: &Tokenizer, jobs: &[IngestJob], opts: &IngestOptions) -> Result<BatchReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<FileResult> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let outcome = ingest_file(repo, tokenizer, job, opts);
                let mut r = FileResult {
                    path: job.path.display().to_string(),
                    name: job.name.clone(),
                    document_id: None,
                    stats: None,
                    error: None,
                    error_code: None,
                };
                match outcome {
                    Ok((id, stats)) => {
                        r.document_id = Some(id);
                        r.stats = Some(stats);
                    }
                    Err(e) => {
                        tracing::debug!(path = %r.path, error = %e, "ingest failed");
                        r.error_code = Some(error_code(&e).to_string());
                        r.error = Some(e.to_string());
                    }
                }
                r
            })
            .collect()
    });
    let mut report = BatchReport::default();
    for r in &results {
        match r.stats {
            Some(s) => {
                report.totals += s;
                report.succeeded += 1;
            }
            None => report.failed += 1,
        }
    }
    report.files = results;
    Ok(report)
}

/// One line of a snapshot plan: a label and document-name prefixes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    pub label: String,
    pub prefixes: Vec<String>,
}

/// Parses `label<TAB>prefix<TAB>prefix...` lines; `#` starts a comment.
pub fn parse_snapshot_plan(text: &str) -> Result<Vec<PlanEntry>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t').map(str::trim).filter(|f| !f.is_empty());
        let label = fields.next().unwrap_or_default().to_string();
        let prefixes: Vec<String> = fields.map(str::to_string).collect();
        if prefixes.is_empty() {
            return Err(Error::Validation(format!(
                "plan line {}: expected `label<TAB>prefix...`",
                i + 1
            )));
        }
        entries.push(PlanEntry { label, prefixes });
    }
    Ok(entries)
}

/// Resolves plan prefixes against stored document names, optionally within
/// one source.
pub fn resolve_plan(repo: &dyn Repository, plan: &[PlanEntry], source: Option<&str>) -> Result<Vec<SnapshotGroup>> {
    let docs = repo.document_refs()?;
    Ok(plan
        .iter()
        .map(|entry| SnapshotGroup {
            label: entry.label.clone(),
            documents: docs
                .iter()
                .filter(|d| source.map_or(true, |s| d.source_tag == s))
                .filter(|d| entry.prefixes.iter().any(|p| d.name.starts_with(p.as_str())))
                .map(|d| d.id)
                .collect(),
        })
        .collect())
}

pub fn read_snapshot_plan(path: &Path) -> Result<Vec<PlanEntry>> {
    parse_snapshot_plan(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, Scope};
    use crate::store::{MemoryStore, SqliteStore};
    use std::fs;

    fn corpus() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("2020")).unwrap();
        fs::create_dir_all(dir.path().join("2019")).unwrap();
        fs::write(dir.path().join("2020/a.txt"), "Shared line. Only a.").unwrap();
        fs::write(dir.path().join("2020/b.html"), "<p>Shared line.</p><p>Only b.</p>").unwrap();
        fs::write(dir.path().join("2019/c.txt"), "Shared line. Only c.").unwrap();
        fs::write(dir.path().join("2019/notes.bin"), [0u8, 1, 2]).unwrap();
        fs::write(dir.path().join(".hidden.txt"), "Hidden.").unwrap();
        dir
    }

    #[test]
    fn collects_and_names_relative() {
        let dir = corpus();
        let jobs = collect_files(&[dir.path().to_path_buf()], None).unwrap();
        let names: Vec<&str> = jobs.iter().map(|j| j.name.as_str()).collect();
        assert_eq!(names, vec!["2019/c.txt", "2020/a.txt", "2020/b.html"]);
        let forced = collect_files(&[dir.path().to_path_buf()], Some(MediaType::Text)).unwrap();
        assert_eq!(forced.len(), 4);
    }

    #[test]
    fn batch_with_failures_and_rerun() {
        let dir = corpus();
        let repo = MemoryStore::new();
        let t = Tokenizer::default();
        let mut jobs = collect_files(&[dir.path().to_path_buf()], None).unwrap();
        jobs.push(IngestJob {
            path: dir.path().join("missing.txt"),
            name: "missing.txt".into(),
        });
        let mut opts = IngestOptions::new("arxiv", "en");
        opts.workers = 3;
        let report = ingest_batch(&repo, &t, &jobs, &opts).unwrap();
        assert_eq!(report.succeeded, 3);
        assert_eq!(report.failed, 1);
        assert_eq!(report.files[3].error_code.as_deref(), Some("io"));
        assert_eq!(report.totals.sentences, 6);
        let again = ingest_batch(&repo, &t, &jobs[..3], &opts).unwrap();
        assert_eq!(again.failed, 3);
        assert!(again.files.iter().all(|f| f.error_code.as_deref() == Some("already_ingested")));
        let detail = repo.get_document(report.files[2].document_id.unwrap()).unwrap();
        assert_eq!(detail.document.mime_type, "text/html");
    }

    #[test]
    fn workers_do_not_change_metrics() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..30 {
            fs::write(
                dir.path().join(format!("{i:02}.txt")),
                format!("Common opening. Topic {} here. Common closing.", i % 7),
            )
            .unwrap();
        }
        let jobs = collect_files(&[dir.path().to_path_buf()], None).unwrap();
        let t = Tokenizer::default();
        let run = |workers: usize| {
            let repo = SqliteStore::open_in_memory().unwrap();
            let mut opts = IngestOptions::new("s", "en");
            opts.workers = workers;
            ingest_batch(&repo, &t, &jobs, &opts).unwrap();
            repo.dedup_pass(None).unwrap();
            compute_metrics(&repo, &Scope::All, None).unwrap()
        };
        assert_eq!(run(1), run(6));
    }

    #[test]
    fn snapshot_plan() {
        let plan = parse_snapshot_plan("# cumulative years\n2020\t2020/\n2019\t2019/\tmisc/\n").unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].prefixes, vec!["2019/", "misc/"]);
        assert!(parse_snapshot_plan("lonely\n").is_err());

        let dir = corpus();
        let repo = MemoryStore::new();
        let jobs = collect_files(&[dir.path().to_path_buf()], None).unwrap();
        ingest_batch(&repo, &Tokenizer::default(), &jobs, &IngestOptions::new("s", "en")).unwrap();
        let groups = resolve_plan(&repo, &plan, None).unwrap();
        assert_eq!(groups[0].documents.len(), 2);
        assert_eq!(groups[1].documents.len(), 1);
        assert!(resolve_plan(&repo, &plan, Some("other")).unwrap()[0].documents.is_empty());
    }
}
