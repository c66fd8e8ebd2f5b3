use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use phrasebank::extraction::{HtmlExtractor, MediaType};
use phrasebank::limits::{builtin_word_lists, ceiling_table, load_word_lists, render_ceiling_table, sentence_ceiling};
use phrasebank::metrics::{common_matrix, compute_metrics};
use phrasebank::pipeline::{collect_files, error_code, ingest_batch, read_snapshot_plan, resolve_plan, IngestOptions};
use phrasebank::projection::{fit_report, parse_points_tsv, snapshot_series, DEFAULT_TARGETS};
use phrasebank::translation::LanguagePairs;
use phrasebank::validation::{sample_reports, validate_corpus};
use phrasebank::{Repository, RuleSet, Scope, SqliteStore, Tokenizer};
use phrasebank_service::{router, serve, ServiceConfig, DEFAULT_UPLOAD_LIMIT};
use serde::Serialize;
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

const DB_FILE: &str = "phrasebank.sqlite3";

#[derive(Parser)]
#[command(name = "phrasebank", version, about = "Search-only translation memory")]
struct Cli {
    /// Data directory holding the sentence store.
    #[arg(long, global = true, env = "PHRASEBANK_DATA", default_value = "phrasebank-data")]
    data: PathBuf,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest text or HTML files and directories.
    Ingest(IngestArgs),
    /// Merge duplicate sentence rows.
    Dedup {
        #[arg(long)]
        lang: Option<String>,
    },
    /// Repetition statistics of the stored corpus.
    Metrics {
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        valid_only: bool,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Distinct sentences shared between sources.
    Common {
        #[arg(long, value_delimiter = ',', required = true)]
        sources: Vec<String>,
    },
    /// Upper bound on the number of distinct sentences.
    Limits(LimitsArgs),
    /// Fit a logarithmic repetition trend and project corpus volumes.
    Project(ProjectArgs),
    /// Check sentences against the validation rules.
    Validate {
        #[arg(long, default_value_t = 20)]
        sample: usize,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        source: Option<String>,
    },
    /// Check store consistency.
    Audit,
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Txt,
    Html,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long)]
    source: String,
    #[arg(long, default_value = "en")]
    lang: String,
    /// Overrides detection from file extensions.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// CSS selectors of HTML elements to drop, e.g. `nav,footer`.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Abbreviation list for the sentence splitter.
    #[arg(long)]
    abbreviations: Option<PathBuf>,
}

#[derive(Args)]
struct LimitsArgs {
    #[arg(long, required_unless_present = "table", requires = "max_words")]
    vocab: Option<u64>,
    #[arg(long, requires = "vocab")]
    max_words: Option<u32>,
    /// Print the ceiling table for the word lists.
    #[arg(long)]
    table: bool,
    /// Word-list TOML file; the built-in lists are used otherwise.
    #[arg(long, requires = "table")]
    word_lists: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["points", "snapshots"]))]
struct ProjectArgs {
    /// TSV file of `characters<TAB>repetition%` points.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Snapshot plan: `label<TAB>name-prefix...` per cumulative group.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    #[arg(long, requires = "snapshots")]
    source: Option<String>,
    #[arg(long, requires = "snapshots")]
    valid_only: bool,
    #[arg(long, requires = "snapshots")]
    rules: Option<PathBuf>,
    /// Repetition percentage to solve for; a default table otherwise.
    #[arg(long)]
    target_pct: Option<f64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long)]
    cors_origin: Option<String>,
    #[arg(long, default_value_t = DEFAULT_UPLOAD_LIMIT)]
    upload_limit: usize,
    /// Supported translation pairs, e.g. `en-pt,pt-en`.
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    rules: Option<PathBuf>,
}

/// Success, or success with per-item failures.
enum Outcome {
    Ok,
    Partial,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            let code = e
                .downcast_ref::<phrasebank::Error>()
                .map_or("internal", error_code);
            eprintln!("{}", json!({ "error": { "code": code, "message": format!("{e:#}") } }));
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn open_store(data: &Path) -> anyhow::Result<SqliteStore> {
    std::fs::create_dir_all(data).with_context(|| format!("creating data directory {}", data.display()))?;
    Ok(SqliteStore::open(&data.join(DB_FILE))?)
}

fn load_rules(path: Option<&Path>) -> anyhow::Result<RuleSet> {
    Ok(match path {
        Some(p) => RuleSet::from_file(p)?,
        None => RuleSet::default(),
    })
}

fn print<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> anyhow::Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

fn scope_of(source: Option<&str>) -> Scope {
    match source {
        Some(s) if s != "all" => Scope::Source(s.to_string()),
        _ => Scope::All,
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Ingest(args) => ingest(cli, args),
        Command::Dedup { lang } => {
            let store = open_store(&cli.data)?;
            let merged = store.dedup_pass(lang.as_deref())?;
            print(cli.json, &json!({ "mergedCount": merged }), || {
                format!("merged {merged} duplicate sentence rows\n")
            })?;
            Ok(Outcome::Ok)
        }
        Command::Metrics { source, valid_only, rules } => {
            let store = open_store(&cli.data)?;
            let rules = load_rules(rules.as_deref())?;
            let m = compute_metrics(&store, &scope_of(source.as_deref()), valid_only.then_some(&rules))?;
            print(cli.json, &m, || m.render_table())?;
            Ok(Outcome::Ok)
        }
        Command::Common { sources } => {
            let store = open_store(&cli.data)?;
            let m = common_matrix(&store, sources)?;
            print(cli.json, &m, || m.render())?;
            Ok(Outcome::Ok)
        }
        Command::Limits(args) => limits(cli, args),
        Command::Project(args) => project(cli, args),
        Command::Validate { sample, rules, source } => {
            let store = open_store(&cli.data)?;
            let rules = load_rules(rules.as_deref())?;
            let scope = scope_of(source.as_deref());
            let reports = sample_reports(&store, &scope, *sample, &rules)?;
            let summary = validate_corpus(&store, &scope, &rules)?;
            let value = json!({ "samples": reports, "summary": summary });
            print(cli.json, &value, || {
                let mut out = String::new();
                for r in &reports {
                    let verdict = if r.report.valid {
                        "valid".to_string()
                    } else {
                        format!("invalid [{}]", r.report.failed_rule_ids.join(","))
                    };
                    out.push_str(&format!("{:>8}  {verdict:<32}  {}\n", r.sentence.id.0, r.sentence.plain_text));
                }
                let pct = summary.valid_pct.map_or_else(|| "n/a".into(), |p| format!("{p:.2}%"));
                out.push_str(&format!(
                    "\n{} of {} distinct sentences valid ({pct}), rules {}\n",
                    summary.distinct_valid, summary.distinct_checked, summary.rule_set_version
                ));
                out
            })?;
            Ok(Outcome::Ok)
        }
        Command::Audit => {
            let store = open_store(&cli.data)?;
            let report = store.audit()?;
            if cli.json {
                print!("{}", report.to_json_lines());
            } else {
                for r in &report.records {
                    println!("{:<10} {:<24} {}", format!("{:?}", r.status).to_lowercase(), r.check, r.detail);
                }
            }
            if !report.is_clean() {
                bail!(phrasebank::Error::Validation(format!(
                    "audit found {} violation(s)",
                    report.violations().count()
                )));
            }
            Ok(Outcome::Ok)
        }
        Command::Serve(args) => serve_cmd(cli, args),
    }
}

fn ingest(cli: &Cli, args: &IngestArgs) -> anyhow::Result<Outcome> {
    let store = open_store(&cli.data)?;
    let tokenizer = match &args.abbreviations {
        Some(p) => Tokenizer::from_abbreviation_file(p)?,
        None => Tokenizer::default(),
    };
    let format = args.format.map(|f| match f {
        Format::Txt => MediaType::Text,
        Format::Html => MediaType::Html,
    });
    let mut opts = IngestOptions::new(&args.source, &args.lang);
    opts.format = format;
    opts.workers = args.jobs as usize;
    opts.html = HtmlExtractor::new(&args.exclude)?;
    let jobs = collect_files(&args.paths, format)?;
    let report = ingest_batch(&store, &tokenizer, &jobs, &opts)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for f in &report.files {
            match (&f.stats, &f.error) {
                (Some(s), _) => println!(
                    "ok     {}  sentences={} new={} reused={}",
                    f.name, s.sentences, s.new_distinct, s.reused_distinct
                ),
                (None, Some(e)) => println!("error  {}  {}: {e}", f.name, f.error_code.as_deref().unwrap_or("internal")),
                (None, None) => {}
            }
        }
        let t = &report.totals;
        println!(
            "\n{} ingested, {} failed; sentences={} new={} reused={}",
            report.succeeded, report.failed, t.sentences, t.new_distinct, t.reused_distinct
        );
    }
    for f in report.files.iter().filter(|f| f.error.is_some()) {
        eprintln!(
            "{}",
            json!({ "error": { "code": f.error_code, "message": f.error, "path": f.path } })
        );
    }
    Ok(if report.failed > 0 { Outcome::Partial } else { Outcome::Ok })
}

fn limits(cli: &Cli, args: &LimitsArgs) -> anyhow::Result<Outcome> {
    let single = match (args.vocab, args.max_words) {
        (Some(v), Some(n)) => Some(sentence_ceiling(v, n)?),
        _ => None,
    };
    let table = if args.table {
        let lists = match &args.word_lists {
            Some(p) => load_word_lists(p)?,
            None => builtin_word_lists(),
        };
        Some(ceiling_table(&lists, &[phrasebank::limits::READABLE_MAX_WORDS, phrasebank::limits::COMPREHENSION_MAX_WORDS])?)
    } else {
        None
    };
    if cli.json {
        let value = match (&single, &table) {
            (Some(c), None) => serde_json::to_value(c)?,
            (None, Some(t)) => serde_json::to_value(t)?,
            _ => json!({ "ceiling": single, "table": table }),
        };
        println!("{}", serde_json::to_string_pretty(&value)?);
        return Ok(Outcome::Ok);
    }
    if let Some(c) = &single {
        let sum = c.exact_value();
        let dominant = c.dominant_value();
        println!("vocabulary {}, up to {} words", c.vocabulary_size, c.max_words);
        println!("V^N        {}", dominant.rendering);
        println!("sum        {}", sum.rendering);
        println!("digits     {}", sum.digits);
        println!("exact      {}", sum.decimal_string);
    }
    if let Some(rows) = &table {
        if single.is_some() {
            println!();
        }
        print!("{}", render_ceiling_table(rows));
    }
    Ok(Outcome::Ok)
}

fn project(cli: &Cli, args: &ProjectArgs) -> anyhow::Result<Outcome> {
    let (points, series) = match (&args.points, &args.snapshots) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            (parse_points_tsv(&text)?, None)
        }
        (None, Some(plan_path)) => {
            let store = open_store(&cli.data)?;
            let rules = load_rules(args.rules.as_deref())?;
            let plan = read_snapshot_plan(plan_path)?;
            let groups = resolve_plan(&store, &plan, args.source.as_deref())?;
            let series = snapshot_series(&store, &groups, args.valid_only.then_some(&rules))?;
            (series.trend_points(), Some(series))
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let targets = match args.target_pct {
        Some(t) => vec![t],
        None => DEFAULT_TARGETS.to_vec(),
    };
    let report = fit_report(&points, &targets)?;
    let required = args.target_pct.map(|t| report.trend.required_volume(t)).transpose()?;
    if cli.json {
        let value = json!({ "fit": report, "requiredVolume": required, "snapshots": series });
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        if let Some(series) = &series {
            for p in &series.points {
                println!(
                    "{:<16} {:>16} characters  {:>8.4}% with repetitions",
                    p.label, p.metrics.text_characters, p.point.repetition_pct
                );
            }
            for w in &series.warnings {
                println!("warning: {w}");
            }
            println!();
        }
        print!("{}", report.render());
        if let Some(v) = &required {
            println!(
                "\nrequired volume for {}%: {} characters{}",
                v.target_pct,
                v.text_characters.to_e_notation(2),
                if v.extrapolated { " (extrapolated)" } else { "" }
            );
        }
    }
    if cli.json {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(Outcome::Ok)
}

fn serve_cmd(cli: &Cli, args: &ServeArgs) -> anyhow::Result<Outcome> {
    let store: Arc<dyn Repository> = Arc::new(open_store(&cli.data)?);
    let config = ServiceConfig {
        upload_limit: args.upload_limit,
        cors_origin: args.cors_origin.clone(),
        pairs: match &args.pairs {
            Some(p) => p.parse::<LanguagePairs>()?,
            None => LanguagePairs::default(),
        },
        rules: load_rules(args.rules.as_deref())?,
        tokenizer: Tokenizer::default(),
    };
    let app = router(store, config)?;
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve(addr, app)).with_context(|| format!("serving on {addr}"))?;
    Ok(Outcome::Ok)
}
