//! The `create` command line. Exit status 0 on success, 1 for usage errors
//! and 2 for data or validation errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use create_core::corpus::{generate_synthetic_corpus, GeneratorSpec};
use create_core::eval::{run_benchmark, System};
use create_core::query::{parse_query_with, ParseOptions};
use create_core::{build_index, validate_query, CohortQuery, Date, Vocabulary};

use crate::api::{self, execute, AppState, SearchResponse};
use crate::formats::{self, from_json, read_text, to_pretty_json, write_jsonl, FormatError};
use crate::judgments::JudgmentStore;
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

const DEFAULT_INDEX: &str = "index.crix";

#[derive(Debug, Parser)]
#[command(name = "create", version, about = "Cohort retrieval over structured and unstructured EHR data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus with planted ground truth.
    GenCorpus {
        /// Generator spec (JSON); defaults to the bundled benchmark spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a corpus directory and write an index snapshot.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Vocabulary directory or concepts TSV; defaults to the bundled one.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Trigger lexicon TSV replacing the built-in triggers.
        #[arg(long)]
        triggers: Option<PathBuf>,
        #[arg(long, env = "CREATE_INDEX", default_value = DEFAULT_INDEX)]
        snapshot: PathBuf,
    },
    /// Turn free text into a reviewable query document.
    Parse {
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        triggers: Option<PathBuf>,
        #[arg(long)]
        text: String,
        #[arg(long, default_value = "query")]
        query_id: String,
        /// Reference date for age_at_query (YYYY-MM-DD).
        #[arg(long, value_parser = parse_date)]
        as_of: Option<Date>,
        /// Widen draft filters to descendant concepts.
        #[arg(long)]
        expand: bool,
    },
    /// Execute a query document against an index snapshot.
    Search {
        #[arg(long)]
        query: PathBuf,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        /// combined, structured or unstructured.
        #[arg(long, default_value = "combined")]
        system: System,
        /// Seed of the structured system's sample.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "CREATE_INDEX", default_value = DEFAULT_INDEX)]
        index: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Print the full response, with score breakdowns, as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score the three systems against ground truth.
    Eval {
        /// Directory of query documents (*.json).
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, env = "CREATE_INDEX", default_value = DEFAULT_INDEX)]
        index: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "CREATE_ADDR", default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, env = "CREATE_INDEX", default_value = DEFAULT_INDEX)]
        index: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        triggers: Option<PathBuf>,
        /// Append-only judgment log, replayed at start.
        #[arg(long, default_value = "judgments.jsonl")]
        judgments: PathBuf,
        /// Query documents to preload for evidence lookups.
        #[arg(long)]
        queries: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::GenCorpus { spec, seed, out: dir } => gen_corpus(spec.as_deref(), seed, &dir, out),
        Command::Index {
            corpus,
            vocab,
            triggers,
            snapshot,
        } => index(&corpus, vocab.as_deref(), triggers.as_deref(), &snapshot, out),
        Command::Parse {
            vocab,
            triggers,
            text,
            query_id,
            as_of,
            expand,
        } => {
            let vocab = formats::load_vocabulary(vocab.as_deref())?;
            let lexicon = formats::load_triggers(triggers.as_deref())?;
            let mut options = ParseOptions {
                query_id,
                expand_filters: expand,
                ..ParseOptions::default()
            };
            if let Some(d) = as_of {
                options.as_of_date = d;
            }
            let q = parse_query_with(&text, &vocab, &lexicon, &options)?;
            out.write_all(to_pretty_json(&q).as_bytes())?;
            Ok(())
        }
        Command::Search {
            query,
            limit,
            system,
            seed,
            index,
            vocab,
            json,
        } => {
            let vocab = formats::load_vocabulary(vocab.as_deref())?;
            let q = formats::read_query(&query)?;
            check_query(&q, &vocab, err)?;
            if limit == 0 {
                bail!("--limit must be at least 1");
            }
            let index = formats::read_snapshot(&index)?;
            let results = execute(&index, &q, system, limit, seed)?;
            if json {
                let response = SearchResponse { query: q, system, results };
                out.write_all(to_pretty_json(&response).as_bytes())?;
            } else {
                for h in &results {
                    match h.score {
                        Some(s) => writeln!(out, "{}\t{}\t{s:.6}", h.rank, h.person_id)?,
                        None => writeln!(out, "{}\t{}", h.rank, h.person_id)?,
                    }
                }
            }
            Ok(())
        }
        Command::Eval {
            queries,
            truth,
            seed,
            k,
            index,
            vocab,
            report: report_path,
            json,
        } => {
            if k == 0 {
                bail!("--k must be at least 1");
            }
            let vocab = formats::load_vocabulary(vocab.as_deref())?;
            let queries = formats::read_query_dir(&queries)?;
            for q in &queries {
                check_query(q, &vocab, err).with_context(|| format!("query {}", q.query_id))?;
            }
            let truth = formats::read_truth(&truth)?;
            let index = formats::read_snapshot(&index)?;
            let report = run_benchmark(&index, &queries, &truth, seed, k)?;
            let unjudged = report.unjudged_count();
            if unjudged > 0 {
                writeln!(err, "warning: {unjudged} retrieved patient(s) had no judgment and were graded NR")?;
            }
            let json_text = to_pretty_json(&report);
            if let Some(p) = report_path {
                std::fs::write(&p, &json_text).map_err(|e| FormatError::Io { path: p, err: e })?;
            }
            if json {
                out.write_all(json_text.as_bytes())?;
            } else {
                out.write_all(report::render(&report).as_bytes())?;
            }
            Ok(())
        }
        Command::Serve {
            addr,
            index,
            vocab,
            triggers,
            judgments,
            queries,
        } => {
            let vocab = formats::load_vocabulary(vocab.as_deref())?;
            let lexicon = formats::load_triggers(triggers.as_deref())?;
            let index = formats::read_snapshot(&index)?;
            let store = JudgmentStore::open(&judgments)?;
            let preload = match queries {
                Some(dir) => formats::read_query_dir(&dir)?,
                None => Vec::new(),
            };
            let state = Arc::new(AppState::new(index, vocab, lexicon, store).with_queries(preload));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(api::serve(&addr, state))?;
            Ok(())
        }
    }
}

fn parse_date(s: &str) -> Result<Date, String> {
    s.parse().map_err(|_| format!("{s:?} is not a YYYY-MM-DD date"))
}

fn check_query(q: &CohortQuery, vocab: &Vocabulary, err: &mut dyn Write) -> anyhow::Result<()> {
    let violations = validate_query(q, vocab);
    if violations.is_empty() {
        return Ok(());
    }
    for v in &violations {
        writeln!(err, "{v}")?;
    }
    bail!("query {} is invalid ({} violation(s))", q.query_id, violations.len())
}

fn gen_corpus(spec: Option<&Path>, seed: u64, dir: &Path, out: &mut dyn Write) -> anyhow::Result<()> {
    let spec: GeneratorSpec = match spec {
        Some(p) => from_json(&read_text(p)?).with_context(|| format!("{}", p.display()))?,
        None => GeneratorSpec::bundled(),
    };
    let generated = generate_synthetic_corpus(&spec, seed)?;
    formats::write_raw_corpus(dir, &generated.corpus)?;
    write_jsonl(&dir.join(formats::GROUND_TRUTH), &generated.truth)?;
    let c = &generated.corpus;
    writeln!(
        out,
        "wrote {} persons, {} records, {} documents and {} ground truth rows to {}",
        c.persons.len(),
        c.records.len(),
        c.documents.len(),
        generated.truth.len(),
        dir.display()
    )?;
    Ok(())
}

fn index(corpus: &Path, vocab: Option<&Path>, triggers: Option<&Path>, snapshot: &Path, out: &mut dyn Write) -> anyhow::Result<()> {
    let vocab = formats::load_vocabulary(vocab)?;
    let lexicon = formats::load_triggers(triggers)?;
    let raw = formats::read_raw_corpus(corpus)?;
    let loaded = raw.assemble(&vocab, &lexicon).map_err(|e| formats::corpus_error(corpus, &e))?;
    let index = build_index(&loaded)?;
    formats::write_snapshot(snapshot, &index)?;
    let r = &loaded.report;
    writeln!(
        out,
        "indexed {} persons, {} records ({} unmapped), {} documents, {} sections, {} mentions into {}",
        r.persons,
        r.records,
        r.unmapped_records,
        r.documents,
        r.sections,
        r.mentions,
        snapshot.display()
    )?;
    Ok(())
}
