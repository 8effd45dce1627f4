//! `semchain`: prove chains, rank answers and run the recovery experiments
//! from the command line.
//!
//! Exit status: 0 on success, 1 on usage or I/O errors, 2 when the solver
//! finds nothing to report.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use semchain::embeddings::{load_embeddings, synth_embeddings, EmbeddingStore};
use semchain::expharness::{
    exp1_term_recovery, exp1_term_recovery_with, exp2_fact_recovery, exp2_fact_recovery_with, exp3_path_recovery,
    exp3_synthetic, TrialConfig, TrialReport,
};
use semchain::kb::{build_dictionary, ingest_triples, FactDictionary, MissingPolicy};
use semchain::reasoner::{ask, prove_with_solution, ReasonerConfig, DEFAULT_EPSILON, DEFAULT_PAIR_TOL};
use semchain::solver::{Method, SolverConfig};

#[derive(Parser)]
#[command(name = "semchain", version, about = "Reasoning chains by sparse decomposition of embedding offsets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a chain of facts and gaps linking one term to another.
    Prove(ProveArgs),
    /// Rank the facts linking a term to any of several candidates.
    Ask(AskArgs),
    /// Run a recovery experiment and write its CSV report.
    Experiment(ExperimentArgs),
    /// Write a synthetic isotropic embedding file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Embeddings in word-vector text format.
    #[arg(long)]
    embeddings: PathBuf,
    /// Tab-separated `head predicate tail` triples.
    #[arg(long)]
    triples: PathBuf,
    /// Keep vectors as loaded instead of scaling them to unit norm.
    #[arg(long)]
    raw: bool,
    /// Only keep triples with these predicates (comma-separated).
    #[arg(long, value_delimiter = ',')]
    predicates: Vec<String>,
    /// What to do with triples naming terms that have no embedding.
    #[arg(long, value_enum, default_value_t = OnMissing::Skip)]
    on_missing: OnMissing,
    /// Write the fact dictionary as CSV.
    #[arg(long)]
    dump_dict: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnMissing {
    Skip,
    Error,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "lasso", value_parser = parse_method)]
    method: Method,
    /// Largest support the solver may return.
    #[arg(long, default_value_t = 20)]
    max_atoms: usize,
    #[arg(long, default_value_t = 0.2)]
    lambda: f64,
    /// Elastic-net mix: 1 is pure L1, 0 pure ridge.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Allow negative weights.
    #[arg(long)]
    signed: bool,
    /// Prune weights below this magnitude.
    #[arg(long, default_value_t = 0.05)]
    weight_floor: f64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            method: self.method,
            max_atoms: self.max_atoms,
            lambda: self.lambda,
            elastic_net_alpha: self.alpha,
            nonnegative: !self.signed,
            weight_floor: self.weight_floor,
            max_iterations: self.max_iterations,
            convergence_tol: self.tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: semchain::Error| e.to_string())
}

#[derive(Args)]
struct ProveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    /// Cost of an edge backed by a selected fact.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Offset mismatch below which a gap counts as analogical.
    #[arg(long, default_value_t = DEFAULT_PAIR_TOL)]
    pair_tol: f64,
    /// Print the chain as JSON.
    #[arg(long)]
    json: bool,
    /// Write the raw solver weights as CSV.
    #[arg(long)]
    dump_solution: Option<PathBuf>,
}

#[derive(Args)]
struct AskArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    from: String,
    /// Candidate answers (comma-separated).
    #[arg(long, value_delimiter = ',', required = true)]
    candidates: Vec<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    exp: u8,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    dict_sizes: Vec<usize>,
    /// Terms or facts per sum, or path lengths for experiment 3.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    neighbor_k: usize,
    /// Entity count for synthetic knowledge bases.
    #[arg(long)]
    entities: Option<usize>,
    /// Sample dictionaries from these embeddings instead of synthesizing them.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Knowledge base for experiment 3 (requires --embeddings).
    #[arg(long, requires = "embeddings")]
    triples: Option<PathBuf>,
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_PAIR_TOL)]
    pair_tol: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// CSV report path; run metadata goes next to it as `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
    /// No per-cell progress on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Loaded embeddings and fact dictionary.
struct Session {
    store: EmbeddingStore,
    dict: FactDictionary,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn load_store(path: &Path, raw: bool) -> Result<EmbeddingStore> {
    load_embeddings(open(path)?, !raw).with_context(|| format!("reading {}", path.display()))
}

impl Session {
    fn load(args: &DataArgs) -> Result<Self> {
        let store = load_store(&args.embeddings, args.raw)?;
        let policy = match args.on_missing {
            OnMissing::Skip => MissingPolicy::Skip,
            OnMissing::Error => MissingPolicy::Error,
        };
        let ingested = ingest_triples(open(&args.triples)?, &store, policy)
            .with_context(|| format!("reading {}", args.triples.display()))?;
        if ingested.skipped > 0 {
            eprintln!("skipped {} triples with terms missing from the embeddings", ingested.skipped);
        }
        let filter: Option<BTreeSet<String>> =
            (!args.predicates.is_empty()).then(|| args.predicates.iter().cloned().collect());
        let dict = build_dictionary(&store, &ingested.triples, filter.as_ref())?;
        if let Some(path) = &args.dump_dict {
            dict.write_csv(create(path)?)?;
        }
        Ok(Self { store, dict })
    }
}

enum Outcome {
    Done,
    Empty,
}

fn cmd_prove(args: &ProveArgs) -> Result<Outcome> {
    if args.from == args.to {
        bail!("--from and --to must differ");
    }
    let solver = args.solver.config()?;
    let session = Session::load(&args.data)?;
    let config = ReasonerConfig { solver, epsilon: args.epsilon, pair_tol: args.pair_tol };
    let (chain, solution) = prove_with_solution(&session.store, &session.dict, &args.from, &args.to, &config)?;
    if let Some(path) = &args.dump_solution {
        solution.write_csv(&session.dict, create(path)?)?;
    }
    if solution.is_empty() {
        eprintln!("solver selected no facts (residual {:.4})", solution.residual_norm);
        return Ok(Outcome::Empty);
    }
    let mut out = io::stdout().lock();
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&chain.to_json(&session.dict))?)?;
    } else {
        write!(out, "{chain}")?;
        writeln!(out, "residual {:.4}, total cost {:.4}", chain.residual_norm, chain.total_cost)?;
        for &j in &chain.unplaced {
            writeln!(out, "unplaced {}", session.dict.fact(j))?;
        }
    }
    Ok(Outcome::Done)
}

fn cmd_ask(args: &AskArgs) -> Result<Outcome> {
    let solver = args.solver.config()?;
    let session = Session::load(&args.data)?;
    let ranking = ask(&session.store, &session.dict, &args.from, &args.candidates, &solver)?;
    if ranking.is_empty() {
        eprintln!("no facts link {} to any candidate", args.from);
        return Ok(Outcome::Empty);
    }
    io::stdout().lock().write_all(ranking.render().as_bytes())?;
    Ok(Outcome::Done)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<Outcome> {
    let cfg = TrialConfig {
        dict_sizes: args.dict_sizes.clone(),
        counts: args.k.clone(),
        trials: args.trials,
        dimension: args.dim,
        seed: args.seed,
        solver: args.solver.config()?,
        neighbor_k: args.neighbor_k,
        entities: args.entities,
        epsilon: args.epsilon,
        pair_tol: args.pair_tol,
        progress: !args.quiet,
    };
    cfg.validate()?;
    let base = args.embeddings.as_deref().map(|p| load_store(p, args.raw)).transpose()?;
    let cfg = match &base {
        Some(store) => TrialConfig { dimension: store.dimension(), ..cfg },
        None => cfg,
    };
    let report = match (args.exp, &base, &args.triples) {
        (1, None, _) => exp1_term_recovery(&cfg)?,
        (1, Some(store), _) => exp1_term_recovery_with(&cfg, store)?,
        (2, None, _) => exp2_fact_recovery(&cfg)?,
        (2, Some(store), _) => exp2_fact_recovery_with(&cfg, store)?,
        (3, Some(store), Some(triples)) => {
            let ingested = ingest_triples(open(triples)?, store, MissingPolicy::Skip)?;
            let kb = build_dictionary(store, &ingested.triples, None)?;
            exp3_path_recovery(&cfg, store, &kb)?
        }
        (3, _, None) => exp3_synthetic(&cfg)?,
        (3, None, Some(_)) => unreachable!("clap requires --embeddings with --triples"),
        _ => unreachable!("clap limits --exp to 1..=3"),
    };
    let mut csv = create(&args.out)?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    write_metadata(args, &report)?;
    print!("{}", report.summary());
    Ok(Outcome::Done)
}

fn write_metadata(args: &ExperimentArgs, report: &TrialReport) -> Result<()> {
    let mut path = args.out.clone().into_os_string();
    path.push(".meta.json");
    let cells: Vec<_> = report
        .cells
        .iter()
        .map(|c| {
            json!({
                "dict_size": c.dict_size,
                "k": c.k,
                "metric": c.metric.to_string(),
                "wall_seconds": c.elapsed.as_secs_f64(),
            })
        })
        .collect();
    let meta = json!({
        "command_line": std::env::args().collect::<Vec<_>>(),
        "experiment": args.exp,
        "config": report.config,
        "cells": cells,
    });
    let mut out = create(Path::new(&path))?;
    serde_json::to_writer_pretty(&mut out, &meta)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<Outcome> {
    let store = synth_embeddings(args.count, args.dim, args.seed)?;
    let mut out = create(&args.out)?;
    store.write_text(&mut out)?;
    out.flush()?;
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Prove(a) => cmd_prove(a),
        Command::Ask(a) => cmd_ask(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Empty) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
