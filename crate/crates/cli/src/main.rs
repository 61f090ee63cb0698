//! `namelink`: build, train, evaluate and serve name matchers from the shell.

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use namelink_core::evaluation::{
    automation_curve, default_tt_grid, evaluate, mean_over_trials, model_set_diff, rank_all, result_ids,
    sensitivity_sweep, top_predictions, write_automation_csv, write_sweep_csv, SweepConfig, SWEEP_KS,
};
use namelink_core::text::{read_labeled_pairs, write_labeled_pairs};
use namelink_core::{
    compute_max_tr, generate_pairs, inject_bigrams, learn_translations, rank_baseline, BaselineKind, Corpus, DocId,
    Engine, EquivalenceTable, Estimator, IndexSnapshot, LabeledPair, Query, TrMap, Variant,
};
use namelink_service::{Service, ServiceConfig};
use serde_json::json;

use crate::config::Config;

#[derive(Parser)]
#[command(name = "namelink", version, about = "Probabilistic name matching")]
struct Cli {
    /// TOML file with engine, generator and service settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    #[command(subcommand)]
    Index(IndexCmd),
    #[command(subcommand)]
    Tr(TrCmd),
    #[command(subcommand)]
    Train(TrainCmd),
    /// Rank documents for one or more queries.
    Search(SearchArgs),
    /// Rank with a string-similarity baseline.
    Baseline(BaselineArgs),
    #[command(subcommand)]
    Gen(GenCmd),
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the HTTP matching service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum IndexCmd {
    /// Build an untrained snapshot (index, bigram entries, MaxTr) from a corpus.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TrCmd {
    /// Estimate translation probabilities from positive pairs.
    Learn {
        #[arg(long)]
        corpus: PathBuf,
        /// Labeled pairs: `query<TAB>doc_id<TAB>polarity`.
        #[arg(long)]
        pls: PathBuf,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, value_parser = parse_estimator)]
        estimator: Option<Estimator>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add bigram entries to a translation table and derive MaxTr.
    InjectBigrams {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        tr: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        maxtr_out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TrainCmd {
    /// Fit logistic weights and write a complete snapshot.
    Fit {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        pls: PathBuf,
        /// Learned translations to use; estimated from `--pls` when absent.
        #[arg(long)]
        tr: Option<PathBuf>,
        /// Comma-separated variants to fit.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
        #[arg(long)]
        negatives: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct QueryInput {
    #[arg(long, conflicts_with = "queries")]
    query: Option<String>,
    /// File with one query per line.
    #[arg(long)]
    queries: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[command(flatten)]
    input: QueryInput,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    kind: BaselineKind,
    #[command(flatten)]
    input: QueryInput,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Generate perturbed queries paired with their source names.
    Pairs {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        equivalences: PathBuf,
        /// Generator parameter override, e.g. `--set p_typo=0.2`.
        #[arg(long = "set", value_parser = parse_assignment)]
        overrides: Vec<(String, f64)>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// hit@1, 5, 10 and 100 per variant.
    Hitk {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Automation rate and trusted accuracy over a threshold grid.
    Automation {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        /// Thresholds as `start:stop:step` or a comma list.
        #[arg(long, value_parser = parse_grid)]
        tts: Option<Grid>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity of hit@k to one generator parameter.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        equivalences: PathBuf,
        #[arg(long)]
        param: String,
        /// Values as `start:stop:step` or a comma list.
        #[arg(long, value_parser = parse_grid)]
        grid: Grid,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
        /// Keep the configured `(c1, c)` instead of cross-validating it.
        #[arg(long)]
        no_cv: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-value means over trials.
        #[arg(long)]
        means_out: Option<PathBuf>,
    },
    /// Queries one variant answers within k and the other does not.
    Setdiff {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        a: Variant,
        #[arg(long)]
        b: Variant,
        #[arg(short, long, default_value_t = 1)]
        k: usize,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Directory holding the label log, review queue and live snapshot.
    #[arg(long)]
    data_dir: PathBuf,
    /// Snapshot to start from when the data directory is new.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    if let [a, b, step] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(format!("bad range `{s}`"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        // Rounded so 0.1 steps print as 0.3 rather than 0.30000000000000004.
        return Ok(Grid(
            (0..=n).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect(),
        ));
    }
    s.split(',').map(num).collect::<Result<_, _>>().map(Grid)
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    Ok((
        k.trim().to_string(),
        v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?,
    ))
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    match s.replace('-', "_").as_str() {
        "pseudo_count" => Ok(Estimator::PseudoCount),
        "gao" => Ok(Estimator::Gao),
        _ => Err(format!("unknown estimator `{s}` (pseudo_count or gao)")),
    }
}

fn reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(writer(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn origin(path: &Path) -> String {
    path.display().to_string()
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Ok(Corpus::read_tsv(reader(path)?, &origin(path))?)
}

fn load_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    Ok(read_labeled_pairs(reader(path)?, &origin(path))?)
}

fn load_equivalences(path: &Path) -> Result<EquivalenceTable> {
    Ok(EquivalenceTable::read_tsv(reader(path)?, &origin(path))?)
}

fn load_engine(dir: &Path) -> Result<Engine> {
    Engine::load(dir).with_context(|| format!("loading snapshot {}", dir.display()))
}

fn queries(input: &QueryInput) -> Result<Vec<String>> {
    match (&input.query, &input.queries) {
        (Some(q), _) => Ok(vec![q.clone()]),
        (None, Some(path)) => reader(path)?
            .lines()
            .map(|l| Ok(l?))
            .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
            .collect(),
        (None, None) => bail!("give --query or --queries"),
    }
}

fn print_json(value: serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, &value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    cfg.apply_seed(cli.seed);
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }

    match cli.command {
        Command::Index(IndexCmd::Build { corpus, out }) => {
            let engine = Engine::build(load_corpus(&corpus)?, 1)?;
            engine.save(&out)?;
            print_json(json!({
                "documents": engine.corpus().len(),
                "bigram_entries": engine.trmap().len(),
                "snapshot": out,
            }))
        }

        Command::Tr(TrCmd::Learn {
            corpus,
            pls,
            c1,
            c,
            tau,
            estimator,
            out,
        }) => {
            let mut ec = cfg.engine.clone();
            ec.tr.c1 = c1.unwrap_or(ec.tr.c1);
            ec.tr.c = c.unwrap_or(ec.tr.c);
            ec.tr.tau = tau.unwrap_or(ec.tr.tau);
            ec.estimator = estimator.unwrap_or(ec.estimator);
            let corpus = load_corpus(&corpus)?;
            let tr = learn_translations(&load_pairs(&pls)?, &corpus, &ec)?;
            let mut w = writer(&out)?;
            tr.write_tsv(&mut w)?;
            w.flush()?;
            print_json(json!({ "entries": tr.len(), "sources": tr.num_keys() }))
        }

        Command::Tr(TrCmd::InjectBigrams {
            corpus,
            tr,
            out,
            maxtr_out,
        }) => {
            let corpus = load_corpus(&corpus)?;
            let learned = TrMap::read_tsv(reader(&tr)?, &origin(&tr))?;
            let injected = inject_bigrams(&learned, &corpus);
            let mut w = writer(&out)?;
            injected.write_tsv(&mut w)?;
            w.flush()?;
            if let Some(path) = maxtr_out {
                let index = IndexSnapshot::build(&corpus)?;
                let mut w = writer(&path)?;
                compute_max_tr(&injected, &index).write_tsv(&mut w)?;
                w.flush()?;
            }
            print_json(json!({ "entries": injected.len(), "added": injected.len() - learned.len() }))
        }

        Command::Train(TrainCmd::Fit {
            corpus,
            pls,
            tr,
            variants,
            negatives,
            out,
        }) => {
            let corpus = load_corpus(&corpus)?;
            let pairs = load_pairs(&pls)?;
            let learned = match tr {
                Some(path) => TrMap::read_tsv(reader(&path)?, &origin(&path))?,
                None => learn_translations(&pairs, &corpus, &cfg.engine)?,
            };
            let mut train = cfg.engine.train;
            train.negatives_per_query = negatives.unwrap_or(train.negatives_per_query);
            let variants = if variants.is_empty() {
                cfg.engine.fit_variants.clone()
            } else {
                variants
            };
            let mut engine = Engine::from_learned(corpus, &learned, 1, cfg.engine.default_variant)?;
            let fits = engine.fit(&pairs, &variants, &train)?;
            engine.save(&out)?;
            let fits: serde_json::Map<String, serde_json::Value> = fits
                .iter()
                .map(|(v, r)| {
                    (
                        v.to_string(),
                        json!({
                            "w0": r.weights.w0,
                            "w1": r.weights.w1,
                            "epochs": r.epochs,
                            "final_loss": r.final_loss(),
                        }),
                    )
                })
                .collect();
            print_json(json!({ "snapshot": out, "fits": fits }))
        }

        Command::Search(args) => {
            let engine = load_engine(&args.snapshot)?;
            let variant = args.variant.unwrap_or(engine.default_variant());
            for q in queries(&args.input)? {
                let results = engine.rank(&Query::new(q.as_str()), args.k, variant)?;
                let rows: Vec<_> = results
                    .iter()
                    .map(|r| {
                        json!({
                            "doc_id": r.doc_id,
                            "name": engine.corpus().doc(r.doc_idx).raw(),
                            "fraction": r.fraction,
                            "probability": r.probability,
                        })
                    })
                    .collect();
                print_json(json!({ "query": q, "variant": variant, "results": rows }))?;
            }
            Ok(())
        }

        Command::Baseline(args) => {
            let corpus = load_corpus(&args.corpus)?;
            let index = IndexSnapshot::build(&corpus)?;
            for q in queries(&args.input)? {
                let results = rank_baseline(args.kind, &Query::new(q.as_str()), args.k, &corpus, &index)?;
                let rows: Vec<_> = results
                    .iter()
                    .map(|r| json!({ "doc_id": r.doc_id, "name": corpus.doc(r.doc_idx).raw(), "score": r.score }))
                    .collect();
                print_json(json!({ "query": q, "baseline": args.kind, "results": rows }))?;
            }
            Ok(())
        }

        Command::Gen(GenCmd::Pairs {
            corpus,
            equivalences,
            overrides,
            out,
        }) => {
            let corpus = load_corpus(&corpus)?;
            let index = IndexSnapshot::build(&corpus)?;
            let mut params = cfg.gen;
            for (name, value) in &overrides {
                params = params.with(name, *value)?;
            }
            let pairs = generate_pairs(&corpus, &index, &params, &load_equivalences(&equivalences)?)?;
            let mut w = writer(&out)?;
            write_labeled_pairs(&mut w, &pairs)?;
            w.flush()?;
            print_json(json!({ "pairs": pairs.len(), "names": corpus.len() }))
        }

        Command::Eval(EvalCmd::Hitk {
            snapshot,
            pairs,
            variants,
            out,
        }) => {
            let engine = load_engine(&snapshot)?;
            let pairs = load_pairs(&pairs)?;
            let variants = if variants.is_empty() {
                Variant::ALL.to_vec()
            } else {
                variants
            };
            let hits = evaluate(&engine, &pairs, &variants)?;
            let mut w = output(out.as_deref())?;
            write!(w, "variant")?;
            for k in SWEEP_KS {
                write!(w, ",hit{k}")?;
            }
            writeln!(w)?;
            for (v, h) in variants.iter().zip(hits) {
                writeln!(w, "{v},{},{},{},{}", h[0], h[1], h[2], h[3])?;
            }
            w.flush()?;
            Ok(())
        }

        Command::Eval(EvalCmd::Automation {
            snapshot,
            pairs,
            variant,
            tts,
            out,
        }) => {
            let engine = load_engine(&snapshot)?;
            let pairs = load_pairs(&pairs)?;
            let variant = variant.unwrap_or(engine.default_variant());
            let ranked = rank_all(&engine, &pairs, 1, variant)?;
            let gold: Vec<DocId> = pairs.iter().map(|p| p.doc_id.clone()).collect();
            let tts = tts.map(|g| g.0).unwrap_or_else(default_tt_grid);
            let rows = automation_curve(&top_predictions(&ranked)?, &gold, &tts)?;
            write_automation_csv(output(out.as_deref())?, &rows)?;
            Ok(())
        }

        Command::Eval(EvalCmd::Sweep {
            corpus,
            equivalences,
            param,
            grid,
            trials,
            variants,
            no_cv,
            out,
            means_out,
        }) => {
            let corpus = load_corpus(&corpus)?;
            let equiv = load_equivalences(&equivalences)?;
            let mut sc = SweepConfig::new(&param, grid.0);
            sc.base = cfg.gen;
            sc.trials = trials;
            if !variants.is_empty() {
                sc.variants = variants;
            }
            sc.engine = cfg.engine.clone();
            sc.engine.fit_variants = sc.variants.clone();
            if no_cv {
                sc.tr_candidates.clear();
            }
            let rows = sensitivity_sweep(&corpus, &equiv, &sc)?;
            write_sweep_csv(writer(&out)?, &rows)?;
            if let Some(path) = means_out {
                write_sweep_csv(writer(&path)?, &mean_over_trials(&rows))?;
            }
            print_json(json!({ "rows": rows.len(), "out": out }))
        }

        Command::Eval(EvalCmd::Setdiff {
            snapshot,
            pairs,
            a,
            b,
            k,
        }) => {
            let engine = load_engine(&snapshot)?;
            let pairs = load_pairs(&pairs)?;
            let ids = |v: Variant| -> Result<Vec<Vec<DocId>>> {
                Ok(rank_all(&engine, &pairs, k, v)?.iter().map(|r| result_ids(r)).collect())
            };
            let gold: Vec<DocId> = pairs.iter().map(|p| p.doc_id.clone()).collect();
            let (a_only, b_only) = model_set_diff(&ids(a)?, &ids(b)?, &gold, k)?;
            print_json(json!({ "a": a, "b": b, "k": k, "a_only": a_only, "b_only": b_only }))
        }

        Command::Serve(args) => {
            let initial = args.snapshot.as_deref().map(load_engine).transpose()?;
            let config = ServiceConfig {
                tt: cfg.service.tt,
                default_k: cfg.service.default_k,
                train_on_auto_labels: cfg.service.train_on_auto_labels,
                engine: cfg.engine.clone(),
            };
            let service = Arc::new(Service::open(&args.data_dir, initial, config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("listening on {}", args.addr);
            runtime.block_on(namelink_service::serve(service, args.addr))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
