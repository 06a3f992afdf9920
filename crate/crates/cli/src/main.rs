//! `lexalign` command-line tool: one subcommand per pipeline stage.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexalign::alignment::{load_map, save_map};
use lexalign::dataset::{
    build_table, category_stats, identical_form_count, load_annotations, load_dictionary, load_export,
    load_table, save_dictionary, save_table, split_table, BuildOptions, DEFAULT_MAX_FILTERED_DEPTH,
};
use lexalign::evaluation::{hits_at_k, identity_gold, DEFAULT_KS};
use lexalign::experiment::{config_hash, load_gold};
use lexalign::retrieval::{load_results, retrieve, save_results, DEFAULT_CSLS_K};
use lexalign::{
    apply_map, load_space, normalize_space, procrustes_fit, render_report, run_experiment, save_space,
    CategoryFilter, EvalEntry, EvalReport, ExperimentConfig, Method, Mode, Preprocessing, ReportFormat,
    RetrievalConfig, Role, Strategy,
};

#[derive(Debug, Parser)]
#[command(name = "lexalign", version, about = "Align concept embedding spaces and evaluate retrieval")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "LEXALIGN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Intersect WordNet exports into a concept table
    BuildDataset(BuildDatasetArgs),
    /// Sample a seeded train/test split of a concept table
    Split(SplitArgs),
    /// Fit an orthogonal map from seed pairs
    Align(AlignArgs),
    /// Apply a fitted map to a space
    Map(MapArgs),
    /// Rank target concepts for each query
    Retrieve(RetrieveArgs),
    /// Score an experiment config or a results file
    Evaluate(EvaluateArgs),
    /// Identical-form ratios and per-category annotation summaries
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct BuildDatasetArgs {
    /// Export for one language as LANG=PATH; repeat per language
    #[arg(long = "export", value_name = "LANG=PATH", required = true)]
    exports: Vec<String>,
    /// Languages to intersect (default: every exported language)
    #[arg(long, value_delimiter = ',')]
    languages: Vec<String>,
    /// Synsets at this depth or shallower are dropped
    #[arg(long, default_value_t = DEFAULT_MAX_FILTERED_DEPTH)]
    max_filtered_depth: u32,
    /// Language supplying depth, category and the duplicate-check lemma
    #[arg(long, default_value = "en")]
    reference: String,
    /// Sense-count/frequency TSV to attach
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Map lexicographer file names in the category column
    #[arg(long)]
    lexname_heuristic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    table: PathBuf,
    /// Training concepts drawn from each category
    #[arg(long)]
    train_per_category: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Seed dictionary TSV
    #[arg(long)]
    dict: PathBuf,
    /// Dictionary roles used as seed pairs
    #[arg(long, value_delimiter = ',', default_value = "train")]
    roles: Vec<Role>,
    #[arg(long, default_value_t = Preprocessing::Unit)]
    preprocessing: Preprocessing,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[arg(long)]
    map: PathBuf,
    /// Space to map; the map's recorded preprocessing is applied first
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    /// Query space, already in the target space
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    /// Restrict queries to dictionary entries with `--role`
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long, default_value = "test", requires = "dict")]
    role: Role,
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = Method::Csls)]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_CSLS_K)]
    csls_k: usize,
    /// Preprocessing applied to the target space
    #[arg(long, default_value_t = Preprocessing::Unit)]
    preprocessing: Preprocessing,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Experiment config; runs every configured mode
    #[arg(long, conflicts_with = "results", required_unless_present = "results")]
    config: Option<PathBuf>,
    /// Results TSV to score instead of running an experiment
    #[arg(long)]
    results: Option<PathBuf>,
    /// `query_id \t target_id` gold TSV (default: shared ids)
    #[arg(long, requires = "results")]
    gold: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    k: Vec<usize>,
    /// Mode label recorded for a results file
    #[arg(long, default_value_t = Mode::After)]
    mode: Mode,
    #[arg(long, default_value = "src")]
    source_language: String,
    #[arg(long, default_value = "tgt")]
    target_language: String,
    #[arg(long, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    table: PathBuf,
    /// Languages compared against the reference (default: all others)
    #[arg(long, value_delimiter = ',')]
    lang: Vec<String>,
    #[arg(long, default_value = "en")]
    reference: String,
}

#[derive(Debug)]
enum CliError {
    Core(lexalign::Error),
    Usage(String),
}

impl From<lexalign::Error> for CliError {
    fn from(e: lexalign::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Sorted `key = value` record of what a command executed.
#[derive(Default)]
struct Invocation(BTreeMap<&'static str, String>);

impl Invocation {
    fn new(command: &str) -> Self {
        let mut inv = Invocation::default();
        inv.set("command", command);
        inv
    }

    fn set(&mut self, key: &'static str, value: impl Display) -> &mut Self {
        self.0.insert(key, value.to_string());
        self
    }

    fn path(&mut self, key: &'static str, value: &Path) -> &mut Self {
        self.set(key, value.display())
    }

    fn hash(&self) -> String {
        let text: String = self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        config_hash(&text)
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn build_dataset(args: &BuildDatasetArgs) -> CliResult<String> {
    let mut inv = Invocation::new("build-dataset");
    let mut exports = Vec::new();
    for entry in &args.exports {
        let (lang, path) = entry
            .split_once('=')
            .filter(|(l, p)| !l.is_empty() && !p.is_empty())
            .ok_or_else(|| CliError::Usage(format!("--export expects LANG=PATH, got {entry:?}")))?;
        exports.push(load_export(path, lang, args.lexname_heuristic)?);
    }
    let mut languages = args.languages.clone();
    if languages.is_empty() {
        languages = exports.iter().map(|e| e.language.clone()).collect();
    }
    let options = BuildOptions {
        max_filtered_depth: args.max_filtered_depth,
        reference_language: args.reference.clone(),
    };
    let mut table = build_table(&exports, &languages, &options)?;
    if let Some(path) = &args.annotations {
        table.annotate(&load_annotations(path)?);
        inv.path("annotations", path);
    }
    save_table(&table, &args.out)?;
    log::info!("build-dataset: {} records", table.len());
    inv.set("exports", args.exports.join(","))
        .set("languages", languages.join(","))
        .set("max_filtered_depth", args.max_filtered_depth)
        .set("reference", &args.reference)
        .set("lexname_heuristic", args.lexname_heuristic)
        .path("out", &args.out);
    Ok(inv.hash())
}

fn split(args: &SplitArgs) -> CliResult<String> {
    let table = load_table(&args.table)?;
    let dict = split_table(&table, args.train_per_category, args.seed)?;
    save_dictionary(&dict, &args.out)?;
    log::info!(
        "split: {} train, {} test",
        dict.count(Role::Train),
        dict.count(Role::Test)
    );
    Ok(Invocation::new("split")
        .path("table", &args.table)
        .set("train_per_category", args.train_per_category)
        .set("seed", args.seed)
        .path("out", &args.out)
        .hash())
}

fn align(args: &AlignArgs) -> CliResult<String> {
    let src = normalize_space(&load_space(&args.src, None)?, args.preprocessing)?;
    let tgt = normalize_space(&load_space(&args.tgt, Some(src.dim()))?, args.preprocessing)?;
    let dict = load_dictionary(&args.dict)?;
    let map = procrustes_fit(&src, &tgt, &dict, &args.roles)?;
    save_map(&map, &args.out)?;
    log::info!(
        "align: {}x{} map from {} pairs",
        map.dim(),
        map.dim(),
        map.seed_size().unwrap_or(0)
    );
    Ok(Invocation::new("align")
        .path("src", &args.src)
        .path("tgt", &args.tgt)
        .path("dict", &args.dict)
        .set("roles", join(&args.roles))
        .set("preprocessing", args.preprocessing)
        .path("out", &args.out)
        .hash())
}

fn map(args: &MapArgs) -> CliResult<String> {
    let map = load_map(&args.map)?;
    let space = normalize_space(&load_space(&args.space, Some(map.dim()))?, map.preprocessing())?;
    let mapped = apply_map(&map, &space)?;
    save_space(&mapped, &args.out)?;
    log::info!("map: {} vectors", mapped.len());
    Ok(Invocation::new("map")
        .path("map", &args.map)
        .path("space", &args.space)
        .path("out", &args.out)
        .hash())
}

fn retrieve_cmd(args: &RetrieveArgs) -> CliResult<String> {
    let all = load_space(&args.queries, None)?;
    let targets = normalize_space(&load_space(&args.targets, Some(all.dim()))?, args.preprocessing)?;
    let mut inv = Invocation::new("retrieve");
    let queries = match &args.dict {
        Some(path) => {
            let dict = load_dictionary(path)?;
            let rows = dict
                .ids_with_roles(&[args.role])
                .map(|id| all.require(id))
                .collect::<Result<Vec<_>, _>>()?;
            inv.path("dict", path).set("role", args.role);
            all.select_rows(&rows)?
        }
        None => all.clone(),
    };
    let config = RetrievalConfig::new(args.method, args.k).with_csls_k(args.csls_k);
    let results = retrieve(&queries, &targets, &config, Some(&all))?;
    save_results(&results, &args.out)?;
    log::info!("retrieve: {} queries", results.len());
    inv.path("queries", &args.queries)
        .path("targets", &args.targets)
        .set("k", args.k)
        .set("method", args.method)
        .set("csls_k", args.csls_k)
        .set("preprocessing", args.preprocessing)
        .path("out", &args.out);
    Ok(inv.hash())
}

fn evaluate(args: &EvaluateArgs) -> CliResult<String> {
    if args.k.contains(&0) {
        return Err(CliError::Usage("--k values must be positive".into()));
    }
    let (report, hash) = match (&args.config, &args.results) {
        (Some(path), _) => {
            let config = ExperimentConfig::load(path)?;
            let report = run_experiment(&config)?;
            (report, config.hash())
        }
        (None, Some(path)) => {
            let results = load_results(path, Method::Csls, DEFAULT_CSLS_K)?;
            let gold: HashMap<String, String> = match &args.gold {
                Some(g) => load_gold(g)?,
                None => identity_gold(results.iter().map(|r| r.query_id.as_str())),
            };
            let mut inv = Invocation::new("evaluate");
            inv.path("results", path)
                .set("k", join(&args.k))
                .set("mode", args.mode)
                .set("source_language", &args.source_language)
                .set("target_language", &args.target_language);
            if let Some(g) = &args.gold {
                inv.path("gold", g);
            }
            let hash = inv.hash();
            let mut entries = Vec::new();
            for &k in &args.k {
                entries.push(EvalEntry {
                    source_language: args.source_language.clone(),
                    target_language: args.target_language.clone(),
                    strategy: Strategy::Vanilla,
                    mode: args.mode,
                    category: CategoryFilter::All,
                    k,
                    hits: hits_at_k(&results, &gold, k)?,
                    n_queries: results.len(),
                    config_hash: hash.clone(),
                });
            }
            (
                EvalReport {
                    config_hash: hash.clone(),
                    entries,
                },
                hash,
            )
        }
        (None, None) => unreachable!("clap requires --config or --results"),
    };
    print!("{}", render_report(&report, args.format));
    Ok(hash)
}

fn stats(args: &StatsArgs) -> CliResult<String> {
    let table = load_table(&args.table)?;
    let mut langs = args.lang.clone();
    if langs.is_empty() {
        langs = table
            .languages()
            .iter()
            .filter(|l| **l != args.reference)
            .cloned()
            .collect();
    }
    println!("records\t{}", table.len());
    for lang in &langs {
        let (same, total) = identical_form_count(&table, lang, &args.reference)?;
        let ratio = if total == 0 { 0.0 } else { same as f64 / total as f64 };
        println!("identical_forms\t{lang}\t{same}/{total}\t{ratio:.4}");
    }
    for summary in category_stats(&table) {
        let cat = summary.category;
        println!("category\t{cat}\t{}", summary.records);
        for (name, s, excluded) in [
            ("senses", summary.senses, summary.senses_excluded),
            ("frequency", summary.frequency, summary.frequency_excluded),
        ] {
            match s {
                Some(s) => println!(
                    "{name}\t{cat}\tmean {:.2}\tmedian {}\tn {}\texcluded {excluded}",
                    s.mean, s.median, s.count
                ),
                None => println!("{name}\t{cat}\tunavailable\texcluded {excluded}"),
            }
        }
    }
    Ok(Invocation::new("stats")
        .path("table", &args.table)
        .set("lang", langs.join(","))
        .set("reference", &args.reference)
        .hash())
}

fn dispatch(command: &Command) -> CliResult<String> {
    match command {
        Command::BuildDataset(a) => build_dataset(a),
        Command::Split(a) => split(a),
        Command::Align(a) => align(a),
        Command::Map(a) => map(a),
        Command::Retrieve(a) => retrieve_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Stats(a) => stats(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        let built = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        if let Err(e) = built {
            eprintln!("error: invalid-argument: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli.command) {
        Ok(hash) => {
            eprintln!("config: {hash}");
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: invalid-argument: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {}: {e}", e.category());
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
