//! Experiment configuration and the before/after/ceiling runner.
//!
//! Config files are `key = value` lines; `#` starts a comment. Relative
//! paths resolve against the config file's directory.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `source`, `target` | required | `.cvec` spaces |
//! | `dictionary` | required | seed dictionary TSV (`synset_id \t role`) |
//! | `table` | none | concept table TSV; enables category slices |
//! | `gold` | none | `query_id \t target_id` TSV overriding shared-id gold |
//! | `source_language`, `target_language` | file stems | language labels |
//! | `strategy` | `vanilla` | `vanilla` or `prompt` |
//! | `modes` | `before,after,ceiling` | modes to run |
//! | `k` | `1,5,10,30` | cut-offs |
//! | `method` | `csls` | `csls` or `nn` |
//! | `csls_k` | `10` | CSLS neighbourhood size |
//! | `csls_neighbourhood` | `full` | `full` vocabulary or `queries` only |
//! | `preprocessing` | `unit` | `unit`, `center_then_unit`, `none` |
//! | `seed` | `0` | down-sampling seed |
//! | `ceiling_queries` | `test` | `test` or `all` (train and test) |
//! | `block_size` | `1024` | targets per scoring block |

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::alignment::{apply_map, procrustes_fit};
use crate::dataset::{downsample_category, load_dictionary, load_table, Category, ConceptTable, Role, SeedDictionary};
use crate::embedding::{load_space, normalize_space, EmbeddingSpace, Preprocessing};
use crate::error::{Error, Result};
use crate::evaluation::{hits_at_k, CategoryFilter, EvalEntry, EvalReport, Mode, Strategy, DEFAULT_KS};
use crate::retrieval::{retrieve, Method, RetrievalConfig, RetrievalResult, DEFAULT_BLOCK_SIZE, DEFAULT_CSLS_K};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CeilingQueries {
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighbourhood {
    #[default]
    Full,
    Queries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: PathBuf,
    pub target: PathBuf,
    pub dictionary: PathBuf,
    pub table: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub source_language: Option<String>,
    pub target_language: Option<String>,
    pub strategy: Strategy,
    pub modes: Vec<Mode>,
    pub ks: Vec<usize>,
    pub method: Method,
    pub csls_k: usize,
    pub neighbourhood: Neighbourhood,
    pub preprocessing: Preprocessing,
    pub seed: u64,
    pub ceiling_queries: CeilingQueries,
    pub block_size: usize,
}

impl ExperimentConfig {
    pub fn new(source: impl Into<PathBuf>, target: impl Into<PathBuf>, dictionary: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            source: source.into(),
            target: target.into(),
            dictionary: dictionary.into(),
            table: None,
            gold: None,
            source_language: None,
            target_language: None,
            strategy: Strategy::Vanilla,
            modes: Mode::ALL.to_vec(),
            ks: DEFAULT_KS.to_vec(),
            method: Method::Csls,
            csls_k: DEFAULT_CSLS_K,
            neighbourhood: Neighbourhood::Full,
            preprocessing: Preprocessing::Unit,
            seed: 0,
            ceiling_queries: CeilingQueries::Test,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }

    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::format(origin, lineno, "expected key = value"));
            };
            let key = key.trim().to_string();
            if values.insert(key.clone(), (lineno, value.trim().to_string())).is_some() {
                return Err(Error::format(origin, lineno, format!("key {key} set twice")));
            }
        }

        let take = |values: &mut BTreeMap<String, (usize, String)>, key: &str| values.remove(key);
        let path = |v: String| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let required = |values: &mut BTreeMap<String, (usize, String)>, key: &str| {
            take(values, key)
                .map(|(_, v)| v)
                .ok_or_else(|| Error::format(origin, 0, format!("missing required key {key}")))
        };

        let mut cfg = ExperimentConfig::new(
            path(required(&mut values, "source")?),
            path(required(&mut values, "target")?),
            path(required(&mut values, "dictionary")?),
        );
        cfg.table = take(&mut values, "table").map(|(_, v)| path(v));
        cfg.gold = take(&mut values, "gold").map(|(_, v)| path(v));
        cfg.source_language = take(&mut values, "source_language").map(|(_, v)| v);
        cfg.target_language = take(&mut values, "target_language").map(|(_, v)| v);

        fn parsed<T: std::str::FromStr>(origin: &str, (line, v): (usize, String), key: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::format(origin, line, format!("invalid value {v:?} for {key}")))
        }
        fn list<T: std::str::FromStr>(origin: &str, (line, v): (usize, String), key: &str) -> Result<Vec<T>> {
            v.split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| Error::format(origin, line, format!("invalid item {item:?} in {key}")))
                })
                .collect()
        }

        if let Some(v) = take(&mut values, "strategy") {
            cfg.strategy = parsed(origin, v, "strategy")?;
        }
        if let Some(v) = take(&mut values, "modes") {
            cfg.modes = list(origin, v, "modes")?;
        }
        if let Some(v) = take(&mut values, "k") {
            cfg.ks = list(origin, v, "k")?;
        }
        if let Some(v) = take(&mut values, "method") {
            cfg.method = parsed(origin, v, "method")?;
        }
        if let Some(v) = take(&mut values, "csls_k") {
            cfg.csls_k = parsed(origin, v, "csls_k")?;
        }
        if let Some((line, v)) = take(&mut values, "csls_neighbourhood") {
            cfg.neighbourhood = match v.as_str() {
                "full" => Neighbourhood::Full,
                "queries" => Neighbourhood::Queries,
                _ => return Err(Error::format(origin, line, format!("invalid csls_neighbourhood {v:?}"))),
            };
        }
        if let Some(v) = take(&mut values, "preprocessing") {
            cfg.preprocessing = parsed(origin, v, "preprocessing")?;
        }
        if let Some(v) = take(&mut values, "seed") {
            cfg.seed = parsed(origin, v, "seed")?;
        }
        if let Some((line, v)) = take(&mut values, "ceiling_queries") {
            cfg.ceiling_queries = match v.as_str() {
                "test" => CeilingQueries::Test,
                "all" => CeilingQueries::All,
                _ => return Err(Error::format(origin, line, format!("invalid ceiling_queries {v:?}"))),
            };
        }
        if let Some(v) = take(&mut values, "block_size") {
            cfg.block_size = parsed(origin, v, "block_size")?;
        }
        if let Some((key, (line, _))) = values.into_iter().next() {
            return Err(Error::format(origin, line, format!("unknown key {key}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, &path.display().to_string(), base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::invalid("no modes configured"));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::invalid("k list must be non-empty and positive"));
        }
        if self.csls_k == 0 {
            return Err(Error::invalid("csls_k must be positive"));
        }
        if self.block_size == 0 {
            return Err(Error::invalid("block_size must be positive"));
        }
        Ok(())
    }

    /// Sorted `key = value` text with every default resolved.
    pub fn canonical(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let join = |items: Vec<String>| items.join(",");
        let fields: BTreeMap<&str, String> = BTreeMap::from([
            ("block_size", self.block_size.to_string()),
            (
                "ceiling_queries",
                match self.ceiling_queries {
                    CeilingQueries::Test => "test",
                    CeilingQueries::All => "all",
                }
                .to_string(),
            ),
            ("csls_k", self.csls_k.to_string()),
            (
                "csls_neighbourhood",
                match self.neighbourhood {
                    Neighbourhood::Full => "full",
                    Neighbourhood::Queries => "queries",
                }
                .to_string(),
            ),
            ("dictionary", self.dictionary.display().to_string()),
            ("gold", opt(&self.gold)),
            ("k", join(self.ks.iter().map(usize::to_string).collect())),
            ("method", self.method.to_string()),
            ("modes", join(self.modes.iter().map(Mode::to_string).collect())),
            ("preprocessing", self.preprocessing.to_string()),
            ("seed", self.seed.to_string()),
            ("source", self.source.display().to_string()),
            ("source_language", self.source_language.clone().unwrap_or_default()),
            ("strategy", self.strategy.to_string()),
            ("table", opt(&self.table)),
            ("target", self.target.display().to_string()),
            ("target_language", self.target_language.clone().unwrap_or_default()),
        ]);
        fields.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`ExperimentConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }
}

/// Hex SHA-256 of a canonical configuration text.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Loaded inputs for one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub source: EmbeddingSpace,
    pub target: EmbeddingSpace,
    pub dictionary: SeedDictionary,
    pub table: Option<ConceptTable>,
    /// Explicit gold targets; `None` means query and gold share an id.
    pub gold: Option<HashMap<String, String>>,
}

impl ExperimentData {
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let mut source = load_space(&config.source, None)?;
        let mut target = load_space(&config.target, Some(source.dim()))?;
        if let Some(lang) = &config.source_language {
            source = source.with_language(lang.clone());
        }
        if let Some(lang) = &config.target_language {
            target = target.with_language(lang.clone());
        }
        let gold = match &config.gold {
            Some(path) => Some(load_gold(path)?),
            None => None,
        };
        Ok(ExperimentData {
            source,
            target,
            dictionary: load_dictionary(&config.dictionary)?,
            table: config.table.as_ref().map(load_table).transpose()?,
            gold,
        })
    }
}

/// Gold TSV: `query_id \t target_id`.
pub fn load_gold(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let mut gold = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((q, t)) = line.split_once('\t') else {
            return Err(Error::format(&origin, i + 1, "expected query_id\\ttarget_id"));
        };
        if gold.insert(q.to_string(), t.to_string()).is_some() {
            return Err(Error::format(&origin, i + 1, format!("query {q} listed twice")));
        }
    }
    Ok(gold)
}

/// Report plus the raw per-mode rankings it was computed from.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub results: BTreeMap<Mode, Vec<RetrievalResult>>,
    pub gold: HashMap<String, String>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let data = ExperimentData::load(config)?;
    run_on_data(config, &data).map(|o| o.report)
}

/// Runs every configured mode on already-loaded inputs.
pub fn run_on_data(config: &ExperimentConfig, data: &ExperimentData) -> Result<ExperimentOutcome> {
    config.validate()?;
    let config_hash = config.hash();
    let source = normalize_space(&data.source, config.preprocessing)?;
    let target = normalize_space(&data.target, config.preprocessing)?;

    let gold: HashMap<String, String> = match &data.gold {
        Some(g) => g.clone(),
        None => data
            .dictionary
            .entries()
            .iter()
            .map(|e| (e.synset_id.clone(), e.synset_id.clone()))
            .collect(),
    };

    let categories = category_slices(config, data)?;
    let max_k = *config.ks.iter().max().expect("validated non-empty");
    let retrieval = RetrievalConfig::new(config.method, max_k.min(target.len()))
        .with_csls_k(config.csls_k)
        .with_block_size(config.block_size);

    let mut report = EvalReport {
        config_hash: config_hash.clone(),
        entries: Vec::new(),
    };
    let mut all_results = BTreeMap::new();
    for &mode in &config.modes {
        let (mapped, query_roles): (EmbeddingSpace, &[Role]) = match mode {
            Mode::Before => (source.clone(), &[Role::Test]),
            Mode::After => {
                let map = procrustes_fit(&source, &target, &data.dictionary, &[Role::Train])?;
                (apply_map(&map, &source)?, &[Role::Test])
            }
            Mode::Ceiling => {
                let map = procrustes_fit(&source, &target, &data.dictionary, &[Role::Train, Role::Test])?;
                let roles: &[Role] = match config.ceiling_queries {
                    CeilingQueries::Test => &[Role::Test],
                    CeilingQueries::All => &[Role::Train, Role::Test],
                };
                (apply_map(&map, &source)?, roles)
            }
        };

        let query_ids: Vec<&str> = data.dictionary.ids_with_roles(query_roles).collect();
        let mut rows = Vec::with_capacity(query_ids.len());
        for id in &query_ids {
            rows.push(mapped.require(id)?);
            let gold_id = gold
                .get(*id)
                .ok_or_else(|| Error::invalid(format!("no gold target for query {id}")))?;
            target.require(gold_id)?;
        }
        if rows.is_empty() {
            return Err(Error::invalid(format!("{mode} mode has no queries")));
        }
        let queries = mapped.select_rows(&rows)?;
        let neighbourhood = match config.neighbourhood {
            Neighbourhood::Full => Some(&mapped),
            Neighbourhood::Queries => None,
        };
        let results = retrieve(&queries, &target, &retrieval, neighbourhood)?;
        let by_id: HashMap<&str, &RetrievalResult> =
            results.iter().map(|r| (r.query_id.as_str(), r)).collect();

        for (filter, members) in &categories {
            let subset: Vec<RetrievalResult> = query_ids
                .iter()
                .filter(|id| members.as_ref().is_none_or(|m| m.contains(**id)))
                .map(|id| by_id[id].clone())
                .collect();
            if subset.is_empty() {
                log::warn!("{mode}/{filter}: no queries, slice skipped");
                continue;
            }
            for &k in &config.ks {
                report.entries.push(EvalEntry {
                    source_language: source.language().to_string(),
                    target_language: target.language().to_string(),
                    strategy: config.strategy,
                    mode,
                    category: *filter,
                    k,
                    hits: hits_at_k(&subset, &gold, k)?,
                    n_queries: subset.len(),
                    config_hash: config_hash.clone(),
                });
            }
        }
        all_results.insert(mode, results);
    }
    Ok(ExperimentOutcome {
        report,
        results: all_results,
        gold,
    })
}

type Slice = (CategoryFilter, Option<HashSet<String>>);

/// Query-id membership per category filter; `None` admits every query.
fn category_slices(config: &ExperimentConfig, data: &ExperimentData) -> Result<Vec<Slice>> {
    let mut slices: Vec<Slice> = vec![(CategoryFilter::All, None)];
    let Some(table) = &data.table else {
        return Ok(slices);
    };
    let categories = table.category_of();
    let mut by_category: BTreeMap<Category, Vec<String>> = BTreeMap::new();
    for entry in data.dictionary.entries() {
        let Some(&category) = categories.get(entry.synset_id.as_str()) else {
            return Err(Error::invalid(format!(
                "dictionary concept {} missing from concept table",
                entry.synset_id
            )));
        };
        by_category.entry(category).or_default().push(entry.synset_id.clone());
    }
    let set = |ids: &[String]| Some(ids.iter().cloned().collect());
    let abstract_ids = by_category.remove(&Category::Abstract).unwrap_or_default();
    let physical_ids = by_category.remove(&Category::Physical).unwrap_or_default();

    // Down-sampling equalizes test-query counts, so it works on test ids only.
    let test_ids: HashMap<&str, ()> = data
        .dictionary
        .ids_with_roles(&[Role::Test])
        .map(|id| (id, ()))
        .collect();
    let abstract_test = abstract_ids.iter().filter(|id| test_ids.contains_key(id.as_str())).count();
    let physical_test: Vec<String> = physical_ids
        .iter()
        .filter(|id| test_ids.contains_key(id.as_str()))
        .cloned()
        .collect();
    let target = abstract_test.min(physical_test.len());
    let downsampled = downsample_category(&physical_test, target, config.seed)?;

    slices.push((CategoryFilter::Abstract, set(&abstract_ids)));
    slices.push((CategoryFilter::Physical, set(&physical_ids)));
    slices.push((CategoryFilter::PhysicalDownsampled, set(&downsampled)));
    Ok(slices)
}
