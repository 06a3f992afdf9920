//! Precision@k and evaluation reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numfmt::format_fixed6;
use crate::retrieval::RetrievalResult;

pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 30];

/// Number of results whose gold target is within the first `k` candidates.
///
/// A ranked list shorter than `k` is taken to cover the whole target
/// vocabulary.
pub fn hits_at_k(results: &[RetrievalResult], gold: &HashMap<String, String>, k: usize) -> Result<usize> {
    if k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut hits = 0;
    for r in results {
        let Some(expected) = gold.get(&r.query_id) else {
            return Err(Error::invalid(format!("no gold target for query {}", r.query_id)));
        };
        if r.ranked.iter().take(k).any(|c| &c.target_id == expected) {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Fraction of queries whose gold target appears in the top `k`.
pub fn precision_at_k(results: &[RetrievalResult], gold: &HashMap<String, String>, k: usize) -> Result<f64> {
    let hits = hits_at_k(results, gold, k)?;
    if results.is_empty() {
        return Err(Error::invalid("precision over an empty result set"));
    }
    Ok(hits as f64 / results.len() as f64)
}

/// Gold map where every query's gold target shares its id.
pub fn identity_gold<'a>(ids: impl IntoIterator<Item = &'a str>) -> HashMap<String, String> {
    ids.into_iter().map(|id| (id.to_string(), id.to_string())).collect()
}

macro_rules! labelled_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(Error::invalid(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

labelled_enum!(
    /// How concept embeddings were extracted.
    Strategy { Vanilla => "vanilla", Prompt => "prompt" }
);

labelled_enum!(
    /// `Before`: raw spaces. `After`: map fitted on train pairs.
    /// `Ceiling`: map fitted on train and test pairs (leaky upper bound).
    Mode { Before => "before", After => "after", Ceiling => "ceiling" }
);

labelled_enum!(
    CategoryFilter {
        All => "all",
        Abstract => "abstract",
        Physical => "physical",
        PhysicalDownsampled => "physical_downsampled",
    }
);

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEntry {
    pub source_language: String,
    pub target_language: String,
    pub strategy: Strategy,
    pub mode: Mode,
    pub category: CategoryFilter,
    pub k: usize,
    pub hits: usize,
    pub n_queries: usize,
    pub config_hash: String,
}

impl EvalEntry {
    /// `hits / n_queries`.
    pub fn precision(&self) -> f64 {
        if self.n_queries == 0 {
            0.0
        } else {
            self.hits as f64 / self.n_queries as f64
        }
    }

    fn sort_key(&self) -> (&str, &str, Strategy, Mode, CategoryFilter, usize) {
        (
            &self.source_language,
            &self.target_language,
            self.strategy,
            self.mode,
            self.category,
            self.k,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub config_hash: String,
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    /// Entries in canonical order.
    pub fn sorted_entries(&self) -> Vec<&EvalEntry> {
        let mut entries: Vec<&EvalEntry> = self.entries.iter().collect();
        entries.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        entries
    }

    pub fn find(&self, mode: Mode, category: CategoryFilter, k: usize) -> Option<&EvalEntry> {
        self.entries
            .iter()
            .find(|e| e.mode == mode && e.category == category && e.k == k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "markdown",
        })
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Canonical JSON: keys sorted, one entry per line, precision at 6 decimals.
fn render_json(report: &EvalReport) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!("  \"config_hash\": {},\n", json_string(&report.config_hash)));
    let entries = report.sorted_entries();
    if entries.is_empty() {
        out.push_str("  \"entries\": []\n}\n");
        return out;
    }
    out.push_str("  \"entries\": [\n");
    for (i, e) in entries.iter().enumerate() {
        out.push_str(&format!(
            "    {{\"category\": {}, \"config_hash\": {}, \"hits\": {}, \"k\": {}, \"mode\": {}, \"n_queries\": {}, \"precision\": {}, \"source_language\": {}, \"strategy\": {}, \"target_language\": {}}}",
            json_string(e.category.as_str()),
            json_string(&e.config_hash),
            e.hits,
            e.k,
            json_string(e.mode.as_str()),
            e.n_queries,
            format_fixed6(e.precision()),
            json_string(&e.source_language),
            json_string(e.strategy.as_str()),
            json_string(&e.target_language),
        ));
        out.push_str(if i + 1 < entries.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ]\n}\n");
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from(
        "source_language,target_language,strategy,mode,category,k,precision,hits,n_queries,config_hash\n",
    );
    for e in report.sorted_entries() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&e.source_language),
            csv_field(&e.target_language),
            e.strategy,
            e.mode,
            e.category,
            e.k,
            format_fixed6(e.precision()),
            e.hits,
            e.n_queries,
            csv_field(&e.config_hash),
        ));
    }
    out
}

/// One table per (source, target, strategy): rows are `P@k`, columns are
/// mode/category pairs, values in percent.
fn render_markdown(report: &EvalReport) -> String {
    let mut groups: BTreeMap<(&str, &str, Strategy), Vec<&EvalEntry>> = BTreeMap::new();
    for e in report.sorted_entries() {
        groups
            .entry((&e.source_language, &e.target_language, e.strategy))
            .or_default()
            .push(e);
    }
    let mut out = String::new();
    if groups.is_empty() {
        out.push_str("_no entries_\n");
    }
    for ((src, tgt, strategy), entries) in groups {
        let columns: BTreeSet<(Mode, CategoryFilter)> =
            entries.iter().map(|e| (e.mode, e.category)).collect();
        let ks: BTreeSet<usize> = entries.iter().map(|e| e.k).collect();
        out.push_str(&format!("### {src} → {tgt} ({strategy})\n\n| P@K |"));
        for (mode, category) in &columns {
            out.push_str(&format!(" {mode}/{category} |"));
        }
        out.push_str("\n|---|");
        for _ in &columns {
            out.push_str("---:|");
        }
        out.push('\n');
        for k in ks {
            out.push_str(&format!("| P@{k} |"));
            for &(mode, category) in &columns {
                let cell = entries
                    .iter()
                    .find(|e| e.k == k && e.mode == mode && e.category == category)
                    .map(|e| format!("{:.2}", 100.0 * e.precision()))
                    .unwrap_or_else(|| "-".to_string());
                out.push_str(&format!(" {cell} |"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str(&format!("config: `{}`\n", report.config_hash));
    out
}
