//! Parallel concept tables, seed dictionaries and dataset statistics.
//!
//! Inputs are per-language WordNet exports in TSV form:
//!
//! ```text
//! synset_id \t depth \t category \t lemma1|lemma2|...
//! ```
//!
//! where lemmas are listed most frequent first and `category` is `abstract`
//! or `physical` (or, with the lexicographer-file heuristic enabled, a
//! lexname such as `noun.artifact`).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::sampling::SeededRng;

/// Default depth cut: synsets at depth `<= 5` (root = 0) are dropped.
pub const DEFAULT_MAX_FILTERED_DEPTH: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Abstract,
    Physical,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Abstract, Category::Physical];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Abstract => "abstract",
            Category::Physical => "physical",
        }
    }

    /// Approximate label from a WordNet lexicographer file name.
    ///
    /// This is a heuristic, not a reproduction of any published labeling:
    /// tangible lexnames (artifacts, organisms, substances, places, ...) map
    /// to `Physical`, all other noun lexnames to `Abstract`.
    pub fn from_lexname(lexname: &str) -> Option<Category> {
        let suffix = lexname.strip_prefix("noun.")?;
        match suffix {
            "animal" | "artifact" | "body" | "food" | "location" | "object" | "person"
            | "plant" | "substance" => Some(Category::Physical),
            "Tops" | "act" | "attribute" | "cognition" | "communication" | "event"
            | "feeling" | "group" | "motive" | "phenomenon" | "possession" | "process"
            | "quantity" | "relation" | "shape" | "state" | "time" => Some(Category::Abstract),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abstract" => Ok(Category::Abstract),
            "physical" => Ok(Category::Physical),
            other => Err(Error::invalid(format!("unknown category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptRecord {
    pub synset_id: String,
    pub depth: u32,
    pub category: Category,
    /// Language code to surface form (first lemma).
    pub forms: BTreeMap<String, String>,
    pub sense_count: Option<u32>,
    pub frequency: Option<u64>,
}

impl ConceptRecord {
    pub fn form(&self, language: &str) -> Option<&str> {
        self.forms.get(language).map(String::as_str)
    }
}

/// Parallel concepts over a fixed list of languages, ordered by synset id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptTable {
    languages: Vec<String>,
    records: Vec<ConceptRecord>,
}

impl ConceptTable {
    pub fn new(languages: Vec<String>, records: Vec<ConceptRecord>) -> Result<Self> {
        let mut seen_lang = HashSet::new();
        for lang in &languages {
            if !seen_lang.insert(lang) {
                return Err(Error::invalid(format!("language {lang} listed twice")));
            }
        }
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if !seen.insert(record.synset_id.as_str()) {
                return Err(Error::invalid(format!("duplicate synset {}", record.synset_id)));
            }
            if let Some(lang) = languages.iter().find(|l| !record.forms.contains_key(*l)) {
                return Err(Error::invalid(format!(
                    "synset {} has no {lang} form",
                    record.synset_id
                )));
            }
        }
        Ok(ConceptTable { languages, records })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn records(&self) -> &[ConceptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_language(&self, language: &str) -> bool {
        self.languages.iter().any(|l| l == language)
    }

    pub fn category_of(&self) -> HashMap<&str, Category> {
        self.records
            .iter()
            .map(|r| (r.synset_id.as_str(), r.category))
            .collect()
    }

    /// Attaches `(sense_count, frequency)` annotations keyed by synset id.
    /// Unlisted synsets keep their current values.
    pub fn annotate(&mut self, annotations: &HashMap<String, Annotation>) {
        for record in &mut self.records {
            if let Some(a) = annotations.get(&record.synset_id) {
                record.sense_count = a.sense_count;
                record.frequency = a.frequency;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Annotation {
    pub sense_count: Option<u32>,
    pub frequency: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportEntry {
    pub synset_id: String,
    pub depth: u32,
    pub category: Category,
    pub lemmas: Vec<String>,
}

/// One language's synset listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordNetExport {
    pub language: String,
    pub entries: Vec<ExportEntry>,
}

fn data_lines<'a>(text: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.is_empty())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a WordNet export. With `lexname_heuristic`, category cells may
/// hold lexicographer file names which are mapped by [`Category::from_lexname`].
pub fn parse_export(
    text: &str,
    origin: &str,
    language: &str,
    lexname_heuristic: bool,
) -> Result<WordNetExport> {
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, depth, category, lemmas] = fields[..] else {
            return Err(Error::format(
                origin,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        };
        if id.is_empty() {
            return Err(Error::format(origin, lineno, "empty synset id"));
        }
        let depth: u32 = depth
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("invalid depth {depth:?}")))?;
        let category = match category.parse::<Category>() {
            Ok(c) => c,
            Err(_) if lexname_heuristic => Category::from_lexname(category).ok_or_else(|| {
                Error::format(origin, lineno, format!("unmapped lexname {category:?}"))
            })?,
            Err(_) => {
                return Err(Error::format(
                    origin,
                    lineno,
                    format!("invalid category {category:?}"),
                ))
            }
        };
        let lemmas: Vec<String> = lemmas.split('|').map(str::to_string).collect();
        if lemmas.iter().any(String::is_empty) {
            return Err(Error::format(origin, lineno, "empty lemma"));
        }
        if let Some(first) = seen.insert(id.to_string(), lineno) {
            return Err(Error::format(
                origin,
                lineno,
                format!("synset {id} listed twice (first on line {first})"),
            ));
        }
        entries.push(ExportEntry {
            synset_id: id.to_string(),
            depth,
            category,
            lemmas,
        });
    }
    Ok(WordNetExport {
        language: language.to_string(),
        entries,
    })
}

pub fn load_export(
    path: impl AsRef<Path>,
    language: &str,
    lexname_heuristic: bool,
) -> Result<WordNetExport> {
    let path = path.as_ref();
    parse_export(
        &read_text(path)?,
        &path.display().to_string(),
        language,
        lexname_heuristic,
    )
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Synsets with `depth <= max_filtered_depth` are dropped.
    pub max_filtered_depth: u32,
    /// Language whose export supplies depth, category and the lemma used for
    /// duplicate detection. Falls back to the smallest requested language
    /// code when not requested.
    pub reference_language: String,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_filtered_depth: DEFAULT_MAX_FILTERED_DEPTH,
            reference_language: "en".to_string(),
        }
    }
}

/// Intersects per-language exports into a parallel concept table.
///
/// Keeps synsets present in every requested language and deeper than
/// `max_filtered_depth`, then removes duplicates: synsets whose reference
/// first lemma is identical keep only the smallest synset id.
pub fn build_table(
    exports: &[WordNetExport],
    languages: &[String],
    options: &BuildOptions,
) -> Result<ConceptTable> {
    if languages.is_empty() {
        return Err(Error::invalid("no languages requested"));
    }
    let mut by_language: HashMap<&str, HashMap<&str, &ExportEntry>> = HashMap::new();
    for export in exports {
        let mut entries = HashMap::with_capacity(export.entries.len());
        for entry in &export.entries {
            if entries.insert(entry.synset_id.as_str(), entry).is_some() {
                return Err(Error::invalid(format!(
                    "synset {} listed twice in {} export",
                    entry.synset_id, export.language
                )));
            }
        }
        if by_language.insert(export.language.as_str(), entries).is_some() {
            return Err(Error::invalid(format!(
                "two exports supplied for {}",
                export.language
            )));
        }
    }
    for lang in languages {
        if !by_language.contains_key(lang.as_str()) {
            return Err(Error::invalid(format!("missing export for language {lang}")));
        }
    }
    let reference = if languages.contains(&options.reference_language) {
        options.reference_language.as_str()
    } else {
        languages.iter().min().expect("non-empty").as_str()
    };

    let reference_entries = &by_language[reference];
    let mut ids: Vec<&str> = reference_entries
        .iter()
        .filter(|(_, e)| e.depth > options.max_filtered_depth)
        .map(|(id, _)| *id)
        .filter(|id| languages.iter().all(|l| by_language[l.as_str()].contains_key(id)))
        .collect();
    ids.sort_unstable();

    let mut seen_lemmas = HashSet::new();
    let mut records = Vec::new();
    for id in ids {
        let entry = reference_entries[id];
        if !seen_lemmas.insert(entry.lemmas[0].as_str()) {
            continue;
        }
        let forms = languages
            .iter()
            .map(|l| (l.clone(), by_language[l.as_str()][id].lemmas[0].clone()))
            .collect();
        records.push(ConceptRecord {
            synset_id: id.to_string(),
            depth: entry.depth,
            category: entry.category,
            forms,
            sense_count: None,
            frequency: None,
        });
    }
    ConceptTable::new(languages.to_vec(), records)
}

const TABLE_FIXED_COLUMNS: [&str; 5] = ["synset_id", "depth", "category", "sense_count", "frequency"];

/// Table TSV: a header naming the fixed columns and then one column per
/// language; missing optional values are empty cells.
pub fn render_table(table: &ConceptTable) -> String {
    let mut out = TABLE_FIXED_COLUMNS.join("\t");
    for lang in &table.languages {
        out.push('\t');
        out.push_str(lang);
    }
    out.push('\n');
    for r in &table.records {
        let senses = r.sense_count.map(|v| v.to_string()).unwrap_or_default();
        let freq = r.frequency.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}",
            r.synset_id, r.depth, r.category, senses, freq
        ));
        for lang in &table.languages {
            out.push('\t');
            out.push_str(&r.forms[lang]);
        }
        out.push('\n');
    }
    out
}

fn parse_optional<T: FromStr>(cell: &str, origin: &str, lineno: usize, what: &str) -> Result<Option<T>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::format(origin, lineno, format!("invalid {what} {cell:?}")))
}

pub fn parse_table(text: &str, origin: &str) -> Result<ConceptTable> {
    let mut lines = data_lines(text);
    let Some((_, header)) = lines.next() else {
        return Err(Error::format(origin, 1, "missing header"));
    };
    let columns: Vec<&str> = header.split('\t').collect();
    if columns.len() < TABLE_FIXED_COLUMNS.len() || columns[..5] != TABLE_FIXED_COLUMNS {
        return Err(Error::format(
            origin,
            1,
            format!("header must start with {}", TABLE_FIXED_COLUMNS.join(",")),
        ));
    }
    let languages: Vec<String> = columns[5..].iter().map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    for (lineno, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(Error::format(
                origin,
                lineno,
                format!("expected {} columns, found {}", columns.len(), cells.len()),
            ));
        }
        let depth = cells[1]
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("invalid depth {:?}", cells[1])))?;
        let category = cells[2]
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("invalid category {:?}", cells[2])))?;
        let forms = languages
            .iter()
            .cloned()
            .zip(cells[5..].iter().map(|s| s.to_string()))
            .collect();
        records.push(ConceptRecord {
            synset_id: cells[0].to_string(),
            depth,
            category,
            forms,
            sense_count: parse_optional(cells[3], origin, lineno, "sense count")?,
            frequency: parse_optional(cells[4], origin, lineno, "frequency")?,
        });
    }
    ConceptTable::new(languages, records).map_err(|e| Error::format(origin, 0, e.to_string()))
}

pub fn load_table(path: impl AsRef<Path>) -> Result<ConceptTable> {
    let path = path.as_ref();
    parse_table(&read_text(path)?, &path.display().to_string())
}

pub fn save_table(table: &ConceptTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_table(table)).map_err(|e| Error::io(path, e))
}

/// Annotation TSV: `synset_id \t sense_count \t frequency`, empty cells allowed.
/// A leading header row with those names is skipped.
pub fn parse_annotations(text: &str, origin: &str) -> Result<HashMap<String, Annotation>> {
    let mut out = HashMap::new();
    for (lineno, line) in data_lines(text) {
        if out.is_empty() && line.starts_with("synset_id\t") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, senses, freq] = fields[..] else {
            return Err(Error::format(origin, lineno, "expected synset_id, sense_count, frequency"));
        };
        let senses: Option<u32> = parse_optional(senses, origin, lineno, "sense count")?;
        if senses == Some(0) {
            return Err(Error::format(origin, lineno, "sense count must be positive"));
        }
        let annotation = Annotation {
            sense_count: senses,
            frequency: parse_optional(freq, origin, lineno, "frequency")?,
        };
        if out.insert(id.to_string(), annotation).is_some() {
            return Err(Error::format(origin, lineno, format!("synset {id} annotated twice")));
        }
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<HashMap<String, Annotation>> {
    let path = path.as_ref();
    parse_annotations(&read_text(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(Error::invalid(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedEntry {
    pub synset_id: String,
    pub role: Role,
}

/// Ordered concept ids with a train/test role each.
///
/// The language pair is optional because one split serves every pair of a
/// parallel table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedDictionary {
    pub source_language: Option<String>,
    pub target_language: Option<String>,
    entries: Vec<SeedEntry>,
}

impl SeedDictionary {
    pub fn new(entries: Vec<SeedEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.synset_id.as_str()) {
                return Err(Error::invalid(format!(
                    "synset {} appears twice in the dictionary",
                    e.synset_id
                )));
            }
        }
        Ok(SeedDictionary {
            source_language: None,
            target_language: None,
            entries,
        })
    }

    pub fn with_languages(mut self, source: impl Into<String>, target: impl Into<String>) -> Self {
        self.source_language = Some(source.into());
        self.target_language = Some(target.into());
        self
    }

    pub fn entries(&self) -> &[SeedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ids whose role is in `roles`, in dictionary order.
    pub fn ids_with_roles<'a>(&'a self, roles: &'a [Role]) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |e| roles.contains(&e.role))
            .map(|e| e.synset_id.as_str())
    }

    pub fn count(&self, role: Role) -> usize {
        self.entries.iter().filter(|e| e.role == role).count()
    }
}

pub fn render_dictionary(dict: &SeedDictionary) -> String {
    dict.entries
        .iter()
        .map(|e| format!("{}\t{}\n", e.synset_id, e.role))
        .collect()
}

pub fn parse_dictionary(text: &str, origin: &str) -> Result<SeedDictionary> {
    let mut entries = Vec::new();
    for (lineno, line) in data_lines(text) {
        let Some((id, role)) = line.split_once('\t') else {
            return Err(Error::format(origin, lineno, "expected synset_id\\trole"));
        };
        let role = role
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("invalid role {role:?}")))?;
        if id.is_empty() {
            return Err(Error::format(origin, lineno, "empty synset id"));
        }
        entries.push(SeedEntry {
            synset_id: id.to_string(),
            role,
        });
    }
    SeedDictionary::new(entries).map_err(|e| Error::format(origin, 0, e.to_string()))
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<SeedDictionary> {
    let path = path.as_ref();
    parse_dictionary(&read_text(path)?, &path.display().to_string())
}

pub fn save_dictionary(dict: &SeedDictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_dictionary(dict)).map_err(|e| Error::io(path, e))
}

/// Samples `train_per_category` abstract and as many physical records for
/// training; everything else is test. Entries keep table order.
pub fn split_table(table: &ConceptTable, train_per_category: usize, rng_seed: u64) -> Result<SeedDictionary> {
    let mut rng = SeededRng::new(rng_seed);
    let mut train = HashSet::new();
    for category in Category::ALL {
        let members: Vec<usize> = table
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.category == category)
            .map(|(i, _)| i)
            .collect();
        if members.len() < train_per_category {
            return Err(Error::invalid(format!(
                "{category} category has {} records, {train_per_category} requested for training",
                members.len()
            )));
        }
        for pick in rng.sample_indices(members.len(), train_per_category) {
            train.insert(members[pick]);
        }
    }
    let entries = table
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| SeedEntry {
            synset_id: r.synset_id.clone(),
            role: if train.contains(&i) { Role::Train } else { Role::Test },
        })
        .collect();
    SeedDictionary::new(entries)
}

/// Seeded uniform sample of `target_count` items, survivors in original order.
pub fn downsample_category<T: Clone>(records: &[T], target_count: usize, rng_seed: u64) -> Result<Vec<T>> {
    if target_count > records.len() {
        return Err(Error::invalid(format!(
            "cannot down-sample {} records to {target_count}",
            records.len()
        )));
    }
    let picks = SeededRng::new(rng_seed).sample_indices(records.len(), target_count);
    Ok(picks.into_iter().map(|i| records[i].clone()).collect())
}

fn fold_form(form: &str) -> String {
    let nfc: String = form.nfc().collect();
    caseless::default_case_fold_str(&nfc).nfc().collect()
}

/// `(identical, total)` count of records whose `lang` and `reference` forms
/// agree after NFC normalization and case folding.
pub fn identical_form_count(table: &ConceptTable, lang: &str, reference: &str) -> Result<(usize, usize)> {
    for code in [lang, reference] {
        if !table.has_language(code) {
            return Err(Error::invalid(format!("language {code} not in table")));
        }
    }
    let same = table
        .records
        .iter()
        .filter(|r| fold_form(&r.forms[lang]) == fold_form(&r.forms[reference]))
        .count();
    Ok((same, table.len()))
}

/// Fraction of identical surface forms; 0 for an empty table.
pub fn identical_form_ratio(table: &ConceptTable, lang: &str, reference: &str) -> Result<f64> {
    let (same, total) = identical_form_count(table, lang, reference)?;
    Ok(if total == 0 { 0.0 } else { same as f64 / total as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Lower middle element for even counts.
    pub median: u64,
}

impl Summary {
    fn of(mut values: Vec<u64>) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        values.sort_unstable();
        let sum: u128 = values.iter().map(|&v| u128::from(v)).sum();
        Some(Summary {
            count: values.len(),
            mean: sum as f64 / values.len() as f64,
            median: values[(values.len() - 1) / 2],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySummary {
    pub category: Category,
    pub records: usize,
    /// `None` when no record in the category has a sense count.
    pub senses: Option<Summary>,
    pub frequency: Option<Summary>,
    pub senses_excluded: usize,
    pub frequency_excluded: usize,
}

/// Sense-count and frequency summaries per category.
pub fn category_stats(table: &ConceptTable) -> Vec<CategorySummary> {
    Category::ALL
        .iter()
        .map(|&category| {
            let members: Vec<&ConceptRecord> =
                table.records.iter().filter(|r| r.category == category).collect();
            let senses: Vec<u64> = members
                .iter()
                .filter_map(|r| r.sense_count.map(u64::from))
                .collect();
            let freqs: Vec<u64> = members.iter().filter_map(|r| r.frequency).collect();
            CategorySummary {
                category,
                records: members.len(),
                senses_excluded: members.len() - senses.len(),
                frequency_excluded: members.len() - freqs.len(),
                senses: Summary::of(senses),
                frequency: Summary::of(freqs),
            }
        })
        .collect()
}
