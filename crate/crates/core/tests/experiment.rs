mod common;

use std::collections::HashMap;

use common::*;
use lexalign::evaluation::{precision_at_k, render_report, CategoryFilter, Mode, ReportFormat};
use lexalign::experiment::{run_on_data, ExperimentData};
use lexalign::retrieval::{parse_results, render_results, Method, Candidate, RetrievalResult};
use lexalign::{run_experiment, ExperimentConfig};
use proptest::prelude::*;

#[test]
fn planted_dataset_separates_modes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_planted_dataset(dir.path(), 120, 16, 80, 30, 5, "");
    let config = ExperimentConfig::load(&data.config).unwrap();
    let report = run_experiment(&config).unwrap();
    let p1 = |mode| report.find(mode, CategoryFilter::All, 1).unwrap().precision();
    assert_eq!(p1(Mode::After), 1.0);
    assert_eq!(p1(Mode::Ceiling), 1.0);
    assert!(p1(Mode::Before) <= 0.1, "before = {}", p1(Mode::Before));
    let after = report.find(Mode::After, CategoryFilter::All, 1).unwrap();
    assert_eq!(after.n_queries, 60);
    assert_eq!(after.source_language, "fr");
    assert_eq!(after.config_hash, config.hash());
    // 30 abstract and 30 physical test queries: down-sampling is a no-op.
    let down = report.find(Mode::After, CategoryFilter::PhysicalDownsampled, 1).unwrap();
    assert_eq!(down.n_queries, 30);
}

#[test]
fn single_k_gives_modes_times_categories_entries() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_planted_dataset(dir.path(), 60, 8, 10, 10, 2, "k = 1\n");
    let report = run_experiment(&ExperimentConfig::load(&data.config).unwrap()).unwrap();
    assert_eq!(report.entries.len(), 3 * 4);
}

#[test]
fn uneven_categories_are_downsampled() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_planted_dataset(dir.path(), 60, 8, 0, 10, 3, "k = 1\nmodes = after\n");
    // Relabel a few abstract test concepts as physical so categories differ.
    let table_path = dir.path().join("table.tsv");
    let text = std::fs::read_to_string(&table_path).unwrap();
    let dict = lexalign::dataset::load_dictionary(dir.path().join("dict.tsv")).unwrap();
    let test: Vec<&str> = dict.ids_with_roles(&[lexalign::Role::Test]).collect();
    let mut flipped = 0;
    let relabelled: String = text
        .lines()
        .map(|line| {
            let id = line.split('\t').next().unwrap();
            if flipped < 4 && test.contains(&id) && line.contains("\tabstract\t") {
                flipped += 1;
                line.replace("\tabstract\t", "\tphysical\t") + "\n"
            } else {
                format!("{line}\n")
            }
        })
        .collect();
    std::fs::write(&table_path, relabelled).unwrap();
    let report = run_experiment(&ExperimentConfig::load(&data.config).unwrap()).unwrap();
    let n = |c| report.find(Mode::After, c, 1).unwrap().n_queries;
    assert_eq!(n(CategoryFilter::Abstract) + n(CategoryFilter::Physical), n(CategoryFilter::All));
    assert_eq!(n(CategoryFilter::PhysicalDownsampled), n(CategoryFilter::Abstract));
    assert!(n(CategoryFilter::Physical) > n(CategoryFilter::Abstract));
}

#[test]
fn canonical_json_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_planted_dataset(dir.path(), 80, 8, 20, 20, 9, "");
    let config = ExperimentConfig::load(&data.config).unwrap();
    let a = render_report(&run_experiment(&config).unwrap(), ReportFormat::Json);
    let b = render_report(&run_experiment(&config).unwrap(), ReportFormat::Json);
    assert_eq!(a, b);
    assert!(a.contains(&config.hash()));
}

#[test]
fn rendered_results_reproduce_in_memory_precision() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_planted_dataset(dir.path(), 100, 8, 50, 25, 13, "modes = before,after\n");
    let config = ExperimentConfig::load(&data.config).unwrap();
    let loaded = ExperimentData::load(&config).unwrap();
    let outcome = run_on_data(&config, &loaded).unwrap();
    for (mode, results) in &outcome.results {
        let text = render_results(results);
        let reread = parse_results(&text, "mem", Method::Csls, 10).unwrap();
        for &k in &config.ks {
            let from_file = precision_at_k(&reread, &outcome.gold, k).unwrap();
            let entry = outcome.report.find(*mode, CategoryFilter::All, k).unwrap();
            assert_eq!(from_file, entry.precision(), "{mode} P@{k}");
        }
    }
}

#[test]
fn explicit_gold_overrides_shared_ids() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_planted_dataset(dir.path(), 40, 8, 0, 10, 4, "modes = after\nk = 1\ngold = gold.tsv\n");
    // Point every query at a wrong target: P@1 must drop to zero.
    let dict = lexalign::dataset::load_dictionary(dir.path().join("dict.tsv")).unwrap();
    let ids: Vec<&str> = dict.entries().iter().map(|e| e.synset_id.as_str()).collect();
    let gold: String = ids
        .iter()
        .enumerate()
        .map(|(i, id)| format!("{id}\t{}\n", ids[(i + 1) % ids.len()]))
        .collect();
    std::fs::write(dir.path().join("gold.tsv"), gold).unwrap();
    let report = run_experiment(&ExperimentConfig::load(&data.config).unwrap()).unwrap();
    assert_eq!(report.find(Mode::After, CategoryFilter::All, 1).unwrap().precision(), 0.0);
}

#[test]
fn missing_dictionary_concept_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_planted_dataset(dir.path(), 40, 8, 0, 10, 4, "");
    let dict = dir.path().join("dict.tsv");
    let mut text = std::fs::read_to_string(&dict).unwrap();
    text.push_str("99999999-n\ttest\n");
    std::fs::write(&dict, text).unwrap();
    let err = run_experiment(&ExperimentConfig::load(&data.config).unwrap()).unwrap_err();
    assert!(err.to_string().contains("99999999-n"), "{err}");
}

fn random_results(seed: u64, queries: usize, depth: usize) -> (Vec<RetrievalResult>, HashMap<String, String>) {
    use rand::Rng;
    let mut rng = rng(seed);
    let mut gold = HashMap::new();
    let results = (0..queries)
        .map(|q| {
            let query = format!("q{q}");
            let gold_rank = rng.gen_range(1..=depth + 5);
            gold.insert(query.clone(), format!("g{q}"));
            RetrievalResult {
                query_id: query,
                ranked: (1..=depth)
                    .map(|r| Candidate {
                        target_id: if r == gold_rank { format!("g{q}") } else { format!("x{r}") },
                        score: 1.0 / r as f64,
                    })
                    .collect(),
                method: Method::Csls,
                csls_k: 10,
            }
        })
        .collect();
    (results, gold)
}

proptest! {
    #[test]
    fn precision_is_monotone_in_k(seed in any::<u64>(), queries in 1usize..50, depth in 1usize..40) {
        let (results, gold) = random_results(seed, queries, depth);
        let mut last = 0.0;
        for k in 1..=depth + 2 {
            let p = precision_at_k(&results, &gold, k).unwrap();
            prop_assert!(p >= last);
            prop_assert!((0.0..=1.0).contains(&p));
            last = p;
        }
    }
}
