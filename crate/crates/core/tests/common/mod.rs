//! Test-only fixtures and brute-force oracles. Nothing here calls into the
//! retrieval or alignment code it is used to check.
#![allow(dead_code)]

use lexalign::dataset::{Role, SeedDictionary, SeedEntry};
use lexalign::EmbeddingSpace;
use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut StdRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// Orthogonal matrix from Gram-Schmidt on a Gaussian matrix, with the
/// column signs fixed so the distribution is Haar on O(d).
pub fn random_orthogonal(rng: &mut StdRng, d: usize) -> Array2<f64> {
    let a = gaussian(rng, d, d);
    let mut q = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut v: Array1<f64> = a.column(j).to_owned();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.scaled_add(-proj, &qi);
            }
        }
        let norm = v.dot(&v).sqrt();
        q.column_mut(j).assign(&(v / norm));
    }
    q
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Space whose rows are `vectors` with ids `c0..`.
pub fn space(language: &str, vectors: Array2<f64>) -> EmbeddingSpace {
    let n = vectors.nrows();
    EmbeddingSpace::new(language, ids("c", n), ids("w", n), vectors).unwrap()
}

pub fn dictionary(n: usize, role: Role) -> SeedDictionary {
    SeedDictionary::new(
        (0..n)
            .map(|i| SeedEntry {
                synset_id: format!("c{i}"),
                role,
            })
            .collect(),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine computed directly from raw vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    dot / (na.sqrt() * nb.sqrt())
}

pub fn cosine_matrix(queries: &Array2<f64>, targets: &Array2<f64>) -> Vec<Vec<f64>> {
    queries
        .rows()
        .into_iter()
        .map(|q| {
            targets
                .rows()
                .into_iter()
                .map(|t| cosine(q.as_slice().unwrap(), t.as_slice().unwrap()))
                .collect()
        })
        .collect()
}

fn mean_of_top(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted[..k].iter().sum::<f64>() / k as f64
}

/// Full ranking of target indices by descending score, ties by index.
fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Naive CSLS over the full score matrix: top-k `(target, score)` per query.
pub fn brute_csls(
    queries: &Array2<f64>,
    targets: &Array2<f64>,
    k: usize,
    csls_k: usize,
) -> Vec<Vec<(usize, f64)>> {
    let cos = cosine_matrix(queries, targets);
    let r_t: Vec<f64> = cos.iter().map(|row| mean_of_top(row, csls_k)).collect();
    let r_s: Vec<f64> = (0..targets.nrows())
        .map(|j| {
            let column: Vec<f64> = cos.iter().map(|row| row[j]).collect();
            mean_of_top(&column, csls_k)
        })
        .collect();
    cos.iter()
        .enumerate()
        .map(|(i, row)| {
            let scores: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(j, c)| 2.0 * c - r_t[i] - r_s[j])
                .collect();
            rank(&scores).into_iter().take(k).map(|j| (j, scores[j])).collect()
        })
        .collect()
}

/// Naive cosine top-k.
pub fn brute_cosine(queries: &Array2<f64>, targets: &Array2<f64>, k: usize) -> Vec<Vec<(usize, f64)>> {
    cosine_matrix(queries, targets)
        .into_iter()
        .map(|row| rank(&row).into_iter().take(k).map(|j| (j, row[j])).collect())
        .collect()
}

/// Hub fixture in `d >= 3` dimensions, rotated by a random orthogonal map
/// and perturbed by `noise`.
///
/// Queries `q1 = e1`, `q2 = e2`; targets `h = (e1 + e2)/√2`,
/// `t1 = 0.6·e1 + 0.8·e3`, `t2 = 0.6·e2 − 0.8·e3`. Cosine prefers `h` for
/// both queries (0.707 > 0.6); the true matches are `t1`, `t2`.
/// Returns (queries, targets, gold target row per query).
pub fn hub_fixture(seed: u64, d: usize, noise: f64) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    assert!(d >= 3);
    let mut rng = rng(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut q = Array2::<f64>::zeros((2, d));
    q[[0, 0]] = 1.0;
    q[[1, 1]] = 1.0;
    let mut t = Array2::<f64>::zeros((3, d));
    t[[0, 0]] = s;
    t[[0, 1]] = s;
    t[[1, 0]] = 0.6;
    t[[1, 2]] = 0.8;
    t[[2, 1]] = 0.6;
    t[[2, 2]] = -0.8;
    let r = random_orthogonal(&mut rng, d);
    let q = q.dot(&r.t()) + gaussian(&mut rng, 2, d) * noise;
    let t = t.dot(&r.t()) + gaussian(&mut rng, 3, d) * noise;
    (q, t, vec![1, 2])
}

/// Planted bilingual dataset on disk: source rows are Gaussian, target rows
/// are `R·x` for every concept plus `distractors` unrelated target-only rows.
/// Half the concepts are abstract. Writes `src.cvec`, `tgt.cvec`,
/// `table.tsv`, `dict.tsv` (split with `train_per_category`) and `exp.cfg`.
pub struct PlantedDataset {
    pub config: std::path::PathBuf,
    pub rotation: Array2<f64>,
}

pub fn write_planted_dataset(
    dir: &std::path::Path,
    concepts: usize,
    d: usize,
    distractors: usize,
    train_per_category: usize,
    seed: u64,
    extra_config: &str,
) -> PlantedDataset {
    use lexalign::dataset::{save_dictionary, save_table, split_table, Category, ConceptRecord, ConceptTable};
    use std::collections::BTreeMap;

    let mut rng = rng(seed);
    let r = random_orthogonal(&mut rng, d);
    let x = gaussian(&mut rng, concepts, d);
    let y = x.dot(&r.t());
    let noise = gaussian(&mut rng, distractors, d);
    let mut target_rows = y.clone();
    if distractors > 0 {
        target_rows = ndarray::concatenate![ndarray::Axis(0), y, noise];
    }
    let concept_ids: Vec<String> = (0..concepts).map(|i| format!("{:08}-n", i + 1)).collect();
    let mut target_ids = concept_ids.clone();
    target_ids.extend((0..distractors).map(|i| format!("{:08}-x", i + 1)));

    let src = EmbeddingSpace::new("fr", concept_ids.clone(), ids("mot", concepts), x).unwrap();
    let tgt = EmbeddingSpace::new("en", target_ids.clone(), ids("word", concepts + distractors), target_rows).unwrap();
    lexalign::save_space(&src, dir.join("src.cvec")).unwrap();
    lexalign::save_space(&tgt, dir.join("tgt.cvec")).unwrap();

    let records = concept_ids
        .iter()
        .enumerate()
        .map(|(i, id)| ConceptRecord {
            synset_id: id.clone(),
            depth: 6,
            category: if i % 2 == 0 { Category::Abstract } else { Category::Physical },
            forms: BTreeMap::from([
                ("en".to_string(), format!("word{i}")),
                ("fr".to_string(), format!("mot{i}")),
            ]),
            sense_count: None,
            frequency: None,
        })
        .collect();
    let table = ConceptTable::new(vec!["en".into(), "fr".into()], records).unwrap();
    save_table(&table, dir.join("table.tsv")).unwrap();
    let dict = split_table(&table, train_per_category, seed).unwrap();
    save_dictionary(&dict, dir.join("dict.tsv")).unwrap();

    let config = dir.join("exp.cfg");
    std::fs::write(
        &config,
        format!(
            "source = src.cvec\ntarget = tgt.cvec\ndictionary = dict.tsv\ntable = table.tsv\n\
             source_language = fr\ntarget_language = en\nseed = {seed}\n{extra_config}"
        ),
    )
    .unwrap();
    PlantedDataset { config, rotation: r }
}
