//! Nearest-neighbour and CSLS retrieval over concept spaces.
//!
//! Similarities are always cosines: rows are unit-normalized internally, so
//! scores do not depend on the caller's preprocessing. Candidates are ranked
//! by descending score, ties broken by ascending target row.
//!
//! CSLS penalises hubs:
//!
//! ```text
//! csls(x, y) = 2·cos(x, y) − r_T(x) − r_S(y)
//! ```
//!
//! with `r_T(x)` the mean cosine of `x` to its `csls_k` nearest targets and
//! `r_S(y)` the mean cosine of `y` to its `csls_k` nearest neighbourhood
//! queries (by default the query set itself).

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::embedding::{l2_norm, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::numfmt::format_fixed6;

pub const DEFAULT_CSLS_K: usize = 10;
pub const DEFAULT_BLOCK_SIZE: usize = 1024;
const QUERY_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Method {
    Nn,
    #[default]
    Csls,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nn => "nn",
            Method::Csls => "csls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" | "cosine" => Ok(Method::Nn),
            "csls" => Ok(Method::Csls),
            other => Err(Error::invalid(format!("unknown retrieval method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub target_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query_id: String,
    pub ranked: Vec<Candidate>,
    pub method: Method,
    /// Neighbourhood size; meaningful only for CSLS.
    pub csls_k: usize,
}

impl RetrievalResult {
    /// 1-based rank of `target_id`, if retrieved.
    pub fn rank_of(&self, target_id: &str) -> Option<usize> {
        self.ranked
            .iter()
            .position(|c| c.target_id == target_id)
            .map(|p| p + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalConfig {
    pub method: Method,
    pub k: usize,
    pub csls_k: usize,
    /// Targets scored per block.
    pub block_size: usize,
}

impl RetrievalConfig {
    pub fn new(method: Method, k: usize) -> Self {
        RetrievalConfig {
            method,
            k,
            csls_k: DEFAULT_CSLS_K,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }

    pub fn with_csls_k(mut self, csls_k: usize) -> Self {
        self.csls_k = csls_k;
        self
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }
}

/// Score with a total order: higher score first, then lower index.
#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f64,
    index: usize,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    /// `Greater` means ranked earlier.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Keeps the best `capacity` items seen.
struct TopK {
    capacity: usize,
    heap: BinaryHeap<Reverse<Scored>>,
}

impl TopK {
    fn new(capacity: usize) -> Self {
        TopK {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
        }
    }

    fn push(&mut self, item: Scored) {
        if self.heap.len() < self.capacity {
            self.heap.push(Reverse(item));
        } else if let Some(worst) = self.heap.peek() {
            if item > worst.0 {
                self.heap.pop();
                self.heap.push(Reverse(item));
            }
        }
    }

    /// Best first.
    fn into_sorted(self) -> Vec<Scored> {
        // Ascending order of Reverse is descending order of Scored.
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }

    /// Mean score of the kept items, summed best first.
    fn mean(self) -> f64 {
        let items = self.into_sorted();
        let n = items.len() as f64;
        items.iter().map(|s| s.score).sum::<f64>() / n
    }
}

fn unit_rows(space: &EmbeddingSpace) -> Result<Array2<f64>> {
    let mut rows = space.vectors().to_owned();
    for (i, mut row) in rows.rows_mut().into_iter().enumerate() {
        let norm = l2_norm(row.view());
        if norm == 0.0 {
            return Err(Error::ZeroNorm(space.ids()[i].clone()));
        }
        row.mapv_inplace(|x| x / norm);
    }
    Ok(rows)
}

fn dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    match (a.as_slice(), b.as_slice()) {
        (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        _ => a.iter().zip(b.iter()).map(|(x, y)| x * y).sum(),
    }
}

/// Visits every `(row, target, cosine)` pair, rows in parallel chunks and
/// targets in blocks. Each row sees its targets in ascending order, so the
/// per-row state is independent of thread count.
fn scan<S, I, V>(rows: &Array2<f64>, targets: &Array2<f64>, block_size: usize, init: I, visit: V) -> Vec<S>
where
    S: Send,
    I: Fn(usize) -> S + Sync,
    V: Fn(&mut S, usize, usize, f64) + Sync,
{
    let n = rows.nrows();
    let m = targets.nrows();
    let block = block_size.max(1);
    let starts: Vec<usize> = (0..n).step_by(QUERY_CHUNK).collect();
    starts
        .into_par_iter()
        .flat_map_iter(|start| {
            let end = (start + QUERY_CHUNK).min(n);
            let mut states: Vec<S> = (start..end).map(&init).collect();
            for block_start in (0..m).step_by(block) {
                let block_end = (block_start + block).min(m);
                for (offset, state) in states.iter_mut().enumerate() {
                    let row = start + offset;
                    let q = rows.row(row);
                    for j in block_start..block_end {
                        visit(state, row, j, dot(q, targets.row(j)));
                    }
                }
            }
            states
        })
        .collect()
}

/// Mean of each row's `k` largest cosines against `others`.
fn neighbourhood_means(rows: &Array2<f64>, others: &Array2<f64>, k: usize, block_size: usize) -> Vec<f64> {
    scan(
        rows,
        others,
        block_size,
        |_| TopK::new(k),
        |top, _, j, cos| top.push(Scored { score: cos, index: j }),
    )
    .into_iter()
    .map(TopK::mean)
    .collect()
}

/// Ranks targets for each query.
///
/// For CSLS, `neighbourhood` supplies the query-side set used for `r_S`;
/// `None` uses `queries` itself. Its vectors must live in the same (mapped)
/// space as the queries.
pub fn retrieve(
    queries: &EmbeddingSpace,
    targets: &EmbeddingSpace,
    config: &RetrievalConfig,
    neighbourhood: Option<&EmbeddingSpace>,
) -> Result<Vec<RetrievalResult>> {
    for space in [Some(targets), neighbourhood].into_iter().flatten() {
        if space.dim() != queries.dim() {
            return Err(Error::DimensionMismatch {
                expected: queries.dim(),
                found: space.dim(),
                context: format!("{} space vs query space", space.language()),
            });
        }
    }
    let m = targets.len();
    if config.k == 0 || config.k > m {
        return Err(Error::invalid(format!(
            "k = {} outside 1..={m} (target vocabulary size)",
            config.k
        )));
    }
    let q = unit_rows(queries)?;
    let t = unit_rows(targets)?;

    let scored: Vec<Vec<Scored>> = match config.method {
        Method::Nn => scan(
            &q,
            &t,
            config.block_size,
            |_| TopK::new(config.k),
            |top, _, j, cos| top.push(Scored { score: cos, index: j }),
        )
        .into_iter()
        .map(TopK::into_sorted)
        .collect(),
        Method::Csls => {
            let hood = neighbourhood.unwrap_or(queries);
            let csls_k = config.csls_k;
            if csls_k == 0 || csls_k > m || csls_k > hood.len() {
                return Err(Error::invalid(format!(
                    "csls_k = {csls_k} outside 1..={} (target and neighbourhood sizes {m}, {})",
                    m.min(hood.len()),
                    hood.len()
                )));
            }
            let h = match neighbourhood {
                Some(space) => unit_rows(space)?,
                None => q.clone(),
            };
            let r_target = neighbourhood_means(&q, &t, csls_k, config.block_size);
            let r_source = neighbourhood_means(&t, &h, csls_k, config.block_size);
            scan(
                &q,
                &t,
                config.block_size,
                |_| TopK::new(config.k),
                |top, i, j, cos| {
                    top.push(Scored {
                        score: 2.0 * cos - r_target[i] - r_source[j],
                        index: j,
                    })
                },
            )
            .into_iter()
            .map(TopK::into_sorted)
            .collect()
        }
    };

    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, list)| RetrievalResult {
            query_id: queries.ids()[i].clone(),
            ranked: list
                .into_iter()
                .map(|s| Candidate {
                    target_id: targets.ids()[s.index].clone(),
                    score: s.score,
                })
                .collect(),
            method: config.method,
            csls_k: config.csls_k,
        })
        .collect())
}

/// Top-`k` targets per query by cosine similarity.
pub fn cosine_topk(queries: &EmbeddingSpace, targets: &EmbeddingSpace, k: usize) -> Result<Vec<RetrievalResult>> {
    retrieve(queries, targets, &RetrievalConfig::new(Method::Nn, k), None)
}

/// Top-`k` targets per query by CSLS, neighbourhoods over the full query
/// and target sets.
pub fn csls_topk(
    queries: &EmbeddingSpace,
    targets: &EmbeddingSpace,
    k: usize,
    csls_k: usize,
) -> Result<Vec<RetrievalResult>> {
    retrieve(
        queries,
        targets,
        &RetrievalConfig::new(Method::Csls, k).with_csls_k(csls_k),
        None,
    )
}

/// Results TSV: `query_id \t rank \t target_id \t score`, rank 1-based,
/// score at 6 decimals.
pub fn render_results(results: &[RetrievalResult]) -> String {
    let mut out = String::new();
    for r in results {
        for (rank, c) in r.ranked.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.query_id,
                rank + 1,
                c.target_id,
                format_fixed6(c.score)
            ));
        }
    }
    out
}

/// Reads a results TSV. Rows of one query must be contiguous with ranks
/// `1, 2, ...`.
pub fn parse_results(text: &str, origin: &str, method: Method, csls_k: usize) -> Result<Vec<RetrievalResult>> {
    let mut results: Vec<RetrievalResult> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [query, rank, target, score] = fields[..] else {
            return Err(Error::format(origin, lineno, "expected query_id, rank, target_id, score"));
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("invalid rank {rank:?}")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::format(origin, lineno, format!("invalid score {score:?}")))?;
        let continues = results.last().is_some_and(|r| r.query_id == query);
        if !continues {
            if results.iter().any(|r| r.query_id == query) {
                return Err(Error::format(origin, lineno, format!("rows for {query} are not contiguous")));
            }
            results.push(RetrievalResult {
                query_id: query.to_string(),
                ranked: Vec::new(),
                method,
                csls_k,
            });
        }
        let current = results.last_mut().expect("pushed above");
        if rank != current.ranked.len() + 1 {
            return Err(Error::format(
                origin,
                lineno,
                format!("rank {rank} out of sequence for {query}"),
            ));
        }
        current.ranked.push(Candidate {
            target_id: target.to_string(),
            score,
        });
    }
    Ok(results)
}

pub fn save_results(results: &[RetrievalResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_results(results)).map_err(|e| Error::io(path, e))
}

pub fn load_results(path: impl AsRef<Path>, method: Method, csls_k: usize) -> Result<Vec<RetrievalResult>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text, &path.display().to_string(), method, csls_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn space(rows: Array2<f64>) -> EmbeddingSpace {
        let ids = (0..rows.nrows()).map(|i| format!("t{i}")).collect();
        let forms = (0..rows.nrows()).map(|i| format!("w{i}")).collect();
        EmbeddingSpace::new("xx", ids, forms, rows).unwrap()
    }

    #[test]
    fn cosine_order_is_forced() {
        let h = 2f64.sqrt() / 2.0;
        let q = space(array![[1.0, 0.0]]);
        let t = space(array![[0.0, 1.0], [1.0, 0.0], [h, h]]);
        let res = cosine_topk(&q, &t, 3).unwrap();
        let ids: Vec<&str> = res[0].ranked.iter().map(|c| c.target_id.as_str()).collect();
        assert_eq!(ids, ["t1", "t2", "t0"]);
        assert!((res[0].ranked[0].score - 1.0).abs() < 1e-9);
        assert!((res[0].ranked[1].score - h).abs() < 1e-9);
        assert_eq!(res[0].ranked[2].score, 0.0);
    }

    #[test]
    fn ties_break_by_target_row() {
        let q = space(array![[1.0, 0.0]]);
        let t = space(array![[0.0, 1.0], [0.0, -1.0], [0.0, 2.0]]);
        let res = cosine_topk(&q, &t, 3).unwrap();
        let ids: Vec<&str> = res[0].ranked.iter().map(|c| c.target_id.as_str()).collect();
        assert_eq!(ids, ["t0", "t1", "t2"]);
    }

    #[test]
    fn csls_single_pair_scores_zero() {
        let q = space(array![[0.6, 0.8]]);
        let res = csls_topk(&q, &q, 1, 1).unwrap();
        assert_eq!(res[0].ranked[0].target_id, "t0");
        assert!(res[0].ranked[0].score.abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let q = space(array![[1.0, 0.0]]);
        let t = space(array![[1.0, 0.0], [0.0, 1.0]]);
        assert!(cosine_topk(&q, &t, 0).is_err());
        assert!(cosine_topk(&q, &t, 3).is_err());
        assert!(csls_topk(&q, &t, 1, 2).is_err(), "csls_k larger than query set");
        assert!(csls_topk(&q, &t, 1, 0).is_err());
        let zero = space(array![[0.0, 0.0]]);
        assert!(matches!(cosine_topk(&zero, &t, 1), Err(Error::ZeroNorm(_))));
        let wide = space(array![[1.0, 0.0, 0.0]]);
        assert!(matches!(cosine_topk(&wide, &t, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn block_size_does_not_change_results() {
        let q = space(array![[1.0, 0.2, 0.1], [0.3, -1.0, 0.4], [0.0, 0.5, 0.5]]);
        let t = space(array![[0.9, 0.1, 0.0], [0.2, -0.8, 0.3], [0.1, 0.4, 0.6], [-1.0, 0.0, 0.2], [0.3, 0.3, 0.3]]);
        let base = retrieve(&q, &t, &RetrievalConfig::new(Method::Csls, 5).with_csls_k(2), None).unwrap();
        for block in [1, 2, 3, 7] {
            let cfg = RetrievalConfig::new(Method::Csls, 5).with_csls_k(2).with_block_size(block);
            assert_eq!(retrieve(&q, &t, &cfg, None).unwrap(), base);
        }
    }

    #[test]
    fn results_tsv_round_trip() {
        let q = space(array![[1.0, 0.0], [0.0, 1.0]]);
        let res = cosine_topk(&q, &q, 2).unwrap();
        let text = render_results(&res);
        assert_eq!(text, "t0\t1\tt0\t1.000000\nt0\t2\tt1\t0.000000\nt1\t1\tt1\t1.000000\nt1\t2\tt0\t0.000000\n");
        let back = parse_results(&text, "t", Method::Nn, DEFAULT_CSLS_K).unwrap();
        assert_eq!(back, res);
        assert_eq!(back[1].rank_of("t0"), Some(2));
        assert!(parse_results("a\t2\tb\t0.5\n", "t", Method::Nn, 10).is_err());
        assert!(parse_results("a\t1\tb\t0.5\nc\t1\tb\t0.5\na\t2\tb\t0.5\n", "t", Method::Nn, 10).is_err());
    }
}
