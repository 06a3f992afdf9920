//! Concept-space alignment toolkit.
//!
//! Builds parallel concept dictionaries from WordNet-style exports, fits
//! orthogonal maps between monolingual concept-embedding spaces, retrieves
//! translations with cosine or CSLS scoring and reports precision@k.
//!
//! The usual pipeline:
//!
//! 1. [`dataset::build_table`] and [`dataset::split_table`] produce a
//!    [`ConceptTable`] and a train/test [`SeedDictionary`].
//! 2. [`embedding::load_space`] reads `.cvec` spaces, which
//!    [`embedding::normalize_space`] preprocesses.
//! 3. [`alignment::procrustes_fit`] fits an [`OrthogonalMap`];
//!    [`alignment::apply_map`] moves source vectors into the target space.
//! 4. [`retrieval::retrieve`] ranks targets and
//!    [`evaluation::precision_at_k`] scores the rankings.
//!
//! [`experiment::run_experiment`] runs steps 2-4 for the before-align,
//! after-align and ceiling modes.

pub mod alignment;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod numfmt;
pub mod retrieval;
pub mod sampling;
pub mod svd;

pub use alignment::{apply_map, procrustes_fit, OrthogonalMap};
pub use dataset::{Category, ConceptRecord, ConceptTable, Role, SeedDictionary, SeedEntry};
pub use embedding::{load_space, normalize_space, save_space, EmbeddingSpace, Preprocessing};
pub use error::{Error, Result};
pub use evaluation::{precision_at_k, render_report, CategoryFilter, EvalEntry, EvalReport, Mode, ReportFormat, Strategy};
pub use experiment::{run_experiment, ExperimentConfig};
pub use retrieval::{cosine_topk, csls_topk, Method, RetrievalConfig, RetrievalResult};
