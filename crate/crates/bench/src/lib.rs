//! Synthetic fixtures shared by the benchmarks.

use lexalign::dataset::{Role, SeedDictionary, SeedEntry};
use lexalign::EmbeddingSpace;
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// `n × d` standard-normal space with ids `c0`, `c1`, ...
pub fn gaussian_space(language: &str, n: usize, d: usize, seed: u64) -> EmbeddingSpace {
    let mut rng = StdRng::seed_from_u64(seed);
    let vectors = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let ids = (0..n).map(|i| format!("c{i}")).collect();
    let forms = (0..n).map(|i| format!("w{i}")).collect();
    EmbeddingSpace::new(language, ids, forms, vectors).expect("valid synthetic space")
}

/// Dictionary over `c0..c{n}` with every entry in `role`.
pub fn dictionary(n: usize, role: Role) -> SeedDictionary {
    SeedDictionary::new(
        (0..n)
            .map(|i| SeedEntry {
                synset_id: format!("c{i}"),
                role,
            })
            .collect(),
    )
    .expect("unique ids")
}
