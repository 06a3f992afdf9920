mod common;

use common::*;
use lexalign::alignment::{load_map, save_map};
use lexalign::dataset::Role;
use lexalign::{load_space, procrustes_fit, save_space, EmbeddingSpace};
use ndarray::Array2;
use proptest::prelude::*;

fn form_strategy() -> impl Strategy<Value = String> {
    "[a-zA-Z\u{e0}-\u{ff}\u{3040}-\u{309f} _'-]{1,12}".prop_filter("non-empty", |s| !s.is_empty())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn cvec_round_trip(
        seed in any::<u64>(),
        n in 1usize..12,
        d in 1usize..9,
        scale in prop_oneof![Just(1.0), Just(1e-4), Just(30.0)],
        forms in proptest::collection::vec(form_strategy(), 12),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rng(seed);
        let vectors = gaussian(&mut rng, n, d) * scale;
        let space = EmbeddingSpace::new("xx", ids("c", n), forms[..n].to_vec(), vectors.clone()).unwrap();
        let path = dir.path().join("xx.cvec");
        save_space(&space, &path).unwrap();
        let back = load_space(&path, Some(d)).unwrap();
        prop_assert_eq!(back.ids(), space.ids());
        prop_assert_eq!(back.forms(), space.forms());
        prop_assert!(max_abs_diff(back.vectors(), &vectors) <= 1e-6);
        // Saving the reloaded space reproduces the file byte for byte.
        let again = dir.path().join("again.cvec");
        save_space(&back, &again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn omap_round_trip(seed in any::<u64>(), d in 1usize..24) {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rng(seed);
        let m = d + 3;
        let map = procrustes_fit(
            &space("fr", gaussian(&mut rng, m, d)),
            &space("en", gaussian(&mut rng, m, d)),
            &dictionary(m, Role::Train),
            &[Role::Train],
        ).unwrap();
        let path = dir.path().join("fr_en.omap");
        save_map(&map, &path).unwrap();
        let back = load_map(&path).unwrap();
        prop_assert!(max_abs_diff(back.matrix(), map.matrix()) <= 1e-6);
        prop_assert_eq!(back.source_language(), "fr");
        prop_assert_eq!(back.target_language(), "en");
        prop_assert_eq!(back.preprocessing(), map.preprocessing());
    }

    #[test]
    fn unit_normalization_is_idempotent(seed in any::<u64>(), n in 1usize..10, d in 1usize..10) {
        use lexalign::{normalize_space, Preprocessing};
        let mut rng = rng(seed);
        let s = space("xx", gaussian(&mut rng, n, d) * 3.0);
        let once = normalize_space(&s, Preprocessing::Unit).unwrap();
        let twice = normalize_space(&once, Preprocessing::Unit).unwrap();
        prop_assert!(max_abs_diff(once.vectors(), twice.vectors()) <= 1e-12);
        for row in once.vectors().rows() {
            prop_assert!((row.dot(&row).sqrt() - 1.0).abs() <= lexalign::embedding::UNIT_NORM_TOLERANCE);
        }
    }
}

#[test]
fn save_to_unwritable_path_is_io() {
    let s = space("xx", Array2::eye(2));
    let err = save_space(&s, "/nonexistent/dir/x.cvec").unwrap_err();
    assert!(err.is_io());
}
