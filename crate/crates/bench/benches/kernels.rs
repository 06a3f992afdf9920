use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lexalign::dataset::Role;
use lexalign::retrieval::{retrieve, Method, RetrievalConfig};
use lexalign::svd::jacobi_svd;
use lexalign::{apply_map, normalize_space, procrustes_fit, Preprocessing};
use lexalign_bench::{dictionary, gaussian_space};

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobi_svd");
    for d in [16, 64, 128] {
        let m = gaussian_space("xx", d, d, 1).vectors().clone();
        group.bench_with_input(BenchmarkId::from_parameter(d), &m, |b, m| {
            b.iter(|| jacobi_svd(black_box(m)).unwrap())
        });
    }
    group.finish();
}

fn procrustes(c: &mut Criterion) {
    let mut group = c.benchmark_group("procrustes_fit");
    group.sample_size(20);
    for d in [32, 128] {
        let src = normalize_space(&gaussian_space("fr", 6 * d, d, 2), Preprocessing::Unit).unwrap();
        let tgt = normalize_space(&gaussian_space("en", 6 * d, d, 3), Preprocessing::Unit).unwrap();
        let dict = dictionary(6 * d, Role::Train);
        group.bench_function(BenchmarkId::from_parameter(d), |b| {
            b.iter(|| procrustes_fit(&src, &tgt, &dict, &[Role::Train]).unwrap())
        });
        let map = procrustes_fit(&src, &tgt, &dict, &[Role::Train]).unwrap();
        group.bench_function(BenchmarkId::new("apply", d), |b| {
            b.iter(|| apply_map(&map, &src).unwrap())
        });
    }
    group.finish();
}

fn retrieval(c: &mut Criterion) {
    let mut group = c.benchmark_group("retrieve");
    group.sample_size(10);
    let queries = gaussian_space("fr", 1000, 64, 4);
    let targets = gaussian_space("en", 4000, 64, 5);
    for method in [Method::Nn, Method::Csls] {
        for block in [256, 1024] {
            let cfg = RetrievalConfig::new(method, 30).with_block_size(block);
            group.bench_function(BenchmarkId::new(method.as_str(), block), |b| {
                b.iter(|| retrieve(&queries, &targets, &cfg, None).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, svd, procrustes, retrieval);
criterion_main!(benches);
