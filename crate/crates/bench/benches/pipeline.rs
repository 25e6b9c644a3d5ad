//! Benchmarks for the pipeline's hot paths: geodesic queries, compositing,
//! feature extraction + embedding, panorama projection, and top-K search.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use iovpr::augment::{composite, LayoutMask};
use iovpr::embed::{embed_features, extract_features, init_params, FEATURE_DIM};
use iovpr::geo::{haversine, GeoPoint, SpatialIndex};
use iovpr::panorama::{project_face, Face};
use iovpr::raster::RasterImage;
use iovpr::retrieval::{build_index, query_topk, ExactnessMode};
use iovpr::rng::SplitMix64;
use iovpr::{Embedding, ItemId};

fn random_image(rng: &mut SplitMix64, width: usize, height: usize) -> RasterImage {
    let mut data = vec![0u8; width * height * 3];
    for chunk in data.chunks_mut(8) {
        let bytes = rng.next_u64().to_le_bytes();
        let n = chunk.len();
        chunk.copy_from_slice(&bytes[..n]);
    }
    RasterImage::from_raw(width, height, data).unwrap()
}

fn unit_vec(rng: &mut SplitMix64, dim: usize) -> Embedding {
    let v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    Embedding::from_raw(v.into_iter().map(|x| x / n).collect())
}

fn bench_geo(c: &mut Criterion) {
    let a = GeoPoint::new(52.3702, 4.8952).unwrap();
    let b = GeoPoint::new(52.3712, 4.8972).unwrap();
    c.bench_function("haversine", |bench| {
        bench.iter(|| haversine(black_box(a), black_box(b)))
    });

    let mut rng = SplitMix64::new(1);
    let m_per_deg = 111_194.9266;
    let items: Vec<(u64, GeoPoint)> = (0..100_000)
        .map(|i| {
            (
                i,
                GeoPoint::new(
                    52.3 + rng.uniform(0.0, 2000.0) / m_per_deg,
                    4.8 + rng.uniform(0.0, 2000.0) / m_per_deg,
                )
                .unwrap(),
            )
        })
        .collect();
    let index = SpatialIndex::build(items.clone()).unwrap();
    c.bench_function("radius_query_25m_100k", |bench| {
        bench.iter(|| index.radius_query(black_box(items[500].1), 25.0))
    });
}

fn bench_augment(c: &mut Criterion) {
    let mut rng = SplitMix64::new(2);
    let q = random_image(&mut rng, 640, 480);
    let layout = random_image(&mut rng, 640, 480);
    let bits: Vec<u8> = (0..640 * 480).map(|_| (rng.next_u64() & 1) as u8).collect();
    let mask = LayoutMask::from_bits(640, 480, bits).unwrap();
    c.bench_function("composite_480x640", |bench| {
        bench.iter(|| composite(black_box(&q), black_box(&mask), black_box(&layout)).unwrap())
    });
}

fn bench_embed(c: &mut Criterion) {
    let mut rng = SplitMix64::new(3);
    let img = random_image(&mut rng, 640, 480);
    c.bench_function("extract_features_480x640", |bench| {
        bench.iter(|| extract_features(black_box(&img)).unwrap())
    });

    let params = init_params(0, FEATURE_DIM, 64);
    let features = extract_features(&img).unwrap();
    c.bench_function("embed_features_384_to_64", |bench| {
        bench.iter(|| embed_features(black_box(&params), black_box(&features)))
    });
}

fn bench_panorama(c: &mut Criterion) {
    let mut rng = SplitMix64::new(4);
    let pano = random_image(&mut rng, 4000, 2000);
    c.bench_function("project_face_960", |bench| {
        bench.iter_batched(
            || pano.clone(),
            |p| project_face(black_box(&p), Face::Front, 960),
            BatchSize::LargeInput,
        )
    });
}

fn bench_retrieval(c: &mut Criterion) {
    let mut rng = SplitMix64::new(5);
    let items: Vec<(ItemId, Embedding)> =
        (0..10_000).map(|i| (ItemId(i), unit_vec(&mut rng, 64))).collect();
    let exact = build_index(&items, ExactnessMode::Exact).unwrap();
    let pruned = build_index(
        &items,
        ExactnessMode::Pruned { partitions: 32, probes: 4, seed: 0 },
    )
    .unwrap();
    let q = unit_vec(&mut rng, 64);
    c.bench_function("query_top100_exact_10k", |bench| {
        bench.iter(|| query_topk(black_box(&exact), ItemId(0), black_box(&q), 100).unwrap())
    });
    c.bench_function("query_top100_pruned_10k", |bench| {
        bench.iter(|| query_topk(black_box(&pruned), ItemId(0), black_box(&q), 100).unwrap())
    });
}

criterion_group!(
    benches,
    bench_geo,
    bench_augment,
    bench_embed,
    bench_panorama,
    bench_retrieval
);
criterion_main!(benches);
