mod common;

use common::{brute_force_knn, random_fragments, rng};
use proptest::prelude::*;
use rand::Rng;
use rubsynth::index::{euclidean, query_point};
use rubsynth::{distance, FeaturePoint, GrainIndex, Vec2};

fn index_of(fragments: &[rubsynth::Fragment], mean_ratio: f64) -> GrainIndex {
    GrainIndex::from_points(
        fragments
            .iter()
            .map(|f| FeaturePoint::from_fragment(f, mean_ratio))
            .collect(),
    )
    .unwrap()
}

fn as_pairs(r: &[rubsynth::Neighbor]) -> Vec<(usize, f64)> {
    r.iter().map(|n| (n.id, n.distance)).collect()
}

#[test]
fn thousand_fragments_hundred_queries() {
    let mut rng = rng(11);
    let frags = random_fragments(&mut rng, 1000);
    let mean_ratio = 1e-6;
    let idx = index_of(&frags, mean_ratio);
    for _ in 0..100 {
        let q = Vec2::new(
            rng.random_range(-320.0..320.0),
            rng.random_range(-320.0..320.0),
        );
        assert_eq!(
            as_pairs(&idx.knn(q, 25)),
            brute_force_knn(&frags, mean_ratio, q, 25)
        );
    }
}

#[test]
fn ten_thousand_fragments() {
    let mut rng = rng(12);
    let frags = random_fragments(&mut rng, 10_000);
    let mean_ratio = 2e-6;
    let idx = index_of(&frags, mean_ratio);
    for k in [1, 25, 64] {
        for _ in 0..20 {
            let q = Vec2::new(
                rng.random_range(-300.0..300.0),
                rng.random_range(-300.0..300.0),
            );
            assert_eq!(
                as_pairs(&idx.knn(q, k)),
                brute_force_knn(&frags, mean_ratio, q, k)
            );
        }
    }
}

#[test]
fn heavy_ties_on_a_lattice() {
    // many equal distances: ordering must fall back to the id
    let frags: Vec<_> = (0..900)
        .map(|i| {
            let velocity = Vec2::new((i % 30) as f64, (i / 30 % 30) as f64);
            rubsynth::Fragment {
                index: 899 - i,
                velocity,
                loudness: 0.0,
                ratio: 0.0,
            }
        })
        .collect();
    let idx = index_of(&frags, 1.0);
    for q in [
        Vec2::new(10.0, 10.0),
        Vec2::new(0.5, 0.5),
        Vec2::new(29.0, 0.0),
    ] {
        for k in [1, 4, 9, 25] {
            assert_eq!(as_pairs(&idx.knn(q, k)), brute_force_knn(&frags, 1.0, q, k));
        }
    }
}

#[test]
fn embedding_matches_distance() {
    let mut rng = rng(13);
    for _ in 0..10_000 {
        let frag = random_fragments(&mut rng, 1).pop().unwrap();
        let mean_ratio: f64 = rng.random_range(1e-7..1e-3);
        let q = Vec2::new(
            rng.random_range(-300.0..300.0),
            rng.random_range(-300.0..300.0),
        );
        let direct = distance(q, &frag, mean_ratio);
        let embedded = euclidean(
            &query_point(q),
            &FeaturePoint::from_fragment(&frag, mean_ratio).coords,
        );
        assert!((direct - embedded).abs() <= 1e-12, "{direct} vs {embedded}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_equals_linear_scan(
        seed in any::<u64>(),
        n in 1usize..600,
        k in 1usize..40,
        qx in -350.0f64..350.0,
        qy in -350.0f64..350.0,
    ) {
        let mut rng = rng(seed);
        let frags = random_fragments(&mut rng, n);
        let idx = index_of(&frags, 1e-6);
        let q = Vec2::new(qx, qy);
        prop_assert_eq!(as_pairs(&idx.knn(q, k)), brute_force_knn(&frags, 1e-6, q, k));
    }
}
