mod common;

use proptest::prelude::*;
use protoner::encoder::LabelSpace;
use protoner::protopool::{KnnConfig, PrototypePool};
use protoner::KeyClass;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_brute_force_on_seeded_instances() {
    for seed in 0..500 {
        let (pool, q, k) = common::random_knn_instance(seed);
        let (got, neighbors) = pool.knn_classify(&q, KnnConfig { k }).unwrap();
        assert_eq!(got, common::brute_force_knn(&pool, &q, k), "seed {seed}");
        assert_eq!(neighbors.len(), k.min(pool.len()));
        assert!(neighbors
            .windows(2)
            .all(|w| w[0].similarity >= w[1].similarity));
    }
}

#[test]
fn single_class_pool_always_wins() {
    let space = LabelSpace::base(&[KeyClass::Currency]).unwrap();
    let mut pool = PrototypePool::new(&space, 3, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    pool.harvest(KeyClass::Currency, &[1.0, 0.0, 0.0], &mut rng)
        .unwrap();
    for q in [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.3, 0.3, -2.0]] {
        assert_eq!(
            pool.knn_classify(&q, KnnConfig { k: 5 }).unwrap().0,
            KeyClass::Currency
        );
    }
}

proptest! {
    #[test]
    fn oracle_agrees_on_scaled_queries(seed in 0u64..10_000, alpha in 0.01f64..100.0) {
        let (pool, q, k) = common::random_knn_instance(seed);
        let scaled: Vec<f64> = q.iter().map(|x| x * alpha).collect();
        let a = pool.knn_classify(&q, KnnConfig { k }).unwrap().0;
        let b = pool.knn_classify(&scaled, KnnConfig { k }).unwrap().0;
        // scaling perturbs cosines by an ulp at most, which can only matter
        // on exact ties; the oracle sees the same perturbation
        prop_assert_eq!(b, common::brute_force_knn(&pool, &scaled, k));
        prop_assert_eq!(a, common::brute_force_knn(&pool, &q, k));
    }
}
