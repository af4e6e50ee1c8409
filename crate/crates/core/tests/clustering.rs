use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flick::clustering::{self, kmeans_fit, ClusterModel, InitMethod, KMeansConfig};
use flick::ingestion::EmbeddingSet;

fn random_set(n: usize, d: usize, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a few duplicated rows make empty clusters and ties likely
    let distinct = (n / 2).max(1);
    let base: Vec<Vec<f32>> = (0..distinct).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let rows: Vec<Vec<f32>> = (0..n).map(|i| base[i % distinct].clone()).collect();
    EmbeddingSet::from_rows((0..n).map(|i| format!("r{i}")).collect(), &rows).unwrap()
}

fn sq_dist(x: &[f32], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(&a, &b)| (a as f64 - b).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fit_invariants(n in 1usize..120, d in 1usize..6, k in 1usize..10, seed in any::<u64>(), uniform in any::<bool>()) {
        let x = random_set(n, d, seed);
        let k = k.min(n);
        let init = if uniform { InitMethod::Uniform } else { InitMethod::KMeansPlusPlus };
        let cfg = KMeansConfig { k, seed, init, ..KMeansConfig::default() };
        let m = kmeans_fit(&x, &cfg).unwrap();
        prop_assert_eq!(m.k, k);
        prop_assert!(m.iterations_run <= cfg.max_iter);
        for w in m.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        let mut inertia = 0.0;
        for (i, row) in x.rows().enumerate() {
            let own = sq_dist(row, m.centroid(m.assignments[i]));
            inertia += own;
            for c in 0..k {
                prop_assert!(own <= sq_dist(row, m.centroid(c)));
            }
        }
        prop_assert!((inertia - m.inertia).abs() <= 1e-9 * inertia.max(1.0));
        let again = kmeans_fit(&x, &cfg).unwrap();
        prop_assert_eq!(again, m);
    }

    #[test]
    fn ari_is_label_permutation_invariant(labels in prop::collection::vec(0usize..4, 2..60)) {
        let permuted: Vec<usize> = labels.iter().map(|&l| (l + 1) % 4).collect();
        prop_assert_eq!(clustering::adjusted_rand_index(&labels, &permuted), 1.0);
    }
}

#[test]
fn assign_matches_brute_force_with_lowest_index_ties() {
    let model = ClusterModel::from_centroids(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
    let x = EmbeddingSet::from_rows(
        vec!["a".into(), "b".into(), "c".into(), "tie".into()],
        &[vec![0.1, 0.0], vec![1.9, 0.1], vec![0.0, 3.0], vec![1.0, 0.0]],
    )
    .unwrap();
    assert_eq!(clustering::assign(&model, &x).unwrap(), vec![0, 1, 2, 0]);
}

#[test]
fn k_larger_than_n_is_rejected() {
    let x = random_set(3, 2, 1);
    assert!(kmeans_fit(&x, &KMeansConfig { k: 4, ..KMeansConfig::default() }).is_err());
}

#[test]
fn pseudo_labels_follow_assignments() {
    let x = random_set(50, 3, 5);
    let m = kmeans_fit(&x, &KMeansConfig { k: 4, seed: 2, ..KMeansConfig::default() }).unwrap();
    let p = clustering::pseudo_label(&x, &m).unwrap();
    assert_eq!(p.pseudo_labels, m.assignments);
    assert_eq!(p.ids, x.ids());
    let json = serde_json::to_string(&m).unwrap();
    let back: ClusterModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
}
