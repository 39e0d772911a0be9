use mapstab::datagen::{generate, SyntheticSpec};
use mapstab::instability::{kfold_instability, paired_instability, Normalization};
use mapstab::mapper::MapperParams;
use mapstab::{
    extend_voronoi, nerve, restrict, ClusterMethod, ClustererConfig, Filter, IndexSubset, MapperFunction, PointCloud,
};
use proptest::prelude::*;

fn params(t: usize, gain: f64, method: ClusterMethod) -> MapperParams {
    MapperParams {
        filter: Filter::Axis(0),
        resolution: vec![t],
        gain,
        range: None,
        clusterer: ClustererConfig::new(method, 1),
    }
}

fn cloud(n: usize, seed: u64) -> PointCloud {
    generate(&SyntheticSpec::gaussian(n, seed)).unwrap()
}

fn method() -> impl Strategy<Value = ClusterMethod> {
    prop_oneof![
        (0.05f64..1.5).prop_map(|epsilon| ClusterMethod::Epsilon { epsilon }),
        (1usize..4).prop_map(|k| ClusterMethod::Kmeans {
            k,
            restarts: 2,
            max_iter: 30
        }),
        Just(ClusterMethod::Constant),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_point_lands_in_a_bin(n in 1usize..200, t in 1usize..12, gain in 0.0f64..0.6, seed in any::<u64>()) {
        let c = cloud(n, seed);
        let cover = params(t, gain, ClusterMethod::Constant).cover(&c).unwrap();
        prop_assert_eq!(cover.len(), t);
        prop_assert!(cover.out_of_range.is_empty());
        for i in 0..n {
            let bins = cover.bins_of(i);
            prop_assert!(!bins.is_empty());
            // consecutive bins only
            prop_assert!(bins.windows(2).all(|w| w[1] == w[0] + 1));
        }
    }

    #[test]
    fn nerve_counts_are_consistent(n in 2usize..150, t in 1usize..8, gain in 0.0f64..0.5, m in method(), seed in any::<u64>()) {
        let c = cloud(n, seed);
        let f = params(t, gain, m).build(&c).unwrap();
        let g = nerve(&f, 2).unwrap();
        let s = g.summary();
        let clusters: usize = f.bins.iter().map(|b| b.n_clusters).sum();
        prop_assert_eq!(s.vertices, clusters);
        prop_assert!(s.components >= 1 && s.components <= s.vertices);
        prop_assert_eq!(s.cycles + s.vertices, s.edges + s.components);
        for e in g.edges() {
            prop_assert!(e.weight >= 1);
        }
    }

    #[test]
    fn json_roundtrip_and_self_extension(n in 2usize..120, t in 1usize..6, m in method(), seed in any::<u64>()) {
        let c = cloud(n, seed);
        let f = params(t, 0.3, m).build(&c).unwrap();
        let back = MapperFunction::from_json(&f.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &f);
        let ext = extend_voronoi(&c, &f, &f.domain).unwrap();
        prop_assert_eq!(&ext.function, &f);
        prop_assert_eq!(restrict(&f, &IndexSubset::full(n)).unwrap(), f);
    }

    #[test]
    fn kfold_normalizations_and_range(n in 30usize..150, k in 3usize..8, m in method(), seed in any::<u64>()) {
        let c = cloud(n, seed);
        let p = params(3, 0.3, m);
        let e = kfold_instability(&c, &p, k, Normalization::Triangular, seed).unwrap();
        let kf = k as f64;
        let sum: f64 = e.per_pair_distances.iter().sum();
        prop_assert_eq!(e.per_pair_distances.len(), k * (k - 1) / 2);
        prop_assert!((e.triangular_value - sum / (kf * (kf + 1.0) / 2.0)).abs() < 1e-12);
        prop_assert!((e.pairs_value - sum / (kf * (kf - 1.0) / 2.0)).abs() < 1e-12);
        prop_assert!(e.per_pair_distances.iter().all(|&d| (0.0..=1.0).contains(&d)));
        prop_assert_eq!(e.m, n / k);
        prop_assert_eq!(e.n_used + e.truncated, n);
        let again = kfold_instability(&c, &p, k, Normalization::Triangular, seed).unwrap();
        prop_assert_eq!(e, again);
    }

    #[test]
    fn one_cluster_per_bin_is_stable(n in 30usize..200, k in 3usize..8, t in 1usize..6, seed in any::<u64>()) {
        let c = cloud(n, seed);
        let p = params(t, 0.2, ClusterMethod::Constant);
        prop_assert_eq!(kfold_instability(&c, &p, k, Normalization::Triangular, seed).unwrap().value, 0.0);
        let even = c.select(&(0..n - n % 2).collect::<Vec<_>>());
        let paired = paired_instability(&even, &p, 2, seed).unwrap();
        // a half that misses a bin leaves its points there unassigned
        prop_assert!(paired.value == 0.0 || paired.empty_bin_events > 0);
    }
}
