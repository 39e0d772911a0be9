#![allow(dead_code)]

use std::sync::Arc;

use mapstab::clustering::BinClustering;
use mapstab::rng::Stream;
use mapstab::{Cover, IndexSubset, Label, MapperFunction, UNASSIGNED};

/// Random cover of at most `max_points` points by at most `max_bins` bins
/// with random overlaps.
pub fn random_cover(s: &mut Stream, max_bins: usize, max_points: usize) -> Arc<Cover> {
    let n = 1 + s.below(max_points as u64) as usize;
    let t = 1 + s.below(max_bins as u64) as usize;
    let bins = (0..t)
        .map(|_| {
            let keep = 0.2 + 0.8 * s.uniform();
            IndexSubset::from_unsorted((0..n).filter(|_| s.uniform() < keep).collect())
        })
        .collect();
    Arc::new(Cover::from_bins(n, bins).unwrap())
}

/// Random clustering of every bin into at most `max_clusters` labels, with
/// an occasional unassigned point.
pub fn random_function(s: &mut Stream, cover: &Arc<Cover>, max_clusters: usize) -> MapperFunction {
    let bins = cover
        .bins
        .iter()
        .enumerate()
        .map(|(b, members)| {
            let c = 1 + s.below(max_clusters as u64);
            let labels: Vec<Label> = members
                .iter()
                .map(|_| {
                    if s.uniform() < 0.05 {
                        UNASSIGNED
                    } else {
                        3 * s.below(c) as Label + 1
                    }
                })
                .collect();
            BinClustering::from_raw(b, members.clone(), labels).unwrap()
        })
        .collect();
    MapperFunction::from_parts(cover.clone(), bins, IndexSubset::full(cover.n_points)).unwrap()
}

/// `f` with the labels of every bin permuted at random.
pub fn relabel(s: &mut Stream, f: &MapperFunction) -> MapperFunction {
    let bins = f
        .bins
        .iter()
        .map(|b| {
            let mut perm: Vec<Label> = (0..16).map(|l| 100 + l).collect();
            s.shuffle(&mut perm);
            let labels = b
                .labels
                .iter()
                .map(|&l| if l == UNASSIGNED { l } else { perm[l as usize % 16] })
                .collect();
            BinClustering::from_raw(b.bin, b.members.clone(), labels).unwrap()
        })
        .collect();
    MapperFunction::from_parts(f.cover.clone(), bins, f.domain.clone()).unwrap()
}

/// Three functions sharing a random cover.
pub fn random_triple(seed: u64, max_bins: usize, max_clusters: usize, max_points: usize) -> [MapperFunction; 3] {
    let mut s = Stream::new(seed);
    let cover = random_cover(&mut s, max_bins, max_points);
    [
        random_function(&mut s, &cover, max_clusters),
        random_function(&mut s, &cover, max_clusters),
        random_function(&mut s, &cover, max_clusters),
    ]
}

/// Three bins over six points with f, g, h differing only at point 0:
/// g moves it in bin 2, h in bins 1 and 2.
pub fn three_bin_triple() -> [MapperFunction; 3] {
    let cover = Arc::new(Cover::from_bins(6, vec![IndexSubset::full(6); 3]).unwrap());
    let base: [Label; 6] = [0, 0, 1, 1, 1, 1];
    let moved: [Label; 6] = [1, 0, 1, 1, 1, 1];
    let make = |which: [bool; 3]| {
        let bins = (0..3)
            .map(|b| {
                let labels = if which[b] { moved } else { base };
                BinClustering::from_raw(b, IndexSubset::full(6), labels.to_vec()).unwrap()
            })
            .collect();
        MapperFunction::from_parts(cover.clone(), bins, IndexSubset::full(6)).unwrap()
    };
    [
        make([false, false, false]),
        make([false, false, true]),
        make([false, true, true]),
    ]
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

pub mod cli {
    use std::path::{Path, PathBuf};
    use std::process::{Command, Output};

    pub fn mapstab(dir: &Path, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_mapstab"))
            .current_dir(dir)
            .args(args)
            .output()
            .expect("binary runs")
    }

    pub fn ok(dir: &Path, args: &[&str]) -> Output {
        let out = mapstab(dir, args);
        assert!(
            out.status.success(),
            "mapstab {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    /// Every run of the determinism check: arguments and the files it writes.
    pub fn determinism_runs() -> Vec<(Vec<&'static str>, Vec<&'static str>)> {
        let data = ["--in", "pts.csv"];
        let mut runs = vec![
            (
                vec![
                    "generate", "--shape", "circles", "--n", "600", "--seed", "4", "--out", "pts.csv",
                ],
                vec!["pts.csv"],
            ),
            (
                [
                    &["mapper"][..],
                    &data,
                    &[
                        "--filter",
                        "axis:1",
                        "--resolution",
                        "9",
                        "--gain",
                        "0.35",
                        "--cluster",
                        "eps:0.3",
                        "--out",
                        "graph.json",
                        "--dot",
                        "graph.dot",
                        "--function",
                        "f.json",
                    ],
                ]
                .concat(),
                vec!["graph.json", "graph.dot", "f.json"],
            ),
            (
                [
                    &["mapper"][..],
                    &data,
                    &[
                        "--filter",
                        "1",
                        "--resolution",
                        "9",
                        "--gain",
                        "0.35",
                        "--cluster",
                        "kmeans:2",
                        "--seed",
                        "3",
                        "--out",
                        "graph2.json",
                        "--function",
                        "g.json",
                    ],
                ]
                .concat(),
                vec!["graph2.json", "g.json"],
            ),
            (
                vec!["dist", "f.json", "g.json", "--out", "dist.json"],
                vec!["dist.json"],
            ),
            (
                [
                    &["instability"][..],
                    &data,
                    &[
                        "--filter",
                        "1",
                        "--resolution",
                        "6",
                        "--gain",
                        "0.3",
                        "--cluster",
                        "kmeans:2",
                        "--k",
                        "6",
                        "--repeats",
                        "2",
                        "--seed",
                        "5",
                        "--out",
                        "inst.json",
                    ],
                ]
                .concat(),
                vec!["inst.json"],
            ),
            (
                [
                    &["instability"][..],
                    &data,
                    &[
                        "--filter",
                        "0",
                        "--resolution",
                        "4",
                        "--cluster",
                        "eps:0.3",
                        "--estimator",
                        "paired",
                        "--trials",
                        "3",
                        "--out",
                        "paired.json",
                    ],
                ]
                .concat(),
                vec!["paired.json"],
            ),
            (
                [
                    &["sweep"][..],
                    &data,
                    &[
                        "--filter",
                        "1",
                        "--mode",
                        "2d",
                        "--resolution",
                        "3:5",
                        "--gain",
                        "0.2:0.4:0.1",
                        "--cluster",
                        "kmeans:2",
                        "--k",
                        "4",
                        "--emit",
                        "both",
                        "--out",
                        "grid",
                    ],
                ]
                .concat(),
                vec!["grid.csv", "grid.json"],
            ),
            (
                [
                    &["sweep"][..],
                    &data,
                    &[
                        "--filter",
                        "1",
                        "--resolution",
                        "9",
                        "--gain",
                        "0.35",
                        "--cluster",
                        "eps:0.2",
                        "--values",
                        "0.2,0.3,0.5",
                        "--k",
                        "4",
                        "--emit",
                        "json",
                        "--out",
                        "eps.json",
                    ],
                ]
                .concat(),
                vec!["eps.json"],
            ),
            (
                vec![
                    "bounds",
                    "--scenario",
                    "separated",
                    "--scenario",
                    "overlapping",
                    "--gamma",
                    "0.25",
                    "--trials",
                    "4",
                    "--mc-points",
                    "2000",
                    "--raster",
                    "40",
                    "--out",
                    "bounds.json",
                ],
                vec!["bounds.json"],
            ),
        ];
        for (args, _) in &mut runs {
            args.extend(["--jobs", "1"]);
        }
        runs
    }

    /// Runs every command with one thread in `dir`, then replays each
    /// resolved config in order with three threads in an empty directory and
    /// compares the bytes of every output. Returns the files that differ.
    pub fn check_determinism(dir: &Path) -> Vec<String> {
        let first = dir.join("first");
        let replay = dir.join("replay");
        std::fs::create_dir_all(&first).unwrap();
        std::fs::create_dir_all(&replay).unwrap();
        let mut differing = Vec::new();
        let runs = determinism_runs();
        for (args, _) in &runs {
            ok(&first, args);
        }
        for (args, files) in &runs {
            let out = args[args.iter().position(|&a| a == "--out").unwrap() + 1];
            let config: PathBuf = first.join(format!("{out}.config.json"));
            ok(&replay, &["--config", config.to_str().unwrap(), "--jobs", "3"]);
            let config_name = format!("{out}.config.json");
            for f in files.iter().copied().chain([config_name.as_str()]) {
                if std::fs::read(first.join(f)).unwrap() != std::fs::read(replay.join(f)).unwrap() {
                    differing.push(f.to_string());
                }
            }
        }
        differing
    }
}
