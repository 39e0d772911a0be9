//! Resampling estimates of Mapper instability.
//!
//! [`kfold_instability`] removes one block of a shuffled sample at a time and
//! compares the Mapper functions of every pair of subsamples on their common
//! points. [`paired_instability`] splits the sample in halves, extends both
//! Mapper functions to all points and compares them there.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{IndexSubset, PointCloud};
use crate::distance::mapper_distance_with;
use crate::error::{Error, Result};
use crate::mapper::{build_mapper_on, extend_voronoi, restrict, MapperParams};
use crate::rng::{self, Stream};

/// Divisor applied to the sum of pair distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `k(k + 1) / 2`.
    #[default]
    Triangular,
    /// `k(k - 1) / 2`, the number of pairs.
    Pairs,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(Self::Triangular),
            "pairs" => Ok(Self::Pairs),
            _ => Err(Error::Parameter(format!("unknown normalization `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Kfold,
    Paired,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kfold" => Ok(Self::Kfold),
            "paired" => Ok(Self::Paired),
            _ => Err(Error::Parameter(format!("unknown estimator `{s}`"))),
        }
    }
}

/// Resampling settings shared by every estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityParams {
    #[serde(default)]
    pub estimator: Estimator,
    /// Number of subsamples for the k-fold estimator.
    pub k: usize,
    #[serde(default)]
    pub normalization: Normalization,
    /// Half-splits for the paired estimator.
    #[serde(default = "one")]
    pub trials: usize,
    /// Independent shuffles averaged together.
    #[serde(default = "one")]
    pub repeats: usize,
    pub seed: u64,
    /// Search budget per distance; distances that exhaust it are upper
    /// bounds and the estimate is marked inexact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<u64>,
}

fn one() -> usize {
    1
}

impl Default for InstabilityParams {
    fn default() -> Self {
        Self {
            estimator: Estimator::Kfold,
            k: 10,
            normalization: Normalization::Triangular,
            trials: 1,
            repeats: 1,
            seed: 0,
            max_nodes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityEstimate {
    pub estimator: Estimator,
    /// Sum of distances over the chosen normalizer.
    pub value: f64,
    pub normalization: Normalization,
    /// Sum over `k(k + 1) / 2`; the plain mean for the paired estimator.
    pub triangular_value: f64,
    /// Mean distance per compared pair.
    pub pairs_value: f64,
    /// One entry per pair `(i, j)`, `i < j`, in lexicographic order, or one
    /// per trial.
    pub per_pair_distances: Vec<f64>,
    pub k: usize,
    /// Points removed per subsample (half the sample for the paired estimator).
    pub m: usize,
    pub n_used: usize,
    /// Trailing points dropped so that `k` divides the sample size.
    pub truncated: usize,
    pub shuffle_seed: u64,
    /// Some subsample left every bin empty.
    pub degenerate: bool,
    /// `(subsample, bin)` pairs where a bin that holds points of the full
    /// sample has none.
    pub empty_bin_events: usize,
    /// All distances were solved to optimality.
    pub exact: bool,
}

impl InstabilityEstimate {
    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self.value = match normalization {
            Normalization::Triangular => self.triangular_value,
            Normalization::Pairs => self.pairs_value,
        };
        self
    }
}

pub fn kfold_instability(
    cloud: &PointCloud,
    params: &MapperParams,
    k: usize,
    normalization: Normalization,
    seed: u64,
) -> Result<InstabilityEstimate> {
    kfold_instability_with(cloud, params, k, normalization, seed, None)
}

/// [`kfold_instability`] with a search budget per pair of subsamples.
pub fn kfold_instability_with(
    cloud: &PointCloud,
    params: &MapperParams,
    k: usize,
    normalization: Normalization,
    seed: u64,
    max_nodes: Option<u64>,
) -> Result<InstabilityEstimate> {
    let n = cloud.len();
    if k < 3 {
        return Err(Error::Parameter(format!("k must be at least 3, got {k}")));
    }
    if k > n {
        return Err(Error::Parameter(format!("k = {k} exceeds the sample size {n}")));
    }
    let m = n / k;
    let n_used = k * m;
    let cover = params.cover(cloud)?;
    params.clusterer.validate()?;

    let mut order: Vec<usize> = (0..n).collect();
    Stream::derived(seed, "kfold-shuffle", 0).shuffle(&mut order);
    order.truncate(n_used);
    let used = IndexSubset::from_unsorted(order.clone());
    let blocks: Vec<IndexSubset> = order
        .chunks(m)
        .map(|c| IndexSubset::from_unsorted(c.to_vec()))
        .collect();
    let without = |skip: &[usize]| -> IndexSubset {
        used.iter()
            .filter(|&x| skip.iter().all(|&b| !blocks[b].contains(x)))
            .collect()
    };

    let functions = (0..k)
        .into_par_iter()
        .map(|i| build_mapper_on(cloud, &cover, &params.clusterer, &without(&[i])))
        .collect::<Result<Vec<_>>>()?;

    let mut degenerate = false;
    let mut empty_bin_events = 0;
    for f in &functions {
        let mut all_empty = true;
        for (b, bin) in f.bins.iter().enumerate() {
            if bin.members.is_empty() {
                if !cover.bins[b].is_empty() {
                    empty_bin_events += 1;
                }
            } else {
                all_empty = false;
            }
        }
        degenerate |= all_empty;
    }

    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let results = pairs
        .par_iter()
        .map(|&(i, j)| {
            let common = without(&[i, j]);
            mapper_distance_with(
                &restrict(&functions[i], &common)?,
                &restrict(&functions[j], &common)?,
                max_nodes,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = results.iter().map(|d| d.distance).collect();
    let sum: f64 = distances.iter().sum();
    let kf = k as f64;
    Ok(InstabilityEstimate {
        estimator: Estimator::Kfold,
        value: 0.0,
        normalization,
        triangular_value: sum / (kf * (kf + 1.0) / 2.0),
        pairs_value: sum / (kf * (kf - 1.0) / 2.0),
        per_pair_distances: distances,
        k,
        m,
        n_used,
        truncated: n - n_used,
        shuffle_seed: seed,
        degenerate,
        empty_bin_events,
        exact: results.iter().all(|d| d.exact),
    }
    .with_normalization(normalization))
}

pub fn paired_instability(
    cloud: &PointCloud,
    params: &MapperParams,
    trials: usize,
    seed: u64,
) -> Result<InstabilityEstimate> {
    paired_instability_with(cloud, params, trials, seed, None)
}

/// [`paired_instability`] with a search budget per pair of halves.
pub fn paired_instability_with(
    cloud: &PointCloud,
    params: &MapperParams,
    trials: usize,
    seed: u64,
    max_nodes: Option<u64>,
) -> Result<InstabilityEstimate> {
    let n = cloud.len();
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "the paired estimator needs an even sample size, got {n}"
        )));
    }
    let cover = params.cover(cloud)?;
    params.clusterer.validate()?;
    let all = IndexSubset::full(n);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut order: Vec<usize> = (0..n).collect();
            Stream::derived(seed, "paired-split", t as u64).shuffle(&mut order);
            let (a, b) = order.split_at(n / 2);
            let mut events = 0;
            let mut degenerate = false;
            let mut extended = Vec::with_capacity(2);
            for half in [a, b] {
                let half = IndexSubset::from_unsorted(half.to_vec());
                let f = build_mapper_on(cloud, &cover, &params.clusterer, &half)?;
                degenerate |= f.bins.iter().all(|bin| bin.members.is_empty());
                let ext = extend_voronoi(cloud, &f, &all)?;
                events += ext.unassigned_bins.len();
                extended.push(ext.function);
            }
            let d = mapper_distance_with(&extended[0], &extended[1], max_nodes)?;
            Ok((d, events, degenerate))
        })
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = outcomes.iter().map(|(d, _, _)| d.distance).collect();
    let mean = distances.iter().sum::<f64>() / trials as f64;
    Ok(InstabilityEstimate {
        estimator: Estimator::Paired,
        value: mean,
        normalization: Normalization::Pairs,
        triangular_value: mean,
        pairs_value: mean,
        per_pair_distances: distances,
        k: 2,
        m: n / 2,
        n_used: n,
        truncated: 0,
        shuffle_seed: seed,
        degenerate: outcomes.iter().any(|o| o.2),
        empty_bin_events: outcomes.iter().map(|o| o.1).sum(),
        exact: outcomes.iter().all(|o| o.0.exact),
    })
}

/// One estimate with the settings of `inst`, using `seed` for the shuffle.
pub fn estimate(
    cloud: &PointCloud,
    params: &MapperParams,
    inst: &InstabilityParams,
    seed: u64,
) -> Result<InstabilityEstimate> {
    match inst.estimator {
        Estimator::Kfold => kfold_instability_with(cloud, params, inst.k, inst.normalization, seed, inst.max_nodes),
        Estimator::Paired => paired_instability_with(cloud, params, inst.trials, seed, inst.max_nodes),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedInstability {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` divisor); 0 for a single repeat.
    pub std: f64,
    /// Repeat `r` uses the shuffle seed `derive(seed, "repeat", r)`.
    pub estimates: Vec<InstabilityEstimate>,
}

impl AveragedInstability {
    pub fn from_estimates(estimates: Vec<InstabilityEstimate>) -> Self {
        let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        let (mean, std) = mean_std(&values);
        Self { mean, std, estimates }
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Averages `inst.repeats` estimates over independent shuffles of the same sample.
pub fn averaged_instability(
    cloud: &PointCloud,
    params: &MapperParams,
    inst: &InstabilityParams,
) -> Result<AveragedInstability> {
    if inst.repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    let estimates = (0..inst.repeats)
        .into_par_iter()
        .map(|r| estimate(cloud, params, inst, rng::derive(inst.seed, "repeat", r as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedInstability::from_estimates(estimates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{ClusterMethod, ClustererConfig};
    use crate::cover::Filter;
    use crate::datagen::{generate, SyntheticSpec};

    fn params(method: ClusterMethod, t: usize, gain: f64) -> MapperParams {
        MapperParams {
            filter: Filter::Axis(0),
            resolution: vec![t],
            gain,
            range: None,
            clusterer: ClustererConfig::new(method, 11),
        }
    }

    fn separated(n: usize, seed: u64) -> PointCloud {
        let mut s = Stream::new(seed);
        PointCloud::new(
            (0..n)
                .map(|i| {
                    let c = if i % 2 == 0 { -10.0 } else { 10.0 };
                    vec![c + s.normal(), s.normal()]
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_clusterer_is_stable() {
        let cloud = generate(&SyntheticSpec::circles(300, 1)).unwrap();
        let p = params(ClusterMethod::Constant, 5, 0.3);
        let e = kfold_instability(&cloud, &p, 10, Normalization::Triangular, 4).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.per_pair_distances.len(), 45);
        let e = paired_instability(&cloud, &p, 3, 4).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn separated_gaussians_are_stable() {
        let cloud = separated(1000, 3);
        let p = params(
            ClusterMethod::Kmeans {
                k: 2,
                restarts: 5,
                max_iter: 100,
            },
            1,
            0.0,
        );
        let e = kfold_instability(&cloud, &p, 10, Normalization::Triangular, 5).unwrap();
        assert!(e.value < 0.01, "{}", e.value);
        let e = paired_instability(&cloud, &p, 2, 5).unwrap();
        assert!(e.value < 0.01, "{}", e.value);
    }

    #[test]
    fn normalizations_and_truncation() {
        let cloud = generate(&SyntheticSpec::uniform_square(103, 2)).unwrap();
        let p = params(
            ClusterMethod::Kmeans {
                k: 2,
                restarts: 2,
                max_iter: 50,
            },
            2,
            0.3,
        );
        let e = kfold_instability(&cloud, &p, 5, Normalization::Pairs, 1).unwrap();
        assert_eq!((e.m, e.n_used, e.truncated), (20, 100, 3));
        let sum: f64 = e.per_pair_distances.iter().sum();
        assert_eq!(e.value, sum / 10.0);
        assert_eq!(e.triangular_value, sum / 15.0);
        assert!(e.value <= 1.0);
        assert!(e.triangular_value <= 4.0 / 6.0);
    }

    #[test]
    fn bad_parameters() {
        let cloud = separated(10, 1);
        let p = params(ClusterMethod::Constant, 1, 0.0);
        assert!(kfold_instability(&cloud, &p, 2, Normalization::Triangular, 0).is_err());
        assert!(kfold_instability(&cloud, &p, 11, Normalization::Triangular, 0).is_err());
        let odd = separated(9, 1);
        assert!(paired_instability(&odd, &p, 1, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let cloud = generate(&SyntheticSpec::circles(200, 7)).unwrap();
        let p = params(ClusterMethod::Epsilon { epsilon: 0.3 }, 6, 0.3);
        let a = kfold_instability(&cloud, &p, 6, Normalization::Triangular, 9).unwrap();
        let b = kfold_instability(&cloud, &p, 6, Normalization::Triangular, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn averaging() {
        let cloud = generate(&SyntheticSpec::circles(120, 7)).unwrap();
        let p = params(ClusterMethod::Epsilon { epsilon: 0.3 }, 4, 0.3);
        let inst = InstabilityParams {
            k: 4,
            repeats: 1,
            seed: 2,
            ..Default::default()
        };
        let one = averaged_instability(&cloud, &p, &inst).unwrap();
        assert_eq!(one.std, 0.0);
        assert_eq!(one.mean, one.estimates[0].value);
        let many = averaged_instability(&cloud, &p, &InstabilityParams { repeats: 3, ..inst }).unwrap();
        assert_eq!(many.estimates.len(), 3);
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
    }

    #[test]
    fn empty_bins_are_counted() {
        // one far point forms its own bin, and exactly one subsample drops it
        let mut rows: Vec<Vec<f64>> = (0..45).map(|i| vec![i as f64 / 45.0, 0.0]).collect();
        rows.push(vec![100.0, 0.0]);
        let cloud = PointCloud::new(rows).unwrap();
        let p = params(ClusterMethod::Constant, 2, 0.0);
        let e = kfold_instability(&cloud, &p, 46, Normalization::Triangular, 0).unwrap();
        assert_eq!(e.empty_bin_events, 1);
        assert!(!e.degenerate);
    }
}
