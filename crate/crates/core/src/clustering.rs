//! Per-bin clustering procedures and the Voronoi extension of a sample
//! clustering to new points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{IndexSubset, PointCloud};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Cluster label within one bin.
pub type Label = u32;

/// Label of a query point that could not be labelled because its bin has no
/// sample points.
pub const UNASSIGNED: Label = Label::MAX;

/// Clustering of the points of one bin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinClustering {
    pub bin: usize,
    pub members: IndexSubset,
    /// One label per member, aligned with `members`.
    pub labels: Vec<Label>,
    /// Number of distinct assigned labels.
    pub n_clusters: usize,
}

impl BinClustering {
    pub fn empty(bin: usize) -> Self {
        Self {
            bin,
            members: IndexSubset::empty(),
            labels: Vec::new(),
            n_clusters: 0,
        }
    }

    /// Builds a clustering and renumbers the labels by first occurrence.
    pub fn canonical(bin: usize, members: IndexSubset, labels: Vec<Label>) -> Result<Self> {
        let mut c = Self::from_raw(bin, members, labels)?;
        c.canonicalize();
        Ok(c)
    }

    /// Keeps the labels as given.
    pub fn from_raw(bin: usize, members: IndexSubset, labels: Vec<Label>) -> Result<Self> {
        if members.len() != labels.len() {
            return Err(Error::Parameter(format!(
                "{} members but {} labels",
                members.len(),
                labels.len()
            )));
        }
        let n_clusters = count_distinct(&labels);
        Ok(Self {
            bin,
            members,
            labels,
            n_clusters,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_of(&self, point: usize) -> Option<Label> {
        self.members.position(point).map(|p| self.labels[p])
    }

    /// Relabels assigned points `0, 1, ...` in order of first occurrence.
    pub fn canonicalize(&mut self) {
        let mut map: Vec<(Label, Label)> = Vec::new();
        for l in self.labels.iter_mut() {
            if *l == UNASSIGNED {
                continue;
            }
            let next = map.len() as Label;
            let new = match map.iter().find(|(old, _)| old == l) {
                Some(&(_, new)) => new,
                None => {
                    map.push((*l, next));
                    next
                }
            };
            *l = new;
        }
        self.n_clusters = map.len();
    }

    /// Member indices of each assigned cluster, keyed by sorted label.
    pub fn clusters(&self) -> Vec<(Label, Vec<usize>)> {
        let mut labels: Vec<Label> = self.labels.iter().copied().filter(|&l| l != UNASSIGNED).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
            .into_iter()
            .map(|l| {
                let pts = self
                    .members
                    .iter()
                    .zip(&self.labels)
                    .filter(|(_, &m)| m == l)
                    .map(|(p, _)| p)
                    .collect();
                (l, pts)
            })
            .collect()
    }
}

fn count_distinct(labels: &[Label]) -> usize {
    let mut v: Vec<Label> = labels.iter().copied().filter(|&l| l != UNASSIGNED).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ClusterMethod {
    /// Connected components of the graph joining points at distance ≤ `epsilon`.
    Epsilon { epsilon: f64 },
    /// Lloyd's algorithm from k-means++ starts; best of `restarts` by the
    /// mean distance to the assigned centroid.
    Kmeans { k: usize, restarts: usize, max_iter: usize },
    /// Every bin is one cluster.
    Constant,
}

impl ClusterMethod {
    pub const DEFAULT_RESTARTS: usize = 5;
    pub const DEFAULT_MAX_ITER: usize = 100;
}

impl FromStr for ClusterMethod {
    type Err = Error;

    /// `eps:<r>`, `kmeans:<K>[,restarts[,max_iter]]` or `constant`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unrecognised clusterer `{s}`"));
        if s == "constant" {
            return Ok(ClusterMethod::Constant);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "eps" | "epsilon" => Ok(ClusterMethod::Epsilon {
                epsilon: arg.trim().parse().map_err(|_| bad())?,
            }),
            "kmeans" => {
                let parts = arg
                    .split(',')
                    .map(|a| a.trim().parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                if parts.is_empty() || parts.len() > 3 {
                    return Err(bad());
                }
                Ok(ClusterMethod::Kmeans {
                    k: parts[0],
                    restarts: parts.get(1).copied().unwrap_or(Self::DEFAULT_RESTARTS),
                    max_iter: parts.get(2).copied().unwrap_or(Self::DEFAULT_MAX_ITER),
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterMethod::Epsilon { epsilon } => write!(f, "eps:{epsilon}"),
            ClusterMethod::Kmeans { k, restarts, max_iter } => write!(f, "kmeans:{k},{restarts},{max_iter}"),
            ClusterMethod::Constant => write!(f, "constant"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClustererConfig {
    #[serde(flatten)]
    pub method: ClusterMethod,
    pub seed: u64,
}

impl ClustererConfig {
    pub fn new(method: ClusterMethod, seed: u64) -> Self {
        Self { method, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            ClusterMethod::Epsilon { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => {
                Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")))
            }
            ClusterMethod::Kmeans { k: 0, .. } => Err(Error::Parameter("K must be at least 1".into())),
            ClusterMethod::Kmeans { restarts: 0, .. } => Err(Error::Parameter("restarts must be at least 1".into())),
            _ => Ok(()),
        }
    }

    /// Clusters the points of one bin.
    pub fn cluster_bin(&self, cloud: &PointCloud, bin_index: usize, members: &IndexSubset) -> Result<BinClustering> {
        let mut c = match self.method {
            ClusterMethod::Epsilon { epsilon } => epsilon_cluster(cloud, members, epsilon)?,
            ClusterMethod::Kmeans { k, restarts, max_iter } => {
                let seed = rng::derive(self.seed, "kmeans-bin", bin_index as u64);
                kmeans_cluster(cloud, members, k, seed, restarts, max_iter)?.clustering
            }
            ClusterMethod::Constant => constant_cluster(members),
        };
        c.bin = bin_index;
        Ok(c)
    }
}

fn constant_cluster(members: &IndexSubset) -> BinClustering {
    BinClustering {
        bin: 0,
        members: members.clone(),
        labels: vec![0; members.len()],
        n_clusters: usize::from(!members.is_empty()),
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// ε-neighbourhood clustering: connected components of the graph on the bin's
/// points with an edge whenever two points are within `epsilon`.
pub fn epsilon_cluster(cloud: &PointCloud, bin: &IndexSubset, epsilon: f64) -> Result<BinClustering> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    bin.check_within(cloud.len())?;
    let m = bin.len();
    let idx = bin.as_slice();
    let mut sets = DisjointSets::new(m);
    // sweep along the first coordinate; only pairs within epsilon there can be joined
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        cloud.point(idx[a])[0]
            .total_cmp(&cloud.point(idx[b])[0])
            .then(a.cmp(&b))
    });
    for (pos, &a) in order.iter().enumerate() {
        let xa = cloud.point(idx[a])[0];
        for &b in &order[pos + 1..] {
            if cloud.point(idx[b])[0] - xa > epsilon {
                break;
            }
            if cloud.dist(idx[a], idx[b]) <= epsilon {
                sets.union(a, b);
            }
        }
    }
    let roots: Vec<Label> = (0..m).map(|i| sets.find(i) as Label).collect();
    BinClustering::canonical(0, bin.clone(), roots)
}

/// Outcome of [`kmeans_cluster`].
#[derive(Clone, Debug)]
pub struct KmeansOutcome {
    pub clustering: BinClustering,
    /// Mean distance from each point to its cluster centroid.
    pub objective: f64,
    /// Within-cluster sum of squares after every Lloyd update, per restart.
    pub sse_traces: Vec<Vec<f64>>,
}

/// K-means on the points of one bin.
///
/// Each restart runs Lloyd iterations from a k-means++ start; the labelling
/// with the lowest mean point-to-centroid distance wins, earliest restart on
/// ties. Bins with fewer than `k` points come back as singletons.
pub fn kmeans_cluster(
    cloud: &PointCloud,
    bin: &IndexSubset,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> Result<KmeansOutcome> {
    if k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    if restarts == 0 {
        return Err(Error::Parameter("restarts must be at least 1".into()));
    }
    bin.check_within(cloud.len())?;
    let m = bin.len();
    if m <= k {
        let clustering = BinClustering::canonical(0, bin.clone(), (0..m as Label).collect())?;
        return Ok(KmeansOutcome {
            clustering,
            objective: 0.0,
            sse_traces: Vec::new(),
        });
    }
    let pts = cloud.select(bin.as_slice());
    let mut best: Option<(f64, Vec<Label>)> = None;
    let mut traces = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut stream = Stream::derived(seed, "kmeans-restart", r as u64);
        let (labels, trace) = lloyd(&pts, k, max_iter, &mut stream);
        let objective = mean_centroid_distance(&pts, &labels, k);
        traces.push(trace);
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, labels));
        }
    }
    let (objective, labels) = best.expect("restarts >= 1");
    Ok(KmeansOutcome {
        clustering: BinClustering::canonical(0, bin.clone(), labels)?,
        objective,
        sse_traces: traces,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(pts: &PointCloud, k: usize, stream: &mut Stream) -> Vec<Vec<f64>> {
    let m = pts.len();
    let mut centers = Vec::with_capacity(k);
    let first = stream.below(m as u64) as usize;
    centers.push(pts.point(first).to_vec());
    let mut d2: Vec<f64> = (0..m).map(|i| sq_dist(pts.point(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = stream.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // every point coincides with a centre already
            stream.below(m as u64) as usize
        };
        centers.push(pts.point(pick).to_vec());
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(pts.point(i), centers.last().unwrap()));
        }
    }
    centers
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(pts: &PointCloud, k: usize, max_iter: usize, stream: &mut Stream) -> (Vec<Label>, Vec<f64>) {
    let m = pts.len();
    let dim = pts.dim();
    let mut centers = plus_plus_init(pts, k, stream);
    let mut labels = vec![Label::MAX; m];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest_center(pts.point(i), &centers);
            if *label != c as Label {
                *label = c as Label;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l as usize] += 1;
            for (s, x) in sums[l as usize].iter_mut().zip(pts.point(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centre
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let sse: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| sq_dist(pts.point(i), &centers[l as usize]))
            .sum();
        trace.push(sse);
        if !changed {
            break;
        }
    }
    (labels, trace)
}

/// Empirical K-means quality: mean distance from each point to the centroid
/// of its cluster.
pub fn mean_centroid_distance(pts: &PointCloud, labels: &[Label], k: usize) -> f64 {
    let m = pts.len();
    if m == 0 {
        return 0.0;
    }
    let dim = pts.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l as usize] += 1;
        for (s, x) in sums[l as usize].iter_mut().zip(pts.point(i)) {
            *s += x;
        }
    }
    let centroids: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|v| v / c.max(1) as f64).collect())
        .collect();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(pts.point(i), &centroids[l as usize]).sqrt())
        .sum::<f64>()
        / m as f64
}

/// Nearest-sample lookup with ties resolved toward the earliest sample
/// position.
pub(crate) struct NearestSample<'a> {
    cloud: &'a PointCloud,
    sample: &'a [usize],
    /// sample positions sorted by first coordinate
    order: Vec<usize>,
    keys: Vec<f64>,
}

impl<'a> NearestSample<'a> {
    pub(crate) fn new(cloud: &'a PointCloud, sample: &'a [usize]) -> Self {
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.sort_by(|&a, &b| {
            cloud.point(sample[a])[0]
                .total_cmp(&cloud.point(sample[b])[0])
                .then(a.cmp(&b))
        });
        let keys = order.iter().map(|&p| cloud.point(sample[p])[0]).collect();
        Self {
            cloud,
            sample,
            order,
            keys,
        }
    }

    /// Sample position minimising the distance to `q`.
    pub(crate) fn nearest(&self, q: &[f64]) -> Option<usize> {
        if self.sample.is_empty() {
            return None;
        }
        let start = self.keys.partition_point(|&k| k < q[0]);
        let mut best = (f64::INFINITY, usize::MAX);
        let consider = |slot: usize, best: &mut (f64, usize)| {
            let pos = self.order[slot];
            let d = self.cloud.dist_to(self.sample[pos], q);
            if d < best.0 || (d == best.0 && pos < best.1) {
                *best = (d, pos);
            }
        };
        let mut hi = start;
        while hi < self.keys.len() && self.keys[hi] - q[0] <= best.0 {
            consider(hi, &mut best);
            hi += 1;
        }
        let mut lo = start;
        while lo > 0 && q[0] - self.keys[lo - 1] <= best.0 {
            lo -= 1;
            consider(lo, &mut best);
        }
        Some(best.1)
    }
}

/// Labels each query with the label of its nearest sample point.
///
/// Ties go to the earlier sample position, so a point equidistant from
/// samples 1 and 4 takes the label of sample 1. A query that is itself in the
/// sample keeps its own label.
pub fn voronoi_extend(
    cloud: &PointCloud,
    sample: &IndexSubset,
    labels: &[Label],
    queries: &IndexSubset,
) -> Result<Vec<Label>> {
    if sample.is_empty() {
        return Err(Error::Extension("cannot extend from an empty sample".into()));
    }
    if sample.len() != labels.len() {
        return Err(Error::Parameter("sample and labels differ in length".into()));
    }
    sample.check_within(cloud.len())?;
    queries.check_within(cloud.len())?;
    let index = NearestSample::new(cloud, sample.as_slice());
    Ok(queries
        .iter()
        .map(|q| match sample.position(q) {
            Some(pos) => labels[pos],
            None => labels[index.nearest(cloud.point(q)).expect("non-empty sample")],
        })
        .collect())
}
