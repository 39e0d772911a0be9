//! Mapper functions and their nerve.
//!
//! A [`MapperFunction`] keeps one clustering per bin of a shared [`Cover`];
//! the label set of a point is the set of its per-bin labels. The
//! [`MapperGraph`] is the weighted nerve of the clusters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{BinClustering, ClustererConfig, Label, NearestSample, UNASSIGNED};
use crate::cover::{assign_bins, grid_cover, interval_cover, Cover, CoverSpec, Filter, FilterValues};
use crate::dataset::{IndexSubset, PointCloud};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperFunction {
    pub cover: Arc<Cover>,
    pub bins: Vec<BinClustering>,
    /// Points the function is defined on.
    pub domain: IndexSubset,
}

impl MapperFunction {
    /// Assembles a function from per-bin clusterings, checking that bin `i`
    /// holds exactly `cover.bins[i] ∩ domain`.
    pub fn from_parts(cover: Arc<Cover>, bins: Vec<BinClustering>, domain: IndexSubset) -> Result<Self> {
        if bins.len() != cover.len() {
            return Err(Error::CoverMismatch(format!(
                "{} clusterings for {} bins",
                bins.len(),
                cover.len()
            )));
        }
        domain.check_within(cover.n_points)?;
        for (i, b) in bins.iter().enumerate() {
            if b.members != cover.bins[i].intersection(&domain) {
                return Err(Error::CoverMismatch(format!(
                    "bin {i} members differ from cover ∩ domain"
                )));
            }
            if b.members.len() != b.labels.len() {
                return Err(Error::Parameter(format!(
                    "bin {i}: members and labels differ in length"
                )));
            }
        }
        Ok(Self { cover, bins, domain })
    }

    pub fn n_points(&self) -> usize {
        self.domain.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// `f(x)`: the `(bin, label)` pairs of point `x`.
    pub fn labels_of(&self, x: usize) -> Vec<(usize, Label)> {
        self.bins
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.label_of(x).map(|l| (i, l)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MapperFunctionDoc {
            schema_version: SCHEMA_VERSION,
            function: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MapperFunctionDoc = serde_json::from_str(text)?;
        let MapperFunction { cover, bins, domain } = doc.function;
        Self::from_parts(cover, bins, domain)
    }
}

#[derive(Serialize, Deserialize)]
struct MapperFunctionDoc {
    schema_version: u32,
    #[serde(flatten)]
    function: MapperFunction,
}

/// Clusters every bin of `cover` over all points of the cloud.
pub fn build_mapper(cloud: &PointCloud, cover: &Arc<Cover>, clusterer: &ClustererConfig) -> Result<MapperFunction> {
    build_mapper_on(cloud, cover, clusterer, &IndexSubset::full(cloud.len()))
}

/// Clusters every bin of `cover` using only the points of `domain`.
pub fn build_mapper_on(
    cloud: &PointCloud,
    cover: &Arc<Cover>,
    clusterer: &ClustererConfig,
    domain: &IndexSubset,
) -> Result<MapperFunction> {
    if cover.n_points != cloud.len() {
        return Err(Error::CoverMismatch(format!(
            "cover built for {} points, cloud has {}",
            cover.n_points,
            cloud.len()
        )));
    }
    clusterer.validate()?;
    domain.check_within(cloud.len())?;
    let bins = cover
        .bins
        .par_iter()
        .enumerate()
        .map(|(i, bin)| clusterer.cluster_bin(cloud, i, &bin.intersection(domain)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MapperFunction {
        cover: Arc::clone(cover),
        bins,
        domain: domain.clone(),
    })
}

/// Restriction of `f` to `subset`. Labels are kept as they are, so clusters
/// that lose all their points simply disappear.
pub fn restrict(f: &MapperFunction, subset: &IndexSubset) -> Result<MapperFunction> {
    if !subset.is_subset_of(&f.domain) {
        return Err(Error::DomainMismatch(
            "restriction subset is not inside the domain".into(),
        ));
    }
    let bins = f
        .bins
        .iter()
        .map(|b| {
            let (members, labels): (Vec<usize>, Vec<Label>) = b
                .members
                .iter()
                .zip(&b.labels)
                .filter(|(x, _)| subset.contains(*x))
                .unzip();
            BinClustering::from_raw(b.bin, IndexSubset::new(members).expect("ordered"), labels)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MapperFunction {
        cover: Arc::clone(&f.cover),
        bins,
        domain: subset.clone(),
    })
}

/// Result of [`extend_voronoi`].
#[derive(Clone, Debug)]
pub struct Extension {
    pub function: MapperFunction,
    /// Bins whose queries stayed [`UNASSIGNED`] because `f` had no points there.
    pub unassigned_bins: Vec<usize>,
}

/// Extends `f` to `queries`: in each bin a query takes the label of its
/// nearest sample point of that bin. Bins without sample points label their
/// queries [`UNASSIGNED`] and are reported.
pub fn extend_voronoi(cloud: &PointCloud, f: &MapperFunction, queries: &IndexSubset) -> Result<Extension> {
    queries.check_within(cloud.len())?;
    let domain = f.domain.union(queries);
    let per_bin: Vec<(BinClustering, bool)> = f
        .bins
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let members = f.cover.bins[i].intersection(&domain);
            let index = NearestSample::new(cloud, b.members.as_slice());
            let mut flagged = false;
            let labels = members
                .iter()
                .map(|x| match b.members.position(x) {
                    Some(p) => b.labels[p],
                    None => match index.nearest(cloud.point(x)) {
                        Some(p) => b.labels[p],
                        None => {
                            flagged = true;
                            UNASSIGNED
                        }
                    },
                })
                .collect();
            BinClustering::from_raw(b.bin, members, labels).map(|c| (c, flagged))
        })
        .collect::<Result<Vec<_>>>()?;
    let unassigned_bins = per_bin
        .iter()
        .enumerate()
        .filter(|(_, (_, flagged))| *flagged)
        .map(|(i, _)| i)
        .collect();
    Ok(Extension {
        function: MapperFunction {
            cover: Arc::clone(&f.cover),
            bins: per_bin.into_iter().map(|(c, _)| c).collect(),
            domain,
        },
        unassigned_bins,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub bin: usize,
    pub label: Label,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Simplex {
    /// Indices into [`MapperGraph::vertices`], increasing.
    pub vertices: Vec<usize>,
    /// Number of points in the common intersection of the clusters.
    pub weight: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapperGraph {
    pub vertices: Vec<Vertex>,
    /// `simplices[d - 1]` holds the `d`-simplices.
    pub simplices: Vec<Vec<Simplex>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub vertices: usize,
    pub edges: usize,
    pub components: usize,
    /// Independent cycles of the 1-skeleton, `E - V + C`.
    pub cycles: usize,
}

impl MapperGraph {
    pub fn edges(&self) -> &[Simplex] {
        self.simplices.first().map_or(&[], Vec::as_slice)
    }

    pub fn summary(&self) -> GraphSummary {
        let v = self.vertices.len();
        let mut parent: Vec<usize> = (0..v).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = v;
        for e in self.edges() {
            let (a, b) = (find(&mut parent, e.vertices[0]), find(&mut parent, e.vertices[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
                components -= 1;
            }
        }
        let edges = self.edges().len();
        GraphSummary {
            vertices: v,
            edges,
            components,
            cycles: edges + components - v,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            summary: GraphSummary,
            #[serde(flatten)]
            graph: &'a MapperGraph,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            schema_version: SCHEMA_VERSION,
            summary: self.summary(),
            graph: self,
        })?)
    }

    /// 1-skeleton in Graphviz DOT; vertex sizes and edge weights become attributes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph mapper {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "  v{i} [bin={}, label={}, size={}];", v.bin, v.label, v.size);
        }
        for e in self.edges() {
            let _ = writeln!(out, "  v{} -- v{} [weight={}];", e.vertices[0], e.vertices[1], e.weight);
        }
        out.push_str("}\n");
        out
    }
}

/// Nerve of the clusters of `f` up to dimension `max_dim`.
///
/// Vertices are the non-empty clusters ordered by `(bin, label)`; a
/// `d`-simplex is a set of `d + 1` clusters from distinct bins sharing at least
/// one point, weighted by the number of shared points.
pub fn nerve(f: &MapperFunction, max_dim: usize) -> Result<MapperGraph> {
    if max_dim < 1 {
        return Err(Error::Parameter("max_dim must be at least 1".into()));
    }
    let mut sizes: BTreeMap<(usize, Label), usize> = BTreeMap::new();
    let mut point_vertices: BTreeMap<usize, Vec<(usize, Label)>> = BTreeMap::new();
    for (i, b) in f.bins.iter().enumerate() {
        for (x, &l) in b.members.iter().zip(&b.labels) {
            if l == UNASSIGNED {
                continue;
            }
            *sizes.entry((i, l)).or_default() += 1;
            point_vertices.entry(x).or_default().push((i, l));
        }
    }
    let ids: BTreeMap<(usize, Label), usize> = sizes.keys().enumerate().map(|(id, &k)| (k, id)).collect();
    let vertices = sizes
        .iter()
        .map(|(&(bin, label), &size)| Vertex { bin, label, size })
        .collect();

    let mut counts: Vec<BTreeMap<Vec<usize>, usize>> = vec![BTreeMap::new(); max_dim];
    for verts in point_vertices.values() {
        let vs: Vec<usize> = verts.iter().map(|k| ids[k]).collect();
        for d in 1..=max_dim.min(vs.len().saturating_sub(1)) {
            for_each_combination(&vs, d + 1, &mut |combo| {
                *counts[d - 1].entry(combo.to_vec()).or_default() += 1;
            });
        }
    }
    let simplices = counts
        .into_iter()
        .map(|m| {
            m.into_iter()
                .map(|(vertices, weight)| Simplex { vertices, weight })
                .collect()
        })
        .collect();
    Ok(MapperGraph { vertices, simplices })
}

fn for_each_combination(items: &[usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    fn go(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            visit(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            go(items, k, i + 1, cur, visit);
            cur.pop();
        }
    }
    go(items, k, 0, &mut Vec::with_capacity(k), visit);
}

/// Everything needed to turn a point cloud into a Mapper function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperParams {
    pub filter: Filter,
    /// Intervals per filter axis; one value is used for every axis.
    pub resolution: Vec<usize>,
    pub gain: f64,
    /// Per-axis filter range; the sample's min/max when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Vec<[f64; 2]>>,
    pub clusterer: ClustererConfig,
}

impl MapperParams {
    pub fn cover_spec(&self, filter: &FilterValues) -> Result<CoverSpec> {
        let d = filter.dim();
        let resolution = match self.resolution.len() {
            1 => vec![self.resolution[0]; d],
            k if k == d => self.resolution.clone(),
            k => return Err(Error::Dimension { expected: d, found: k }),
        };
        if d == 1 {
            interval_cover(
                filter,
                resolution[0],
                self.gain,
                self.range.as_ref().and_then(|r| r.first().copied()),
            )
        } else {
            grid_cover(filter, &resolution, self.gain, self.range.as_deref())
        }
    }

    pub fn cover(&self, cloud: &PointCloud) -> Result<Arc<Cover>> {
        let filter = self.filter.apply(cloud)?;
        Ok(Arc::new(assign_bins(&self.cover_spec(&filter)?, &filter)?))
    }

    pub fn build(&self, cloud: &PointCloud) -> Result<MapperFunction> {
        build_mapper(cloud, &self.cover(cloud)?, &self.clusterer)
    }
}
