//! Decision boundaries of planar Mapper functions, their tubes, and an
//! empirical check of the sampling bound on instability.
//!
//! Boundaries are located on a raster: a bin's window is cut into square-ish
//! cells, each cell centre is labelled, and the midpoints of faces between
//! differently labelled cells form the clustering boundary. The edges of the
//! bin's region that lie inside the window are added as well. Distances to a
//! boundary are distances to those points, so they carry an error of at most
//! half a cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{Label, NearestSample};
use crate::cover::{Filter, FilterValues};
use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::instability::{mean_std, paired_instability};
use crate::mapper::{MapperFunction, MapperParams};
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if (0..2).any(|a| !(lo[a].is_finite() && hi[a].is_finite() && lo[a] <= hi[a])) {
            return Err(Error::Range(format!("invalid rectangle {lo:?} .. {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let lo = [self.lo[0].max(other.lo[0]), self.lo[1].max(other.lo[1])];
        let hi = [self.hi[0].min(other.hi[0]), self.hi[1].min(other.hi[1])];
        (lo[0] <= hi[0] && lo[1] <= hi[1]).then_some(Rect { lo, hi })
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }
}

/// Labelling of the plane inside one bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Labeler {
    Constant {
        label: Label,
    },
    /// Label 0 where `normal · x < offset`, 1 elsewhere.
    HalfPlane {
        normal: [f64; 2],
        offset: f64,
    },
    /// Label of the nearest site; ties go to the earlier site.
    Voronoi {
        sites: Vec<[f64; 2]>,
        labels: Vec<Label>,
    },
}

impl Labeler {
    pub fn vertical_bisector(x: f64) -> Self {
        Labeler::HalfPlane {
            normal: [1.0, 0.0],
            offset: x,
        }
    }

    pub fn label_all(&self, pts: &[[f64; 2]]) -> Vec<Label> {
        match self {
            Labeler::Constant { label } => vec![*label; pts.len()],
            Labeler::HalfPlane { normal, offset } => pts
                .iter()
                .map(|p| Label::from(normal[0] * p[0] + normal[1] * p[1] >= *offset))
                .collect(),
            Labeler::Voronoi { sites, labels } => {
                if sites.is_empty() {
                    return vec![crate::clustering::UNASSIGNED; pts.len()];
                }
                let cloud = PointCloud::from_flat(2, sites.iter().flatten().copied().collect()).expect("planar sites");
                let order: Vec<usize> = (0..sites.len()).collect();
                let index = NearestSample::new(&cloud, &order);
                pts.iter().map(|p| labels[index.nearest(p).expect("sites")]).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinField {
    /// Part of the window covered by the bin.
    pub region: Rect,
    pub labeler: Labeler,
}

/// Per-bin labellings of a planar Mapper function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryField {
    pub window: Rect,
    pub bins: Vec<BinField>,
}

/// Region of each cover box inside `window`, for a filter made of coordinate
/// projections of the plane. Boxes missing the window are rejected.
pub fn bin_regions(filter: &Filter, boxes: &[crate::cover::BinBox], window: &Rect) -> Result<Vec<Rect>> {
    let axes = filter.axes();
    if axes.iter().any(|&a| a > 1) {
        return Err(Error::Dimension {
            expected: 2,
            found: axes.iter().max().unwrap() + 1,
        });
    }
    boxes
        .iter()
        .map(|b| {
            let mut r = *window;
            for (j, &a) in axes.iter().enumerate() {
                r.lo[a] = r.lo[a].max(b.lo[j]);
                r.hi[a] = r.hi[a].min(b.hi[j]);
            }
            if r.lo[0] > r.hi[0] || r.lo[1] > r.hi[1] {
                return Err(Error::Range("a bin lies outside the window".into()));
            }
            Ok(r)
        })
        .collect()
}

impl BoundaryField {
    /// The same labeler in every bin of `regions`.
    pub fn uniform(window: Rect, regions: &[Rect], labeler: Labeler) -> Self {
        Self {
            window,
            bins: regions
                .iter()
                .map(|&region| BinField {
                    region,
                    labeler: labeler.clone(),
                })
                .collect(),
        }
    }

    /// Voronoi extension of each bin clustering of `f`.
    pub fn from_mapper(cloud: &PointCloud, f: &MapperFunction, filter: &Filter, window: Rect) -> Result<Self> {
        if cloud.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                found: cloud.dim(),
            });
        }
        let regions = bin_regions(filter, &f.cover.spec.boxes, &window)?;
        if regions.len() != f.bins.len() {
            return Err(Error::CoverMismatch("the cover has no boxes for its bins".into()));
        }
        let bins = f
            .bins
            .iter()
            .zip(regions)
            .map(|(b, region)| BinField {
                region,
                labeler: Labeler::Voronoi {
                    sites: b
                        .members
                        .iter()
                        .map(|x| [cloud.point(x)[0], cloud.point(x)[1]])
                        .collect(),
                    labels: b.labels.clone(),
                },
            })
            .collect();
        Ok(Self { window, bins })
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }
}

/// Nearest-point queries against a boundary point set.
struct BoundaryPoints {
    cloud: PointCloud,
    order: Vec<usize>,
}

impl BoundaryPoints {
    fn new(points: Vec<[f64; 2]>) -> Self {
        let n = points.len();
        let cloud = PointCloud::from_flat(2, points.into_iter().flatten().collect()).expect("planar points");
        Self {
            cloud,
            order: (0..n).collect(),
        }
    }

    fn distances(&self, queries: &[[f64; 2]]) -> Vec<f64> {
        if self.order.is_empty() {
            return vec![f64::INFINITY; queries.len()];
        }
        let index = NearestSample::new(&self.cloud, &self.order);
        queries
            .iter()
            .map(|q| {
                let p = index.nearest(q).expect("points");
                self.cloud.dist_to(p, q)
            })
            .collect()
    }
}

/// Raster of one bin: cell centres inside the region and their labels.
struct BinRaster {
    cells: Vec<[f64; 2]>,
    labels: Vec<Label>,
    boundary: BoundaryPoints,
}

fn raster_bin(window: &Rect, bin: &BinField, resolution: usize) -> BinRaster {
    let h = [
        (window.hi[0] - window.lo[0]) / resolution as f64,
        (window.hi[1] - window.lo[1]) / resolution as f64,
    ];
    let centre = |i: usize, j: usize| {
        [
            window.lo[0] + (i as f64 + 0.5) * h[0],
            window.lo[1] + (j as f64 + 0.5) * h[1],
        ]
    };
    let mut grid = vec![usize::MAX; resolution * resolution];
    let mut cells = Vec::new();
    for j in 0..resolution {
        for i in 0..resolution {
            let c = centre(i, j);
            if bin.region.contains(c) {
                grid[j * resolution + i] = cells.len();
                cells.push(c);
            }
        }
    }
    let labels = bin.labeler.label_all(&cells);
    let mut boundary = Vec::new();
    for j in 0..resolution {
        for i in 0..resolution {
            let a = grid[j * resolution + i];
            if a == usize::MAX {
                continue;
            }
            if i + 1 < resolution {
                let b = grid[j * resolution + i + 1];
                if b != usize::MAX && labels[a] != labels[b] {
                    boundary.push([window.lo[0] + (i + 1) as f64 * h[0], cells[a][1]]);
                }
            }
            if j + 1 < resolution {
                let b = grid[(j + 1) * resolution + i];
                if b != usize::MAX && labels[a] != labels[b] {
                    boundary.push([cells[a][0], window.lo[1] + (j + 1) as f64 * h[1]]);
                }
            }
        }
    }
    // region edges that are not part of the window edge
    let r = &bin.region;
    for axis in 0..2 {
        let other = 1 - axis;
        let steps = ((r.hi[other] - r.lo[other]) / h[other]).ceil().max(1.0) as usize;
        for (edge, on_window) in [
            (r.lo[axis], r.lo[axis] <= window.lo[axis]),
            (r.hi[axis], r.hi[axis] >= window.hi[axis]),
        ] {
            if on_window {
                continue;
            }
            for s in 0..=steps {
                let t = r.lo[other] + (r.hi[other] - r.lo[other]) * s as f64 / steps as f64;
                let mut p = [0.0; 2];
                p[axis] = edge;
                p[other] = t;
                boundary.push(p);
            }
        }
    }
    BinRaster {
        cells,
        labels,
        boundary: BoundaryPoints::new(boundary),
    }
}

/// Probability law of planar samples, restricted to a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Density {
    Uniform {
        window: Rect,
    },
    /// Isotropic Gaussian mixture conditioned on the window.
    Mixture {
        window: Rect,
        components: Vec<Component>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: [f64; 2],
    pub sigma: f64,
}

const MAX_REJECTIONS: usize = 1_000_000;

impl Density {
    pub fn window(&self) -> Rect {
        match self {
            Density::Uniform { window } | Density::Mixture { window, .. } => *window,
        }
    }

    /// One draw: a uniform point, or a component by cumulative weight, then
    /// two normals, repeated until the point lies in the window.
    pub fn draw(&self, s: &mut Stream) -> Result<[f64; 2]> {
        match self {
            Density::Uniform { window } => Ok([
                s.uniform_in(window.lo[0], window.hi[0]),
                s.uniform_in(window.lo[1], window.hi[1]),
            ]),
            Density::Mixture { window, components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.is_empty() || !(total > 0.0) {
                    return Err(Error::Parameter("mixture needs positive weights".into()));
                }
                for _ in 0..MAX_REJECTIONS {
                    let mut u = s.uniform() * total;
                    let mut comp = &components[components.len() - 1];
                    for c in components {
                        if u < c.weight {
                            comp = c;
                            break;
                        }
                        u -= c.weight;
                    }
                    let p = [
                        comp.mean[0] + comp.sigma * s.normal(),
                        comp.mean[1] + comp.sigma * s.normal(),
                    ];
                    if window.contains(p) {
                        return Ok(p);
                    }
                }
                Err(Error::Parameter("the window holds almost no mass".into()))
            }
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        let mut s = Stream::new(seed);
        let mut coords = Vec::with_capacity(2 * n);
        for _ in 0..n {
            coords.extend(self.draw(&mut s)?);
        }
        PointCloud::from_flat(2, coords)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub gamma: f64,
    /// Fraction of draws within `gamma` of the boundary of some bin holding them.
    pub mass: f64,
    pub stderr: f64,
    pub mc_points: usize,
    /// Same fraction for each bin's tube alone.
    pub per_bin: Vec<f64>,
    pub per_bin_stderr: Vec<f64>,
}

impl TubeEstimate {
    /// `max_i P(T_i) <= P(T) <= Σ_i P(T_i)` within `z` combined standard errors.
    pub fn sandwich_holds(&self, z: f64) -> bool {
        let max = self.per_bin.iter().copied().fold(0.0, f64::max);
        let sum: f64 = self.per_bin.iter().sum();
        let se_sum = self.per_bin_stderr.iter().map(|s| s * s).sum::<f64>().sqrt();
        let se_max = self.per_bin_stderr.iter().copied().fold(0.0, f64::max);
        max <= self.mass + z * (self.stderr.powi(2) + se_max.powi(2)).sqrt()
            && self.mass <= sum + z * (self.stderr.powi(2) + se_sum.powi(2)).sqrt()
    }
}

fn binomial_stderr(p: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Monte-Carlo mass of the `gamma`-tube of `field` under `density`.
pub fn tube_mass(
    field: &BoundaryField,
    gamma: f64,
    density: &Density,
    mc_points: usize,
    raster: usize,
    seed: u64,
) -> Result<TubeEstimate> {
    if !(gamma >= 0.0) {
        return Err(Error::Parameter(format!("gamma must be non-negative, got {gamma}")));
    }
    if mc_points == 0 || raster == 0 {
        return Err(Error::Parameter("mc_points and raster must be positive".into()));
    }
    let cloud = density.sample(mc_points, seed)?;
    let pts: Vec<[f64; 2]> = cloud.points().map(|p| [p[0], p[1]]).collect();
    let per_bin_hits: Vec<Vec<bool>> = field
        .bins
        .par_iter()
        .map(|bin| {
            let r = raster_bin(&field.window, bin, raster);
            let d = r.boundary.distances(&pts);
            pts.iter()
                .zip(d)
                .map(|(p, d)| bin.region.contains(*p) && d <= gamma)
                .collect()
        })
        .collect();
    let n = pts.len();
    let frac = |c: usize| c as f64 / n as f64;
    let union = (0..n).filter(|&k| per_bin_hits.iter().any(|h| h[k])).count();
    let per_bin: Vec<f64> = per_bin_hits
        .iter()
        .map(|h| frac(h.iter().filter(|&&b| b).count()))
        .collect();
    Ok(TubeEstimate {
        gamma,
        mass: frac(union),
        stderr: binomial_stderr(frac(union), n),
        mc_points: n,
        per_bin_stderr: per_bin.iter().map(|&p| binomial_stderr(p, n)).collect(),
        per_bin,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistance {
    pub value: f64,
    pub per_bin: Vec<f64>,
    /// Some bin had no raster cell outside both tubes at its value.
    pub indeterminate: bool,
}

/// Every label on one side meets exactly one label on the other side.
fn is_bijection(pairs: impl Iterator<Item = (Label, Label)>) -> bool {
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    for (a, b) in pairs {
        if *fwd.entry(a).or_insert(b) != b || *back.entry(b).or_insert(a) != a {
            return false;
        }
    }
    true
}

/// Raster estimate of the boundary distance between two fields on the same
/// bins: per bin, the smallest `gamma` such that the labellings agree up to
/// relabelling outside the `gamma`-tube of either one; the maximum over bins.
pub fn boundary_distance_2d(f: &BoundaryField, g: &BoundaryField, raster: usize) -> Result<BoundaryDistance> {
    if f.window != g.window
        || f.bins.len() != g.bins.len()
        || f.bins.iter().zip(&g.bins).any(|(a, b)| a.region != b.region)
    {
        return Err(Error::CoverMismatch("fields are defined on different bins".into()));
    }
    if raster == 0 {
        return Err(Error::Parameter("raster must be positive".into()));
    }
    let per_bin: Vec<(f64, bool)> = f
        .bins
        .par_iter()
        .zip(&g.bins)
        .map(|(bf, bg)| {
            let rf = raster_bin(&f.window, bf, raster);
            let rg = raster_bin(&g.window, bg, raster);
            let df = rf.boundary.distances(&rf.cells);
            let dg = rg.boundary.distances(&rf.cells);
            let holds = |gamma: f64| {
                let outside = |d: &Vec<f64>| {
                    (0..rf.cells.len())
                        .filter(|&c| d[c] > gamma)
                        .map(|c| (rf.labels[c], rg.labels[c]))
                        .collect::<Vec<_>>()
                };
                is_bijection(outside(&dg).into_iter()) && is_bijection(outside(&df).into_iter())
            };
            let mut candidates: Vec<f64> = std::iter::once(0.0)
                .chain(df.iter().chain(&dg).copied().filter(|d| d.is_finite()))
                .collect();
            candidates.sort_by(f64::total_cmp);
            candidates.dedup();
            // the predicate is monotone in gamma
            let (mut lo, mut hi) = (0, candidates.len() - 1);
            if !holds(candidates[hi]) {
                return (f64::INFINITY, true);
            }
            while lo < hi {
                let mid = (lo + hi) / 2;
                if holds(candidates[mid]) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let gamma = candidates[lo];
            let resolved = (0..rf.cells.len()).any(|c| df[c] > gamma || dg[c] > gamma);
            (gamma, !resolved && !rf.cells.is_empty() && gamma > 0.0)
        })
        .collect();
    Ok(BoundaryDistance {
        value: per_bin.iter().map(|b| b.0).fold(0.0, f64::max),
        indeterminate: per_bin.iter().any(|b| b.1),
        per_bin: per_bin.into_iter().map(|b| b.0).collect(),
    })
}

/// Synthetic planar setting with a known population-level Mapper function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub density: Density,
    /// Sample size of one Mapper function.
    pub n: usize,
    /// Must carry an explicit range so the cover does not depend on the sample.
    pub params: MapperParams,
    /// Labelling of every bin by the population optimum.
    pub truth: Labeler,
    /// Length scale used to express `gamma`.
    pub separation: f64,
}

fn two_gaussians(window: Rect, dx: f64, sigma: f64) -> Density {
    Density::Mixture {
        window,
        components: vec![
            Component {
                weight: 0.5,
                mean: [-dx, 0.0],
                sigma,
            },
            Component {
                weight: 0.5,
                mean: [dx, 0.0],
                sigma,
            },
        ],
    }
}

fn kmeans_params(filter: Filter, t: usize, gain: f64, range: [f64; 2]) -> MapperParams {
    MapperParams {
        filter,
        resolution: vec![t],
        gain,
        range: Some(vec![range]),
        clusterer: crate::clustering::ClustererConfig::new(
            crate::clustering::ClusterMethod::Kmeans {
                k: 2,
                restarts: crate::clustering::ClusterMethod::DEFAULT_RESTARTS,
                max_iter: crate::clustering::ClusterMethod::DEFAULT_MAX_ITER,
            },
            0,
        ),
    }
}

impl Scenario {
    /// Two unit Gaussians six apart, one bin.
    pub fn separated() -> Self {
        let window = Rect {
            lo: [-7.0, -4.0],
            hi: [7.0, 4.0],
        };
        Self {
            name: "separated".into(),
            density: two_gaussians(window, 3.0, 1.0),
            n: 400,
            params: kmeans_params(Filter::Axis(0), 1, 0.0, [-7.0, 7.0]),
            truth: Labeler::vertical_bisector(0.0),
            separation: 6.0,
        }
    }

    /// The same Gaussians cut into two horizontal strips with 15% overlap.
    pub fn strips() -> Self {
        let window = Rect {
            lo: [-7.0, -4.0],
            hi: [7.0, 4.0],
        };
        Self {
            name: "strips".into(),
            density: two_gaussians(window, 3.0, 1.0),
            n: 400,
            params: kmeans_params(Filter::Axis(1), 2, 0.15, [-4.0, 4.0]),
            truth: Labeler::vertical_bisector(0.0),
            separation: 6.0,
        }
    }

    /// Two unit Gaussians one apart: almost round, so the split direction is
    /// poorly determined.
    pub fn overlapping() -> Self {
        let window = Rect {
            lo: [-4.5, -4.0],
            hi: [4.5, 4.0],
        };
        Self {
            name: "overlapping".into(),
            density: two_gaussians(window, 0.5, 1.0),
            n: 400,
            params: kmeans_params(Filter::Axis(0), 1, 0.0, [-4.5, 4.5]),
            truth: Labeler::vertical_bisector(0.0),
            separation: 1.0,
        }
    }

    pub fn shipped() -> Vec<Self> {
        vec![Self::separated(), Self::strips(), Self::overlapping()]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::shipped()
            .into_iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Parameter(format!("unknown scenario `{name}`")))
    }

    pub fn regions(&self) -> Result<Vec<Rect>> {
        if self.params.range.is_none() {
            return Err(Error::Parameter("the scenario cover needs an explicit range".into()));
        }
        let empty = FilterValues::new(self.params.filter.dim(), Vec::new())?;
        let spec = self.params.cover_spec(&empty)?;
        bin_regions(&self.params.filter, &spec.boxes, &self.density.window())
    }

    pub fn truth_field(&self) -> Result<BoundaryField> {
        Ok(BoundaryField::uniform(
            self.density.window(),
            &self.regions()?,
            self.truth.clone(),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scenario: String,
    pub gamma: f64,
    pub n: usize,
    pub trials: usize,
    pub raster: usize,
    pub tube: TubeEstimate,
    /// Tube mass on a raster twice as fine.
    pub tube_mass_refined: f64,
    /// Fraction of trials with `D_∂(f^n, f) > gamma`.
    pub p_boundary: f64,
    pub p_boundary_stderr: f64,
    /// Fraction of trials where some bin received no points.
    pub p_empty_bin: f64,
    pub p_empty_bin_stderr: f64,
    pub bound: f64,
    pub bound_stderr: f64,
    pub boundary_distances: Vec<f64>,
    pub indeterminate_trials: usize,
    /// Mean distance between Mapper functions of two independent samples.
    pub instability: f64,
    pub instability_stderr: f64,
    pub combined_stderr: f64,
    /// `instability <= bound + 3 · combined_stderr`.
    pub holds: bool,
    pub sandwich_holds: bool,
}

/// Estimates `2 (P(T_γ(f)) + P(D_∂(f^n, f) > γ) + P(some bin empty))` and
/// the instability at sample size `n` on fresh samples.
pub fn sampling_bound(
    scenario: &Scenario,
    gamma: f64,
    trials: usize,
    mc_points: usize,
    raster: usize,
    seed: u64,
) -> Result<BoundReport> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let truth = scenario.truth_field()?;
    let window = scenario.density.window();
    let tube = tube_mass(
        &truth,
        gamma,
        &scenario.density,
        mc_points,
        raster,
        rng::derive(seed, "tube", 0),
    )?;
    let refined = tube_mass(
        &truth,
        gamma,
        &scenario.density,
        mc_points,
        2 * raster,
        rng::derive(seed, "tube", 0),
    )?;

    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, bool, bool, f64)> {
            let fit = scenario
                .density
                .sample(scenario.n, rng::derive(seed, "fit-sample", t as u64))?;
            let cover = scenario.params.cover(&fit)?;
            let empty = cover.bins.iter().any(|b| b.is_empty());
            let f = crate::mapper::build_mapper(&fit, &cover, &scenario.params.clusterer)?;
            let field = BoundaryField::from_mapper(&fit, &f, &scenario.params.filter, window)?;
            let d = boundary_distance_2d(&field, &truth, raster)?;
            let pair = scenario
                .density
                .sample(2 * scenario.n, rng::derive(seed, "pair-sample", t as u64))?;
            let inst = paired_instability(&pair, &scenario.params, 1, rng::derive(seed, "pair-split", t as u64))?;
            Ok((d.value, d.indeterminate, empty, inst.value))
        })
        .collect::<Result<Vec<_>>>()?;

    let p_boundary = per_trial.iter().filter(|t| t.0 > gamma).count() as f64 / trials as f64;
    let p_empty = per_trial.iter().filter(|t| t.2).count() as f64 / trials as f64;
    let inst: Vec<f64> = per_trial.iter().map(|t| t.3).collect();
    let (instability, sd) = mean_std(&inst);
    let instability_stderr = sd / (trials as f64).sqrt();
    let se_b = binomial_stderr(p_boundary, trials);
    let se_e = binomial_stderr(p_empty, trials);
    let bound = 2.0 * (tube.mass + p_boundary + p_empty);
    let bound_stderr = 2.0 * (tube.stderr.powi(2) + se_b.powi(2) + se_e.powi(2)).sqrt();
    let combined_stderr = (bound_stderr.powi(2) + instability_stderr.powi(2)).sqrt();
    Ok(BoundReport {
        scenario: scenario.name.clone(),
        gamma,
        n: scenario.n,
        trials,
        raster,
        tube_mass_refined: refined.mass,
        sandwich_holds: tube.sandwich_holds(3.0),
        tube,
        p_boundary,
        p_boundary_stderr: se_b,
        p_empty_bin: p_empty,
        p_empty_bin_stderr: se_e,
        bound,
        bound_stderr,
        boundary_distances: per_trial.iter().map(|t| t.0).collect(),
        indeterminate_trials: per_trial.iter().filter(|t| t.1).count(),
        instability,
        instability_stderr,
        combined_stderr,
        holds: instability <= bound + 3.0 * combined_stderr,
    })
}
