//! Covers of a point cloud: interval covers of a scalar filter, grid covers
//! of a vector filter, and explicit bins.
//!
//! A cover is generated once from the filter values of the full dataset and
//! then reused for every subsample, so bins stay comparable across runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{IndexSubset, PointCloud};
use crate::error::{Error, Result};

/// Filter (lens) values, one `dim`-vector per point.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterValues {
    dim: usize,
    values: Vec<f64>,
}

impl FilterValues {
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("filter dimension must be at least 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::Format("filter values do not split into rows".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Range(format!("non-finite filter value {v}")));
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn axis_range(&self, axis: usize) -> Option<[f64; 2]> {
        let mut it = (0..self.len()).map(|i| self.get(i)[axis]);
        let first = it.next()?;
        Some(it.fold([first, first], |[lo, hi], v| [lo.min(v), hi.max(v)]))
    }
}

/// Filter functions shipped with the crate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    /// Projection onto one coordinate.
    Axis(usize),
    /// Projection onto several coordinates; `Axes(vec![0, 1])` is the
    /// identity on the plane.
    Axes(Vec<usize>),
}

impl Filter {
    pub fn axes(&self) -> Vec<usize> {
        match self {
            Filter::Axis(k) => vec![*k],
            Filter::Axes(ks) => ks.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Filter::Axis(_) => 1,
            Filter::Axes(ks) => ks.len(),
        }
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<FilterValues> {
        let axes = self.axes();
        if axes.is_empty() {
            return Err(Error::Parameter("filter needs at least one axis".into()));
        }
        if let Some(&bad) = axes.iter().find(|&&k| k >= cloud.dim()) {
            if !cloud.is_empty() {
                return Err(Error::Dimension {
                    expected: bad + 1,
                    found: cloud.dim(),
                });
            }
        }
        let mut values = Vec::with_capacity(cloud.len() * axes.len());
        for i in 0..cloud.len() {
            let p = cloud.point(i);
            values.extend(axes.iter().map(|&k| p[k]));
        }
        FilterValues::new(axes.len(), values)
    }
}

impl FromStr for Filter {
    type Err = Error;

    /// `axis:<k>`, `axes:<k1>,<k2>,...` or `identity` (the plane).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unrecognised filter `{s}`"));
        if s == "identity" {
            return Ok(Filter::Axes(vec![0, 1]));
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "axis" => Ok(Filter::Axis(arg.trim().parse().map_err(|_| bad())?)),
            "axes" => arg
                .split(',')
                .map(|a| a.trim().parse().map_err(|_| bad()))
                .collect::<Result<Vec<usize>>>()
                .map(Filter::Axes),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::Axis(k) => write!(f, "axis:{k}"),
            Filter::Axes(ks) => {
                let parts: Vec<String> = ks.iter().map(usize::to_string).collect();
                write!(f, "axes:{}", parts.join(","))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverKind {
    Intervals,
    Grid,
    Explicit,
}

/// Closed axis-aligned box in filter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BinBox {
    pub fn contains(&self, v: &[f64]) -> bool {
        v.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub kind: CoverKind,
    /// Intervals per axis.
    pub resolution: Vec<usize>,
    pub gain: f64,
    /// `[lo, hi]` per axis.
    pub ranges: Vec<[f64; 2]>,
    /// Bins in lexicographic order of their lower corner.
    pub boxes: Vec<BinBox>,
}

impl CoverSpec {
    pub fn dim(&self) -> usize {
        self.boxes.first().map_or(self.ranges.len(), BinBox::dim)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn explicit(boxes: Vec<BinBox>) -> Result<Self> {
        let dim = boxes.first().map_or(0, BinBox::dim);
        if boxes.iter().any(|b| b.dim() != dim || b.hi.len() != dim) {
            return Err(Error::Parameter("explicit boxes must share one dimension".into()));
        }
        Ok(Self {
            kind: CoverKind::Explicit,
            resolution: Vec::new(),
            gain: 0.0,
            ranges: Vec::new(),
            boxes,
        })
    }
}

fn check_params(t: usize, gain: f64) -> Result<()> {
    if t == 0 {
        return Err(Error::Parameter("resolution must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&gain) {
        return Err(Error::Parameter(format!("gain {gain} outside [0, 1)")));
    }
    Ok(())
}

/// `t` closed intervals of length `L = (hi - lo) / (t - (t - 1) g)`, each
/// starting `(1 - g) L` after the previous one.
pub fn axis_intervals(range: [f64; 2], t: usize, gain: f64) -> Result<Vec<[f64; 2]>> {
    check_params(t, gain)?;
    let [lo, hi] = range;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Range(format!("invalid range [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(vec![[lo, hi]]);
    }
    let len = (hi - lo) / (t as f64 - (t as f64 - 1.0) * gain);
    let step = (1.0 - gain) * len;
    let mut out: Vec<[f64; 2]> = (0..t)
        .map(|i| {
            let a = lo + i as f64 * step;
            [a, a + len]
        })
        .collect();
    out[t - 1][1] = hi;
    // rounding must never open a gap between neighbours
    for i in 0..t - 1 {
        if out[i][1] < out[i + 1][0] {
            out[i][1] = out[i + 1][0];
        }
    }
    Ok(out)
}

fn resolve_range(filter: &FilterValues, axis: usize, range_override: Option<[f64; 2]>) -> Result<[f64; 2]> {
    match range_override {
        Some(r) => Ok(r),
        None => filter
            .axis_range(axis)
            .ok_or_else(|| Error::Range("empty filter and no range override".into())),
    }
}

/// Interval cover of a scalar filter. Without an override the range is the
/// filter's min/max.
pub fn interval_cover(
    filter: &FilterValues,
    t: usize,
    gain: f64,
    range_override: Option<[f64; 2]>,
) -> Result<CoverSpec> {
    check_params(t, gain)?;
    if filter.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: filter.dim(),
        });
    }
    let range = resolve_range(filter, 0, range_override)?;
    let boxes = axis_intervals(range, t, gain)?
        .into_iter()
        .map(|[lo, hi]| BinBox {
            lo: vec![lo],
            hi: vec![hi],
        })
        .collect();
    Ok(CoverSpec {
        kind: CoverKind::Intervals,
        resolution: vec![t],
        gain,
        ranges: vec![range],
        boxes,
    })
}

/// Product of per-axis interval covers. Boxes are ordered with axis 0 as the
/// slowest-varying coordinate.
pub fn grid_cover(
    filter: &FilterValues,
    t_per_axis: &[usize],
    gain: f64,
    range_override: Option<&[[f64; 2]]>,
) -> Result<CoverSpec> {
    let d = filter.dim();
    if t_per_axis.len() != d {
        return Err(Error::Dimension {
            expected: d,
            found: t_per_axis.len(),
        });
    }
    if let Some(r) = range_override {
        if r.len() != d {
            return Err(Error::Dimension {
                expected: d,
                found: r.len(),
            });
        }
    }
    let mut ranges = Vec::with_capacity(d);
    let mut per_axis = Vec::with_capacity(d);
    for axis in 0..d {
        let range = resolve_range(filter, axis, range_override.map(|r| r[axis]))?;
        per_axis.push(axis_intervals(range, t_per_axis[axis], gain)?);
        ranges.push(range);
    }
    let mut boxes = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        boxes.push(BinBox {
            lo: (0..d).map(|a| per_axis[a][idx[a]][0]).collect(),
            hi: (0..d).map(|a| per_axis[a][idx[a]][1]).collect(),
        });
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(CoverSpec {
                    kind: CoverKind::Grid,
                    resolution: t_per_axis.to_vec(),
                    gain,
                    ranges,
                    boxes,
                });
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < per_axis[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// The bins `U_i ∩ X` of a cover, indexing into the full cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub spec: CoverSpec,
    pub bins: Vec<IndexSubset>,
    /// Points that fall in no bin.
    pub out_of_range: Vec<usize>,
    pub n_points: usize,
}

impl Cover {
    /// Cover with hand-picked bins.
    pub fn from_bins(n_points: usize, bins: Vec<IndexSubset>) -> Result<Self> {
        for b in &bins {
            b.check_within(n_points)?;
        }
        let mut covered = vec![false; n_points];
        for b in &bins {
            for i in b.iter() {
                covered[i] = true;
            }
        }
        Ok(Self {
            spec: CoverSpec {
                kind: CoverKind::Explicit,
                resolution: Vec::new(),
                gain: 0.0,
                ranges: Vec::new(),
                boxes: Vec::new(),
            },
            bins,
            out_of_range: (0..n_points).filter(|&i| !covered[i]).collect(),
            n_points,
        })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Bins containing point `i`.
    pub fn bins_of(&self, i: usize) -> Vec<usize> {
        (0..self.bins.len()).filter(|&b| self.bins[b].contains(i)).collect()
    }
}

/// Point `j` belongs to bin `i` iff its filter value lies in the closed box `i`.
pub fn assign_bins(spec: &CoverSpec, filter: &FilterValues) -> Result<Cover> {
    if !spec.boxes.is_empty() && spec.dim() != filter.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            found: filter.dim(),
        });
    }
    let mut bins = vec![Vec::new(); spec.boxes.len()];
    let mut out_of_range = Vec::new();
    for j in 0..filter.len() {
        let v = filter.get(j);
        let mut hit = false;
        for (b, bx) in spec.boxes.iter().enumerate() {
            if bx.contains(v) {
                bins[b].push(j);
                hit = true;
            }
        }
        if !hit {
            out_of_range.push(j);
        }
    }
    Ok(Cover {
        spec: spec.clone(),
        bins: bins
            .into_iter()
            .map(|b| IndexSubset::new(b).expect("pushed in increasing order"))
            .collect(),
        out_of_range,
        n_points: filter.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn one_interval_covers_range() {
        let f = FilterValues::scalar(vec![0.0, 1.0]).unwrap();
        for g in [0.0, 0.3, 0.9] {
            let s = interval_cover(&f, 1, g, Some([0.0, 1.0])).unwrap();
            assert_eq!(s.boxes.len(), 1);
            assert_eq!((s.boxes[0].lo[0], s.boxes[0].hi[0]), (0.0, 1.0));
        }
    }

    #[test]
    fn halves_without_overlap() {
        let f = FilterValues::scalar(vec![]).unwrap();
        let s = interval_cover(&f, 2, 0.0, Some([0.0, 1.0])).unwrap();
        let iv: Vec<_> = s.boxes.iter().map(|b| (b.lo[0], b.hi[0])).collect();
        assert_eq!(iv, vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn half_gain_two_intervals() {
        // L = 3 / (2 - 0.5) = 2, second interval starts at (1 - 0.5) * 2 = 1
        let f = FilterValues::scalar(vec![]).unwrap();
        let s = interval_cover(&f, 2, 0.5, Some([0.0, 3.0])).unwrap();
        let (a, b) = (&s.boxes[0], &s.boxes[1]);
        assert!(approx(a.lo[0], 0.0) && approx(a.hi[0], 2.0));
        assert!(approx(b.lo[0], 1.0) && approx(b.hi[0], 3.0));
        let overlap = a.hi[0] - b.lo[0];
        assert!(approx(overlap, 0.5 * 2.0));
    }

    #[test]
    fn last_endpoint_is_hi() {
        let f = FilterValues::scalar(vec![-1.3, 2.7]).unwrap();
        for t in 1..30 {
            for g in [0.0, 0.1, 0.35, 0.5, 0.9] {
                let s = interval_cover(&f, t, g, None).unwrap();
                assert_eq!(s.boxes.last().unwrap().hi[0], 2.7);
                assert_eq!(s.boxes[0].lo[0], -1.3);
            }
        }
    }

    #[test]
    fn parameter_errors() {
        let f = FilterValues::scalar(vec![0.0, 1.0]).unwrap();
        assert!(matches!(interval_cover(&f, 0, 0.1, None), Err(Error::Parameter(_))));
        assert!(matches!(interval_cover(&f, 2, 1.0, None), Err(Error::Parameter(_))));
        assert!(matches!(interval_cover(&f, 2, -0.1, None), Err(Error::Parameter(_))));
        let empty = FilterValues::scalar(vec![]).unwrap();
        assert!(matches!(interval_cover(&empty, 2, 0.1, None), Err(Error::Range(_))));
    }

    #[test]
    fn degenerate_range_gives_one_interval() {
        let f = FilterValues::scalar(vec![2.0, 2.0]).unwrap();
        let s = interval_cover(&f, 5, 0.2, None).unwrap();
        assert_eq!(s.boxes.len(), 1);
        let c = assign_bins(&s, &f).unwrap();
        assert_eq!(c.bins[0].as_slice(), &[0, 1]);
    }

    #[test]
    fn grid_counts_and_order() {
        let f = FilterValues::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let one = grid_cover(&f, &[1, 1], 0.3, None).unwrap();
        assert_eq!(
            one.boxes,
            vec![BinBox {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0]
            }]
        );
        let quad = grid_cover(&f, &[2, 2], 0.0, None).unwrap();
        let los: Vec<_> = quad.boxes.iter().map(|b| b.lo.clone()).collect();
        assert_eq!(
            los,
            vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.5, 0.0], vec![0.5, 0.5]]
        );
        assert_eq!(grid_cover(&f, &[6, 6], 0.4, None).unwrap().boxes.len(), 36);
    }

    #[test]
    fn grid_quadrants_are_disjoint_off_boundaries() {
        let f = FilterValues::new(2, vec![0.1, 0.1, 0.9, 0.1, 0.1, 0.9, 0.9, 0.9, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let s = grid_cover(&f, &[2, 2], 0.0, None).unwrap();
        let c = assign_bins(&s, &f).unwrap();
        for i in 0..4 {
            assert_eq!(c.bins_of(i).len(), 1);
        }
    }

    #[test]
    fn boundary_point_in_both_bins() {
        let spec = interval_cover(&FilterValues::scalar(vec![]).unwrap(), 2, 0.0, Some([0.0, 1.0])).unwrap();
        let f = FilterValues::scalar(vec![0.25, 0.5, 0.9]).unwrap();
        let c = assign_bins(&spec, &f).unwrap();
        assert_eq!(c.bins[0].as_slice(), &[0, 1]);
        assert_eq!(c.bins[1].as_slice(), &[1, 2]);
        assert!(c.out_of_range.is_empty());
    }

    #[test]
    fn out_of_range_reported() {
        let spec = interval_cover(&FilterValues::scalar(vec![]).unwrap(), 2, 0.0, Some([0.0, 1.0])).unwrap();
        let f = FilterValues::scalar(vec![-3.0, -2.0, -1.0]).unwrap();
        let c = assign_bins(&spec, &f).unwrap();
        assert!(c.bins.iter().all(IndexSubset::is_empty));
        assert_eq!(c.out_of_range, vec![0, 1, 2]);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = interval_cover(&FilterValues::scalar(vec![0.0, 1.0]).unwrap(), 2, 0.0, None).unwrap();
        let f = FilterValues::new(2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(assign_bins(&spec, &f), Err(Error::Dimension { .. })));
    }

    #[test]
    fn coverage_is_exhaustive() {
        let values: Vec<f64> = (0..997).map(|i| ((i * 7919) % 997) as f64 / 13.0 - 20.0).collect();
        let f = FilterValues::scalar(values).unwrap();
        for t in [1, 2, 3, 7, 17, 22] {
            for g in [0.0, 0.025, 0.35, 0.5] {
                let c = assign_bins(&interval_cover(&f, t, g, None).unwrap(), &f).unwrap();
                assert!(c.out_of_range.is_empty(), "t={t} g={g}");
            }
        }
    }

    #[test]
    fn overlap_monotone_in_gain() {
        let values: Vec<f64> = (0..500).map(|i| (i as f64 * 0.618).fract()).collect();
        let f = FilterValues::scalar(values).unwrap();
        let t = 6;
        let mut prev = vec![0usize; t - 1];
        for step in 0..20 {
            let g = step as f64 * 0.045;
            let c = assign_bins(&interval_cover(&f, t, g, None).unwrap(), &f).unwrap();
            for i in 0..t - 1 {
                let shared = c.bins[i].intersection(&c.bins[i + 1]).len();
                assert!(shared >= prev[i], "gain {g} bin {i}");
                prev[i] = shared;
            }
        }
    }

    #[test]
    fn filter_parsing() {
        assert_eq!("axis:1".parse::<Filter>().unwrap(), Filter::Axis(1));
        assert_eq!("axes:0,1".parse::<Filter>().unwrap(), Filter::Axes(vec![0, 1]));
        assert_eq!("identity".parse::<Filter>().unwrap(), Filter::Axes(vec![0, 1]));
        assert!("axis:x".parse::<Filter>().is_err());
        assert_eq!(Filter::Axes(vec![0, 1]).to_string(), "axes:0,1");
    }
}
