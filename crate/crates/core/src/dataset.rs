//! Point clouds, index subsets and file ingestion.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

/// A finite sample of `n` points in `R^dim`, stored row-major.
///
/// Point order is significant: Voronoi tie-breaking resolves toward the
/// earlier point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    metric: Metric,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if !points.is_empty() && dim == 0 {
            return Err(Error::Format("points must have at least one coordinate".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (row, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Format(format!(
                    "ragged rows: row {row} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            dim,
            coords,
            metric: Metric::Euclidean,
        })
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            if coords.is_empty() {
                return Ok(Self::empty(0));
            }
            return Err(Error::Format("dimension must be at least 1".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Format(format!(
                "{} coordinates do not split into rows of {dim}",
                coords.len()
            )));
        }
        Ok(Self {
            dim,
            coords,
            metric: Metric::Euclidean,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            metric: Metric::Euclidean,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }

    /// Distance between points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.len();
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        Ok(self.dist(i, j))
    }

    #[inline]
    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    #[inline]
    pub(crate) fn dist_to(&self, i: usize, q: &[f64]) -> f64 {
        euclidean(self.point(i), q)
    }

    /// Compact JSON: an array of arrays of numbers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_rows()).expect("finite coordinates serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in self.points().take(self.len()) {
            let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Sub-cloud made of the given points, in order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            coords,
            metric: self.metric,
        }
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" | "txt" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

/// Reads a point cloud. Row order becomes point order.
///
/// CSV has one point per line, comma separated, no header unless `header`
/// is set. JSON is an array of arrays of numbers. An empty input is an empty
/// cloud.
pub fn load_point_cloud<R: Read>(mut source: R, format: Format, header: bool) -> Result<PointCloud> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    match format {
        Format::Csv => parse_csv(&text, header),
        Format::Json => parse_json(&text),
    }
}

fn parse_csv(text: &str, header: bool) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {line}: `{field}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    PointCloud::new(rows)
}

fn parse_json(text: &str) -> Result<PointCloud> {
    if text.trim().is_empty() {
        return Ok(PointCloud::empty(0));
    }
    let value: serde_json::Value = serde_json::from_str(text)?;
    let rows = value
        .as_array()
        .ok_or_else(|| Error::Format("expected an array of points".into()))?;
    let mut points = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Format(format!("point {i} is not an array")))?;
        let p = row
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| Error::Parse(format!("point {i}: `{v}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(p);
    }
    PointCloud::new(points)
}

/// Strictly increasing list of point indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSubset {
    indices: Vec<usize>,
}

impl IndexSubset {
    /// Validates that `indices` is strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("subset indices must be strictly increasing".into()));
        }
        Ok(Self { indices })
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Position of `index` within the subset.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= n => Err(Error::IndexOutOfRange { index: last, len: n }),
            _ => Ok(()),
        }
    }

    pub fn is_subset_of(&self, other: &IndexSubset) -> bool {
        let mut it = other.indices.iter().peekable();
        'outer: for &x in &self.indices {
            while let Some(&&y) = it.peek() {
                if y < x {
                    it.next();
                } else if y == x {
                    it.next();
                    continue 'outer;
                } else {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn intersection(&self, other: &IndexSubset) -> IndexSubset {
        let (a, b) = (&self.indices, &other.indices);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        IndexSubset { indices: out }
    }

    pub fn union(&self, other: &IndexSubset) -> IndexSubset {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.indices);
        v.extend_from_slice(&other.indices);
        IndexSubset::from_unsorted(v)
    }
}

impl FromIterator<usize> for IndexSubset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        IndexSubset::from_unsorted(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csv(text: &str) -> Result<PointCloud> {
        load_point_cloud(text.as_bytes(), Format::Csv, false)
    }

    #[test]
    fn csv_two_points() {
        let c = csv("0,0\n1,0").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.dim(), 2);
        assert_eq!(c.point(1), &[1.0, 0.0]);
    }

    #[test]
    fn csv_ragged_is_format_error() {
        assert!(matches!(csv("0,0\n1"), Err(Error::Format(_))));
    }

    #[test]
    fn csv_non_numeric_is_parse_error() {
        assert!(matches!(csv("0,a\n1,2"), Err(Error::Parse(_))));
    }

    #[test]
    fn csv_header_skipped() {
        let c = load_point_cloud("x,y\n1,2\n".as_bytes(), Format::Csv, true).unwrap();
        assert_eq!(c.to_rows(), vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn empty_inputs_are_empty_clouds() {
        assert!(csv("").unwrap().is_empty());
        assert!(load_point_cloud("".as_bytes(), Format::Json, false).unwrap().is_empty());
        assert!(load_point_cloud("[]".as_bytes(), Format::Json, false)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn json_single_point() {
        let c = load_point_cloud("[[0.5,0.5,0.5]]".as_bytes(), Format::Json, false).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.dim(), 3);
    }

    #[test]
    fn json_ragged_and_non_numeric() {
        let r = load_point_cloud("[[1,2],[3]]".as_bytes(), Format::Json, false);
        assert!(matches!(r, Err(Error::Format(_))));
        let r = load_point_cloud("[[1,\"x\"]]".as_bytes(), Format::Json, false);
        assert!(matches!(r, Err(Error::Parse(_))));
    }

    #[test]
    fn distance_examples() {
        let c = PointCloud::new(vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(c.distance(0, 1).unwrap(), 5.0);
        assert_eq!(c.distance(1, 1).unwrap(), 0.0);
        assert_eq!(c.distance(2, 3).unwrap(), 0.0);
        assert!(matches!(
            c.distance(0, 4),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn subset_operations() {
        let a = IndexSubset::new(vec![1, 3, 5, 7]).unwrap();
        let b = IndexSubset::new(vec![3, 4, 5]).unwrap();
        assert_eq!(a.intersection(&b).as_slice(), &[3, 5]);
        assert_eq!(a.union(&b).as_slice(), &[1, 3, 4, 5, 7]);
        assert!(IndexSubset::new(vec![3, 5]).unwrap().is_subset_of(&a));
        assert!(!b.is_subset_of(&a));
        assert!(IndexSubset::new(vec![2, 2]).is_err());
        assert!(a.check_within(7).is_err());
        assert!(a.check_within(8).is_ok());
    }

    proptest! {
        #[test]
        fn metric_axioms(pts in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 3)) {
            let c = PointCloud::new(pts).unwrap();
            let d = |i, j| c.distance(i, j).unwrap();
            prop_assert_eq!(d(0, 1), d(1, 0));
            prop_assert_eq!(d(2, 2), 0.0);
            let lhs = d(0, 2);
            let rhs = d(0, 1) + d(1, 2);
            prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
        }

        #[test]
        fn json_reserialization_is_byte_stable(pts in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 2), 0..20)) {
            let c = PointCloud::new(pts).unwrap();
            let once = c.to_json();
            let reloaded = load_point_cloud(once.as_bytes(), Format::Json, false).unwrap();
            prop_assert_eq!(reloaded.to_json(), once);
        }
    }
}
