//! Instability over parameter grids.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterMethod;
use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::instability::{averaged_instability, InstabilityParams};
use crate::mapper::{nerve, GraphSummary, MapperParams};

/// Parameter that a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Epsilon,
    Resolution,
    Gain,
    /// Number of K-means clusters.
    K,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Epsilon => "epsilon",
            Parameter::Resolution => "resolution",
            Parameter::Gain => "gain",
            Parameter::K => "k",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &MapperParams, value: f64) -> Result<MapperParams> {
        let mut p = base.clone();
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Parameter(format!(
                    "{} needs a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            Parameter::Epsilon => match &mut p.clusterer.method {
                ClusterMethod::Epsilon { epsilon } => *epsilon = value,
                _ => return Err(Error::Parameter("an epsilon sweep needs the epsilon clusterer".into())),
            },
            Parameter::K => {
                let k = count()?;
                match &mut p.clusterer.method {
                    ClusterMethod::Kmeans { k: kk, .. } => *kk = k,
                    _ => return Err(Error::Parameter("a K sweep needs the kmeans clusterer".into())),
                }
            }
            Parameter::Resolution => p.resolution = vec![count()?],
            Parameter::Gain => p.gain = value,
        }
        Ok(p)
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" | "eps" => Ok(Parameter::Epsilon),
            "resolution" => Ok(Parameter::Resolution),
            "gain" => Ok(Parameter::Gain),
            "k" | "K" => Ok(Parameter::K),
            _ => Err(Error::Parameter(format!("unknown sweep parameter `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub parameter: Parameter,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(parameter: Parameter, values: Vec<f64>) -> Self {
        Self { parameter, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// Position along each axis.
    pub index: Vec<usize>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Per-repeat estimates.
    pub estimates: Vec<f64>,
    pub degenerate: bool,
    pub empty_bin_events: usize,
    /// False when some distance hit the search budget; `mean` is then an
    /// upper bound.
    pub exact: bool,
    /// Mapper graph of the full sample at these parameters.
    pub graph: GraphSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: Vec<Axis>,
    pub instability: InstabilityParams,
    /// Row-major: the last axis varies fastest.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    pub fn cell(&self, index: &[usize]) -> &SweepCell {
        let shape = self.shape();
        let flat = index.iter().zip(&shape).fold(0, |acc, (&i, &s)| acc * s + i);
        &self.cells[flat]
    }

    pub fn means(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mean).collect()
    }

    /// Matrix of means: rows follow the first axis, columns the second. A
    /// 1-D grid gives one row per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.axes.as_slice() {
            [a] => {
                let _ = writeln!(out, "{},instability,std", a.parameter.name());
                for (v, c) in a.values.iter().zip(&self.cells) {
                    let _ = writeln!(out, "{v},{},{}", c.mean, c.std);
                }
            }
            [rows, cols] => {
                let header: Vec<String> = cols.values.iter().map(f64::to_string).collect();
                let _ = writeln!(
                    out,
                    "{}\\{},{}",
                    rows.parameter.name(),
                    cols.parameter.name(),
                    header.join(",")
                );
                for (i, r) in rows.values.iter().enumerate() {
                    let line: Vec<String> = (0..cols.values.len())
                        .map(|j| self.cell(&[i, j]).mean.to_string())
                        .collect();
                    let _ = writeln!(out, "{r},{}", line.join(","));
                }
            }
            _ => {}
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            #[serde(flatten)]
            grid: &'a SweepGrid,
            local_minima: Option<Vec<Vec<usize>>>,
        }
        let local_minima = (self.axes.len() == 2).then(|| local_minima(self).unwrap_or_default());
        Ok(serde_json::to_string_pretty(&Doc {
            schema_version: crate::mapper::SCHEMA_VERSION,
            grid: self,
            local_minima,
        })?)
    }
}

fn evaluate(
    cloud: &PointCloud,
    params: &MapperParams,
    inst: &InstabilityParams,
    index: Vec<usize>,
    values: Vec<f64>,
) -> Result<SweepCell> {
    let avg = averaged_instability(cloud, params, inst)?;
    let graph = nerve(&params.build(cloud)?, 1)?.summary();
    Ok(SweepCell {
        index,
        values,
        mean: avg.mean,
        std: avg.std,
        estimates: avg.estimates.iter().map(|e| e.value).collect(),
        degenerate: avg.estimates.iter().any(|e| e.degenerate),
        empty_bin_events: avg.estimates.iter().map(|e| e.empty_bin_events).sum(),
        exact: avg.estimates.iter().all(|e| e.exact),
        graph,
    })
}

/// Evaluates every combination of axis values with the same resampling seeds.
pub fn sweep(cloud: &PointCloud, axes: &[Axis], base: &MapperParams, inst: &InstabilityParams) -> Result<SweepGrid> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::Parameter("every sweep axis needs at least one value".into()));
    }
    let shape: Vec<usize> = axes.iter().map(|a| a.values.len()).collect();
    let total: usize = shape.iter().product();
    let jobs = (0..total)
        .map(|flat| {
            let mut rest = flat;
            let mut index = vec![0; shape.len()];
            for d in (0..shape.len()).rev() {
                index[d] = rest % shape[d];
                rest /= shape[d];
            }
            let values: Vec<f64> = index.iter().zip(axes).map(|(&i, a)| a.values[i]).collect();
            let mut p = base.clone();
            for (a, &v) in axes.iter().zip(&values) {
                p = a.parameter.apply(&p, v)?;
            }
            Ok((index, values, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = jobs
        .into_par_iter()
        .map(|(index, values, p)| evaluate(cloud, &p, inst, index, values))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid {
        axes: axes.to_vec(),
        instability: inst.clone(),
        cells,
    })
}

pub fn sweep_1d(cloud: &PointCloud, axis: Axis, base: &MapperParams, inst: &InstabilityParams) -> Result<SweepGrid> {
    sweep(cloud, &[axis], base, inst)
}

/// Resolution × gain grid.
pub fn sweep_2d(
    cloud: &PointCloud,
    resolutions: &[usize],
    gains: &[f64],
    base: &MapperParams,
    inst: &InstabilityParams,
) -> Result<SweepGrid> {
    sweep(
        cloud,
        &[
            Axis::new(Parameter::Resolution, resolutions.iter().map(|&r| r as f64).collect()),
            Axis::new(Parameter::Gain, gains.to_vec()),
        ],
        base,
        inst,
    )
}

/// Cells of a 2-D grid whose mean is no larger than any of their (up to
/// eight) neighbours. A connected plateau of such cells is reported once, by
/// its lexicographically smallest index.
pub fn local_minima(grid: &SweepGrid) -> Result<Vec<Vec<usize>>> {
    let shape = grid.shape();
    let [rows, cols] = shape[..] else {
        return Err(Error::Parameter("local minima need a 2-D grid".into()));
    };
    let value = |i: usize, j: usize| grid.cells[i * cols + j].mean;
    let neighbours = |i: usize, j: usize| {
        let mut out = Vec::with_capacity(8);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if (di, dj) != (0, 0) && (0..rows as i64).contains(&a) && (0..cols as i64).contains(&b) {
                    out.push((a as usize, b as usize));
                }
            }
        }
        out
    };
    let is_min: Vec<bool> = (0..rows * cols)
        .map(|f| {
            let (i, j) = (f / cols, f % cols);
            neighbours(i, j).iter().all(|&(a, b)| value(i, j) <= value(a, b))
        })
        .collect();
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    for f in 0..rows * cols {
        if !is_min[f] || seen[f] {
            continue;
        }
        out.push(vec![f / cols, f % cols]);
        // flood the plateau of equal-valued minima
        let v = value(f / cols, f % cols);
        let mut stack = vec![f];
        seen[f] = true;
        while let Some(g) = stack.pop() {
            for (a, b) in neighbours(g / cols, g % cols) {
                let h = a * cols + b;
                if !seen[h] && is_min[h] && value(a, b) == v {
                    seen[h] = true;
                    stack.push(h);
                }
            }
        }
    }
    Ok(out)
}

/// Values `lo, lo + step, ...` up to `hi` inclusive, tolerating rounding.
pub fn float_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Parameter(format!("invalid range {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = lo + i as f64 * step;
            // print-friendly values such as 0.075 instead of 0.07500000000000001
            (v * 1e12).round() / 1e12
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClustererConfig;
    use crate::cover::Filter;
    use crate::datagen::{generate, SyntheticSpec};

    fn grid(values: &[&[f64]]) -> SweepGrid {
        let rows = values.len();
        let cols = values[0].len();
        SweepGrid {
            axes: vec![
                Axis::new(Parameter::Resolution, (0..rows).map(|i| i as f64 + 1.0).collect()),
                Axis::new(Parameter::Gain, (0..cols).map(|j| j as f64 / 10.0).collect()),
            ],
            instability: InstabilityParams::default(),
            cells: values
                .iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    row.iter().enumerate().map(move |(j, &v)| SweepCell {
                        index: vec![i, j],
                        values: vec![],
                        mean: v,
                        std: 0.0,
                        estimates: vec![v],
                        degenerate: false,
                        empty_bin_events: 0,
                        exact: true,
                        graph: GraphSummary::default(),
                    })
                })
                .collect(),
        }
    }

    #[test]
    fn constant_grid_has_one_minimum() {
        let g = grid(&[&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]]);
        assert_eq!(local_minima(&g).unwrap(), vec![vec![0, 0]]);
    }

    #[test]
    fn single_pit() {
        let g = grid(&[&[5.0, 5.0, 5.0], &[5.0, 1.0, 5.0], &[5.0, 5.0, 5.0]]);
        assert_eq!(local_minima(&g).unwrap(), vec![vec![1, 1]]);
    }

    #[test]
    fn corners_compare_with_existing_neighbours() {
        let g = grid(&[&[0.0, 3.0, 4.0], &[3.0, 5.0, 3.0], &[4.0, 3.0, 0.5]]);
        assert_eq!(local_minima(&g).unwrap(), vec![vec![0, 0], vec![2, 2]]);
    }

    #[test]
    fn no_returned_cell_has_a_smaller_neighbour() {
        let vals: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..7).map(|j| ((i * 7 + j) as f64 * 1.7).sin()).collect())
            .collect();
        let refs: Vec<&[f64]> = vals.iter().map(Vec::as_slice).collect();
        let g = grid(&refs);
        let mins = local_minima(&g).unwrap();
        assert!(!mins.is_empty());
        for m in &mins {
            let v = vals[m[0]][m[1]];
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (m[0] as i64 + di, m[1] as i64 + dj);
                    if (0..6).contains(&a) && (0..7).contains(&b) {
                        assert!(v <= vals[a as usize][b as usize]);
                    }
                }
            }
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(float_range(0.025, 0.5, 0.025).unwrap().len(), 20);
        assert_eq!(float_range(0.025, 0.5, 0.025).unwrap()[2], 0.075);
        assert!(float_range(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn constant_clusterer_sweep_is_zero() {
        let cloud = generate(&SyntheticSpec::circles(120, 1)).unwrap();
        let base = MapperParams {
            filter: Filter::Axis(1),
            resolution: vec![4],
            gain: 0.3,
            range: None,
            clusterer: ClustererConfig::new(ClusterMethod::Constant, 0),
        };
        let inst = InstabilityParams {
            k: 4,
            ..Default::default()
        };
        let g = sweep_2d(&cloud, &[2, 3], &[0.1, 0.2, 0.3], &base, &inst).unwrap();
        assert_eq!(g.cells.len(), 6);
        assert!(g.means().iter().all(|&v| v == 0.0));
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("resolution\\gain,0.1,0.2,0.3"));
        assert!(sweep_1d(&cloud, Axis::new(Parameter::Epsilon, vec![0.1]), &base, &inst).is_err());
    }

    #[test]
    fn one_cell_and_determinism() {
        let cloud = generate(&SyntheticSpec::circles(150, 2)).unwrap();
        let base = MapperParams {
            filter: Filter::Axis(1),
            resolution: vec![5],
            gain: 0.3,
            range: None,
            clusterer: ClustererConfig::new(ClusterMethod::Epsilon { epsilon: 0.3 }, 0),
        };
        let inst = InstabilityParams {
            k: 5,
            repeats: 2,
            ..Default::default()
        };
        let a = sweep_1d(&cloud, Axis::new(Parameter::Epsilon, vec![0.3]), &base, &inst).unwrap();
        assert_eq!(a.cells.len(), 1);
        let b = sweep_1d(&cloud, Axis::new(Parameter::Epsilon, vec![0.3]), &base, &inst).unwrap();
        assert_eq!(a, b);
        assert!(a.cells[0].graph.vertices > 0);
    }
}
