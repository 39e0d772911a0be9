//! Resolved description of one run. Feeding it back through `--config`
//! reproduces the outputs byte for byte; the thread count is not part of it.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::Scenario;
use crate::datagen::{generate, SyntheticSpec};
use crate::dataset::{load_point_cloud, Format, PointCloud};
use crate::error::{Error, Result};
use crate::instability::InstabilityParams;
use crate::mapper::MapperParams;
use crate::sweep::Axis;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    File {
        path: PathBuf,
        format: Format,
        #[serde(default)]
        header: bool,
    },
    Synthetic {
        spec: SyntheticSpec,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<PointCloud> {
        match self {
            DataSource::File { path, format, header } => {
                let file = File::open(path).map_err(|e| with_path(e, path))?;
                load_point_cloud(BufReader::new(file), *format, *header)
            }
            DataSource::Synthetic { spec } => generate(spec),
        }
    }
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Reads a whole file; the error names the path.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| with_path(e, path))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    #[default]
    Csv,
    Json,
    Both,
}

/// Output locations; standard output when `out` is absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Graphviz rendering of the graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot: Option<PathBuf>,
    /// Serialized Mapper function, readable by `dist`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<PathBuf>,
    /// Sweep table format.
    #[serde(default)]
    pub emit: Emit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Generate {
        spec: SyntheticSpec,
        format: Format,
    },
    Mapper {
        data: DataSource,
        mapper: MapperParams,
        max_dim: usize,
    },
    Dist {
        f: PathBuf,
        g: PathBuf,
        #[serde(default)]
        brute_force: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_nodes: Option<u64>,
    },
    Instability {
        data: DataSource,
        mapper: MapperParams,
        instability: InstabilityParams,
    },
    Sweep {
        data: DataSource,
        mapper: MapperParams,
        instability: InstabilityParams,
        axes: Vec<Axis>,
    },
    Bounds {
        scenarios: Vec<Scenario>,
        gammas: Vec<f64>,
        /// Gammas are multiples of each scenario's separation.
        relative: bool,
        trials: usize,
        mc_points: usize,
        raster: usize,
        seed: u64,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Generate { .. } => "generate",
            Task::Mapper { .. } => "mapper",
            Task::Dist { .. } => "dist",
            Task::Instability { .. } => "instability",
            Task::Sweep { .. } => "sweep",
            Task::Bounds { .. } => "bounds",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub task: Task,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn new(task: Task, outputs: Outputs) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            task,
            outputs,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "config schema version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{ClusterMethod, ClustererConfig};
    use crate::cover::Filter;

    fn params() -> MapperParams {
        MapperParams {
            filter: Filter::Axis(1),
            resolution: vec![17],
            gain: 0.35,
            range: Some(vec![[-2.5, 2.5]]),
            clusterer: ClustererConfig::new(ClusterMethod::Epsilon { epsilon: 0.1 }, 3),
        }
    }

    #[test]
    fn roundtrip_every_task() {
        let data = DataSource::Synthetic {
            spec: SyntheticSpec::circles(100, 7),
        };
        let tasks = vec![
            Task::Generate {
                spec: SyntheticSpec::gaussian_quad(64, 0.5, 1),
                format: Format::Csv,
            },
            Task::Mapper {
                data: DataSource::File {
                    path: "pts.csv".into(),
                    format: Format::Csv,
                    header: true,
                },
                mapper: params(),
                max_dim: 2,
            },
            Task::Dist {
                f: "a.json".into(),
                g: "b.json".into(),
                brute_force: true,
                max_nodes: Some(10),
            },
            Task::Instability {
                data: data.clone(),
                mapper: params(),
                instability: InstabilityParams::default(),
            },
            Task::Sweep {
                data,
                mapper: params(),
                instability: InstabilityParams::default(),
                axes: vec![Axis::new(crate::sweep::Parameter::Epsilon, vec![0.1, 0.2])],
            },
            Task::Bounds {
                scenarios: Scenario::shipped(),
                gammas: vec![0.1, 0.25],
                relative: true,
                trials: 3,
                mc_points: 100,
                raster: 20,
                seed: 9,
            },
        ];
        for task in tasks {
            let cfg = RunConfig::new(
                task,
                Outputs {
                    out: Some("x.json".into()),
                    ..Outputs::default()
                },
            );
            let text = cfg.to_json().unwrap();
            let back = RunConfig::from_json(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn rejects_other_schema_versions() {
        let cfg = RunConfig::new(
            Task::Dist {
                f: "a".into(),
                g: "b".into(),
                brute_force: false,
                max_nodes: None,
            },
            Outputs::default(),
        );
        let text = cfg
            .to_json()
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(RunConfig::from_json(&text), Err(Error::Format(_))));
    }
}
