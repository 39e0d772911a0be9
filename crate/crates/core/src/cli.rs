//! Command-line front end. [`run`] parses arguments into a [`RunConfig`],
//! executes it and writes every output atomically.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 when
//! the computation itself fails.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{sampling_bound, BoundReport, Scenario};
use crate::clustering::{ClusterMethod, ClustererConfig};
use crate::config::{read_text, DataSource, Emit, Outputs, RunConfig, Task, SCHEMA_VERSION};
use crate::cover::Filter;
use crate::datagen::{generate, SyntheticSpec};
use crate::dataset::Format;
use crate::distance::{brute_force_mapper_distance, mapper_distance_with, Distance};
use crate::error::{Error, Result};
use crate::instability::{averaged_instability, AveragedInstability, Estimator, InstabilityParams, Normalization};
use crate::mapper::{nerve, restrict, MapperFunction, MapperParams};
use crate::sweep::{float_range, sweep, Axis, Parameter};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "mapstab",
    version,
    about = "Mapper graphs, Mapper distance and resampling instability"
)]
struct Cli {
    /// Rerun a resolved configuration written by an earlier run.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output path when rerunning a configuration.
    #[arg(long, value_name = "PATH", requires = "config")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Where to write the resolved configuration
    /// (default `<out>.config.json`, or standard error without `--out`).
    #[arg(long, global = true, value_name = "PATH")]
    config_out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic point cloud.
    Generate(GenerateArgs),
    /// Build a Mapper graph.
    Mapper(MapperCmd),
    /// Distance between two serialized Mapper functions.
    #[command(alias = "mapper-dist")]
    Dist(DistArgs),
    /// Resampling instability of one parameter choice.
    Instability(InstabilityCmd),
    /// Instability over a grid of parameters.
    Sweep(SweepCmd),
    /// Tube mass, boundary distance and the sampling bound on planar scenarios.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeArg {
    Circles,
    Gaussian,
    UniformSquare,
    GaussianQuad,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EmitArg {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Generator spec as a JSON file or inline JSON.
    #[arg(long, value_name = "SPEC", conflicts_with = "shape")]
    synthetic: Option<String>,
    #[arg(long, value_enum)]
    shape: Option<ShapeArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Horizontal offset of the upper pair (`gaussian-quad`).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift: f64,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Point cloud file, CSV or JSON.
    #[arg(long = "in", value_name = "PATH", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Input format; guessed from the extension when absent.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// The CSV input starts with a header line.
    #[arg(long)]
    header: bool,
    /// Generator spec as a JSON file or inline JSON.
    #[arg(long, value_name = "SPEC")]
    synthetic: Option<String>,
}

#[derive(Args, Debug)]
struct MapperArgs {
    /// `K` projects on coordinate K, `K,L,..` on several.
    #[arg(long, default_value = "0")]
    filter: String,
    /// Intervals per axis; a sweep takes a list or `lo:hi[:step]`.
    #[arg(long, default_value = "10")]
    resolution: String,
    /// Overlap fraction; a sweep takes a list or `lo:hi:step`.
    #[arg(long, default_value = "0.3")]
    gain: String,
    /// Filter range `lo:hi`, once per axis.
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    range: Vec<String>,
    /// `eps:<r>`, `kmeans:<K>[,restarts[,max_iter]]` or `constant`.
    #[arg(long, default_value = "kmeans:2")]
    cluster: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct InstabilityArgs {
    #[arg(long, value_enum, default_value = "kfold")]
    estimator: EstimatorArg,
    /// Number of subsamples (k-fold).
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value = "triangular")]
    normalization: NormalizationArg,
    /// Half-splits per estimate (paired).
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Search budget per distance; exhausted searches give upper bounds.
    #[arg(long)]
    max_nodes: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    Kfold,
    Paired,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormalizationArg {
    Triangular,
    Pairs,
}

#[derive(Args, Debug)]
struct MapperCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mapper: MapperArgs,
    #[arg(long, default_value_t = 2)]
    max_dim: usize,
    /// Graph JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Graphviz rendering.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Serialized Mapper function for `dist`.
    #[arg(long)]
    function: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DistArgs {
    /// First serialized Mapper function (`mapper --function`).
    #[arg(value_name = "F")]
    f: PathBuf,
    /// Second serialized Mapper function.
    #[arg(value_name = "G")]
    g: PathBuf,
    /// Also compute the value by exhaustive enumeration.
    #[arg(long)]
    brute_force: bool,
    /// Search budget; the result is an upper bound when it runs out.
    #[arg(long)]
    max_nodes: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InstabilityCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mapper: MapperArgs,
    #[command(flatten)]
    instability: InstabilityArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mapper: MapperArgs,
    #[command(flatten)]
    instability: InstabilityArgs,
    /// `1d` sweeps `--param` over `--values`; `2d` sweeps resolution × gain.
    #[arg(long, value_enum, default_value = "1d")]
    mode: Mode,
    /// epsilon, resolution, gain or k.
    #[arg(long, default_value = "epsilon")]
    param: String,
    /// A list or `lo:hi[:step]`.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    emit: EmitArg,
    /// Output path; with `--emit both` the extension is replaced by csv and json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// separated, strips or overlapping; all when absent.
    #[arg(long)]
    scenario: Vec<String>,
    /// Tube radii, as multiples of each scenario's separation.
    #[arg(long, default_value = "0.1,0.25,0.5")]
    gamma: String,
    /// Read `--gamma` as absolute radii.
    #[arg(long)]
    absolute: bool,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 20000)]
    mc_points: usize,
    /// Raster cells per side.
    #[arg(long, default_value_t = 100)]
    raster: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = match cli.jobs {
        Some(0) => Err(Error::Parameter("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Parameter(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&config))),
        None => execute(&config),
    };
    let artifacts = match outcome {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    match write_all(&config, cli.config_out.as_deref(), artifacts) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    match (&cli.config, &cli.command) {
        (Some(_), Some(_)) => Err(Error::Parameter("--config cannot be combined with a subcommand".into())),
        (None, None) => Err(Error::Parameter("a subcommand or --config is required".into())),
        (Some(path), None) => {
            let mut cfg = RunConfig::from_json(&read_text(path)?)?;
            if let Some(out) = &cli.out {
                cfg.outputs.out = Some(out.clone());
            }
            Ok(cfg)
        }
        (None, Some(cmd)) => resolve_command(cmd),
    }
}

fn resolve_command(cmd: &Command) -> Result<RunConfig> {
    Ok(match cmd {
        Command::Generate(a) => {
            let spec = match (&a.synthetic, a.shape) {
                (Some(s), _) => read_spec(s)?,
                (None, Some(shape)) => {
                    let n = a.n.ok_or_else(|| Error::Parameter("--shape needs --n".into()))?;
                    match shape {
                        ShapeArg::Circles => SyntheticSpec::circles(n, a.seed),
                        ShapeArg::Gaussian => SyntheticSpec::gaussian(n, a.seed),
                        ShapeArg::UniformSquare => SyntheticSpec::uniform_square(n, a.seed),
                        ShapeArg::GaussianQuad => SyntheticSpec::gaussian_quad(n, a.shift, a.seed),
                    }
                }
                (None, None) => return Err(Error::Parameter("generate needs --synthetic or --shape".into())),
            };
            spec.validate()?;
            let format = a
                .format
                .map(Format::from)
                .or_else(|| a.out.as_deref().and_then(Format::from_path))
                .unwrap_or(Format::Csv);
            RunConfig::new(Task::Generate { spec, format }, outputs(a.out.clone()))
        }
        Command::Mapper(a) => RunConfig::new(
            Task::Mapper {
                data: data_source(&a.data)?,
                mapper: mapper_params(&a.mapper)?,
                max_dim: a.max_dim,
            },
            Outputs {
                out: a.out.clone(),
                dot: a.dot.clone(),
                function: a.function.clone(),
                emit: Emit::Json,
            },
        ),
        Command::Dist(a) => RunConfig::new(
            Task::Dist {
                f: a.f.clone(),
                g: a.g.clone(),
                brute_force: a.brute_force,
                max_nodes: a.max_nodes,
            },
            outputs(a.out.clone()),
        ),
        Command::Instability(a) => RunConfig::new(
            Task::Instability {
                data: data_source(&a.data)?,
                mapper: mapper_params(&a.mapper)?,
                instability: instability_params(&a.instability, a.mapper.seed),
            },
            outputs(a.out.clone()),
        ),
        Command::Sweep(a) => {
            let mut m = MapperArgs {
                filter: a.mapper.filter.clone(),
                resolution: a.mapper.resolution.clone(),
                gain: a.mapper.gain.clone(),
                range: a.mapper.range.clone(),
                cluster: a.mapper.cluster.clone(),
                seed: a.mapper.seed,
            };
            let axes = match a.mode {
                Mode::OneD => {
                    let parameter: Parameter = a.param.parse()?;
                    let spec = a
                        .values
                        .as_deref()
                        .ok_or_else(|| Error::Parameter("a 1d sweep needs --values".into()))?;
                    vec![Axis::new(parameter, parse_values(spec)?)]
                }
                Mode::TwoD => {
                    if a.values.is_some() {
                        return Err(Error::Parameter(
                            "a 2d sweep takes its values from --resolution and --gain".into(),
                        ));
                    }
                    let resolutions = parse_values(&a.mapper.resolution)?;
                    let gains = parse_values(&a.mapper.gain)?;
                    m.resolution = (resolutions[0] as usize).to_string();
                    m.gain = format_number(gains[0]);
                    vec![
                        Axis::new(Parameter::Resolution, resolutions),
                        Axis::new(Parameter::Gain, gains),
                    ]
                }
            };
            let emit = match a.emit {
                EmitArg::Csv => Emit::Csv,
                EmitArg::Json => Emit::Json,
                EmitArg::Both => Emit::Both,
            };
            RunConfig::new(
                Task::Sweep {
                    data: data_source(&a.data)?,
                    mapper: mapper_params(&m)?,
                    instability: instability_params(&a.instability, a.mapper.seed),
                    axes,
                },
                Outputs {
                    out: a.out.clone(),
                    emit,
                    ..Outputs::default()
                },
            )
        }
        Command::Bounds(a) => {
            let scenarios = if a.scenario.is_empty() {
                Scenario::shipped()
            } else {
                a.scenario.iter().map(|s| Scenario::by_name(s)).collect::<Result<_>>()?
            };
            RunConfig::new(
                Task::Bounds {
                    scenarios,
                    gammas: parse_values(&a.gamma)?,
                    relative: !a.absolute,
                    trials: a.trials,
                    mc_points: a.mc_points,
                    raster: a.raster,
                    seed: a.seed,
                },
                outputs(a.out.clone()),
            )
        }
    })
}

fn outputs(out: Option<PathBuf>) -> Outputs {
    Outputs {
        out,
        ..Outputs::default()
    }
}

fn format_number(v: f64) -> String {
    format!("{v:?}")
}

fn read_spec(s: &str) -> Result<SyntheticSpec> {
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        read_text(Path::new(s))?
    };
    Ok(serde_json::from_str(&text)?)
}

fn data_source(a: &DataArgs) -> Result<DataSource> {
    match (&a.input, &a.synthetic) {
        (Some(path), None) => {
            let format = a
                .format
                .map(Format::from)
                .or_else(|| Format::from_path(path))
                .unwrap_or(Format::Csv);
            Ok(DataSource::File {
                path: path.clone(),
                format,
                header: a.header,
            })
        }
        (None, Some(s)) => {
            let spec = read_spec(s)?;
            spec.validate()?;
            Ok(DataSource::Synthetic { spec })
        }
        _ => Err(Error::Parameter("one of --in or --synthetic is required".into())),
    }
}

/// `K` or `K,L,..`, optionally prefixed by `axis:` / `axes:`.
pub fn parse_filter(s: &str) -> Result<Filter> {
    let body = s.strip_prefix("axes:").or_else(|| s.strip_prefix("axis:")).unwrap_or(s);
    let axes = body
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parameter(format!("bad filter `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(match axes.as_slice() {
        [k] if !s.starts_with("axes:") => Filter::Axis(*k),
        _ => Filter::Axes(axes),
    })
}

/// A comma-separated list, or `lo:hi` (step 1) / `lo:hi:step` inclusive.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parameter(format!("bad value list `{s}`"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let values = if s.contains(':') {
        let parts = s.split(':').map(num).collect::<Result<Vec<_>>>()?;
        match parts.as_slice() {
            [lo, hi] => float_range(*lo, *hi, 1.0)?,
            [lo, hi, step] => float_range(*lo, *hi, *step)?,
            _ => return Err(bad()),
        }
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

fn parse_counts(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parameter(format!("bad resolution `{s}`")))
        })
        .collect()
}

fn parse_range(s: &str) -> Result<[f64; 2]> {
    let bad = || Error::Parameter(format!("bad range `{s}`, expected lo:hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(bad());
    }
    Ok([lo, hi])
}

fn mapper_params(a: &MapperArgs) -> Result<MapperParams> {
    let gain: f64 = a
        .gain
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("bad gain `{}`", a.gain)))?;
    let range = if a.range.is_empty() {
        None
    } else {
        Some(a.range.iter().map(|r| parse_range(r)).collect::<Result<Vec<_>>>()?)
    };
    let clusterer = ClustererConfig::new(a.cluster.parse::<ClusterMethod>()?, a.seed);
    clusterer.validate()?;
    Ok(MapperParams {
        filter: parse_filter(&a.filter)?,
        resolution: parse_counts(&a.resolution)?,
        gain,
        range,
        clusterer,
    })
}

fn instability_params(a: &InstabilityArgs, seed: u64) -> InstabilityParams {
    InstabilityParams {
        estimator: match a.estimator {
            EstimatorArg::Kfold => Estimator::Kfold,
            EstimatorArg::Paired => Estimator::Paired,
        },
        k: a.k,
        normalization: match a.normalization {
            NormalizationArg::Triangular => Normalization::Triangular,
            NormalizationArg::Pairs => Normalization::Pairs,
        },
        trials: a.trials,
        repeats: a.repeats,
        seed,
        max_nodes: a.max_nodes,
    }
}

/// One output of a run; standard output when `path` is absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub contents: String,
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn versioned<T: Serialize>(body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct DistReport {
    #[serde(flatten)]
    distance: Distance,
    /// Points shared by both domains; the distance is taken on these.
    common_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    brute_force: Option<f64>,
}

#[derive(Serialize)]
struct InstabilityReport<'a> {
    instability: &'a InstabilityParams,
    #[serde(flatten)]
    result: &'a AveragedInstability,
}

#[derive(Serialize)]
struct BoundsReport {
    reports: Vec<BoundReport>,
}

/// Computes every output described by `config` without touching the disk,
/// apart from reading inputs.
pub fn execute(config: &RunConfig) -> Result<Vec<Artifact>> {
    let out = config.outputs.out.clone();
    let one = |contents: String| {
        vec![Artifact {
            path: out.clone(),
            contents,
        }]
    };
    match &config.task {
        Task::Generate { spec, format } => {
            let cloud = generate(spec)?;
            let mut text = match format {
                Format::Csv => cloud.to_csv(),
                Format::Json => cloud.to_json(),
            };
            if !text.ends_with('\n') {
                text.push('\n');
            }
            Ok(one(text))
        }
        Task::Mapper { data, mapper, max_dim } => {
            let cloud = data.load()?;
            let f = mapper.build(&cloud)?;
            let graph = nerve(&f, *max_dim)?;
            let mut artifacts = one(graph.to_json()?);
            if let Some(dot) = &config.outputs.dot {
                artifacts.push(Artifact {
                    path: Some(dot.clone()),
                    contents: graph.to_dot(),
                });
            }
            if let Some(path) = &config.outputs.function {
                artifacts.push(Artifact {
                    path: Some(path.clone()),
                    contents: f.to_json()?,
                });
            }
            Ok(artifacts)
        }
        Task::Dist {
            f,
            g,
            brute_force,
            max_nodes,
        } => {
            let f = MapperFunction::from_json(&read_text(f)?)?;
            let g = MapperFunction::from_json(&read_text(g)?)?;
            let common = f.domain.intersection(&g.domain);
            let (f, g) = (restrict(&f, &common)?, restrict(&g, &common)?);
            let distance = mapper_distance_with(&f, &g, *max_nodes)?;
            let brute_force = if *brute_force {
                Some(brute_force_mapper_distance(&f, &g)?)
            } else {
                None
            };
            Ok(one(versioned(&DistReport {
                distance,
                common_points: common.len(),
                brute_force,
            })?))
        }
        Task::Instability {
            data,
            mapper,
            instability,
        } => {
            let cloud = data.load()?;
            let result = averaged_instability(&cloud, mapper, instability)?;
            Ok(one(versioned(&InstabilityReport {
                instability,
                result: &result,
            })?))
        }
        Task::Sweep {
            data,
            mapper,
            instability,
            axes,
        } => {
            let cloud = data.load()?;
            let grid = sweep(&cloud, axes, mapper, instability)?;
            let csv = grid.to_csv();
            let json = grid.to_json()?;
            Ok(match config.outputs.emit {
                Emit::Csv => one(csv),
                Emit::Json => one(json),
                Emit::Both => vec![
                    Artifact {
                        path: out.as_ref().map(|p| p.with_extension("csv")),
                        contents: csv,
                    },
                    Artifact {
                        path: out.as_ref().map(|p| p.with_extension("json")),
                        contents: json,
                    },
                ],
            })
        }
        Task::Bounds {
            scenarios,
            gammas,
            relative,
            trials,
            mc_points,
            raster,
            seed,
        } => {
            let mut reports = Vec::new();
            for scenario in scenarios {
                for &g in gammas {
                    let gamma = if *relative { g * scenario.separation } else { g };
                    reports.push(sampling_bound(scenario, gamma, *trials, *mc_points, *raster, *seed)?);
                }
            }
            Ok(one(versioned(&BoundsReport { reports })?))
        }
    }
}

/// Default location of the resolved configuration.
pub fn config_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn write_all(config: &RunConfig, config_out: Option<&Path>, artifacts: Vec<Artifact>) -> Result<()> {
    let cfg_text = config.to_json()?;
    let mut stdout = std::io::stdout().lock();
    for a in &artifacts {
        match &a.path {
            Some(p) => write_atomic(p, a.contents.as_bytes())?,
            None => stdout.write_all(a.contents.as_bytes())?,
        }
    }
    stdout.flush()?;
    match (config_out, &config.outputs.out) {
        (Some(p), _) => write_atomic(p, cfg_text.as_bytes()),
        (None, Some(out)) => write_atomic(&config_path(out), cfg_text.as_bytes()),
        (None, None) => {
            std::io::stderr().write_all(cfg_text.as_bytes())?;
            Ok(())
        }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists_and_ranges() {
        assert_eq!(parse_values("2:5").unwrap(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(parse_values("0.025:0.1:0.025").unwrap(), vec![0.025, 0.05, 0.075, 0.1]);
        assert_eq!(parse_values("0.1, 0.3").unwrap(), vec![0.1, 0.3]);
        assert_eq!(parse_values("-1:1").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_values("a:b").is_err());
        assert!(parse_values("1:2:3:4").is_err());
    }

    #[test]
    fn filters() {
        assert_eq!(parse_filter("1").unwrap(), Filter::Axis(1));
        assert_eq!(parse_filter("axis:0").unwrap(), Filter::Axis(0));
        assert_eq!(parse_filter("0,1").unwrap(), Filter::Axes(vec![0, 1]));
        assert_eq!(parse_filter("axes:2").unwrap(), Filter::Axes(vec![2]));
        assert!(parse_filter("x").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-4:4").unwrap(), [-4.0, 4.0]);
        assert!(parse_range("4:-4").is_err());
        assert!(parse_range("4").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["mapstab"]), EXIT_USAGE);
        assert_eq!(run(["mapstab", "nonsense"]), EXIT_USAGE);
        assert_eq!(
            run(["mapstab", "mapper", "--filter", "x", "--synthetic", "{}"]),
            EXIT_USAGE
        );
        assert_eq!(run(["mapstab", "--help"]), 0);
    }

    #[test]
    fn config_path_appends() {
        assert_eq!(
            config_path(Path::new("a/b.json")),
            PathBuf::from("a/b.json.config.json")
        );
    }
}
