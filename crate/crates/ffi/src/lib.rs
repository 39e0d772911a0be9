//! C ABI over `mapstab`.
//!
//! Point clouds and Mapper functions are opaque handles owned by the caller
//! and released with their `_free` function. Parameters travel as JSON in
//! the same shape the library serializes, for example
//! `{"filter":{"axis":1},"resolution":[17],"gain":0.35,"clusterer":{"method":"epsilon","epsilon":0.2,"seed":0}}`.
//! Every fallible call returns a [`MapstabStatus`]; on failure
//! [`mapstab_last_error`] describes it. Strings returned through `char **`
//! belong to the caller and go back through [`mapstab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mapstab::config::DataSource;
use mapstab::datagen::{generate, SyntheticSpec};
use mapstab::distance::mapper_distance_with;
use mapstab::instability::{averaged_instability, InstabilityParams};
use mapstab::mapper::MapperParams;
use mapstab::sweep::{sweep, Axis};
use mapstab::{nerve, Error, Format, MapperFunction, PointCloud};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapstabStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A string argument was not UTF-8.
    InvalidUtf8 = 2,
    /// Malformed input data or JSON.
    Format = 3,
    /// An invalid parameter value.
    Parameter = 4,
    /// Values outside the filter range, dimension or index mismatches.
    Range = 5,
    /// Two functions that do not share a cover or a domain.
    Mismatch = 6,
    /// Exhaustive enumeration refused as too large.
    GuardExceeded = 7,
    Io = 8,
    /// A bug in the library; the message has details.
    Panic = 9,
}

/// A point cloud.
pub struct MapstabCloud(PointCloud);

/// A Mapper function: per-bin clusterings on a cover.
pub struct MapstabFunction(MapperFunction);

/// Distance between two Mapper functions.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MapstabDistance {
    /// Mismatched points over common points.
    pub distance: f64,
    pub mismatched: u64,
    pub n_points: u64,
    pub lower_bound: u64,
    pub nodes: u64,
    /// 0 when a node budget stopped the search; `distance` is then an upper bound.
    pub exact: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

struct Failure(MapstabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Format(_) | Error::Parse(_) | Error::Json(_) => MapstabStatus::Format,
            Error::Parameter(_) | Error::Extension(_) => MapstabStatus::Parameter,
            Error::Range(_) | Error::Dimension { .. } | Error::IndexOutOfRange { .. } => MapstabStatus::Range,
            Error::CoverMismatch(_) | Error::DomainMismatch(_) => MapstabStatus::Mismatch,
            Error::GuardExceeded { .. } => MapstabStatus::GuardExceeded,
            Error::Io(_) => MapstabStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(MapstabStatus::Format, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs `body`, turning errors and panics into a status and a message.
fn guard(body: impl FnOnce() -> Outcome) -> MapstabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MapstabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            MapstabStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(MapstabStatus::NullArgument, format!("`{name}` is null"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> std::result::Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MapstabStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> std::result::Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T, name: &str) -> Outcome {
    if out.is_null() {
        return Err(null(name));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|_| Failure(MapstabStatus::Format, "output contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn json<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, Failure> {
    Ok(serde_json::from_str(s)?)
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn mapstab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mapstab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mapstab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cloud of `n` points of dimension `dim` from row-major coordinates.
///
/// # Safety
/// `coords` must point to `n * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_cloud_from_rows(
    coords: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut MapstabCloud,
) -> MapstabStatus {
    guard(|| {
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| Failure(MapstabStatus::Parameter, "n * dim overflows".into()))?;
        let values = if len == 0 {
            Vec::new()
        } else {
            if coords.is_null() {
                return Err(null("coords"));
            }
            std::slice::from_raw_parts(coords, len).to_vec()
        };
        let cloud = PointCloud::from_flat(dim, values)?;
        put(out, MapstabCloud(cloud), "out")
    })
}

/// Reads a cloud from a `.csv`, `.txt` or `.json` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_cloud_load(
    path: *const c_char,
    header: bool,
    out: *mut *mut MapstabCloud,
) -> MapstabStatus {
    guard(|| {
        let path = Path::new(text(path, "path")?);
        let format = Format::from_path(path).ok_or_else(|| {
            Failure(
                MapstabStatus::Parameter,
                format!("{}: unknown file extension", path.display()),
            )
        })?;
        let source = DataSource::File {
            path: path.to_path_buf(),
            format,
            header,
        };
        put(out, MapstabCloud(source.load()?), "out")
    })
}

/// Draws a synthetic cloud from a JSON generator spec such as
/// `{"kind":"circles","n":5000,"seed":1}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_cloud_generate(
    spec_json: *const c_char,
    out: *mut *mut MapstabCloud,
) -> MapstabStatus {
    guard(|| {
        let spec: SyntheticSpec = json(text(spec_json, "spec_json")?)?;
        put(out, MapstabCloud(generate(&spec)?), "out")
    })
}

/// Number of points; 0 for null.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapstab_cloud_len(cloud: *const MapstabCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Dimension; 0 for null.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapstab_cloud_dim(cloud: *const MapstabCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.dim())
}

/// Releases a cloud. Null is ignored.
///
/// # Safety
/// `cloud` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mapstab_cloud_free(cloud: *mut MapstabCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Builds the Mapper function of `cloud` under JSON Mapper parameters.
///
/// # Safety
/// `cloud` must be a live handle, `params_json` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_mapper_build(
    cloud: *const MapstabCloud,
    params_json: *const c_char,
    out: *mut *mut MapstabFunction,
) -> MapstabStatus {
    guard(|| {
        let cloud = handle(cloud, "cloud")?;
        let params: MapperParams = json(text(params_json, "params_json")?)?;
        put(out, MapstabFunction(params.build(&cloud.0)?), "out")
    })
}

/// Reads a function serialized by [`mapstab_function_to_json`] or the CLI.
///
/// # Safety
/// `function_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_function_from_json(
    function_json: *const c_char,
    out: *mut *mut MapstabFunction,
) -> MapstabStatus {
    guard(|| {
        let f = MapperFunction::from_json(text(function_json, "function_json")?)?;
        put(out, MapstabFunction(f), "out")
    })
}

/// Serializes a function.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_function_to_json(f: *const MapstabFunction, out: *mut *mut c_char) -> MapstabStatus {
    guard(|| put_string(out, handle(f, "f")?.0.to_json()?))
}

/// Nerve of a function up to simplices of dimension `max_dim`, as JSON.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_function_graph_json(
    f: *const MapstabFunction,
    max_dim: usize,
    out: *mut *mut c_char,
) -> MapstabStatus {
    guard(|| put_string(out, nerve(&handle(f, "f")?.0, max_dim)?.to_json()?))
}

/// Number of bins; 0 for null.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapstab_function_n_bins(f: *const MapstabFunction) -> usize {
    f.as_ref().map_or(0, |f| f.0.n_bins())
}

/// Releases a function. Null is ignored.
///
/// # Safety
/// `f` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mapstab_function_free(f: *mut MapstabFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Distance between two functions on the same cover and domain.
/// `max_nodes` bounds the search; 0 means no bound.
///
/// # Safety
/// `f` and `g` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_distance(
    f: *const MapstabFunction,
    g: *const MapstabFunction,
    max_nodes: u64,
    out: *mut MapstabDistance,
) -> MapstabStatus {
    guard(|| {
        let (f, g) = (handle(f, "f")?, handle(g, "g")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let d = mapper_distance_with(&f.0, &g.0, (max_nodes > 0).then_some(max_nodes))?;
        *out = MapstabDistance {
            distance: d.distance,
            mismatched: d.mismatched as u64,
            n_points: d.n_points as u64,
            lower_bound: d.lower_bound as u64,
            nodes: d.nodes,
            exact: u8::from(d.exact),
        };
        Ok(())
    })
}

/// Instability of `cloud` under JSON Mapper and resampling parameters
/// (`{"estimator":"kfold","k":10,"seed":0}`). Writes the mean over repeats
/// and its standard deviation; either pointer may be null.
///
/// # Safety
/// `cloud` must be a live handle and both strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mapstab_instability(
    cloud: *const MapstabCloud,
    params_json: *const c_char,
    instability_json: *const c_char,
    mean: *mut f64,
    std: *mut f64,
) -> MapstabStatus {
    guard(|| {
        let cloud = handle(cloud, "cloud")?;
        let params: MapperParams = json(text(params_json, "params_json")?)?;
        let inst: InstabilityParams = json(text(instability_json, "instability_json")?)?;
        let a = averaged_instability(&cloud.0, &params, &inst)?;
        if !mean.is_null() {
            *mean = a.mean;
        }
        if !std.is_null() {
            *std = a.std;
        }
        Ok(())
    })
}

/// Instability over a parameter grid. `axes_json` is an array of
/// `{"parameter":"epsilon","values":[...]}`. Writes the grid as JSON, with
/// its local minima when there are two axes.
///
/// # Safety
/// `cloud` must be a live handle, the strings NUL-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mapstab_sweep(
    cloud: *const MapstabCloud,
    params_json: *const c_char,
    instability_json: *const c_char,
    axes_json: *const c_char,
    out: *mut *mut c_char,
) -> MapstabStatus {
    guard(|| {
        let cloud = handle(cloud, "cloud")?;
        let params: MapperParams = json(text(params_json, "params_json")?)?;
        let inst: InstabilityParams = json(text(instability_json, "instability_json")?)?;
        let axes: Vec<Axis> = json(text(axes_json, "axes_json")?)?;
        put_string(out, sweep(&cloud.0, &axes, &params, &inst)?.to_json()?)
    })
}
