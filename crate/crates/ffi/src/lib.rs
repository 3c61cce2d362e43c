//! C ABI over the tracker.
//!
//! Objects cross the boundary as opaque handles created by `rlmb_*_new`-style
//! functions and released with the matching `rlmb_*_free`. Every fallible call
//! returns an [`RlmbStatus`]; on failure a message for the calling thread is
//! available from [`rlmb_last_error`]. Strings handed out by the library must
//! be released with [`rlmb_string_free`]. No call unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use roadlmb::filter::{Estimate, FilterConfig, LmbFilter, MeasurementScan, SensorModel};
use roadlmb::lmb::Vector2;
use roadlmb::roadmap::{MapDocument, Point, RoadMap};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlmbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string was not UTF-8, or a scalar argument was out of range.
    InvalidArgument = 2,
    /// JSON input did not parse or failed validation.
    Parse = 3,
    /// The filter rejected the call, for example a non-consecutive step.
    Filter = 4,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 5,
    /// Internal error; the handle should be freed.
    Panic = 6,
}

/// Road map handle.
pub struct RlmbMap {
    map: Arc<RoadMap>,
}

/// Filter handle.
pub struct RlmbFilter {
    filter: LmbFilter,
}

/// One extracted track.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RlmbEstimate {
    /// Step at which the track was born.
    pub label_time: u64,
    /// Ordinal among the births of that step.
    pub label_index: u32,
    pub existence: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub phi: f64,
    pub omega: f64,
}

impl From<&Estimate> for RlmbEstimate {
    fn from(e: &Estimate) -> Self {
        Self {
            label_time: e.label.birth_time,
            label_index: e.label.birth_index,
            existence: e.existence,
            x: e.state.x,
            y: e.state.y,
            v: e.state.v,
            phi: e.state.phi,
            omega: e.state.omega,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

struct Failure(RlmbStatus, String);

impl Failure {
    fn new(status: RlmbStatus, message: impl ToString) -> Self {
        Self(status, message.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RlmbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RlmbStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RlmbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::new(RlmbStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

fn null(name: &str) -> Failure {
    Failure::new(RlmbStatus::NullPointer, format!("`{name}` is null"))
}

/// Message of the last failed call on this thread, empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rlmb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn rlmb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rlmb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a map from a lane document (`lanes`, `lane_links`, `links`) or, if the
/// JSON has a `rectangles` array, from explicit rectangles.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlmb_map_from_json(json: *const c_char, out: *mut *mut RlmbMap) -> RlmbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?.ok_or_else(|| null("json"))?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Failure::new(RlmbStatus::Parse, e))?;
        let map = if value.get("rectangles").is_some() {
            serde_json::from_value::<RoadMap>(value).map_err(|e| Failure::new(RlmbStatus::Parse, e))?
        } else {
            let doc: MapDocument = serde_json::from_value(value).map_err(|e| Failure::new(RlmbStatus::Parse, e))?;
            doc.build().map_err(|e| Failure::new(RlmbStatus::Parse, e))?.map
        };
        *out = Box::into_raw(Box::new(RlmbMap { map: Arc::new(map) }));
        Ok(())
    })
}

/// # Safety
/// `map` must come from [`rlmb_map_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlmb_map_free(map: *mut RlmbMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Number of rectangles in the map; 0 for a null handle.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rlmb_map_len(map: *const RlmbMap) -> usize {
    map.as_ref().map_or(0, |m| m.map.len())
}

/// Ids of the rectangles containing `(x, y)`, ascending. Writes the number of
/// ids to `out_len`; returns `BUFFER_TOO_SMALL` if it exceeds `capacity`.
///
/// # Safety
/// `ids` must hold `capacity` elements (may be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn rlmb_map_containing(
    map: *const RlmbMap,
    x: f64,
    y: f64,
    ids: *mut u32,
    capacity: usize,
    out_len: *mut usize,
) -> RlmbStatus {
    guard(|| {
        let map = map.as_ref().ok_or_else(|| null("map"))?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        let found = map.map.containing(&Point::new(x, y));
        *out_len = found.len();
        if found.len() > capacity {
            return Err(Failure::new(RlmbStatus::BufferTooSmall, format!("{} ids do not fit in {capacity}", found.len())));
        }
        if !found.is_empty() {
            if ids.is_null() {
                return Err(null("ids"));
            }
            ptr::copy_nonoverlapping(found.as_ptr(), ids, found.len());
        }
        Ok(())
    })
}

/// Creates a filter. `config_json` and `sensors_json` may be null for the
/// defaults (one radar with id 0); `map` may be null to run without a road map.
/// The map is shared, so it may be freed after this call.
///
/// # Safety
/// Strings must be NUL-terminated; `map` null or live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rlmb_filter_new(
    config_json: *const c_char,
    sensors_json: *const c_char,
    map: *const RlmbMap,
    out: *mut *mut RlmbFilter,
) -> RlmbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config: FilterConfig = match str_arg(config_json, "config_json")? {
            Some(text) => serde_json::from_str(text).map_err(|e| Failure::new(RlmbStatus::Parse, e))?,
            None => FilterConfig::default(),
        };
        let sensors: Vec<SensorModel> = match str_arg(sensors_json, "sensors_json")? {
            Some(text) => serde_json::from_str(text).map_err(|e| Failure::new(RlmbStatus::Parse, e))?,
            None => vec![SensorModel::radar()],
        };
        let map = map.as_ref().map(|m| m.map.clone());
        let filter = LmbFilter::new(config, map, sensors).map_err(|e| Failure::new(RlmbStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(RlmbFilter { filter }));
        Ok(())
    })
}

/// # Safety
/// `filter` must come from [`rlmb_filter_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlmb_filter_free(filter: *mut RlmbFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Runs one step with a single scan of `count` detections from `sensor_id`
/// (`xs[i]`, `ys[i]`). Extracted tracks are written to `estimates`; their number
/// goes to `out_count`. Returns `BUFFER_TOO_SMALL` when `capacity` is too small;
/// the filter state has still advanced in that case.
///
/// # Safety
/// `xs` and `ys` must hold `count` values; `estimates` must hold `capacity`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rlmb_filter_step(
    filter: *mut RlmbFilter,
    timestamp: u64,
    sensor_id: u32,
    xs: *const f64,
    ys: *const f64,
    count: usize,
    estimates: *mut RlmbEstimate,
    capacity: usize,
    out_count: *mut usize,
) -> RlmbStatus {
    guard(|| {
        let filter = filter.as_mut().ok_or_else(|| null("filter"))?;
        if out_count.is_null() {
            return Err(null("out_count"));
        }
        let measurements: Vec<Vector2> = if count == 0 {
            Vec::new()
        } else {
            if xs.is_null() || ys.is_null() {
                return Err(null("xs/ys"));
            }
            let (xs, ys) = (std::slice::from_raw_parts(xs, count), std::slice::from_raw_parts(ys, count));
            xs.iter().zip(ys).map(|(x, y)| Vector2::new(*x, *y)).collect()
        };
        let scan = MeasurementScan { timestamp, sensor_id, measurements };
        let found = filter.filter.step(timestamp, &[scan]).map_err(|e| Failure::new(RlmbStatus::Filter, e))?;
        *out_count = found.len();
        if found.len() > capacity {
            return Err(Failure::new(
                RlmbStatus::BufferTooSmall,
                format!("{} estimates do not fit in {capacity}", found.len()),
            ));
        }
        if !found.is_empty() {
            if estimates.is_null() {
                return Err(null("estimates"));
            }
            for (i, e) in found.iter().enumerate() {
                *estimates.add(i) = RlmbEstimate::from(e);
            }
        }
        Ok(())
    })
}

/// Number of Bernoulli tracks currently held, extracted or not.
///
/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rlmb_filter_track_count(filter: *const RlmbFilter) -> usize {
    filter.as_ref().map_or(0, |f| f.filter.density().len())
}

/// Serializes the filter state as JSON into `*out`; free with [`rlmb_string_free`].
///
/// # Safety
/// `filter` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rlmb_filter_checkpoint_json(filter: *const RlmbFilter, out: *mut *mut c_char) -> RlmbStatus {
    guard(|| {
        let filter = filter.as_ref().ok_or_else(|| null("filter"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = filter.filter.checkpoint_json().map_err(|e| Failure::new(RlmbStatus::Filter, e))?;
        *out = CString::new(json).map_err(|e| Failure::new(RlmbStatus::Filter, e))?.into_raw();
        Ok(())
    })
}

/// Replaces the filter state with a checkpoint produced by
/// [`rlmb_filter_checkpoint_json`].
///
/// # Safety
/// `filter` must be live; `json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rlmb_filter_restore_json(filter: *mut RlmbFilter, json: *const c_char) -> RlmbStatus {
    guard(|| {
        let filter = filter.as_mut().ok_or_else(|| null("filter"))?;
        let text = str_arg(json, "json")?.ok_or_else(|| null("json"))?;
        let checkpoint = serde_json::from_str(text).map_err(|e| Failure::new(RlmbStatus::Parse, e))?;
        filter.filter.restore(checkpoint);
        Ok(())
    })
}
