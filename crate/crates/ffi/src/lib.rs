//! C ABI over the scenebench core.
//!
//! Every fallible call returns an [`SbStatus`]. On anything but `SB_STATUS_OK` the
//! message is available from [`sb_last_error`] on the same thread until the
//! next failing call. Objects cross the boundary as opaque handles that must
//! be released with their matching `*_free` function; strings returned by the
//! library are released with [`sb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenebench::genpipe::{scene_from_plan, SceneGenConfig};
use scenebench::geometry::{obb_overlap, quat_geodesic, Obb, Quat, TableBounds, Vec3};
use scenebench::placement::{feedback_message, settle_and_check, FailureReport};
use scenebench::scene_model::{parse_scene, serialize_scene, Catalog, Scene};
use scenebench::task_model::{graded_score, parse_task_spec, success, EvalContext, SceneState, TaskSpec};
use scenebench::trajectory::sparc;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    /// The operation ran but did not produce a result, e.g. a plan that could
    /// not be realized. The error text is the feedback message.
    Failed = 4,
    Panic = 5,
}

/// Table top rectangle and height, in meters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_top: f64,
}

/// Yawed box: center, full dimensions and yaw in radians.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbBox {
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
}

pub struct SbCatalog(Catalog);
pub struct SbScene(Scene);
pub struct SbTask(TaskSpec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Error(SbStatus, String);

impl Error {
    fn input(msg: impl ToString) -> Self {
        Error(SbStatus::InvalidInput, msg.to_string())
    }
}

type Res<T> = Result<T, Error>;

fn guard(f: impl FnOnce() -> Res<()>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err(Error(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            SbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(Error(SbStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Error(SbStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| Error(SbStatus::NullArgument, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Res<()> {
    if out.is_null() {
        return Err(Error(SbStatus::NullArgument, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a catalog from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_catalog_from_json(json: *const c_char, out: *mut *mut SbCatalog) -> SbStatus {
    guard(|| {
        let catalog = Catalog::from_json(text(json, "json")?).map_err(Error::input)?;
        write_out(out, Box::into_raw(Box::new(SbCatalog(catalog))), "out")
    })
}

/// # Safety
/// `catalog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_catalog_free(catalog: *mut SbCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_catalog_len(catalog: *const SbCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_scene_from_json(json: *const c_char, out: *mut *mut SbScene) -> SbStatus {
    guard(|| {
        let scene = parse_scene(text(json, "json")?).map_err(Error::input)?;
        write_out(out, Box::into_raw(Box::new(SbScene(scene))), "out")
    })
}

/// Builds a checked scene from a plan: validation, layout, placement and the
/// settle check. With `SB_STATUS_FAILED` the last error holds the feedback.
///
/// # Safety
/// `plan_json` must be a NUL-terminated string; `catalog` and `bounds` must be
/// valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_scene_from_plan(
    plan_json: *const c_char,
    catalog: *const SbCatalog,
    bounds: *const SbBounds,
    seed: u64,
    out: *mut *mut SbScene,
) -> SbStatus {
    guard(|| {
        let plan = text(plan_json, "plan_json")?;
        let catalog = &deref(catalog, "catalog")?.0;
        let b = deref(bounds, "bounds")?;
        let bounds = TableBounds::new(b.x_min, b.x_max, b.y_min, b.y_max, b.z_top).map_err(Error::input)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = scene_from_plan(plan, catalog, &bounds, &SceneGenConfig::default(), &mut rng)
            .map_err(|feedback| Error(SbStatus::Failed, feedback))?;
        write_out(out, Box::into_raw(Box::new(SbScene(scene))), "out")
    })
}

/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_scene_free(scene: *mut SbScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Canonical JSON text; free with `sb_string_free`.
///
/// # Safety
/// `scene` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_scene_to_json(scene: *const SbScene, out: *mut *mut c_char) -> SbStatus {
    guard(|| {
        let json = serialize_scene(&deref(scene, "scene")?.0);
        write_out(out, owned_string(json), "out")
    })
}

/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_scene_object_count(scene: *const SbScene) -> usize {
    scene.as_ref().map_or(0, |s| s.0.placements.len())
}

/// Counts overlapping pairs among table-level objects at the given margin.
///
/// # Safety
/// `scene` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_scene_collision_count(scene: *const SbScene, margin: f64, out: *mut usize) -> SbStatus {
    guard(|| {
        let scene = &deref(scene, "scene")?.0;
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(Error::input("margin must be finite and non-negative"));
        }
        let boxes: Vec<Obb> = scene.placements.iter().filter(|p| p.parent.is_none()).map(|p| p.obb()).collect();
        let mut count = 0;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                count += obb_overlap(&boxes[i], &boxes[j], margin) as usize;
            }
        }
        write_out(out, count, "out")
    })
}

/// Settles the scene and writes whether it is stable. When unstable and
/// `feedback` is non-null, the feedback message is written there (free with
/// `sb_string_free`); otherwise null is written.
///
/// # Safety
/// `scene` must be a live handle; `stable` must be writable; `feedback` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn sb_scene_check_stability(
    scene: *const SbScene,
    threshold: f64,
    stable: *mut bool,
    feedback: *mut *mut c_char,
) -> SbStatus {
    guard(|| {
        let scene = &deref(scene, "scene")?.0;
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::input("threshold must be finite and positive"));
        }
        let report = settle_and_check(scene, threshold);
        write_out(stable, report.stable, "stable")?;
        if !feedback.is_null() {
            let msg = feedback_message(FailureReport::Stability(&report));
            feedback.write(msg.map_or(ptr::null_mut(), owned_string));
        }
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_task_from_json(json: *const c_char, out: *mut *mut SbTask) -> SbStatus {
    guard(|| {
        let task = parse_task_spec(text(json, "json")?).map_err(Error::input)?;
        write_out(out, Box::into_raw(Box::new(SbTask(task))), "out")
    })
}

/// # Safety
/// `task` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_task_free(task: *mut SbTask) {
    if !task.is_null() {
        drop(Box::from_raw(task));
    }
}

/// Graded score and success of a task over a state history. `history_json`
/// is a JSON array of states (oldest first, final state last); null scores
/// the scene's own initial state.
///
/// # Safety
/// `task` and `scene` must be live handles; `history_json` may be null;
/// `score` and `succeeded` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_task_score(
    task: *const SbTask,
    scene: *const SbScene,
    history_json: *const c_char,
    score: *mut f64,
    succeeded: *mut bool,
) -> SbStatus {
    guard(|| {
        let task = &deref(task, "task")?.0;
        let scene = &deref(scene, "scene")?.0;
        let history: Vec<SceneState> = if history_json.is_null() {
            vec![SceneState::from_scene(scene)]
        } else {
            serde_json::from_str(text(history_json, "history_json")?).map_err(Error::input)?
        };
        let ctx = EvalContext::from_scene(scene);
        let value = graded_score(task, &history, &ctx).map_err(Error::input)?;
        let ok = success(task, &history, &ctx).map_err(Error::input)?;
        write_out(score, value, "score")?;
        write_out(succeeded, ok, "succeeded")
    })
}

/// Geodesic angle between two rotations given as `[w, x, y, z]`. Inputs are
/// normalized first; a zero quaternion is rejected.
///
/// # Safety
/// `a` and `b` must point to four doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_quat_distance(a: *const [f64; 4], b: *const [f64; 4], out: *mut f64) -> SbStatus {
    guard(|| {
        let [aw, ax, ay, az] = *deref(a, "a")?;
        let [bw, bx, by, bz] = *deref(b, "b")?;
        let a = Quat::new(aw, ax, ay, az).normalized().map_err(Error::input)?;
        let b = Quat::new(bw, bx, by, bz).normalized().map_err(Error::input)?;
        let d = quat_geodesic(a, b).map_err(Error::input)?;
        write_out(out, d, "out")
    })
}

/// Whether two yawed boxes overlap once each is inflated by `margin`.
///
/// # Safety
/// `a` and `b` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_boxes_overlap(a: *const SbBox, b: *const SbBox, margin: f64, out: *mut bool) -> SbStatus {
    guard(|| {
        let to_obb = |s: &SbBox| Obb::from_dims(Vec3::from(s.center), Vec3::from(s.dims), s.yaw).map_err(Error::input);
        let (a, b) = (to_obb(deref(a, "a")?)?, to_obb(deref(b, "b")?)?);
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(Error::input("margin must be finite and non-negative"));
        }
        write_out(out, obb_overlap(&a, &b, margin), "out")
    })
}

/// Spectral arc-length smoothness of a uniformly sampled speed profile.
///
/// # Safety
/// `speeds` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_sparc(speeds: *const f64, len: usize, dt: f64, out: *mut f64) -> SbStatus {
    guard(|| {
        if speeds.is_null() {
            return Err(Error(SbStatus::NullArgument, "speeds is null".into()));
        }
        let v = std::slice::from_raw_parts(speeds, len);
        write_out(out, sparc(v, dt).map_err(Error::input)?, "out")
    })
}
