//! C ABI over the haptic shared-control engine.
//!
//! Every function returns a [`VsStatus`]; results come back through out
//! pointers. Objects are opaque handles created by `*_new` and released by
//! the matching `*_free`. After a failure, [`vs_last_error`] describes it
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vibroshield::cbf::{build_constraints, project_intersection, GRADIENT_EPS};
use vibroshield::feedback::{render_feedback, render_global_force, ActuatorLayout, FeedbackConfig, NUM_ACTUATORS};
use vibroshield::layout::io::read_layout;
use vibroshield::protocol::{self, ChainConfig, ChainMessage, ProtocolError};
use vibroshield::{CbfGains, SafetyField, SolverError, UavState, Vec3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A violated constraint has no usable gradient.
    Infeasible = 3,
    NotConverged = 4,
    OutOfRange = 5,
    Framing = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsState {
    pub q: VsVec3,
    pub qdot: VsVec3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VsChainMessage {
    /// Hops remaining, 0..=127.
    pub address: u8,
    pub start: bool,
    /// 0..=15
    pub intensity_level: u8,
    /// 0..=7
    pub frequency_index: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsEngineConfig {
    pub k1: f64,
    pub k2: f64,
    pub k_v: f64,
    pub i_max: f64,
    pub frequency_index: u8,
}

/// Output of one rendering pass.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsFrame {
    pub levels: [u8; 32],
    pub intensities: [f64; 32],
    pub frequency_index: u8,
    /// Obstacles whose constraint could not be evaluated.
    pub skipped: usize,
}

/// Opaque list of safety fields.
pub struct VsFieldSet {
    fields: Vec<SafetyField>,
}

/// Opaque renderer: an actuator layout plus feedback gains.
pub struct VsEngine {
    layout: ActuatorLayout,
    cfg: FeedbackConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: VsStatus, msg: impl Into<String>) -> VsStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> VsStatus) -> VsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(VsStatus::Panic, "internal panic"),
    }
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(VsStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(VsStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

impl From<VsVec3> for Vec3 {
    fn from(v: VsVec3) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

impl From<Vec3> for VsVec3 {
    fn from(v: Vec3) -> Self {
        VsVec3 { x: v.x, y: v.y, z: v.z }
    }
}

impl From<VsState> for UavState {
    fn from(s: VsState) -> Self {
        UavState {
            q: s.q.into(),
            qdot: s.qdot.into(),
        }
    }
}

fn solver_status(e: &SolverError) -> VsStatus {
    let status = match e {
        SolverError::InfeasibleDegenerate { .. } => VsStatus::Infeasible,
        SolverError::NotConverged { .. } => VsStatus::NotConverged,
        SolverError::Geometry(_) | SolverError::Empty | SolverError::InvalidGains(_) => VsStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn protocol_status(e: &ProtocolError) -> VsStatus {
    let status = match e {
        ProtocolError::Range { .. } => VsStatus::OutOfRange,
        ProtocolError::Framing(_) => VsStatus::Framing,
    };
    fail(status, e.to_string())
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

// ---------------------------------------------------------------- fields

#[no_mangle]
pub extern "C" fn vs_fields_new() -> *mut VsFieldSet {
    Box::into_raw(Box::new(VsFieldSet { fields: Vec::new() }))
}

/// # Safety
/// `set` must come from [`vs_fields_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vs_fields_free(set: *mut VsFieldSet) {
    if !set.is_null() {
        drop(unsafe { Box::from_raw(set) });
    }
}

fn push_field(set: *mut VsFieldSet, field: Result<SafetyField, vibroshield::geometry::GeometryError>) -> VsStatus {
    guard(|| {
        let set = deref_mut!(set);
        match field {
            Ok(f) => {
                set.fields.push(f);
                VsStatus::Ok
            }
            Err(e) => fail(VsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Half-space `normal . (q - point) >= 0`.
///
/// # Safety
/// `set` must be a live handle from [`vs_fields_new`].
#[no_mangle]
pub unsafe extern "C" fn vs_fields_add_plane(set: *mut VsFieldSet, point: VsVec3, normal: VsVec3) -> VsStatus {
    push_field(set, SafetyField::plane(point.into(), normal.into()))
}

/// Even `exponent` >= 2; outside the body `h > 0`.
///
/// # Safety
/// `set` must be a live handle from [`vs_fields_new`].
#[no_mangle]
pub unsafe extern "C" fn vs_fields_add_superellipsoid(
    set: *mut VsFieldSet,
    center: VsVec3,
    scale: VsVec3,
    exponent: u32,
) -> VsStatus {
    push_field(set, SafetyField::superellipsoid(center.into(), scale.into(), exponent))
}

/// # Safety
/// `set` must be a live handle from [`vs_fields_new`].
#[no_mangle]
pub unsafe extern "C" fn vs_fields_add_sphere_margin(set: *mut VsFieldSet, center: VsVec3, d_min: f64) -> VsStatus {
    push_field(set, SafetyField::sphere_margin(center.into(), d_min))
}

/// # Safety
/// `set` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_fields_len(set: *const VsFieldSet, out_len: *mut usize) -> VsStatus {
    guard(|| {
        let set = deref!(set);
        *deref_mut!(out_len) = set.fields.len();
        VsStatus::Ok
    })
}

/// Barrier value, gradient and row-major Hessian of field `index` at `q`.
/// `out_hess` may be null.
///
/// # Safety
/// `set` must be a live handle; `out_h` and `out_grad` must be writable;
/// a non-null `out_hess` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vs_field_eval(
    set: *const VsFieldSet,
    index: usize,
    q: VsVec3,
    out_h: *mut f64,
    out_grad: *mut VsVec3,
    out_hess: *mut f64,
) -> VsStatus {
    guard(|| {
        let set = deref!(set);
        let Some(field) = set.fields.get(index) else {
            return fail(VsStatus::OutOfRange, format!("field index {index} of {}", set.fields.len()));
        };
        let out_h = deref_mut!(out_h);
        let out_grad = deref_mut!(out_grad);
        let q: Vec3 = q.into();
        let grad = match field.grad_h(&q) {
            Ok(g) => g,
            Err(e) => return fail(VsStatus::InvalidArgument, e.to_string()),
        };
        *out_h = field.eval_h(&q);
        *out_grad = grad.into();
        if !out_hess.is_null() {
            let hess = match field.hess_h(&q) {
                Ok(h) => h,
                Err(e) => return fail(VsStatus::InvalidArgument, e.to_string()),
            };
            let out = unsafe { std::slice::from_raw_parts_mut(out_hess, 9) };
            for r in 0..3 {
                for c in 0..3 {
                    out[3 * r + c] = hess[(r, c)];
                }
            }
        }
        VsStatus::Ok
    })
}

// ---------------------------------------------------------------- engine

#[no_mangle]
pub extern "C" fn vs_engine_config_default() -> VsEngineConfig {
    let d = FeedbackConfig::default();
    VsEngineConfig {
        k1: d.gains.k1,
        k2: d.gains.k2,
        k_v: d.k_v,
        i_max: d.i_max,
        frequency_index: d.frequency_index,
    }
}

/// Engine with the canonical 32-direction layout.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_new(cfg: VsEngineConfig, out: *mut *mut VsEngine) -> VsStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = ptr::null_mut();
        let gains = match CbfGains::new(cfg.k1, cfg.k2) {
            Ok(g) => g,
            Err(e) => return fail(VsStatus::InvalidArgument, e.to_string()),
        };
        if !(cfg.k_v > 0.0 && cfg.i_max > 0.0 && cfg.k_v.is_finite() && cfg.i_max.is_finite()) {
            return fail(VsStatus::InvalidArgument, "k_v and i_max must be positive");
        }
        if cfg.frequency_index > protocol::MAX_FREQUENCY_INDEX {
            return fail(VsStatus::OutOfRange, "frequency_index above 7");
        }
        let engine = VsEngine {
            layout: ActuatorLayout::canonical(),
            cfg: FeedbackConfig {
                gains,
                k_v: cfg.k_v,
                i_max: cfg.i_max,
                frequency_index: cfg.frequency_index,
            },
        };
        *out = Box::into_raw(Box::new(engine));
        VsStatus::Ok
    })
}

/// Replaces the layout with one read from a layout CSV file.
///
/// # Safety
/// `engine` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_load_layout(engine: *mut VsEngine, path: *const c_char) -> VsStatus {
    guard(|| {
        let engine = deref_mut!(engine);
        if path.is_null() {
            return fail(VsStatus::NullPointer, "path is null");
        }
        let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
            return fail(VsStatus::InvalidArgument, "path is not UTF-8");
        };
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) => return fail(VsStatus::Io, format!("{path}: {e}")),
        };
        match read_layout(file) {
            Ok(layout) => {
                engine.layout = layout;
                VsStatus::Ok
            }
            Err(e) => fail(VsStatus::InvalidArgument, format!("{path}: {e}")),
        }
    })
}

/// # Safety
/// `engine` must come from [`vs_engine_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_free(engine: *mut VsEngine) {
    if !engine.is_null() {
        drop(unsafe { Box::from_raw(engine) });
    }
}

/// Per-obstacle rendering of `u_ref` onto the actuators.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_render(
    engine: *const VsEngine,
    fields: *const VsFieldSet,
    state: VsState,
    yaw: f64,
    u_ref: VsVec3,
    out: *mut VsFrame,
) -> VsStatus {
    guard(|| {
        let engine = deref!(engine);
        let fields = deref!(fields);
        let out = deref_mut!(out);
        let frame = render_feedback(
            &state.into(),
            yaw,
            &u_ref.into(),
            &fields.fields,
            &engine.layout,
            &engine.cfg,
        );
        let mut levels = [0u8; 32];
        levels.copy_from_slice(&frame.levels[..NUM_ACTUATORS]);
        let mut intensities = [0.0; 32];
        intensities.copy_from_slice(&frame.intensities[..NUM_ACTUATORS]);
        *out = VsFrame {
            levels,
            intensities,
            frequency_index: frame.frequency_index,
            skipped: frame.skipped.len(),
        };
        VsStatus::Ok
    })
}

/// Minimum-norm input satisfying every barrier constraint at once.
/// Fields whose gradient is undefined at the current position are skipped.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_safe_input(
    engine: *const VsEngine,
    fields: *const VsFieldSet,
    state: VsState,
    u_ref: VsVec3,
    out: *mut VsVec3,
) -> VsStatus {
    guard(|| {
        let engine = deref!(engine);
        let fields = deref!(fields);
        let out = deref_mut!(out);
        let u: Vec3 = u_ref.into();
        let (cs, _) = build_constraints(&fields.fields, &state.into(), &engine.cfg.gains);
        let usable: Vec<_> = cs
            .into_iter()
            .filter(|c| c.a.norm() > GRADIENT_EPS || c.b > 0.0)
            .collect();
        if usable.is_empty() {
            *out = u_ref;
            return VsStatus::Ok;
        }
        match project_intersection(&u, &usable) {
            Ok(s) => {
                *out = s.u_safe.into();
                VsStatus::Ok
            }
            Err(e) => {
                if let SolverError::NotConverged { best, .. } = e {
                    *out = best.into();
                }
                solver_status(&e)
            }
        }
    })
}

/// Single force vector for a force-feedback device.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_global_force(
    engine: *const VsEngine,
    fields: *const VsFieldSet,
    state: VsState,
    u_ref: VsVec3,
    out: *mut VsVec3,
) -> VsStatus {
    guard(|| {
        let engine = deref!(engine);
        let fields = deref!(fields);
        let out = deref_mut!(out);
        match render_global_force(&state.into(), &u_ref.into(), &fields.fields, &engine.cfg) {
            Ok(f) => {
                *out = f.into();
                VsStatus::Ok
            }
            Err(e) => solver_status(&e),
        }
    })
}

// ---------------------------------------------------------------- protocol

/// # Safety
/// `out` must point to 2 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vs_protocol_encode(msg: VsChainMessage, out: *mut u8) -> VsStatus {
    guard(|| {
        if out.is_null() {
            return fail(VsStatus::NullPointer, "out is null");
        }
        let m = ChainMessage {
            address: msg.address,
            start: msg.start,
            intensity_level: msg.intensity_level,
            frequency_index: msg.frequency_index,
        };
        match protocol::encode(&m) {
            Ok(bytes) => {
                unsafe { ptr::copy_nonoverlapping(bytes.as_ptr(), out, 2) };
                VsStatus::Ok
            }
            Err(e) => protocol_status(&e),
        }
    })
}

/// # Safety
/// `bytes` must point to 2 readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_protocol_decode(bytes: *const u8, out: *mut VsChainMessage) -> VsStatus {
    guard(|| {
        if bytes.is_null() {
            return fail(VsStatus::NullPointer, "bytes is null");
        }
        let out = deref_mut!(out);
        let raw = unsafe { [*bytes, *bytes.add(1)] };
        match protocol::decode(raw) {
            Ok(m) => {
                *out = VsChainMessage {
                    address: m.address,
                    start: m.start,
                    intensity_level: m.intensity_level,
                    frequency_index: m.frequency_index,
                };
                VsStatus::Ok
            }
            Err(e) => protocol_status(&e),
        }
    })
}

/// Microseconds for a message to reach unit `target` (1-based) of a chain
/// of `units` with the default hop latency.
///
/// # Safety
/// `out_us` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_chain_latency_us(units: usize, target: usize, out_us: *mut u64) -> VsStatus {
    guard(|| {
        let out = deref_mut!(out_us);
        let cfg = ChainConfig {
            units,
            ..ChainConfig::default()
        };
        match protocol::chain_latency(&cfg, target) {
            Ok(d) => {
                *out = d.as_micros() as u64;
                VsStatus::Ok
            }
            Err(e) => protocol_status(&e),
        }
    })
}
