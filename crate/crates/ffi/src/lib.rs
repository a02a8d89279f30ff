//! C ABI for diva-core.
//!
//! Models are opaque handles created by `diva_model_*` constructors and
//! released with `diva_model_free`. Every fallible function returns a
//! [`DivaStatus`]; on failure a message for the calling thread is available
//! from `diva_last_error_message` until the next failing call.
//!
//! Array arguments are passed as pointer plus length. Output buffers are
//! caller-allocated.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use diva_core::peaks;
use diva_core::spectrum::{differentiate, Spectrum, SpectrumMeta, WavenumberGrid};
use diva_core::vae::{checkpoint, init_model, VaeModel};
use diva_core::DivaError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    Io = 4,
    Checkpoint = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque model handle.
pub struct DivaModel {
    inner: VaeModel,
}

/// One ranked peak of a derivative signal.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivaPeak {
    /// Interpolated positive-to-negative zero crossing.
    pub position: f64,
    pub rounded_index: usize,
    /// Sum of |D| between the bracketing crossings.
    pub area: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DivaStatus, msg: impl Into<String>) -> DivaStatus {
    set_error(msg);
    status
}

fn from_core(err: DivaError) -> DivaStatus {
    let status = match err.root() {
        DivaError::LengthMismatch { .. } | DivaError::GridMismatch(_) => DivaStatus::LengthMismatch,
        DivaError::Io { .. } => DivaStatus::Io,
        DivaError::Checkpoint(_) => DivaStatus::Checkpoint,
        _ => DivaStatus::InvalidArgument,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> DivaStatus) -> DivaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(DivaStatus::Panic, "internal panic"),
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize) -> Option<&'a mut [f64]> {
    if len == 0 {
        Some(&mut [])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts_mut(p, len))
    }
}

unsafe fn store_model(out: *mut *mut DivaModel, model: VaeModel) -> DivaStatus {
    *out = Box::into_raw(Box::new(DivaModel { inner: model }));
    DivaStatus::Ok
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn diva_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn diva_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Freshly initialized model with `input_dim` features.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn diva_model_init(
    input_dim: usize,
    seed: u64,
    out: *mut *mut DivaModel,
) -> DivaStatus {
    guard(|| {
        if out.is_null() {
            return fail(DivaStatus::NullPointer, "out is NULL");
        }
        match init_model(input_dim, seed) {
            Ok(m) => store_model(out, m),
            Err(e) => from_core(e),
        }
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn diva_model_load(
    path: *const c_char,
    out: *mut *mut DivaModel,
) -> DivaStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(DivaStatus::NullPointer, "path or out is NULL");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(DivaStatus::InvalidArgument, "path is not UTF-8");
        };
        match checkpoint::load(Path::new(path)) {
            Ok(m) => store_model(out, m),
            Err(e) => from_core(e),
        }
    })
}

/// Decodes a checkpoint held in memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn diva_model_from_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut DivaModel,
) -> DivaStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(DivaStatus::NullPointer, "data or out is NULL");
        }
        match checkpoint::from_bytes(std::slice::from_raw_parts(data, len)) {
            Ok(m) => store_model(out, m),
            Err(e) => from_core(e),
        }
    })
}

/// Writes a checkpoint file.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn diva_model_save(
    model: *const DivaModel,
    path: *const c_char,
) -> DivaStatus {
    guard(|| {
        if model.is_null() || path.is_null() {
            return fail(DivaStatus::NullPointer, "model or path is NULL");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(DivaStatus::InvalidArgument, "path is not UTF-8");
        };
        match checkpoint::save(&(*model).inner, Path::new(path)) {
            Ok(()) => DivaStatus::Ok,
            Err(e) => from_core(e),
        }
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `model` must come from a `diva_model_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn diva_model_free(model: *mut DivaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input features, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn diva_model_input_dim(model: *const DivaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}

/// Latent dimension, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn diva_model_latent_dim(model: *const DivaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.latent_dim())
}

/// Writes the 64-character hex checksum plus a NUL into `buf`.
///
/// # Safety
/// `model` must be a live handle and `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn diva_model_checksum(
    model: *const DivaModel,
    buf: *mut c_char,
    buf_len: usize,
) -> DivaStatus {
    guard(|| {
        if model.is_null() || buf.is_null() {
            return fail(DivaStatus::NullPointer, "model or buf is NULL");
        }
        let hex = checkpoint::checksum_hex(&(*model).inner);
        if buf_len < hex.len() + 1 {
            return fail(
                DivaStatus::BufferTooSmall,
                format!("need {} bytes", hex.len() + 1),
            );
        }
        ptr::copy_nonoverlapping(hex.as_ptr().cast::<c_char>(), buf, hex.len());
        *buf.add(hex.len()) = 0;
        DivaStatus::Ok
    })
}

/// Encoder means and log-variances of one input.
///
/// # Safety
/// `x` must hold `x_len` values; `mu` and `logvar` must each hold
/// `latent_len` values.
#[no_mangle]
pub unsafe extern "C" fn diva_model_encode(
    model: *const DivaModel,
    x: *const f64,
    x_len: usize,
    mu: *mut f64,
    logvar: *mut f64,
    latent_len: usize,
) -> DivaStatus {
    guard(|| {
        let (Some(m), Some(x), Some(mu), Some(lv)) = (
            model.as_ref(),
            slice(x, x_len),
            slice_mut(mu, latent_len),
            slice_mut(logvar, latent_len),
        ) else {
            return fail(DivaStatus::NullPointer, "NULL argument");
        };
        if latent_len != m.inner.latent_dim() {
            return fail(
                DivaStatus::LengthMismatch,
                format!(
                    "latent buffers hold {latent_len}, model has {}",
                    m.inner.latent_dim()
                ),
            );
        }
        match m.inner.encode(x) {
            Ok(s) => {
                mu.copy_from_slice(&s.mu);
                lv.copy_from_slice(&s.logvar);
                DivaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Decoder output for latent point `z`.
///
/// # Safety
/// `z` must hold `z_len` values and `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn diva_model_decode(
    model: *const DivaModel,
    z: *const f64,
    z_len: usize,
    out: *mut f64,
    out_len: usize,
) -> DivaStatus {
    guard(|| {
        let (Some(m), Some(z), Some(out)) =
            (model.as_ref(), slice(z, z_len), slice_mut(out, out_len))
        else {
            return fail(DivaStatus::NullPointer, "NULL argument");
        };
        if out_len != m.inner.input_dim() {
            return fail(
                DivaStatus::LengthMismatch,
                format!(
                    "output holds {out_len}, model produces {}",
                    m.inner.input_dim()
                ),
            );
        }
        match m.inner.decode(z) {
            Ok(v) => {
                out.copy_from_slice(&v);
                DivaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// First derivative of `values` on the uniform grid `grid` (both of length
/// `n`). Writes `n - 1` midpoints and derivative values.
///
/// # Safety
/// `grid` and `values` must hold `n` values; `out_grid` and `out_values`
/// must hold `n - 1`.
#[no_mangle]
pub unsafe extern "C" fn diva_differentiate(
    grid: *const f64,
    values: *const f64,
    n: usize,
    out_grid: *mut f64,
    out_values: *mut f64,
) -> DivaStatus {
    guard(|| {
        let m = n.saturating_sub(1);
        let (Some(g), Some(v), Some(og), Some(ov)) = (
            slice(grid, n),
            slice(values, n),
            slice_mut(out_grid, m),
            slice_mut(out_values, m),
        ) else {
            return fail(DivaStatus::NullPointer, "NULL argument");
        };
        let spectrum = WavenumberGrid::new(g.to_vec())
            .and_then(|g| Spectrum::new(g, v.to_vec(), SpectrumMeta::new("ffi", 0, 0)?))
            .and_then(|s| differentiate(&s));
        match spectrum {
            Ok(d) => {
                og.copy_from_slice(d.grid().values());
                ov.copy_from_slice(d.values());
                DivaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Ranks the peaks of a derivative signal by area, largest first. Writes
/// at most `capacity` peaks and stores the total number found in
/// `found`; pass `capacity = 0` to query the count.
///
/// # Safety
/// `grid` and `values` must hold `n` values, `out` must hold `capacity`
/// peaks and `found` must be valid.
#[no_mangle]
pub unsafe extern "C" fn diva_detect_peaks(
    grid: *const f64,
    values: *const f64,
    n: usize,
    out: *mut DivaPeak,
    capacity: usize,
    found: *mut usize,
) -> DivaStatus {
    guard(|| {
        let (Some(g), Some(v)) = (slice(grid, n), slice(values, n)) else {
            return fail(DivaStatus::NullPointer, "NULL argument");
        };
        if found.is_null() || (capacity > 0 && out.is_null()) {
            return fail(DivaStatus::NullPointer, "out or found is NULL");
        }
        if g.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
            return fail(
                DivaStatus::InvalidArgument,
                "grid must increase and values must be finite",
            );
        }
        let ranked = peaks::detect(g, v);
        *found = ranked.records.len();
        for (i, r) in ranked.records.iter().take(capacity).enumerate() {
            *out.add(i) = DivaPeak {
                position: r.position,
                rounded_index: r.rounded_index,
                area: r.area,
            };
        }
        DivaStatus::Ok
    })
}
