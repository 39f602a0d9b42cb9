//! C ABI for `strain-iqa`.
//!
//! Objects are opaque handles created by `sia_*_new`/`sia_*_load` functions
//! and released with the matching `sia_*_free`. Every fallible function
//! returns a [`SiaStatus`] and writes its result through an out-pointer only on
//! success. After a failure, [`sia_last_error_message`] describes it; the
//! message is per thread. Panics never cross the boundary: they are reported
//! as `SIA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use strain_iqa::connectivity::{self, ConnectivityKernel, DogProfile, GaussianProfile};
use strain_iqa::regression::{self, TileJacobian};
use strain_iqa::{baselines, corpus, stats, Error, GrayImage};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Io = 3,
    Decode = 4,
    Shape = 5,
    Degenerate = 6,
    Invariant = 7,
    Parse = 8,
    Panic = 9,
}

impl From<&Error> for SiaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Shape(_) => SiaStatus::Shape,
            Error::InvalidParameter(_) => SiaStatus::InvalidParameter,
            Error::Degenerate(_) => SiaStatus::Degenerate,
            Error::Io { .. } => SiaStatus::Io,
            Error::Decode { .. } => SiaStatus::Decode,
            Error::Parse { .. } => SiaStatus::Parse,
            Error::Invariant(_) => SiaStatus::Invariant,
        }
    }
}

/// Grayscale image.
pub struct SiaImage {
    inner: GrayImage,
}

/// Connectivity kernel (Gaussian or difference of Gaussians).
pub struct SiaKernel {
    inner: ConnectivityKernel,
}

/// 64×64 tile Jacobian.
pub struct SiaJacobian {
    inner: TileJacobian,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(SiaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SiaStatus::from(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(SiaStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SiaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SiaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SiaStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes a handle from this library or null
    unsafe { p.as_ref() }.ok_or_else(|| null(name))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: non-null, caller guarantees it is writable
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    // SAFETY: caller guarantees a nul-terminated string
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(SiaStatus::InvalidParameter, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    // SAFETY: caller guarantees `n` readable doubles
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sia_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sia_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Creates an image from `width * height` row-major luminance values.
///
/// # Safety
/// `values` must point to `width * height` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_image_new(width: usize, height: usize, values: *const f64, out: *mut *mut SiaImage) -> SiaStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure(SiaStatus::InvalidParameter, "image dimensions overflow".into()))?;
        let v = unsafe { slice_arg(values, n, "values") }?;
        let img = GrayImage::new(width, height, v.to_vec())?;
        unsafe { write(out, Box::into_raw(Box::new(SiaImage { inner: img }))) }
    })
}

/// Decodes a PNG, PGM/PPM or JPEG file to grayscale, optionally applying the
/// per-image luminance stretch to [0, 255].
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_image_load(path: *const c_char, stretch: bool, out: *mut *mut SiaImage) -> SiaStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        let mut img = corpus::load_gray(&path)?;
        if stretch {
            img = corpus::luminance_stretch(&img).image;
        }
        unsafe { write(out, Box::into_raw(Box::new(SiaImage { inner: img }))) }
    })
}

/// # Safety
/// `image` must be a live handle; `width` and `height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_image_dimensions(image: *const SiaImage, width: *mut usize, height: *mut usize) -> SiaStatus {
    guard(|| {
        let img = unsafe { deref(image, "image") }?;
        if width.is_null() || height.is_null() {
            return Err(null("out"));
        }
        unsafe {
            write(width, img.inner.width())?;
            write(height, img.inner.height())
        }
    })
}

/// # Safety
/// `image` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sia_image_free(image: *mut SiaImage) {
    if !image.is_null() {
        // SAFETY: handle was created by Box::into_raw in this library
        drop(unsafe { Box::from_raw(image) });
    }
}

fn new_kernel(profile: impl Into<connectivity::Profile>, threshold: f64) -> Result<*mut SiaKernel, Failure> {
    let kernel = connectivity::build_kernel(profile, threshold)?;
    Ok(Box::into_raw(Box::new(SiaKernel { inner: kernel })))
}

/// Gaussian connectivity kernel. Pass `threshold <= 0` for the default 1e-4.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_kernel_gaussian(sigma: f64, threshold: f64, out: *mut *mut SiaKernel) -> SiaStatus {
    guard(|| {
        let thr = if threshold > 0.0 { threshold } else { connectivity::DEFAULT_TRUNCATION };
        let k = new_kernel(GaussianProfile::new(sigma)?, thr)?;
        unsafe { write(out, k) }
    })
}

/// Difference-of-Gaussians kernel. Pass `threshold <= 0` for the default 1e-4.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_kernel_dog(
    sigma_center: f64,
    sigma_surround: f64,
    alpha: f64,
    threshold: f64,
    out: *mut *mut SiaKernel,
) -> SiaStatus {
    guard(|| {
        let thr = if threshold > 0.0 { threshold } else { connectivity::DEFAULT_TRUNCATION };
        let k = new_kernel(DogProfile::new(sigma_center, sigma_surround, alpha)?, thr)?;
        unsafe { write(out, k) }
    })
}

/// # Safety
/// `kernel` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_kernel_radius(kernel: *const SiaKernel, out: *mut usize) -> SiaStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        unsafe { write(out, k.inner.radius()) }
    })
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sia_kernel_free(kernel: *mut SiaKernel) {
    if !kernel.is_null() {
        // SAFETY: handle was created by Box::into_raw in this library
        drop(unsafe { Box::from_raw(kernel) });
    }
}

unsafe fn pair<'a>(reference: *const SiaImage, degraded: *const SiaImage) -> Result<(&'a GrayImage, &'a GrayImage), Failure> {
    unsafe { Ok((&deref(reference, "reference")?.inner, &deref(degraded, "degraded")?.inner)) }
}

/// Strained squared distance `‖W(deg − ref)‖²` for a connectivity kernel.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_score_pair(
    reference: *const SiaImage,
    degraded: *const SiaImage,
    kernel: *const SiaKernel,
    out: *mut f64,
) -> SiaStatus {
    guard(|| {
        let (r, d) = unsafe { pair(reference, degraded) }?;
        let k = unsafe { deref(kernel, "kernel") }?;
        unsafe { write(out, connectivity::score_pair(r, d, &k.inner)?) }
    })
}

/// Squared Euclidean distance.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_euclidean(reference: *const SiaImage, degraded: *const SiaImage, out: *mut f64) -> SiaStatus {
    guard(|| {
        let (r, d) = unsafe { pair(reference, degraded) }?;
        unsafe { write(out, baselines::euclidean_metric(r, d)?) }
    })
}

/// Mean SSIM with the default 11×11, σ = 1.5 window and L = 255.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_ssim(reference: *const SiaImage, degraded: *const SiaImage, out: *mut f64) -> SiaStatus {
    guard(|| {
        let (r, d) = unsafe { pair(reference, degraded) }?;
        unsafe { write(out, baselines::ssim(r, d, &Default::default())?) }
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_jacobian_identity(out: *mut *mut SiaJacobian) -> SiaStatus {
    guard(|| unsafe {
        write(
            out,
            Box::into_raw(Box::new(SiaJacobian {
                inner: TileJacobian::identity(),
            })),
        )
    })
}

/// Loads a tile Jacobian file written by `strain-iqa train`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_jacobian_load(path: *const c_char, out: *mut *mut SiaJacobian) -> SiaStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        let j = regression::load_jacobian(&path)?;
        unsafe { write(out, Box::into_raw(Box::new(SiaJacobian { inner: j }))) }
    })
}

/// Entry `(row, col)` of the 64×64 matrix.
///
/// # Safety
/// `jacobian` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_jacobian_get(jacobian: *const SiaJacobian, row: usize, col: usize, out: *mut f64) -> SiaStatus {
    guard(|| {
        let j = unsafe { deref(jacobian, "jacobian") }?;
        if row >= regression::TILE_DIM || col >= regression::TILE_DIM {
            return Err(Failure(SiaStatus::InvalidParameter, format!("index ({row}, {col}) outside 64x64")));
        }
        unsafe { write(out, j.inner.get(row, col)) }
    })
}

/// # Safety
/// `jacobian` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sia_jacobian_free(jacobian: *mut SiaJacobian) {
    if !jacobian.is_null() {
        // SAFETY: handle was created by Box::into_raw in this library
        drop(unsafe { Box::from_raw(jacobian) });
    }
}

/// Sum over 8×8 tiles of `‖J·Δ_tile‖²`. Image sides must be multiples of 8.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_tiled_distance(
    reference: *const SiaImage,
    degraded: *const SiaImage,
    jacobian: *const SiaJacobian,
    out: *mut f64,
) -> SiaStatus {
    guard(|| {
        let (r, d) = unsafe { pair(reference, degraded) }?;
        let j = unsafe { deref(jacobian, "jacobian") }?;
        unsafe { write(out, regression::tiled_distance(r, d, &j.inner)?) }
    })
}

/// Sample Pearson correlation of two length-`n` series.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> SiaStatus {
    guard(|| {
        let (x, y) = unsafe { (slice_arg(x, n, "x")?, slice_arg(y, n, "y")?) };
        unsafe { write(out, stats::pearson(x, y)?) }
    })
}

/// Spearman rank correlation (average ranks for ties).
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sia_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> SiaStatus {
    guard(|| {
        let (x, y) = unsafe { (slice_arg(x, n, "x")?, slice_arg(y, n, "y")?) };
        unsafe { write(out, stats::spearman(x, y)?) }
    })
}
