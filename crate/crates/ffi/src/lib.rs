//! C ABI over the glycopipe library.
//!
//! Every fallible function returns a [`GlycoStatus`]; on failure a message is
//! kept per thread and can be read with [`glyco_last_error`]. Objects are
//! opaque handles created by `*_load`/`*_generate` functions and released by
//! the matching `*_free`. Passing a null handle to `*_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use glycopipe::checkpoint::Checkpoint;
use glycopipe::distributed::ring_allreduce;
use glycopipe::model::{load_model, FusionModel};
use glycopipe::privacy::{keypair_from_checkpoint, keypair_to_checkpoint, Ciphertext, FixedPointCodec, PaillierKeypair};
use glycopipe::{rng, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlycoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Crypto = 5,
    Shape = 6,
    Panic = 7,
}

/// A trained fusion model.
pub struct GlycoModel(FusionModel);

/// A Paillier key pair with its fixed-point codec.
pub struct GlycoKeypair {
    keypair: PaillierKeypair,
    codec: FixedPointCodec,
}

/// A Paillier ciphertext together with the number of encodings it sums.
pub struct GlycoCiphertext {
    value: Ciphertext,
    terms: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GlycoStatus {
    match e {
        Error::Io(_) => GlycoStatus::Io,
        Error::Format(_) | Error::Csv(_) => GlycoStatus::Format,
        Error::Crypto(_) | Error::CodecOverflow { .. } => GlycoStatus::Crypto,
        Error::Shape(_) => GlycoStatus::Shape,
        _ => GlycoStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (GlycoStatus, String)>) -> GlycoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GlycoStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GlycoStatus::Panic
        }
    }
}

fn lift<T>(r: glycopipe::Result<T>) -> Result<T, (GlycoStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (GlycoStatus, String) {
    (GlycoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (GlycoStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (GlycoStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (GlycoStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn glyco_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn glyco_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn glyco_model_load(path: *const c_char, out: *mut *mut GlycoModel) -> GlycoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = lift(load_model(&path_arg(path)?))?;
        *out = Box::into_raw(Box::new(GlycoModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `glyco_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn glyco_model_free(model: *mut GlycoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of static features the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn glyco_model_static_dim(model: *const GlycoModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.static_dim)
}

/// Predicted probability for one patient.
///
/// # Safety
/// `statics` must point to `n_statics` doubles, `series` to `n_series`
/// doubles, and `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn glyco_model_predict(
    model: *const GlycoModel,
    statics: *const f64,
    n_statics: usize,
    series: *const f64,
    n_series: usize,
    out: *mut f64,
) -> GlycoStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = slice_arg(statics, n_statics, "statics")?;
        let t = slice_arg(series, n_series, "series")?;
        *out = lift(m.0.predict(s, t))?;
        Ok(())
    })
}

/// Generates a key pair whose modulus has exactly `bits` bits.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn glyco_keypair_generate(bits: u64, seed: u64, out: *mut *mut GlycoKeypair) -> GlycoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let keypair = lift(PaillierKeypair::generate_seeded(bits, seed))?;
        let codec = lift(FixedPointCodec::for_key(&keypair.public))?;
        *out = Box::into_raw(Box::new(GlycoKeypair { keypair, codec }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn glyco_keypair_load(path: *const c_char, out: *mut *mut GlycoKeypair) -> GlycoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ck = lift(Checkpoint::read(&path_arg(path)?))?;
        let keypair = lift(keypair_from_checkpoint(&ck))?;
        let codec = lift(FixedPointCodec::for_key(&keypair.public))?;
        *out = Box::into_raw(Box::new(GlycoKeypair { keypair, codec }));
        Ok(())
    })
}

/// # Safety
/// `kp` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn glyco_keypair_save(kp: *const GlycoKeypair, path: *const c_char) -> GlycoStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(|| null("keypair"))?;
        lift(keypair_to_checkpoint(&kp.keypair).write(&path_arg(path)?))
    })
}

/// Bit length of the public modulus, or 0 for a null handle.
///
/// # Safety
/// `kp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn glyco_keypair_bits(kp: *const GlycoKeypair) -> u64 {
    kp.as_ref().map_or(0, |k| k.keypair.public.key_bits)
}

/// # Safety
/// `kp` must come from a `glyco_keypair_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn glyco_keypair_free(kp: *mut GlycoKeypair) {
    if !kp.is_null() {
        drop(Box::from_raw(kp));
    }
}

/// Encrypts a real number through the fixed-point codec. The nonce is
/// drawn from a generator seeded with `seed`.
///
/// # Safety
/// `kp` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn glyco_encrypt(kp: *const GlycoKeypair, value: f64, seed: u64, out: *mut *mut GlycoCiphertext) -> GlycoStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(|| null("keypair"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = lift(kp.codec.encode(value))?;
        let c = lift(kp.keypair.public.encrypt(&m, &mut rng::seeded(seed)))?;
        *out = Box::into_raw(Box::new(GlycoCiphertext { value: c, terms: 1 }));
        Ok(())
    })
}

/// Homomorphic sum of two ciphertexts under the same key.
///
/// # Safety
/// All handles must be live and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn glyco_ciphertext_add(
    kp: *const GlycoKeypair,
    a: *const GlycoCiphertext,
    b: *const GlycoCiphertext,
    out: *mut *mut GlycoCiphertext,
) -> GlycoStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(|| null("keypair"))?;
        let (a, b) = (a.as_ref().ok_or_else(|| null("a"))?, b.as_ref().ok_or_else(|| null("b"))?);
        if out.is_null() {
            return Err(null("out"));
        }
        let value = kp.keypair.public.add(&a.value, &b.value);
        *out = Box::into_raw(Box::new(GlycoCiphertext { value, terms: a.terms + b.terms }));
        Ok(())
    })
}

/// Decrypts and decodes a ciphertext to a real number.
///
/// # Safety
/// Handles must be live and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn glyco_decrypt(kp: *const GlycoKeypair, c: *const GlycoCiphertext, out: *mut f64) -> GlycoStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(|| null("keypair"))?;
        let c = c.as_ref().ok_or_else(|| null("ciphertext"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = lift(kp.keypair.decrypt(&c.value))?;
        *out = lift(kp.codec.decode(&m, c.terms))?;
        Ok(())
    })
}

/// # Safety
/// `c` must come from an encrypt/add call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn glyco_ciphertext_free(c: *mut GlycoCiphertext) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Ring all-reduce over `workers` row-major vectors of length `len`;
/// writes the elementwise sum to `out` (length `len`).
///
/// # Safety
/// `data` must point to `workers * len` doubles and `out` to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn glyco_ring_allreduce(data: *const f64, workers: usize, len: usize, out: *mut f64) -> GlycoStatus {
    guard(|| {
        if workers == 0 {
            return Err((GlycoStatus::InvalidArgument, "need at least one worker".into()));
        }
        let total = workers.checked_mul(len).ok_or((GlycoStatus::InvalidArgument, "size overflow".into()))?;
        let flat = slice_arg(data, total, "data")?;
        if len > 0 && out.is_null() {
            return Err(null("out"));
        }
        let inputs: Vec<Vec<f64>> = if len == 0 { vec![Vec::new(); workers] } else { flat.chunks(len).map(<[f64]>::to_vec).collect() };
        let (reduced, _) = lift(ring_allreduce(&inputs))?;
        if len > 0 {
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(&reduced[0]);
        }
        Ok(())
    })
}
