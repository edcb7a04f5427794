//! In-process host session: registers the bundled guest functions and the
//! host-native demos, and offers call helpers over the host's top-level
//! boundary.
//!
//! Every function here must run on the host thread (see [`mini_host::run`]).

use std::ffi::{CStr, CString};
use std::ptr;

use hostbridge_core::raw::{self, RawCellRef};
use hostbridge_core::{ProtectGuard, ValueHandle};

use crate::{bench, examples};

/// Registered name of the host-native Euclidean norm.
pub const NATIVE_NORM: &str = "euclid_norm_native";
/// Registered name of the host-native `x^2 - 4`.
pub const SQUARE_MINUS_4: &str = "square_minus_4";

/// Registers `myrnorm`, `convolve2`, `zero`, `euclid_norm` and the native
/// demos. Safe to call repeatedly.
pub fn register_builtins() {
    let table: [(&str, raw::MhFnPtr, i32); 6] = [
        ("myrnorm", examples::myrnorm as raw::MhFnPtr, 3),
        ("convolve2", examples::convolve2 as raw::MhFnPtr, 2),
        ("zero", examples::zero as raw::MhFnPtr, 4),
        ("euclid_norm", bench::euclid_norm as raw::MhFnPtr, 1),
        (NATIVE_NORM, raw::hb_native_euclid_norm as raw::MhFnPtr, 1),
        (SQUARE_MINUS_4, raw::hb_native_square_minus_4 as raw::MhFnPtr, 1),
    ];
    for (name, f, arity) in table {
        let name = CString::new(name).unwrap();
        unsafe { raw::mh_register(name.as_ptr(), f, arity) };
    }
}

fn err_text(err: *const std::ffi::c_char) -> String {
    if err.is_null() {
        return String::new();
    }
    unsafe { CStr::from_ptr(err) }.to_string_lossy().into_owned()
}

/// Calls the registered function `name`. The result is not protected.
pub fn call(name: &str, args: &[ValueHandle]) -> Result<ValueHandle, String> {
    let name = CString::new(name).map_err(|e| e.to_string())?;
    let args: Vec<RawCellRef> = args.iter().map(|a| a.into_raw()).collect();
    let mut err = ptr::null();
    let out = unsafe { raw::mh_call(name.as_ptr(), args.as_ptr(), args.len() as i32, &mut err) };
    let msg = err_text(err);
    if msg.is_empty() {
        Ok(ValueHandle::from_raw(out))
    } else {
        Err(msg)
    }
}

/// Like [`call`], but resolves `symbol` through the dynamic linker on
/// every call instead of the registry.
pub fn call_symbol(symbol: &str, args: &[ValueHandle]) -> Result<ValueHandle, String> {
    let symbol = CString::new(symbol).map_err(|e| e.to_string())?;
    let args: Vec<RawCellRef> = args.iter().map(|a| a.into_raw()).collect();
    let mut err = ptr::null();
    let out =
        unsafe { raw::mh_call_symbol(symbol.as_ptr(), args.as_ptr(), args.len() as i32, &mut err) };
    let msg = err_text(err);
    if msg.is_empty() {
        Ok(ValueHandle::from_raw(out))
    } else {
        Err(msg)
    }
}

pub fn protect_depth() -> i32 {
    unsafe { raw::mh_protect_depth() }
}

/// Protect-stack entries the last top-level call left behind before the
/// host restored the depth.
pub fn last_call_leak() -> i32 {
    unsafe { raw::mh_last_call_leak() }
}

pub fn set_seed(seed: u64) {
    unsafe { raw::mh_rng_set_seed(seed) }
}

/// `n` normal draws straight from the host generator.
pub fn host_norm_draws(n: usize, mean: f64, sd: f64) -> Vec<f64> {
    unsafe {
        raw::mh_rng_get();
        let out = (0..n).map(|_| raw::mh_rng_norm(mean, sd)).collect();
        raw::mh_rng_put();
        out
    }
}

/// Host callable computing `x^2 - 4` from the binding of `x`, as `zero`
/// expects for its `f` argument.
pub fn square_minus_4_callable(pc: &mut ProtectGuard) -> ValueHandle {
    unsafe {
        ValueHandle::new_callable(raw::hb_native_square_minus_4 as raw::MhFnPtr, &["x"], pc)
    }
}
