#![allow(dead_code)]

use std::ffi::{CStr, CString};

use hostbridge_core::raw::{self, RawCellRef};

pub use mini_host::run;

pub fn register(name: &str, f: raw::MhFnPtr, arity: i32) {
    let name = CString::new(name).unwrap();
    unsafe { raw::mh_register(name.as_ptr(), f, arity) };
}

/// Calls a registered function through the host's top-level boundary.
pub fn call(name: &str, args: &[RawCellRef]) -> Result<RawCellRef, String> {
    let name = CString::new(name).unwrap();
    let mut err = std::ptr::null();
    let out = unsafe { raw::mh_call(name.as_ptr(), args.as_ptr(), args.len() as i32, &mut err) };
    let msg = unsafe { CStr::from_ptr(err) }.to_string_lossy().into_owned();
    if msg.is_empty() {
        Ok(out)
    } else {
        Err(msg)
    }
}

pub fn depth() -> i32 {
    unsafe { raw::mh_protect_depth() }
}

pub fn real_vector(values: &[f64]) -> RawCellRef {
    unsafe {
        let cell = raw::mh_alloc_vector(raw::MH_REAL, values.len() as i64);
        let p = raw::mh_raw_view(cell, raw::MH_REAL) as *mut f64;
        std::ptr::copy_nonoverlapping(values.as_ptr(), p, values.len());
        cell
    }
}

pub fn int_vector(values: &[i32]) -> RawCellRef {
    unsafe {
        let cell = raw::mh_alloc_vector(raw::MH_INTEGER, values.len() as i64);
        let p = raw::mh_raw_view(cell, raw::MH_INTEGER) as *mut i32;
        std::ptr::copy_nonoverlapping(values.as_ptr(), p, values.len());
        cell
    }
}

pub fn reals(cell: RawCellRef) -> Vec<f64> {
    unsafe {
        let n = raw::mh_length(cell) as usize;
        let p = raw::mh_raw_view(cell, raw::MH_REAL) as *const f64;
        std::slice::from_raw_parts(p, n).to_vec()
    }
}
