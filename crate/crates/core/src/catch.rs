use alloc::string::String;
use core::ffi::{c_void, CStr};

use crate::raw;

unsafe extern "C" fn trampoline<F: FnMut()>(data: *mut c_void) {
    let f = &mut *data.cast::<F>();
    f();
}

/// Runs `f` under a host boundary. A host error raised inside `f` returns
/// here as `Err(message)` instead of unwinding the guest stack.
///
/// `f` must only call host functions: when the host jumps, nothing left in
/// `f`'s own frame is dropped, and a panic escaping `f` aborts.
pub(crate) fn host_catch<F: FnMut()>(mut f: F) -> Result<(), String> {
    let data = (&mut f as *mut F).cast::<c_void>();
    let ok = unsafe { raw::mh_catch(trampoline::<F>, data) };
    if ok != 0 {
        Ok(())
    } else {
        Err(last_host_error())
    }
}

pub(crate) fn last_host_error() -> String {
    unsafe { CStr::from_ptr(raw::mh_last_error()) }
        .to_string_lossy()
        .into_owned()
}
