//! Raw declarations of the host ABI (`hostbridge.h`).
//!
//! One declaration per entry point, same names, same C types. Nothing here
//! checks anything: functions the header marks as jumping will longjmp over
//! the caller's frames on error.

#![allow(non_camel_case_types)]

use core::ffi::{c_char, c_void};

/// Opaque host cell record.
#[repr(C)]
pub struct MhCellRec {
    _private: [u8; 0],
}

/// Opaque registry entry.
#[repr(C)]
pub struct MhEntryRec {
    _private: [u8; 0],
}

/// Opaque loaded-library record.
#[repr(C)]
pub struct MhLibraryRec {
    _private: [u8; 0],
}

/// Host cell reference.
pub type RawCellRef = *mut MhCellRec;
pub type MhEntry = *mut MhEntryRec;
pub type MhLibrary = *mut MhLibraryRec;

/// Generic function pointer as the host stores it.
pub type MhFnPtr = *const c_void;
pub type MhCatchFn = unsafe extern "C" fn(data: *mut c_void);
pub type MhConsoleSink = unsafe extern "C" fn(text: *const c_char, len: usize, data: *mut c_void);

pub const MH_NULL: i32 = 0;
pub const MH_REAL: i32 = 1;
pub const MH_INTEGER: i32 = 2;
pub const MH_LOGICAL: i32 = 3;
pub const MH_STRING: i32 = 4;
pub const MH_SYMBOL: i32 = 5;
pub const MH_LIST: i32 = 6;
pub const MH_ENVIRONMENT: i32 = 7;
pub const MH_CALLABLE: i32 = 8;

pub const MH_NA_INTEGER: i32 = i32::MIN;
pub const MH_NA_LOGICAL: i32 = i32::MIN;
pub const MH_NA_REAL_BITS: u64 = 0x7FF8_0000_0000_07A2;
pub const MH_NA_REAL_LOW_WORD: u32 = 1954;

pub const MH_MAX_ARITY: i32 = 10;
pub const MH_MAX_LENGTH: i64 = i32::MAX as i64;

pub const MH_REGISTER_SYMBOL: &str = "hostbridge_register";

extern "C" {
    pub fn mh_init();
    pub fn mh_is_initialized() -> i32;
    pub fn mh_on_host_thread() -> i32;
    pub fn mh_set_torture(on: i32);
    pub fn mh_torture() -> i32;

    pub fn mh_collect();
    pub fn mh_live_cells() -> i64;
    pub fn mh_collections() -> i64;
    pub fn mh_is_poisoned(cell: RawCellRef) -> i32;

    pub fn mh_null() -> RawCellRef;
    pub fn mh_alloc_vector(kind: i32, length: i64) -> RawCellRef;
    pub fn mh_scalar_real(x: f64) -> RawCellRef;
    pub fn mh_scalar_integer(x: i32) -> RawCellRef;
    pub fn mh_scalar_logical(x: i32) -> RawCellRef;

    pub fn mh_protect(cell: RawCellRef) -> RawCellRef;
    pub fn mh_unprotect(n: i32);
    pub fn mh_protect_depth() -> i32;

    pub fn mh_kind(cell: RawCellRef) -> i32;
    pub fn mh_length(cell: RawCellRef) -> i64;
    pub fn mh_is_real(cell: RawCellRef) -> i32;
    pub fn mh_is_integer(cell: RawCellRef) -> i32;
    pub fn mh_is_logical(cell: RawCellRef) -> i32;
    pub fn mh_nrow(cell: RawCellRef) -> i32;
    pub fn mh_ncol(cell: RawCellRef) -> i32;

    pub fn mh_as_real(cell: RawCellRef) -> f64;
    pub fn mh_as_integer(cell: RawCellRef) -> i32;
    pub fn mh_coerce(cell: RawCellRef, kind: i32) -> RawCellRef;
    pub fn mh_raw_view(cell: RawCellRef, kind: i32) -> *mut c_void;

    pub fn mh_string_elt(cell: RawCellRef, i: i64) -> *const c_char;
    pub fn mh_set_string_elt(cell: RawCellRef, i: i64, text: *const c_char);
    pub fn mh_list_elt(list: RawCellRef, i: i64) -> RawCellRef;
    pub fn mh_set_list_elt(list: RawCellRef, i: i64, value: RawCellRef);
    pub fn mh_set_names(cell: RawCellRef, names: RawCellRef);
    pub fn mh_names(cell: RawCellRef) -> RawCellRef;
    pub fn mh_set_dim(cell: RawCellRef, nrow: i32, ncol: i32);

    pub fn mh_install(name: *const c_char) -> RawCellRef;
    pub fn mh_symbol_name(symbol: RawCellRef) -> *const c_char;
    pub fn mh_global_env() -> RawCellRef;
    pub fn mh_new_env(parent: RawCellRef) -> RawCellRef;
    pub fn mh_define_var(symbol: RawCellRef, value: RawCellRef, env: RawCellRef);
    pub fn mh_find_var(symbol: RawCellRef, env: RawCellRef) -> RawCellRef;
    pub fn mh_new_callable(f: MhFnPtr, arity: i32, formals: *const *const c_char) -> RawCellRef;
    pub fn mh_try_eval(form: RawCellRef, env: RawCellRef, ok: *mut i32) -> RawCellRef;

    pub fn mh_rng_get();
    pub fn mh_rng_put();
    pub fn mh_rng_set_seed(seed: u64);
    pub fn mh_rng_unif() -> f64;
    pub fn mh_rng_norm(mean: f64, sd: f64) -> f64;
    pub fn mh_rng_unif_bytes(buf: *mut u8, n: i64);

    pub fn mh_print(text: *const c_char);
    pub fn mh_set_console(sink: Option<MhConsoleSink>, data: *mut c_void);
    pub fn mh_interrupt_pending() -> i32;
    pub fn mh_set_interrupt(flag: i32);

    pub fn mh_error(message: *const c_char) -> !;
    pub fn mh_catch(f: MhCatchFn, data: *mut c_void) -> i32;
    pub fn mh_last_error() -> *const c_char;

    pub fn mh_register(name: *const c_char, f: MhFnPtr, arity: i32);
    pub fn mh_deregister(name: *const c_char) -> i32;
    pub fn mh_lookup(name: *const c_char) -> MhEntry;
    pub fn mh_call(
        name: *const c_char,
        args: *const RawCellRef,
        nargs: i32,
        err: *mut *const c_char,
    ) -> RawCellRef;
    pub fn mh_call_entry(
        entry: MhEntry,
        args: *const RawCellRef,
        nargs: i32,
        err: *mut *const c_char,
    ) -> RawCellRef;
    pub fn mh_call_symbol(
        symbol: *const c_char,
        args: *const RawCellRef,
        nargs: i32,
        err: *mut *const c_char,
    ) -> RawCellRef;
    pub fn mh_last_call_leak() -> i32;

    pub fn mh_load_library(path: *const c_char, err: *mut *const c_char) -> MhLibrary;
    pub fn mh_unload_library(lib: MhLibrary) -> i32;

    pub fn hb_native_euclid_norm(x: RawCellRef) -> RawCellRef;
    pub fn hb_native_square_minus_4(x: RawCellRef) -> RawCellRef;
}
