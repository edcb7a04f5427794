//! Mini host runtime.
//!
//! The runtime itself is C (`csrc/`, ABI in `include/hostbridge.h`) and is
//! linked into every artifact that depends on this crate. Executables also
//! export the `mh_*` symbols dynamically so that guest libraries loaded at
//! run time resolve against the same runtime.
//!
//! The runtime may only be touched from the thread that initialized it.
//! [`run`] owns that thread: it starts it on first use, initializes the
//! runtime there, and executes closures on it one at a time. Everything that
//! calls into the host (tests included) goes through [`run`].

use std::any::Any;
use std::cell::RefCell;
use std::ffi::c_void;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::mpsc::{self, Sender};
use std::sync::{Mutex, OnceLock};
use std::thread;

mod ffi {
    use std::ffi::c_void;

    pub type ConsoleSink = unsafe extern "C" fn(text: *const u8, len: usize, data: *mut c_void);

    extern "C" {
        pub fn mh_init();
        pub fn mh_on_host_thread() -> i32;
        pub fn mh_set_console(sink: Option<ConsoleSink>, data: *mut c_void);
        pub fn mh_set_torture(on: i32);
        pub fn mh_torture() -> i32;
    }
}

/// Directory holding `hostbridge.h`.
pub fn include_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

type Job = Box<dyn FnOnce() + Send + 'static>;

fn host_sender() -> &'static Mutex<Sender<Job>> {
    static SENDER: OnceLock<Mutex<Sender<Job>>> = OnceLock::new();
    SENDER.get_or_init(|| {
        let (tx, rx) = mpsc::channel::<Job>();
        thread::Builder::new()
            .name("hostbridge-host".into())
            .stack_size(16 << 20)
            .spawn(move || {
                unsafe { ffi::mh_init() };
                for job in rx {
                    job();
                }
            })
            .expect("failed to spawn the host thread");
        Mutex::new(tx)
    })
}

/// True when called on the host thread.
pub fn on_host_thread() -> bool {
    unsafe { ffi::mh_on_host_thread() != 0 }
}

/// Runs `f` on the host thread and returns its result.
///
/// Calls made from the host thread itself run inline. A panic inside `f` is
/// resumed on the calling thread.
pub fn run<F, R>(f: F) -> R
where
    F: FnOnce() -> R + Send + 'static,
    R: Send + 'static,
{
    if on_host_thread() {
        return f();
    }
    let (tx, rx) = mpsc::sync_channel::<Result<R, Box<dyn Any + Send>>>(1);
    let job: Job = Box::new(move || {
        let out = panic::catch_unwind(AssertUnwindSafe(f));
        let _ = tx.send(out);
    });
    host_sender()
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .send(job)
        .expect("host thread is gone");
    match rx.recv().expect("host thread dropped a job") {
        Ok(v) => v,
        Err(payload) => panic::resume_unwind(payload),
    }
}

thread_local! {
    static CAPTURED: RefCell<Option<String>> = const { RefCell::new(None) };
}

unsafe extern "C" fn capture_sink(text: *const u8, len: usize, _data: *mut c_void) {
    let bytes = std::slice::from_raw_parts(text, len);
    CAPTURED.with(|c| {
        if let Some(buf) = c.borrow_mut().as_mut() {
            buf.push_str(&String::from_utf8_lossy(bytes));
        }
    });
}

/// Runs `f` (on the host thread) with console output redirected into a
/// string, which is returned alongside the result.
pub fn capture_console<F, R>(f: F) -> (R, String)
where
    F: FnOnce() -> R + Send + 'static,
    R: Send + 'static,
{
    run(move || {
        CAPTURED.with(|c| *c.borrow_mut() = Some(String::new()));
        unsafe { ffi::mh_set_console(Some(capture_sink), std::ptr::null_mut()) };
        let out = panic::catch_unwind(AssertUnwindSafe(f));
        unsafe { ffi::mh_set_console(None, std::ptr::null_mut()) };
        let text = CAPTURED.with(|c| c.borrow_mut().take()).unwrap_or_default();
        match out {
            Ok(v) => (v, text),
            Err(p) => panic::resume_unwind(p),
        }
    })
}

/// Runs `f` with torture mode (collect on every allocation) switched on,
/// restoring the previous setting afterwards.
pub fn with_torture<F, R>(f: F) -> R
where
    F: FnOnce() -> R + Send + 'static,
    R: Send + 'static,
{
    run(move || {
        let previous = unsafe { ffi::mh_torture() };
        unsafe { ffi::mh_set_torture(1) };
        let out = panic::catch_unwind(AssertUnwindSafe(f));
        unsafe { ffi::mh_set_torture(previous) };
        match out {
            Ok(v) => v,
            Err(p) => panic::resume_unwind(p),
        }
    })
}
