//! Boundary shims for guest functions the host calls.
//!
//! ```ignore
//! export! {
//!     fn convolve2(pc: &mut ProtectGuard, a: ValueHandle, b: ValueHandle) -> ValueHandle {
//!         let (_, xa) = a.coerce_double(pc).unwrap();
//!         // ...
//!     }
//! }
//! ```
//!
//! expands to an unmangled `extern "C" fn convolve2(a: RawCellRef, b: RawCellRef)
//! -> RawCellRef`. The shim creates a fresh [`ProtectGuard`] for the body,
//! runs the body under `catch_unwind`, and releases the guard on both the
//! normal and the panicking path. A caught panic becomes a host error
//! carrying the panic message and its source location; the error is raised
//! as the shim's very last action, when no guest frame holding resources is
//! left on the stack.

use std::any::Any;
use std::cell::{Cell, RefCell};
use std::format;
use std::panic::{self, AssertUnwindSafe};
use std::string::String;
use std::sync::Once;

use crate::raw::{self, RawCellRef};
use crate::ProtectGuard;

const MESSAGE_CAPACITY: usize = 1024;

std::thread_local! {
    static BOUNDARY_DEPTH: Cell<u32> = const { Cell::new(0) };
    static PANIC_LOCATION: RefCell<Option<String>> = const { RefCell::new(None) };
}

/// Records panic locations inside shims; defers to the previous hook
/// everywhere else.
fn install_panic_hook() {
    static HOOK: Once = Once::new();
    HOOK.call_once(|| {
        let previous = panic::take_hook();
        panic::set_hook(std::boxed::Box::new(move |info| {
            if BOUNDARY_DEPTH.with(Cell::get) > 0 {
                let location = info
                    .location()
                    .map(|l| format!("{}:{}:{}", l.file(), l.line(), l.column()));
                PANIC_LOCATION.with(|p| *p.borrow_mut() = location);
            } else {
                previous(info);
            }
        }));
    });
}

/// Message text of a panic payload.
pub fn panic_message(payload: &(dyn Any + Send)) -> &str {
    if let Some(s) = payload.downcast_ref::<&'static str>() {
        s
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.as_str()
    } else {
        "panic of unknown type"
    }
}

/// Runs a shim body. Not meant to be called directly; use [`export!`].
#[doc(hidden)]
#[inline]
pub fn boundary<F>(body: F) -> RawCellRef
where
    F: FnOnce(&mut ProtectGuard) -> RawCellRef,
{
    install_panic_hook();
    let outcome = {
        let mut pc = ProtectGuard::new();
        BOUNDARY_DEPTH.with(|d| d.set(d.get() + 1));
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| body(&mut pc)));
        BOUNDARY_DEPTH.with(|d| d.set(d.get() - 1));
        drop(pc);
        outcome
    };
    match outcome {
        Ok(cell) => cell,
        Err(payload) => raise_panic(payload),
    }
}

#[cold]
#[inline(never)]
fn raise_panic(payload: std::boxed::Box<dyn Any + Send>) -> ! {
    let mut buf = [0u8; MESSAGE_CAPACITY];
    {
        let location = PANIC_LOCATION.with(|p| p.borrow_mut().take());
        let message = match location {
            Some(at) => format!("panicked at {at}: {}", panic_message(&*payload)),
            None => format!("panicked: {}", panic_message(&*payload)),
        };
        let mut n = message.len().min(MESSAGE_CAPACITY - 1);
        while !message.is_char_boundary(n) {
            n -= 1;
        }
        for (dst, &b) in buf.iter_mut().zip(&message.as_bytes()[..n]) {
            *dst = if b == 0 { b'?' } else { b };
        }
    }
    drop(payload);
    // Everything owned by this frame is gone; the jump skips nothing.
    unsafe { raw::mh_error(buf.as_ptr().cast()) }
}

/// Exports a guest function to the host.
///
/// The first parameter names the shim's [`ProtectGuard`]; every other
/// parameter and the return type must be [`ValueHandle`](crate::ValueHandle).
/// The symbol is exported unmangled under the function's own name.
#[macro_export]
macro_rules! export {
    (
        $(#[$meta:meta])*
        fn $name:ident($pc:ident : &mut ProtectGuard $(, $arg:ident : ValueHandle)* $(,)?) -> ValueHandle
        $body:block
    ) => {
        $(#[$meta])*
        #[no_mangle]
        pub extern "C" fn $name($($arg: $crate::raw::RawCellRef),*) -> $crate::raw::RawCellRef {
            #[allow(unused_variables, unused_mut)]
            fn body(
                $pc: &mut $crate::ProtectGuard
                $(, $arg: $crate::ValueHandle)*
            ) -> $crate::ValueHandle $body
            $crate::export::boundary(move |pc| body(pc $(, $crate::ValueHandle($arg))*).0)
        }
    };
}
