//! Console output and interrupt polling.

use alloc::vec::Vec;

use crate::catch::host_catch;
use crate::raw;

/// Prints `text` and a newline to the host console.
///
/// Returns `true` if the user interrupted. The host reports a pending
/// interrupt by raising an error from its print routine; that error is caught
/// here, so guest frames are never skipped.
pub fn print_line(text: &str) -> bool {
    let mut buf = Vec::with_capacity(text.len() + 2);
    buf.extend(text.bytes().map(|b| if b == 0 { b'?' } else { b }));
    buf.extend_from_slice(b"\n\0");
    host_catch(|| unsafe { raw::mh_print(buf.as_ptr().cast()) }).is_err()
}

/// Returns `true` (and clears the flag) if an interrupt is pending.
pub fn check_user_interrupt() -> bool {
    unsafe {
        if raw::mh_interrupt_pending() != 0 {
            raw::mh_set_interrupt(0);
            true
        } else {
            false
        }
    }
}

/// Like `println!`, but prints to the host console and evaluates to `true`
/// if the user interrupted.
#[macro_export]
macro_rules! hb_println {
    () => {
        $crate::console::print_line("")
    };
    ($($arg:tt)*) => {
        $crate::console::print_line(&$crate::__format!($($arg)*))
    };
}
