//! Guest-side framework for extensions called by the hostbridge host.
//!
//! * [`raw`] declares the host ABI one-to-one.
//! * [`ValueHandle`] wraps a host cell reference at zero cost and offers
//!   checked views, coercions, constructors and caught evaluation.
//! * [`ProtectGuard`] keeps the host's protect stack balanced: every cell a
//!   guarded constructor allocates is protected through the guard, and the
//!   guard unprotects all of them at once when it goes out of scope.
//! * [`export!`] (with the `std` feature) turns a function over handles into
//!   an unmangled `extern "C"` symbol that the host can call, converting any
//!   panic into a host error once no guest frame is left to clean up.
//!
//! Nothing in the safe layer can trigger a host non-local exit. Failures are
//! either returned as [`ApiError`] or raised as panics, which the export
//! shim converts.
//!
//! All calls must happen on the host thread; the host aborts otherwise.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

mod catch;
pub mod console;
mod error;
#[cfg(feature = "std")]
pub mod export;
pub mod na;
mod protect;
pub mod raw;
pub mod rng;
mod value;

pub use console::{check_user_interrupt, print_line};
pub use error::ApiError;
pub use protect::ProtectGuard;
pub use rng::{random_bytes, random_seed};
pub use value::{CellKind, IntoValue, ValueHandle};

#[doc(hidden)]
pub use alloc::format as __format;

pub mod prelude {
    #[cfg(feature = "std")]
    pub use crate::export;
    pub use crate::hb_println;
    pub use crate::{
        check_user_interrupt, print_line, random_bytes, random_seed, ApiError, CellKind,
        ProtectGuard, ValueHandle,
    };
}
