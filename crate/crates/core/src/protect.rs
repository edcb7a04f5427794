use core::marker::PhantomData;

use crate::raw::{self, RawCellRef};

/// Protection bookkeeping for one scope.
///
/// [`protect`](Self::protect) pushes a cell on the host protect stack and
/// counts it; dropping the guard unprotects the whole count with a single
/// host call. Guards nest: an inner guard must go out of scope before the
/// outer one protects anything else.
///
/// Guards are tied to the host thread and are neither `Send` nor `Sync`.
#[derive(Debug)]
pub struct ProtectGuard {
    count: i32,
    _host_thread: PhantomData<*mut ()>,
}

impl ProtectGuard {
    pub fn new() -> Self {
        ProtectGuard {
            count: 0,
            _host_thread: PhantomData,
        }
    }

    /// Protects `cell` until this guard is dropped and returns it unchanged.
    pub fn protect(&mut self, cell: RawCellRef) -> RawCellRef {
        let cell = unsafe { raw::mh_protect(cell) };
        self.count += 1;
        cell
    }

    /// Number of cells protected through this guard.
    pub fn count(&self) -> usize {
        self.count as usize
    }
}

impl Default for ProtectGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for ProtectGuard {
    fn drop(&mut self) {
        if self.count > 0 {
            unsafe { raw::mh_unprotect(self.count) };
        }
    }
}
