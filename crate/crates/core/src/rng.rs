//! Bytes from the host random number generator, for seeding guest
//! generators reproducibly.

use alloc::vec;
use alloc::vec::Vec;

use crate::raw;

/// Draws `n` bytes from the host generator. The draw is bracketed by the
/// host's get/put calls.
pub fn random_bytes(n: usize) -> Vec<u8> {
    let mut buf = vec![0u8; n];
    fill(&mut buf);
    buf
}

/// Fixed-size variant of [`random_bytes`], e.g. for a 32-byte seed.
pub fn random_seed<const N: usize>() -> [u8; N] {
    let mut buf = [0u8; N];
    fill(&mut buf);
    buf
}

fn fill(buf: &mut [u8]) {
    if buf.is_empty() {
        return;
    }
    unsafe {
        raw::mh_rng_get();
        raw::mh_rng_unif_bytes(buf.as_mut_ptr(), buf.len() as i64);
        raw::mh_rng_put();
    }
}
