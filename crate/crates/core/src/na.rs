//! Missing-value sentinels.
//!
//! Integer (and logical) NA is `i32::MIN`, an ordinary number to Rust:
//! `NA_INTEGER * 0 == 0` in guest arithmetic, whereas the host propagates NA.
//! Real NA is a quiet NaN whose low word is 1954, so it can be told apart
//! from the NaN produced by arithmetic.

use crate::raw;

pub const NA_INTEGER: i32 = raw::MH_NA_INTEGER;
pub const NA_LOGICAL: i32 = raw::MH_NA_LOGICAL;
pub const NA_REAL: f64 = f64::from_bits(raw::MH_NA_REAL_BITS);

pub fn is_na_integer(x: i32) -> bool {
    x == NA_INTEGER
}

pub fn is_na_logical(x: i32) -> bool {
    x == NA_LOGICAL
}

/// True only for the NA payload, not for other NaNs.
pub fn is_na_real(x: f64) -> bool {
    x.is_nan() && (x.to_bits() as u32) == raw::MH_NA_REAL_LOW_WORD
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_sentinel_is_min_i32() {
        assert!(is_na_integer(i32::MIN));
        assert!(!is_na_integer(0));
        assert!(!is_na_integer(i32::MIN + 1));
        // Plain guest arithmetic does not propagate NA.
        assert_eq!(NA_INTEGER.wrapping_mul(0), 0);
    }

    #[test]
    fn real_sentinel_is_payload_tagged() {
        assert!(is_na_real(NA_REAL));
        assert!(!is_na_real(f64::NAN));
        assert!(!is_na_real(0.0));
        assert!(!is_na_real(f64::INFINITY));
        assert_eq!(NA_REAL.to_bits() & 0xFFFF_FFFF, 1954);
    }
}
