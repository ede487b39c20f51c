//! Bit-index helpers over the binary counter `x = sum x_i 2^(i-1)`, with bits
//! numbered from 1.

use crate::{Error, Result};

/// The `i`-th bit of `x` (1-based). Bits beyond 63 are zero.
pub fn bit(x: u64, i: u32) -> bool {
    (1..=64).contains(&i) && (x >> (i - 1)) & 1 == 1
}

/// Least significant set bit.
pub fn ell1(x: u64) -> Result<u32> {
    if x == 0 {
        return Err(Error::Domain("least significant set bit of 0".into()));
    }
    Ok(x.trailing_zeros() + 1)
}

/// Most significant set bit.
pub fn msb(x: u64) -> Result<u32> {
    if x == 0 {
        return Err(Error::Domain("most significant set bit of 0".into()));
    }
    Ok(64 - x.leading_zeros())
}

/// Least unset bit, `min{i >= 1 : x_i = 0}`.
pub fn ell0(x: u64) -> u32 {
    (!x).trailing_zeros() + 1
}

/// `max{j in [i-2] : x_j = 1 or j = 1}` for `i >= 3`.
pub fn big_l(i: u32, x: u64) -> Result<u32> {
    if i < 3 {
        return Err(Error::Domain(format!("L_i(x) needs i >= 3, got {i}")));
    }
    Ok((2..=i - 2).rev().find(|&j| bit(x, j)).unwrap_or(1))
}
