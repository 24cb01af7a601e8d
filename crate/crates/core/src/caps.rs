//! Process-wide size caps for dense tables and state vectors.
//!
//! The dense cap defaults to 2^22 points and can be overridden with the `RDL_CAP`
//! environment variable or [`set_dense_cap`]. State vectors get their own cap
//! (default 2^24 amplitudes).

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

pub const DEFAULT_DENSE_CAP: usize = 1 << 22;
pub const DEFAULT_STATE_CAP: usize = 1 << 24;
pub const CAP_ENV_VAR: &str = "RDL_CAP";

// 0 means "not yet initialised from the environment".
static DENSE_CAP: AtomicUsize = AtomicUsize::new(0);
static STATE_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_STATE_CAP);

pub fn dense_cap() -> usize {
    let cur = DENSE_CAP.load(Ordering::Relaxed);
    if cur != 0 {
        return cur;
    }
    let from_env = std::env::var(CAP_ENV_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_DENSE_CAP);
    DENSE_CAP.store(from_env, Ordering::Relaxed);
    from_env
}

pub fn set_dense_cap(cap: usize) {
    DENSE_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub fn state_cap() -> usize {
    STATE_CAP.load(Ordering::Relaxed)
}

pub fn set_state_cap(cap: usize) {
    STATE_CAP.store(cap.max(1), Ordering::Relaxed);
}

/// `base^exp` as u128, saturating.
pub fn pow_u128(base: u64, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}

pub(crate) fn check(what: &str, needed: u128, cap: usize) -> Result<usize> {
    if needed > cap as u128 {
        return Err(Error::CapExceeded {
            what: what.to_string(),
            needed,
            cap,
        });
    }
    Ok(needed as usize)
}

/// Checks `q^m` against the dense cap and returns it.
pub fn dense_points(q: u32, m: usize) -> Result<usize> {
    check("dense table over Z_q^m", pow_u128(q as u64, m), dense_cap())
}
