//! Bessel functions `J0`, `J1` of real non-negative argument and the
//! positive zeros of `J0`.
//!
//! Below [`ASYMPTOTIC_CROSSOVER`] both functions come from Miller's
//! backward recurrence normalized by `J0 + 2 sum J_2k = 1`; above it the
//! Hankel asymptotic expansion is summed until its terms stop shrinking.
//! Both paths are exposed so their agreement can be checked directly.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Switch point between backward recurrence and the asymptotic expansion.
pub const ASYMPTOTIC_CROSSOVER: f64 = 25.0;

pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < ASYMPTOTIC_CROSSOVER {
        miller(x).0
    } else {
        hankel(0, x)
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < ASYMPTOTIC_CROSSOVER {
        miller(ax).1
    } else {
        hankel(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `(J0(x), J1(x))` by Miller's backward recurrence, `x >= 0`.
///
/// Accurate to a few ulps of the normalization sum for any moderate `x`;
/// cost grows linearly with `x`.
pub fn miller(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (1.0, 0.0);
    }
    // Start order well above x so J_start is negligible relative to J_0.
    let mut start = (x + 40.0 + 12.0 * libm::cbrt(x)) as usize;
    start += start % 2;
    let two_over_x = 2.0 / x;
    let (mut next, mut cur) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        // cur = J_k, next = J_{k+1}
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
        let order = k - 1;
        if order == 1 {
            j1 = cur;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * cur;
        }
    }
    norm += cur;
    (cur / norm, j1 / norm)
}

/// Hankel asymptotic expansion of `J_order(x)` for `order` 0 or 1.
///
/// The expansion is divergent; terms are summed while they decrease. For
/// `x >= 20` the smallest term is below `1e-17`.
pub fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last || term == 0.0 {
            break;
        }
        last = term.abs();
        // P takes even k with alternating sign; Q odd k.
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    let (s, c) = (libm::sin(x), libm::cos(x));
    // cos/sin of x - pi/4 (order 0) or x - 3 pi/4 (order 1), without
    // subtracting from a large x.
    let (cos_chi, sin_chi) = if order == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, (-s - c) * FRAC_1_SQRT_2)
    };
    libm::sqrt(2.0 / (PI * x)) * (p * cos_chi - q * sin_chi)
}

/// First `count` positive zeros of `J0`, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselRootTable {
    roots: Vec<f64>,
}

impl BesselRootTable {
    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// One-based access matching `mu_m`.
    pub fn mu(&self, m: usize) -> Option<f64> {
        m.checked_sub(1).and_then(|i| self.roots.get(i).copied())
    }
}

/// Zeros of `J0` by bisection inside `((m - 1/4) pi, (m - 1/8) pi)`,
/// polished with Newton steps (`J0' = -J1`).
pub fn j0_roots(count: usize) -> Result<BesselRootTable> {
    if count == 0 {
        return Err(crate::error::invalid("root count must be at least 1"));
    }
    let roots = (1..=count)
        .map(j0_root)
        .collect::<Result<Vec<_>>>()?;
    Ok(BesselRootTable { roots })
}

fn j0_root(m: usize) -> Result<f64> {
    let m_f = m as f64;
    let (mut lo, mut hi) = ((m_f - 0.25) * PI, (m_f - 0.125) * PI);
    let (mut f_lo, f_hi) = (bessel_j0(lo), bessel_j0(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootBracket { index: m });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = bessel_j0(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..2 {
        let step = bessel_j0(x) / bessel_j1(x);
        let candidate = x + step;
        if candidate >= lo && candidate <= hi {
            x = candidate;
        }
    }
    Ok(x)
}
