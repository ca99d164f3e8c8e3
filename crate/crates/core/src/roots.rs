//! Bracketed bisection for monotone scalar equations.

use crate::error::{Error, Result};

/// Final bracket of a bisection: `f(lo) <= 0 <= f(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Brackets the root of a nondecreasing `f` on `[lo, hi]` until the width
/// drops below `tol * (1 + |lo|)` or the interval stops shrinking.
///
/// The lower end always satisfies `f(lo) <= 0`, so callers that need a
/// feasible side use `lo`.
pub fn bisect_increasing<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::DomainExhausted { lo, hi });
    }
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() || flo > 0.0 || fhi < 0.0 {
        return Err(Error::DomainExhausted { lo, hi });
    }
    if flo == 0.0 {
        return Ok(Bracket { lo, hi: lo });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        if b - a <= tol * (1.0 + a.abs()) {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm.is_nan() {
            return Err(Error::DomainExhausted { lo: a, hi: b });
        }
        if fm <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Bracket { lo: a, hi: b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sqrt_two() {
        let b = bisect_increasing(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((b.lo - 2f64.sqrt()).abs() < 1e-13);
        assert!(b.lo * b.lo - 2.0 <= 0.0);
    }

    #[test]
    fn unbracketed_is_an_error() {
        assert!(matches!(bisect_increasing(|x| x + 10.0, 0.0, 1.0, 1e-12), Err(Error::DomainExhausted { .. })));
        assert!(bisect_increasing(|x| x, 1.0, 0.0, 1e-12).is_err());
    }

    #[test]
    fn root_at_lower_end() {
        let b = bisect_increasing(|x| x, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(b.lo, 0.0);
    }

    proptest! {
        #[test]
        fn brackets_linear_roots(r in -40.0..40.0f64, k in 0.01..100.0f64) {
            let b = bisect_increasing(|x| k * (x - r), -50.0, 50.0, 1e-13).unwrap();
            prop_assert!(b.lo <= r + 1e-12 && b.hi >= r - 1e-12);
            prop_assert!(b.width() <= 1e-13 * (1.0 + b.lo.abs()) * 2.0);
        }
    }
}
