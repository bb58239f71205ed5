//! Scalar root finding.

use crate::error::{PhysicsError, Result};
use crate::scalar::{lit, Real};

/// Root of a monotone function on `[lo, hi]` by Newton steps safeguarded
/// with bisection.
///
/// `f` returns the value and derivative. The bracket must straddle a sign
/// change. Converges when the bracket or the Newton step is below `tol`.
pub fn newton_bisect<T, F>(mut f: F, mut lo: T, mut hi: T, tol: T) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> (T, T),
{
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if (flo > T::zero()) == (fhi > T::zero()) {
        return Err(PhysicsError::RootFinding(format!(
            "no sign change on [{:?}, {:?}]",
            lo.to_f64(),
            hi.to_f64()
        )));
    }
    let increasing = fhi > flo;
    let half: T = lit(0.5);
    let mut x = half * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == T::zero() {
            return Ok(x);
        }
        if (fx > T::zero()) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != T::zero() && newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            half * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= tol || (hi - lo) <= tol {
            return Ok(x);
        }
    }
    Err(PhysicsError::RootFinding("iteration limit reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let r = newton_bisect(|x: f64| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn decreasing_and_flat_derivative() {
        // derivative vanishes at the start point; bisection takes over
        let r = newton_bisect(|x: f64| (1.0 - x.powi(3), 0.0), 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-13);
        assert!(newton_bisect(|x: f64| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12).is_err());
    }
}
