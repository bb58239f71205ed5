//! Explicit Runge–Kutta integrators.
//!
//! [`dopri5`] is the adaptive Dormand–Prince 5(4) pair with error control and
//! cubic Hermite dense output between accepted steps. It integrates in either
//! time direction. [`rk4_step`] is the classical fixed-step scheme used by the
//! delay solvers, which manage their own history.

use crate::error::{PhysicsError, Result};
use crate::scalar::{lit, Real};

/// First-order system `y' = f(t, y)`.
pub trait System<T> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]) -> Result<()>;
}

/// Step-size and tolerance controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    /// Initial step magnitude; estimated when `None`.
    pub initial_step: Option<T>,
    /// Largest permitted step magnitude.
    pub max_step: Option<T>,
    /// Smallest step magnitude before declaring underflow.
    pub min_step: T,
    pub max_steps: usize,
}

impl<T: Real> Default for Controls<T> {
    fn default() -> Self {
        Self {
            abs_tol: lit(1e-12),
            rel_tol: lit(1e-10),
            initial_step: None,
            max_step: None,
            min_step: lit(1e-300_f64.max(f64::MIN_POSITIVE)),
            max_steps: 5_000_000,
        }
    }
}

impl<T: Real> Controls<T> {
    pub fn with_tolerances(abs_tol: T, rel_tol: T) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn max_step(mut self, h: T) -> Self {
        self.max_step = Some(h);
        self
    }
}

/// Returned by the per-step observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    Stop,
}

/// Accepted steps of an integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub t: Vec<T>,
    pub y: Vec<Vec<T>>,
    pub dy: Vec<Vec<T>>,
    /// `true` when the observer requested a stop before `t_end`.
    pub stopped: bool,
    pub rejected_steps: usize,
}

impl<T: Real> Solution<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> (&T, &[T]) {
        let n = self.t.len() - 1;
        (&self.t[n], &self.y[n])
    }

    /// Cubic Hermite interpolation between the bracketing accepted steps.
    /// Times outside the covered range are clamped.
    pub fn interpolate(&self, t: T) -> Vec<T> {
        let n = self.t.len();
        if n == 1 {
            return self.y[0].clone();
        }
        let forward = self.t[n - 1] >= self.t[0];
        let key = |s: T| if forward { s } else { -s };
        let tk = key(t);
        if tk <= key(self.t[0]) {
            return self.y[0].clone();
        }
        if tk >= key(self.t[n - 1]) {
            return self.y[n - 1].clone();
        }
        let idx = self.t.partition_point(|&s| key(s) <= tk) - 1;
        hermite(
            self.t[idx],
            &self.y[idx],
            &self.dy[idx],
            self.t[idx + 1],
            &self.y[idx + 1],
            &self.dy[idx + 1],
            t,
        )
    }
}

/// Cubic Hermite interpolant through `(t0, y0, dy0)` and `(t1, y1, dy1)`.
pub fn hermite<T: Real>(t0: T, y0: &[T], dy0: &[T], t1: T, y1: &[T], dy1: &[T], t: T) -> Vec<T> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let two: T = lit(2.0);
    let three: T = lit(3.0);
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * dy0[i] + h01 * y1[i] + h11 * h * dy1[i])
        .collect()
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<T: Real>(out: &mut [T], y: &[T], h: T, terms: &[(f64, &[T])]) {
    for i in 0..y.len() {
        let mut acc = T::zero();
        for (c, k) in terms {
            acc += lit::<T>(*c) * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn check_finite<T: Real>(t: T, v: &[T]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PhysicsError::NonFinite { t: t.to_f64() })
    }
}

/// Adaptive Dormand–Prince integration from `t0` to `t_end`.
///
/// The observer sees every accepted step (including the initial point) and
/// may stop the run. Integration backwards in time is selected by
/// `t_end < t0`.
pub fn dopri5<T, S, O>(sys: &S, t0: T, y0: &[T], t_end: T, controls: &Controls<T>, mut observer: O) -> Result<Solution<T>>
where
    T: Real,
    S: System<T> + ?Sized,
    O: FnMut(T, &[T], &[T]) -> StepAction,
{
    let n = sys.dim();
    assert_eq!(y0.len(), n, "initial state has wrong dimension");
    let dir = if t_end >= t0 { T::one() } else { -T::one() };
    let span = (t_end - t0).abs();

    let mut k1 = vec![T::zero(); n];
    sys.rhs(t0, y0, &mut k1)?;
    check_finite(t0, &k1)?;

    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        dy: vec![k1.clone()],
        stopped: false,
        rejected_steps: 0,
    };
    if observer(t0, y0, &k1) == StepAction::Stop {
        sol.stopped = true;
        return Ok(sol);
    }
    if span == T::zero() {
        return Ok(sol);
    }

    let max_step = controls.max_step.unwrap_or(span).min(span);
    let mut h = match controls.initial_step {
        Some(h) => h.min(max_step),
        None => initial_step(sys, t0, y0, &k1, dir, controls)?.min(max_step),
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
    );
    let mut tmp = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let mut steps = 0usize;
    let safety: T = lit(0.9);
    let min_factor: T = lit(0.2);
    let max_factor: T = lit(5.0);
    let mut last_rejected = false;

    loop {
        let remaining = (t_end - t).abs();
        if remaining <= lit::<T>(4.0) * T::eps() * (t.abs() + span) {
            break;
        }
        if steps >= controls.max_steps {
            return Err(PhysicsError::TooManySteps(controls.max_steps));
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < controls.min_step {
            return Err(PhysicsError::StepSizeUnderflow {
                t: t.to_f64(),
                h: h.to_f64(),
            });
        }
        let hs = dir * h;

        combine(&mut tmp, &y, hs, &[(A21, &k1)]);
        sys.rhs(t + hs * lit(C2), &tmp, &mut k2)?;
        combine(&mut tmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
        sys.rhs(t + hs * lit(C3), &tmp, &mut k3)?;
        combine(&mut tmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        sys.rhs(t + hs * lit(C4), &tmp, &mut k4)?;
        combine(&mut tmp, &y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        sys.rhs(t + hs * lit(C5), &tmp, &mut k5)?;
        combine(&mut tmp, &y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        sys.rhs(t + hs, &tmp, &mut k6)?;
        combine(&mut y_new, &y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let t_new = if last { t_end } else { t + hs };
        sys.rhs(t_new, &y_new, &mut k7)?;

        let finite = y_new.iter().chain(k7.iter()).all(|x| x.is_finite());
        let mut err = T::zero();
        if finite {
            for i in 0..n {
                let e = hs
                    * (lit::<T>(E1) * k1[i]
                        + lit::<T>(E3) * k3[i]
                        + lit::<T>(E4) * k4[i]
                        + lit::<T>(E5) * k5[i]
                        + lit::<T>(E6) * k6[i]
                        + lit::<T>(E7) * k7[i]);
                let sc = controls.abs_tol + controls.rel_tol * y[i].abs().max(y_new[i].abs());
                let r = e / sc;
                err += r * r;
            }
            err = (err / T::count(n)).sqrt();
        }
        steps += 1;

        if finite && err <= T::one() {
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            sol.t.push(t);
            sol.y.push(y.clone());
            sol.dy.push(k1.clone());
            if observer(t, &y, &k1) == StepAction::Stop {
                sol.stopped = true;
                return Ok(sol);
            }
            if last {
                break;
            }
            let factor = if err == T::zero() {
                max_factor
            } else {
                (safety * err.powf(lit(-0.2))).min(max_factor).max(min_factor)
            };
            let factor = if last_rejected { factor.min(T::one()) } else { factor };
            h = (h * factor).min(max_step);
            last_rejected = false;
        } else {
            sol.rejected_steps += 1;
            let factor = if finite {
                (safety * err.powf(lit(-0.2))).max(min_factor).min(T::one())
            } else {
                lit(0.25)
            };
            h *= factor;
            last_rejected = true;
        }
    }
    Ok(sol)
}

fn initial_step<T: Real, S: System<T> + ?Sized>(
    sys: &S,
    t0: T,
    y0: &[T],
    f0: &[T],
    dir: T,
    c: &Controls<T>,
) -> Result<T> {
    let n = y0.len();
    let scale = |i: usize| c.abs_tol + c.rel_tol * y0[i].abs();
    let norm = |v: &dyn Fn(usize) -> T| {
        let mut s = T::zero();
        for i in 0..n {
            let r = v(i) / scale(i);
            s += r * r;
        }
        (s / T::count(n)).sqrt()
    };
    let d0 = norm(&|i| y0[i]);
    let d1 = norm(&|i| f0[i]);
    let tiny: T = lit(1e-5);
    let h0 = if d0 < tiny || d1 < tiny {
        lit(1e-6)
    } else {
        lit::<T>(0.01) * d0 / d1
    };
    let y1: Vec<T> = (0..n).map(|i| y0[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![T::zero(); n];
    sys.rhs(t0 + dir * h0, &y1, &mut f1)?;
    let d2 = norm(&|i| f1[i] - f0[i]) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= lit(1e-15) {
        (h0 * lit(1e-3)).max(lit(1e-6))
    } else {
        (lit::<T>(0.01) / dmax).powf(lit(0.2))
    };
    Ok((h0 * lit(100.0)).min(h1))
}

/// One classical fourth-order Runge–Kutta step of `y' = f(t, y)`.
pub fn rk4_step<T, F>(t: T, y: &[T], h: T, mut f: F) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    let n = y.len();
    let half: T = lit(0.5);
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];
    f(t, y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + half * h * k1[i];
    }
    f(t + half * h, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + half * h * k2[i];
    }
    f(t + half * h, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4)?;
    let sixth: T = lit(1.0 / 6.0);
    Ok((0..n)
        .map(|i| y[i] + h * sixth * (k1[i] + lit::<T>(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect())
}
