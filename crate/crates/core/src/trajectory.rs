//! Sampled trajectories with energy diagnostics.

use crate::ode::hermite;
use crate::scalar::{Real, Vec3};

/// One accepted integrator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T: Real> {
    pub t: T,
    pub q: Vec3<T>,
    pub v: Vec3<T>,
    pub a: Vec3<T>,
    /// Mechanical energy `H(q, v)`.
    pub energy: T,
    /// `H − ε k γ⁴ (v·a)`; equals `energy` for second-order dynamics
    /// evaluated with `a` on the manifold.
    pub schott: T,
    /// Energy radiated since the first sample.
    pub radiated: T,
}

/// Why an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination<T> {
    Completed,
    /// Acceleration left the vicinity of the critical manifold.
    RunawayDetected { t: T, growth_rate: T },
    /// Two particles came closer than the collision radius.
    CollisionHalt { t: T, i: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub samples: Vec<Sample<T>>,
    pub termination: Termination<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(samples: Vec<Sample<T>>, termination: Termination<T>) -> Self {
        Self { samples, termination }
    }

    pub fn first(&self) -> &Sample<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<T> {
        &self.samples[self.samples.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Position and velocity at `t` by cubic Hermite interpolation
    /// (`q` with `v`, `v` with `a`). Clamped outside the sampled range.
    pub fn state_at(&self, t: T) -> (Vec3<T>, Vec3<T>) {
        let s = &self.samples;
        let n = s.len();
        if t <= s[0].t || n == 1 {
            return (s[0].q, s[0].v);
        }
        if t >= s[n - 1].t {
            return (s[n - 1].q, s[n - 1].v);
        }
        let i = s.partition_point(|x| x.t <= t) - 1;
        let (l, r) = (&s[i], &s[i + 1]);
        let q = hermite(l.t, l.q.as_slice(), l.v.as_slice(), r.t, r.q.as_slice(), r.v.as_slice(), t);
        let v = hermite(l.t, l.v.as_slice(), l.a.as_slice(), r.t, r.v.as_slice(), r.a.as_slice(), t);
        (Vec3::from_column_slice(&q), Vec3::from_column_slice(&v))
    }

    /// Largest position difference to `other` over `n + 1` uniform times in
    /// `[t0, t1]`.
    pub fn max_position_deviation(&self, other: &Trajectory<T>, t0: T, t1: T, n: usize) -> T {
        (0..=n)
            .map(|k| {
                let t = t0 + (t1 - t0) * T::count(k) / T::count(n);
                (self.state_at(t).0 - other.state_at(t).0).norm()
            })
            .fold(T::zero(), |m, d| m.max(d))
    }

    /// Least-squares slope of `ln |a|` over the last `window` samples.
    pub fn log_acceleration_slope(&self, window: usize) -> T {
        let start = self.samples.len().saturating_sub(window);
        let pts: Vec<(T, T)> = self.samples[start..]
            .iter()
            .filter(|s| s.a.norm() > T::zero())
            .map(|s| (s.t, s.a.norm().ln()))
            .collect();
        fit_slope(&pts)
    }
}

/// Least-squares slope through `(x, y)` points; zero for fewer than two.
pub fn fit_slope<T: Real>(pts: &[(T, T)]) -> T {
    if pts.len() < 2 {
        return T::zero();
    }
    let n = T::count(pts.len());
    let mx = pts.iter().fold(T::zero(), |s, p| s + p.0) / n;
    let my = pts.iter().fold(T::zero(), |s, p| s + p.1) / n;
    let (sxy, sxx) = pts.iter().fold((T::zero(), T::zero()), |(sxy, sxx), p| {
        let dx = p.0 - mx;
        (sxy + dx * (p.1 - my), sxx + dx * dx)
    });
    if sxx == T::zero() {
        T::zero()
    } else {
        sxy / sxx
    }
}

/// Exponent `p` of `y ∝ x^p` fitted in log–log space.
pub fn fit_power_law<T: Real>(x: &[T], y: &[T]) -> T {
    let pts: Vec<(T, T)> = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect();
    fit_slope(&pts)
}
