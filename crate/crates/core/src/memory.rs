//! Self-force of the rigid extended charge: memory kernels and the
//! small-velocity delay equation
//!
//! ```text
//! m_b v̇(t) = e(E + v×B) + (e²/12πR²) (v(t − 2R) − v(t))
//! ```
//!
//! integrated by the method of steps, plus its Taylor-reduced local form.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, PhysicsError, Result};
use crate::fields::FieldMap;
use crate::lorentz_dirac::{guard, LdModel, MassModel};
use crate::ode::rk4_step;
use crate::scalar::{lit, Real, Vec3};
use crate::trajectory::{Sample, Termination, Trajectory};
use crate::units::{ChargeModel, FormFactor};

/// Kernel `h(w)` of an extended form factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryKernel<T> {
    pub form_factor: FormFactor<T>,
    pub charge: T,
}

impl<T: Real> MemoryKernel<T> {
    pub fn new(charge: &ChargeModel<T>) -> Result<Self> {
        match charge.form_factor() {
            FormFactor::PointLimit => Err(invalid("form_factor", "memory kernels need an extended charge")),
            ff => Ok(Self {
                form_factor: ff,
                charge: charge.charge(),
            }),
        }
    }

    pub fn radius(&self) -> T {
        self.form_factor.radius().expect("extended form factor")
    }

    /// `h(w)`, supported on `|w| < 2R`.
    pub fn h(&self, w: T) -> T {
        let r = self.radius();
        let u = w.abs() / r;
        let two: T = lit(2.0);
        if u >= two {
            return T::zero();
        }
        let scale = self.charge * self.charge / (lit::<T>(8.0) * T::pi() * r);
        match self.form_factor {
            FormFactor::SphereShell(_) => scale * (T::one() - u / two),
            // (9/8) (h̃∗h̃)(u) with h̃∗h̃ = (2 − u)³ (u² + 6u + 4) / 30
            FormFactor::UniformBall(_) => {
                let d = two - u;
                scale * lit::<T>(9.0 / 240.0) * d * d * d * (u * u + lit::<T>(6.0) * u + lit::<T>(4.0))
            }
            FormFactor::PointLimit => unreachable!(),
        }
    }

    /// `dh/dw`, used for the `x → 0` limit of [`MemoryKernel::w_t`].
    pub fn dh(&self, w: T) -> T {
        let r = self.radius();
        let u = w.abs() / r;
        let two: T = lit(2.0);
        if u >= two {
            return T::zero();
        }
        let sign = if w < T::zero() { -T::one() } else { T::one() };
        let scale = self.charge * self.charge / (lit::<T>(8.0) * T::pi() * r * r);
        let du = match self.form_factor {
            FormFactor::SphereShell(_) => -T::one() / two,
            // d/du [(2 − u)³ (u² + 6u + 4)] = −5 u (2 − u)² (u + 2)... expanded:
            // d/du [−u⁵/30 + 2u³/3 − 4u²/3 + 16/15] · 30 = −5u⁴ + 60u² − 80u
            FormFactor::UniformBall(_) => {
                lit::<T>(9.0 / 240.0) * (lit::<T>(-5.0) * u * u * u * u + lit::<T>(60.0) * u * u - lit::<T>(80.0) * u)
            }
            FormFactor::PointLimit => unreachable!(),
        };
        sign * scale * du
    }

    /// `W_t(x) = ∫ d³k |ρ̂|² e^{−ik·x} sin(|k|t)/|k|
    ///          = |x|⁻¹ (h(|x| − t) − h(|x| + t))`,
    /// with the limit `−2h'(t)` at `x = 0`.
    pub fn w_t(&self, x: &Vec3<T>, t: T) -> T {
        let r = x.norm();
        if r == T::zero() {
            return lit::<T>(-2.0) * self.dh(t);
        }
        (self.h(r - t) - self.h(r + t)) / r
    }
}

/// Velocity prescribed on `[−2R, 0]`.
#[derive(Clone)]
pub enum History<T: Real> {
    Constant(Vec3<T>),
    Function(Arc<dyn Fn(T) -> Vec3<T> + Send + Sync>),
}

impl<T: Real> fmt::Debug for History<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl<T: Real> History<T> {
    pub fn velocity(&self, t: T) -> Vec3<T> {
        match self {
            History::Constant(v) => *v,
            History::Function(f) => f(t),
        }
    }
}

/// Rigid charged sphere in an external field, small velocities.
#[derive(Debug, Clone)]
pub struct DelayModel<T: Real> {
    pub charge: ChargeModel<T>,
    pub field: Arc<dyn FieldMap<T>>,
}

impl<T: Real> DelayModel<T> {
    /// Requires a sphere-shell form factor and a positive bare mass.
    pub fn new(charge: ChargeModel<T>, field: Arc<dyn FieldMap<T>>) -> Result<Self> {
        if !matches!(charge.form_factor(), FormFactor::SphereShell(_)) {
            return Err(invalid("form_factor", "the delay equation is derived for the sphere shell"));
        }
        if !(charge.bare_mass() > T::zero()) {
            return Err(invalid("bare_mass", "must be positive"));
        }
        Ok(Self { charge, field })
    }

    pub fn radius(&self) -> T {
        self.charge.form_factor().radius().expect("sphere shell")
    }

    /// The delay `2R`.
    pub fn lag(&self) -> T {
        lit::<T>(2.0) * self.radius()
    }

    /// `e² / 12πR²`.
    pub fn delay_coefficient(&self) -> T {
        let e = self.charge.charge();
        let r = self.radius();
        e * e / (lit::<T>(12.0) * T::pi() * r * r)
    }
}

/// `v̇` given the present state and the delayed velocity `v(t − 2R)`.
pub fn delay_rhs<T: Real>(model: &DelayModel<T>, q: &Vec3<T>, v: &Vec3<T>, v_delayed: &Vec3<T>) -> Result<Vec3<T>> {
    guard(v)?;
    let f = model.field.sample(q)?;
    let force = (f.e + v.cross(&f.b)) * model.charge.charge() + (v_delayed - v) * model.delay_coefficient();
    Ok(force / model.charge.bare_mass())
}

/// Dense velocity record on a uniform grid, with the prescribed history
/// before `t = 0`.
struct VelocityRecord<'a, T: Real> {
    history: &'a History<T>,
    h: T,
    v: Vec<Vec3<T>>,
    a: Vec<Vec3<T>>,
}

impl<T: Real> VelocityRecord<'_, T> {
    fn at(&self, t: T, lag: T) -> Result<Vec3<T>> {
        if t <= T::zero() {
            if t < -lag * (T::one() + lit::<T>(1e-12)) {
                return Err(PhysicsError::HistoryTooShort {
                    required_from: t.to_f64(),
                    required_to: 0.0,
                });
            }
            return Ok(self.history.velocity(t));
        }
        let n = self.v.len();
        let pos = t / self.h;
        let i = pos.floor().to_f64() as usize;
        let i = i.min(n.saturating_sub(2));
        if i + 1 >= n {
            return Err(PhysicsError::HistoryTooShort {
                required_from: t.to_f64(),
                required_to: (self.h * T::count(n - 1)).to_f64(),
            });
        }
        let t0 = self.h * T::count(i);
        let y = crate::ode::hermite(
            t0,
            self.v[i].as_slice(),
            self.a[i].as_slice(),
            t0 + self.h,
            self.v[i + 1].as_slice(),
            self.a[i + 1].as_slice(),
            t,
        );
        Ok(Vec3::from_column_slice(&y))
    }
}

/// Method-of-steps integration over `[0, t_end]` with `substeps ≥ 8` RK4
/// steps per delay window and cubic Hermite interpolation of the stored
/// velocity.
pub fn integrate_dde<T: Real>(
    model: &DelayModel<T>,
    q0: &Vec3<T>,
    history: &History<T>,
    t_end: T,
    substeps: usize,
) -> Result<Trajectory<T>> {
    if substeps < 8 {
        return Err(invalid("substeps", "need at least 8 steps per delay window"));
    }
    if !(t_end > T::zero()) {
        return Err(invalid("t_end", "must be positive"));
    }
    let lag = model.lag();
    let h = lag / T::count(substeps);
    let n = (t_end / h).ceil().to_f64() as usize;
    let v0 = history.velocity(T::zero());
    let mut rec = VelocityRecord {
        history,
        h,
        v: vec![v0],
        a: vec![],
    };
    let a0 = delay_rhs(model, q0, &v0, &rec.at(-lag, lag)?)?;
    rec.a.push(a0);

    let k = model.charge.reaction_coefficient();
    let energy = |q: &Vec3<T>, v: &Vec3<T>| -> Result<T> {
        Ok(lit::<T>(0.5) * model.charge.bare_mass() * v.norm_squared() + model.charge.charge() * model.field.potential(q)?)
    };
    let mut samples = Vec::with_capacity(n + 1);
    let e0 = energy(q0, &v0)?;
    samples.push(Sample {
        t: T::zero(),
        q: *q0,
        v: v0,
        a: a0,
        energy: e0,
        schott: e0,
        radiated: T::zero(),
    });
    let mut y: Vec<T> = q0.iter().chain(v0.iter()).copied().collect();
    for step in 0..n {
        let t = h * T::count(step);
        let next = rk4_step(t, &y, h, |s, ys, dy| {
            let q = Vec3::new(ys[0], ys[1], ys[2]);
            let v = Vec3::new(ys[3], ys[4], ys[5]);
            let vd = rec.at(s - lag, lag)?;
            let a = delay_rhs(model, &q, &v, &vd)?;
            dy[0..3].copy_from_slice(v.as_slice());
            dy[3..6].copy_from_slice(a.as_slice());
            Ok(())
        })?;
        y = next;
        let t1 = t + h;
        let q = Vec3::new(y[0], y[1], y[2]);
        let v = Vec3::new(y[3], y[4], y[5]);
        let a = delay_rhs(model, &q, &v, &rec.at(t1 - lag, lag)?)?;
        rec.v.push(v);
        rec.a.push(a);
        let prev = samples.last().expect("initial sample");
        let radiated = prev.radiated + lit::<T>(0.5) * h * k * (prev.a.norm_squared() + a.norm_squared());
        let en = energy(&q, &v)?;
        samples.push(Sample {
            t: t1,
            q,
            v,
            a,
            energy: en,
            schott: en,
            radiated,
        });
    }
    Ok(Trajectory::new(samples, Termination::Completed))
}

/// Coefficients of the local equation `m v̇ = F + c v̈`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorReduced<T> {
    /// `m_b + e²/6πR`
    pub mass: T,
    /// `e²/6π`
    pub jerk_coefficient: T,
}

pub fn taylor_reduced_rhs<T: Real>(model: &DelayModel<T>) -> TaylorReduced<T> {
    let e = model.charge.charge();
    TaylorReduced {
        mass: model.charge.bare_mass() + e * e / (lit::<T>(6.0) * T::pi() * model.radius()),
        jerk_coefficient: model.charge.reaction_coefficient(),
    }
}

/// The Taylor-reduced dynamics as a nonrelativistic Lorentz–Dirac model
/// with `ε = 1`.
pub fn taylor_reduced_model<T: Real>(model: &DelayModel<T>) -> Result<LdModel<T>> {
    let c = taylor_reduced_rhs(model);
    LdModel::new(
        MassModel::NonRelativistic { mass: c.mass },
        ChargeModel::point(model.charge.charge(), c.mass)?,
        T::one(),
        model.field.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{central_potential, NoField, Polynomial};
    use crate::quad::integrate;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn kernel(ff: FormFactor<f64>) -> MemoryKernel<f64> {
        MemoryKernel::new(&ChargeModel::new(1.7, 10.0, ff).unwrap()).unwrap()
    }

    #[test]
    fn kernel_values_at_origin_and_edge() {
        let r = 0.3;
        let e2 = 1.7f64 * 1.7;
        let s = kernel(FormFactor::SphereShell(r));
        assert_eq!(s.h(0.0), e2 / (8.0 * PI * r));
        let b = kernel(FormFactor::UniformBall(r));
        assert!((b.h(0.0) - 1.2 * e2 / (8.0 * PI * r)).abs() < 1e-10 * b.h(0.0));
        for k in [s, b] {
            assert_eq!(k.h(2.0 * r), 0.0);
            assert_eq!(k.h(-2.0 * r), 0.0);
            assert_eq!(k.h(5.0), 0.0);
        }
    }

    #[test]
    fn kernels_match_projected_density_autocorrelation() {
        // h(w) = (ρ₁ ⋆ ρ₁)(w) / 4π with ρ₁ the density projected on one axis
        let r = 0.5;
        let e = 1.7;
        let shell = |x: f64| if x.abs() < r { e / (2.0 * r) } else { 0.0 };
        let ball = |x: f64| if x.abs() < r { 3.0 * e / (4.0 * r) * (1.0 - x * x / (r * r)) } else { 0.0 };
        for (k, rho1) in [
            (kernel(FormFactor::SphereShell(r)), &shell as &dyn Fn(f64) -> f64),
            (kernel(FormFactor::UniformBall(r)), &ball),
        ] {
            for w in [0.0, 0.13, 0.5, 0.77, 0.99] {
                let corr = integrate(|x| rho1(x) * rho1(x + w), -r, r - w, 1e-14, 1e-12).unwrap();
                let expected = corr / (4.0 * PI);
                assert!((k.h(w) - expected).abs() < 1e-10 * k.h(0.0), "{w}: {} vs {}", k.h(w), expected);
            }
        }
    }

    fn ball_g(e: f64, r: f64, k: f64) -> f64 {
        // |ρ̂(k)|² with ρ̂ = (2π)^{-3/2} ∫ e^{-ik·x} ρ
        let x = k * r;
        let f = if x < 1e-3 { 1.0 - x * x / 10.0 } else { 3.0 * (x.sin() - x * x.cos()) / (x * x * x) };
        e * e * f * f / (8.0 * PI * PI * PI)
    }

    #[test]
    fn ball_kernel_matches_fourier_integral() {
        let (e, r) = (1.7, 0.5);
        let k = kernel(FormFactor::UniformBall(r));
        for w in [0.0, 0.2, 0.6, 0.9] {
            // h(w) = 2π ∫ g(k) cos(kw) dk, split into panels for the oscillation
            let mut sum = 0.0;
            let panel = PI / r;
            for p in 0..4000 {
                let (a, b) = (p as f64 * panel, (p + 1) as f64 * panel);
                sum += integrate(|q| ball_g(e, r, q) * (q * w).cos(), a, b, 1e-15, 1e-10).unwrap();
            }
            let got = 2.0 * PI * sum;
            assert!((got - k.h(w)).abs() < 1e-6 * k.h(0.0), "{w}: {got} vs {}", k.h(w));
        }
    }

    #[test]
    fn kernel_integral_equals_fourier_value_at_zero() {
        // ∫ h dw = 2π² g(0) = e²/4π for every form factor
        let e = 1.7f64;
        for ff in [FormFactor::SphereShell(0.4), FormFactor::UniformBall(0.4)] {
            let k = kernel(ff);
            let total = integrate(|w| k.h(w), -0.8, 0.0, 1e-15, 1e-13).unwrap() * 2.0;
            assert!((total - e * e / (4.0 * PI)).abs() < 1e-6 * total);
            let g0 = e * e / (8.0 * PI * PI * PI);
            assert!((total - 2.0 * PI * PI * g0).abs() < 1e-6 * total);
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for ff in [FormFactor::SphereShell(0.4), FormFactor::UniformBall(0.4)] {
            let k = kernel(ff);
            for w in [-0.7, -0.3, 0.1, 0.35, 0.79] {
                let d = 1e-6;
                let fd = (k.h(w + d) - k.h(w - d)) / (2.0 * d);
                assert!((fd - k.dh(w)).abs() < 1e-6, "{w}: {fd} vs {}", k.dh(w));
            }
        }
    }

    #[test]
    fn ball_w_t_matches_three_dimensional_integral() {
        // W_t(x) = 4π ∫ g(k) k² sinc(k|x|) sin(kt)/k dk
        let (e, r) = (1.7, 0.5);
        let k = kernel(FormFactor::UniformBall(r));
        for (x, t) in [(0.3, 0.4), (0.1, 0.9), (0.6, 0.2)] {
            let mut sum = 0.0;
            let panel = PI / r;
            for p in 0..4000 {
                let (a, b) = (p as f64 * panel, (p + 1) as f64 * panel);
                sum += integrate(|q| ball_g(e, r, q) * q * ((q * x).sin() / (q * x)) * (q * t).sin(), a, b, 1e-15, 1e-10).unwrap();
            }
            let got = 4.0 * PI * sum;
            let w = k.w_t(&Vec3::new(x, 0.0, 0.0), t);
            assert!((got - w).abs() < 1e-6 * w.abs().max(1e-3), "{got} vs {w}");
        }
    }

    proptest! {
        #[test]
        fn kernel_is_even(w in -1.0..1.0f64) {
            for ff in [FormFactor::SphereShell(0.4), FormFactor::UniformBall(0.4)] {
                let k = kernel(ff);
                prop_assert!((k.h(w) - k.h(-w)).abs() <= 1e-12 * k.h(0.0));
            }
        }

        #[test]
        fn finite_memory(vbar in 0.0..0.95f64, extra in 0.0..2.0f64, dir in 0.0..std::f64::consts::TAU, frac in 0.0..1.0f64) {
            // |q(t) − q(t − τ)| ≤ v̄ τ and τ ≥ 2R/(1 − v̄) ⇒ W_τ = 0
            let r = 0.4;
            let k = kernel(FormFactor::UniformBall(r));
            let tau = 2.0 * r / (1.0 - vbar) + extra;
            let x = Vec3::new(dir.cos(), dir.sin(), 0.0) * (frac * vbar * tau);
            prop_assert_eq!(k.w_t(&x, tau), 0.0);
            prop_assert_eq!(kernel(FormFactor::SphereShell(r)).w_t(&x, tau), 0.0);
        }
    }

    #[test]
    fn point_charge_has_no_kernel() {
        assert!(MemoryKernel::new(&ChargeModel::point(1.0, 1.0).unwrap()).is_err());
    }

    fn dde_model(r: f64, field: Arc<dyn FieldMap<f64>>) -> DelayModel<f64> {
        DelayModel::new(ChargeModel::new(1.0, 1.0, FormFactor::SphereShell(r)).unwrap(), field).unwrap()
    }

    #[test]
    fn constant_history_without_field_is_stationary() {
        let m = dde_model(0.3, Arc::new(NoField));
        let v0 = Vec3::new(0.01, -0.02, 0.005);
        let traj = integrate_dde(&m, &Vec3::zeros(), &History::Constant(v0), 5.0, 16).unwrap();
        for s in &traj.samples {
            assert_eq!(s.v, v0);
            assert_eq!(s.a, Vec3::zeros());
        }
        assert!((traj.last().q - v0 * traj.last().t).norm() < 1e-14);
    }

    #[test]
    fn taylor_coefficients() {
        let m = dde_model(0.3, Arc::new(NoField));
        let c = taylor_reduced_rhs(&m);
        let coef = m.delay_coefficient();
        let lag = m.lag();
        // v(t − 2R) − v = −2R v̇ + (2R)²/2 v̈ + …
        assert!((coef * lag - 1.0 / (6.0 * PI * 0.3)).abs() < 1e-15);
        assert!((coef * lag * lag / 2.0 - c.jerk_coefficient).abs() < 1e-15);
        assert!((c.mass - 1.0).abs() < 1e-15, "renormalised mass equals m0");
        let big = DelayModel::new(ChargeModel::<f64>::with_bare_mass(1.0, 1.0, FormFactor::SphereShell(1e9)).unwrap(), Arc::new(NoField)).unwrap();
        assert!((taylor_reduced_rhs(&big).mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_short_windows_and_wrong_shapes() {
        let m = dde_model(0.3, Arc::new(NoField));
        assert!(integrate_dde(&m, &Vec3::zeros(), &History::Constant(Vec3::zeros()), 1.0, 4).is_err());
        let ball = ChargeModel::new(1.0, 1.0, FormFactor::UniformBall(0.3)).unwrap();
        assert!(DelayModel::new(ball, Arc::new(NoField)).is_err());
        // m_b = m0 − e²/6πR < 0 for R below e²/6πm0
        let small = ChargeModel::new(1.0, 1.0, FormFactor::SphereShell(0.01)).unwrap();
        assert!(DelayModel::new(small, Arc::new(NoField)).is_err());
    }

    #[test]
    fn harmonic_dde_is_damped_at_the_reduced_rate() {
        let w0 = 1.0;
        let field = Arc::new(central_potential(Arc::new(Polynomial::harmonic(1.0, w0, 1.0))));
        let m = dde_model(0.2, field);
        let traj = integrate_dde(&m, &Vec3::new(1.0, 0.0, 0.0), &History::Constant(Vec3::zeros()), 60.0, 16).unwrap();
        // decay rate from successive maxima of |x|
        let xs: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.q.x)).collect();
        let peaks: Vec<(f64, f64)> = xs
            .windows(3)
            .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].0 > 5.0)
            .map(|w| (w[1].0, w[1].1.ln()))
            .collect();
        let rate = -crate::trajectory::fit_slope(&peaks);
        let z = crate::lorentz_dirac::linearized_oscillator_roots(w0, 1.0 / (6.0 * PI)).unwrap();
        assert!(((rate + z[0].re) / z[0].re).abs() < 0.2, "{rate} vs {}", -z[0].re);
    }
}
