//! Second-order effective dynamics on the critical manifold.
//!
//! The Lorentz–Dirac reaction term is evaluated with `v̇ = h(q, v) = m(v)⁻¹F`
//! and `v̈ = ḣ`, the derivative of `h` along the zeroth-order flow:
//!
//! ```text
//! m(v) v̇ = F + εk [γ² κ(v) ḣ + 3γ⁶ (v·h)² v + 3γ⁴ (v·h) h]
//! ḣ = m(v)⁻¹ [Ḟ − ṁ[h] h],   Ḟ = e[(∇E) v + h×B + v×((∇B) v)]
//! ```
//!
//! For the relativistic mass model this is the Landau–Lifshitz equation; for
//! the Abraham mass it is its semi-relativistic analogue. Both are correct up
//! to `O(ε²)`.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fields::Profile;
use crate::lorentz_dirac::{guard, LdModel, MassModel};
use crate::ode::{dopri5, Controls, Solution, StepAction, System};
use crate::quad::integrate as quad;
use crate::roots::newton_bisect;
use crate::scalar::{gamma, kappa_inv, lit, outer, Mat3, Real, Vec3};
use crate::soliton::effective_mass_rate;
use crate::trajectory::{Sample, Termination, Trajectory};
use crate::units::cyclotron_frequency;

/// The effective equation uses the same parameters as Lorentz–Dirac.
pub type LlModel<T> = LdModel<T>;

/// `dm/dt` along `v̇ = h` for the active mass model.
fn mass_rate<T: Real>(model: &LlModel<T>, v: &Vec3<T>, h: &Vec3<T>) -> Result<Mat3<T>> {
    match model.mass_model {
        MassModel::SemiRelAbraham => effective_mass_rate(&model.charge, v, h),
        MassModel::Relativistic => {
            let m0 = model.charge.experimental_mass();
            let g = gamma(v);
            let g3 = g * g * g;
            let vh = v.dot(h);
            Ok(Mat3::identity() * (m0 * g3 * vh)
                + outer(v, v) * (lit::<T>(3.0) * m0 * g3 * g * g * vh)
                + (outer(h, v) + outer(v, h)) * (m0 * g3))
        }
        MassModel::NonRelativistic { .. } => Ok(Mat3::zeros()),
    }
}

/// Zeroth-order acceleration `h` and its flow derivative `ḣ`.
pub fn manifold_jet<T: Real>(model: &LlModel<T>, q: &Vec3<T>, v: &Vec3<T>) -> Result<(Vec3<T>, Vec3<T>)> {
    let m = model.mass_matrix(v)?;
    let f = model.field.sample(q)?;
    let e = model.charge.charge();
    let force = (f.e + v.cross(&f.b)) * e;
    let h = m.solve(&force);
    let g = model.field.gradient(q)?;
    let force_rate = (g.de * v + h.cross(&f.b) + v.cross(&(g.db * v))) * e;
    let h_dot = m.solve(&(force_rate - mass_rate(model, v, &h)? * h));
    Ok((h, h_dot))
}

/// Acceleration of the effective second-order equation.
pub fn ll_acceleration<T: Real>(model: &LlModel<T>, q: &Vec3<T>, v: &Vec3<T>) -> Result<Vec3<T>> {
    guard(v)?;
    let m = model.mass_matrix(v)?;
    let force = model.force(q, v)?;
    let (h, h_dot) = manifold_jet(model, q, v)?;
    let k = model.reaction_strength();
    let correction = match model.mass_model {
        MassModel::NonRelativistic { .. } => h_dot,
        _ => {
            let g = gamma(v);
            let g2 = g * g;
            let g4 = g2 * g2;
            let vh = v.dot(&h);
            let three: T = lit(3.0);
            let kap = Mat3::identity() + outer(v, v) * g2;
            kap * h_dot * g2 + v * (three * g4 * g2 * vh * vh) + h * (three * g4 * vh)
        }
    };
    Ok(m.solve(&(force + correction * k)))
}

/// `(q̇, v̇)`.
pub fn ll_rhs<T: Real>(model: &LlModel<T>, q: &Vec3<T>, v: &Vec3<T>) -> Result<(Vec3<T>, Vec3<T>)> {
    Ok((*v, ll_acceleration(model, q, v)?))
}

/// State layout: `q, v, radiated`.
struct LlSystem<'a, T: Real> {
    model: &'a LlModel<T>,
}

impl<T: Real> System<T> for LlSystem<'_, T> {
    fn dim(&self) -> usize {
        7
    }
    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let q = Vec3::new(y[0], y[1], y[2]);
        let v = Vec3::new(y[3], y[4], y[5]);
        let a = ll_acceleration(self.model, &q, &v)?;
        dy[0..3].copy_from_slice(v.as_slice());
        dy[3..6].copy_from_slice(a.as_slice());
        dy[6] = self.model.dissipation(&v, &a);
        Ok(())
    }
}

fn samples<T: Real>(model: &LlModel<T>, sol: &Solution<T>) -> Result<Vec<Sample<T>>> {
    sol.t
        .iter()
        .zip(sol.y.iter().zip(&sol.dy))
        .map(|(&t, (y, dy))| {
            let q = Vec3::new(y[0], y[1], y[2]);
            let v = Vec3::new(y[3], y[4], y[5]);
            let a = Vec3::new(dy[3], dy[4], dy[5]);
            let energy = model.energy(&q, &v)?;
            let g = gamma(&v);
            let g4 = match model.mass_model {
                MassModel::NonRelativistic { .. } => T::one(),
                _ => g * g * g * g,
            };
            Ok(Sample {
                t,
                q,
                v,
                a,
                energy,
                schott: energy - model.reaction_strength() * g4 * v.dot(&a),
                radiated: y[6],
            })
        })
        .collect()
}

/// Adaptive integration over `[t0, t1]`.
pub fn integrate<T: Real>(
    model: &LlModel<T>,
    q0: &Vec3<T>,
    v0: &Vec3<T>,
    t0: T,
    t1: T,
    controls: &Controls<T>,
) -> Result<Trajectory<T>> {
    guard(v0)?;
    if !(t1 > t0) {
        return Err(invalid("t_span", "t1 must exceed t0"));
    }
    let mut y0 = Vec::with_capacity(7);
    y0.extend_from_slice(q0.as_slice());
    y0.extend_from_slice(v0.as_slice());
    y0.push(T::zero());
    let sol = dopri5(&LlSystem { model }, t0, &y0, t1, controls, |_, _, _| StepAction::Continue)?;
    Ok(Trajectory::new(samples(model, &sol)?, Termination::Completed))
}

/// Closed-form synchrotron decay in a constant magnetic field, relativistic
/// mass model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBDecay<T> {
    /// `εβ`
    pub beta: T,
    pub omega_c: T,
    pub gamma0: T,
}

/// Builds the constant-field closed forms for initial Lorentz factor `γ0`.
pub fn constant_b_closed_forms<T: Real>(model: &LlModel<T>, b: T, gamma0: T) -> Result<ConstantBDecay<T>> {
    if !(gamma0 >= T::one()) {
        return Err(invalid("gamma0", "must be at least 1"));
    }
    if !(b > T::zero()) {
        return Err(invalid("B", "must be positive"));
    }
    Ok(ConstantBDecay {
        beta: model.reaction_time(),
        omega_c: cyclotron_frequency(&model.charge, b)?,
        gamma0,
    })
}

impl<T: Real> ConstantBDecay<T> {
    /// `βω_c²`, the inverse damping time.
    pub fn rate(&self) -> T {
        self.beta * self.omega_c * self.omega_c
    }

    /// `γ_t` solving `γ̇ = −βω_c²(γ² − 1)`.
    pub fn gamma_at(&self, t: T) -> T {
        let x = (lit::<T>(-2.0) * self.rate() * t).exp();
        let g = self.gamma0;
        (g + T::one() + (g - T::one()) * x) / (g + T::one() - (g - T::one()) * x)
    }

    /// In-plane speed after turning by the angle `phi`.
    pub fn speed_at_angle(&self, u0: T, phi: T) -> T {
        u0 * (-self.beta * self.omega_c * phi).exp()
    }

    /// Speed ratio over one revolution, `e^{−2πβω_c}`.
    pub fn revolution_ratio(&self) -> T {
        (-T::two_pi() * self.beta * self.omega_c).exp()
    }

    /// Gyration radius `γ|v|/ω_c` at `t = 0`.
    pub fn initial_radius(&self) -> T {
        (self.gamma0 * self.gamma0 - T::one()).sqrt() / self.omega_c
    }

    pub fn radius_at(&self, t: T) -> T {
        let x = (-self.rate() * t).exp();
        let half: T = lit(0.5);
        self.initial_radius() * x / (T::one() + (self.gamma0 - T::one()) * half * (T::one() - x * x))
    }

    /// Power-law form valid for `γ0 ≫ 1` and `βω_c² t ≪ 1`.
    pub fn radius_ultrarelativistic(&self, t: T) -> T {
        self.initial_radius() / (T::one() + self.gamma0 * self.rate() * t)
    }

    /// Time at which `r(t)/r0` reaches `ratio` in the full closed form.
    pub fn time_to_radius_ratio(&self, ratio: T) -> Result<T> {
        if !(ratio > T::zero() && ratio < T::one()) {
            return Err(invalid("ratio", "must lie in (0, 1)"));
        }
        let b = self.rate();
        let c = (self.gamma0 - T::one()) * lit(0.5);
        // ln(r/r0) = −bt − ln(1 + c(1 − e^{−2bt})) is decreasing in t
        let f = |t: T| {
            let x2 = (lit::<T>(-2.0) * b * t).exp();
            let d = T::one() + c * (T::one() - x2);
            let val = -b * t - d.ln() - ratio.ln();
            let der = -b - lit::<T>(2.0) * b * c * x2 / d;
            (val, der)
        };
        let mut hi = T::one() / b;
        while f(hi).0 > T::zero() {
            hi *= lit(2.0);
        }
        newton_bisect(f, T::zero(), hi, hi * T::eps() * lit(16.0))
    }

    /// Time at which the power-law radius reaches `ratio · r0`.
    pub fn time_to_radius_ratio_ultrarelativistic(&self, ratio: T) -> T {
        (T::one() / ratio - T::one()) / (self.gamma0 * self.rate())
    }

    /// Revolutions completed by time `t`, `∫ ω_c / (2π γ_s) ds` by adaptive
    /// quadrature.
    pub fn revolutions(&self, t: T) -> Result<T> {
        let phase = quad(|s| self.omega_c / self.gamma_at(s), T::zero(), t, T::zero(), lit(1e-12))?;
        Ok(phase / T::two_pi())
    }
}

/// Relativistic effective acceleration in a central electrostatic potential,
/// written out for `E = −φ'(r) r̂`.
pub fn central_potential_acceleration<T: Real>(
    model: &LlModel<T>,
    profile: &dyn Profile<T>,
    q: &Vec3<T>,
    v: &Vec3<T>,
) -> Result<Vec3<T>> {
    guard(v)?;
    let r = q.norm();
    if r == T::zero() {
        return Err(crate::error::PhysicsError::DegenerateProbe);
    }
    let n = q / r;
    let e = model.charge.charge();
    let m0 = model.charge.experimental_mass();
    let k = model.reaction_strength();
    let g = gamma(v);
    let g2 = g * g;
    let (p1, p2) = (profile.d1(r), profile.d2(r));
    let vn = v.dot(&n);
    let em = e / m0;
    let friction = (n * (-vn * p2) - (v - n * vn) * (p1 / r)) * (em * g);
    let drag = (n * vn - v * g2 + v * (g2 * vn * vn)) * (em * em * p1 * p1);
    let rhs = n * (-e * p1) + (friction + drag) * k;
    Ok(kappa_inv(v) * rhs / (m0 * g))
}

/// Angular momentum `q × m0 γ v`.
pub fn angular_momentum<T: Real>(model: &LlModel<T>, q: &Vec3<T>, v: &Vec3<T>) -> Vec3<T> {
    q.cross(v) * (model.charge.experimental_mass() * gamma(v))
}

/// `λ` in `dL/dt = λ L` for a central potential (relativistic model).
///
/// `λ = −(εk/m0) [(e/m0) φ'/r + (e/m0)² γ (1 − (v·r̂)²) φ'²]`.
pub fn angular_momentum_decay<T: Real>(model: &LlModel<T>, profile: &dyn Profile<T>, q: &Vec3<T>, v: &Vec3<T>) -> Result<T> {
    let r = q.norm();
    if r == T::zero() {
        return Err(crate::error::PhysicsError::DegenerateProbe);
    }
    let m0 = model.charge.experimental_mass();
    let em = model.charge.charge() / m0;
    let p1 = profile.d1(r);
    let vn = v.dot(q) / r;
    Ok(-(model.reaction_strength() / m0) * (em * p1 / r + em * em * gamma(v) * (T::one() - vn * vn) * p1 * p1))
}

/// One-dimensional motion along `x₁` in the potential `φ(x₁)`:
/// `m0 γ³ v̇ = −eφ' − εk (e/m0) γ φ'' v`.
pub fn axial_1d_acceleration<T: Real>(model: &LlModel<T>, profile: &dyn Profile<T>, x: T, v: T) -> Result<T> {
    guard(&Vec3::new(v, T::zero(), T::zero()))?;
    let e = model.charge.charge();
    let m0 = model.charge.experimental_mass();
    let g = T::one() / (T::one() - v * v).sqrt();
    let force = -e * profile.d1(x) - model.reaction_strength() * (e / m0) * g * profile.d2(x) * v;
    Ok(force / (m0 * g * g * g))
}

/// `m0 γ + eφ + εk (e/m0) γ φ' v`, the quantity balanced in
/// [`axial_energy_rate`].
pub fn axial_energy_function<T: Real>(model: &LlModel<T>, profile: &dyn Profile<T>, x: T, v: T) -> T {
    let e = model.charge.charge();
    let m0 = model.charge.experimental_mass();
    let g = T::one() / (T::one() - v * v).sqrt();
    m0 * g + e * profile.value(x) + model.reaction_strength() * (e / m0) * g * profile.d1(x) * v
}

/// `−εk (e/m0)² φ'² − (εk e/m0)² γ φ' φ'' v / m0`.
pub fn axial_energy_rate<T: Real>(model: &LlModel<T>, profile: &dyn Profile<T>, x: T, v: T) -> T {
    let e = model.charge.charge();
    let m0 = model.charge.experimental_mass();
    let k = model.reaction_strength();
    let g = T::one() / (T::one() - v * v).sqrt();
    let (p1, p2) = (profile.d1(x), profile.d2(x));
    let em = e / m0;
    -k * em * em * p1 * p1 - (k * em) * (k * em) * g * p1 * p2 * v / m0
}

/// Samples of a one-dimensional run with its energy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct AxialRun<T> {
    pub t: Vec<T>,
    pub x: Vec<T>,
    pub v: Vec<T>,
    /// [`axial_energy_function`] at each sample.
    pub energy: Vec<T>,
    /// `∫ axial_energy_rate dt` from the start.
    pub balance: Vec<T>,
}

impl<T: Real> AxialRun<T> {
    /// `max_t |W(t) − W(0) − ∫ rate|`.
    pub fn energy_balance_residual(&self) -> T {
        self.energy
            .iter()
            .zip(&self.balance)
            .map(|(w, b)| (*w - self.energy[0] - *b).abs())
            .fold(T::zero(), |m, d| m.max(d))
    }
}

struct AxialSystem<'a, T: Real> {
    model: &'a LlModel<T>,
    profile: &'a dyn Profile<T>,
}

impl<T: Real> System<T> for AxialSystem<'_, T> {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        dy[0] = y[1];
        dy[1] = axial_1d_acceleration(self.model, self.profile, y[0], y[1])?;
        dy[2] = axial_energy_rate(self.model, self.profile, y[0], y[1]);
        Ok(())
    }
}

/// Integrates the one-dimensional equation together with the energy balance.
pub fn integrate_axial_1d<T: Real>(
    model: &LlModel<T>,
    profile: Arc<dyn Profile<T>>,
    x0: T,
    v0: T,
    t0: T,
    t1: T,
    controls: &Controls<T>,
) -> Result<AxialRun<T>> {
    if !(t1 > t0) {
        return Err(invalid("t_span", "t1 must exceed t0"));
    }
    let sys = AxialSystem {
        model,
        profile: profile.as_ref(),
    };
    let sol = dopri5(&sys, t0, &[x0, v0, T::zero()], t1, controls, |_, _, _| StepAction::Continue)?;
    let energy = sol
        .y
        .iter()
        .map(|y| axial_energy_function(model, profile.as_ref(), y[0], y[1]))
        .collect();
    Ok(AxialRun {
        t: sol.t.clone(),
        x: sol.y.iter().map(|y| y[0]).collect(),
        v: sol.y.iter().map(|y| y[1]).collect(),
        energy,
        balance: sol.y.iter().map(|y| y[2]).collect(),
    })
}
