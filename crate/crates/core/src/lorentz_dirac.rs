//! Third-order Lorentz–Dirac dynamics with radiation reaction.
//!
//! With `k = e²/6π`, the semi-relativistic equation for the Abraham charge is
//!
//! ```text
//! m(v) v̇ = e(E + v×B) + εk [γ² κ(v) v̈ + 3γ⁶ (v·v̇)² v + 3γ⁴ (v·v̇) v̇]
//! ```
//!
//! and the relativistic one is the same equation with `m(v) = m0 γ κ(v)`,
//! `κ = 1 + γ² |v><v|`. The nonrelativistic variant `m v̇ = F + εk v̈` is
//! kept for the memory module's local reduction.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{invalid, PhysicsError, Result};
use crate::fields::FieldMap;
use crate::ode::{dopri5, Controls, Solution, StepAction, System};
use crate::roots::newton_bisect;
use crate::scalar::{gamma, kappa_inv, lit, Real, Vec3};
use crate::soliton::{effective_mass_matrix, energy_of_velocity, MassMatrix};
use crate::trajectory::{Sample, Termination, Trajectory};
use crate::units::ChargeModel;

/// `|v|` must stay below this.
pub const VELOCITY_GUARD: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassModel<T> {
    /// Abraham effective mass `m(v) = m_b(γ + γ³|v><v|) + m_f(v)`.
    SemiRelAbraham,
    /// `m0 γ κ(v)`.
    Relativistic,
    /// Constant mass, `γ = 1` everywhere.
    NonRelativistic { mass: T },
}

/// Charge, mass model, adiabatic parameter and external field.
#[derive(Debug, Clone)]
pub struct LdModel<T: Real> {
    pub mass_model: MassModel<T>,
    pub charge: ChargeModel<T>,
    pub epsilon: T,
    pub field: Arc<dyn FieldMap<T>>,
}

/// Position, velocity and acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetState<T: Real> {
    pub q: Vec3<T>,
    pub v: Vec3<T>,
    pub a: Vec3<T>,
}

/// Time derivative of a [`JetState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetDerivative<T: Real> {
    pub v: Vec3<T>,
    pub a: Vec3<T>,
    pub jerk: Vec3<T>,
}

pub(crate) fn guard<T: Real>(v: &Vec3<T>) -> Result<()> {
    let s = v.norm();
    if !(s < lit(VELOCITY_GUARD)) {
        return Err(PhysicsError::Superluminal {
            speed: s.to_f64(),
            limit: VELOCITY_GUARD,
        });
    }
    Ok(())
}

impl<T: Real> LdModel<T> {
    pub fn new(
        mass_model: MassModel<T>,
        charge: ChargeModel<T>,
        epsilon: T,
        field: Arc<dyn FieldMap<T>>,
    ) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(invalid("epsilon", "must be positive"));
        }
        if let MassModel::NonRelativistic { mass } = mass_model {
            if !(mass > T::zero()) {
                return Err(invalid("mass", "nonrelativistic mass must be positive"));
            }
        }
        Ok(Self {
            mass_model,
            charge,
            epsilon,
            field,
        })
    }

    /// `ε e²/6π`.
    pub fn reaction_strength(&self) -> T {
        self.epsilon * self.charge.reaction_coefficient()
    }

    /// Rest mass entering the runaway rate.
    pub fn rest_mass(&self) -> T {
        match self.mass_model {
            MassModel::NonRelativistic { mass } => mass,
            _ => self.charge.experimental_mass(),
        }
    }

    /// `ε β`, the runaway e-folding time at rest.
    pub fn reaction_time(&self) -> T {
        self.reaction_strength() / self.rest_mass()
    }

    pub fn mass_matrix(&self, v: &Vec3<T>) -> Result<MassMatrix<T>> {
        guard(v)?;
        let m = match self.mass_model {
            MassModel::SemiRelAbraham => effective_mass_matrix(&self.charge, v)?,
            MassModel::Relativistic => {
                let g = gamma(v);
                let m0 = self.charge.experimental_mass();
                MassMatrix {
                    a: m0 * g,
                    b: m0 * g * g * g,
                    v: *v,
                }
            }
            MassModel::NonRelativistic { mass } => MassMatrix {
                a: mass,
                b: T::zero(),
                v: *v,
            },
        };
        let (transverse, longitudinal) = m.eigenvalues();
        if !(transverse > T::zero() && longitudinal > T::zero()) {
            return Err(invalid("mass", "effective mass matrix is not positive definite"));
        }
        Ok(m)
    }

    /// Lorentz force `e(E + v×B)`.
    pub fn force(&self, q: &Vec3<T>, v: &Vec3<T>) -> Result<Vec3<T>> {
        let f = self.field.sample(q)?;
        Ok((f.e + v.cross(&f.b)) * self.charge.charge())
    }

    /// Zeroth-order manifold `h(q, v) = m(v)⁻¹ F`.
    pub fn manifold_acceleration(&self, q: &Vec3<T>, v: &Vec3<T>) -> Result<Vec3<T>> {
        Ok(self.mass_matrix(v)?.solve(&self.force(q, v)?))
    }

    /// Kinetic energy plus `eφ`.
    pub fn energy(&self, q: &Vec3<T>, v: &Vec3<T>) -> Result<T> {
        guard(v)?;
        let kinetic = match self.mass_model {
            MassModel::SemiRelAbraham => energy_of_velocity(&self.charge, v)?,
            MassModel::Relativistic => self.charge.experimental_mass() * gamma(v),
            MassModel::NonRelativistic { mass } => lit::<T>(0.5) * mass * v.norm_squared(),
        };
        Ok(kinetic + self.charge.charge() * self.field.potential(q)?)
    }

    fn gamma_of(&self, v: &Vec3<T>) -> T {
        match self.mass_model {
            MassModel::NonRelativistic { .. } => T::one(),
            _ => gamma(v),
        }
    }

    /// Energy dissipation rate `εk [γ⁴ a² + γ⁶ (v·a)²]`.
    pub fn dissipation(&self, v: &Vec3<T>, a: &Vec3<T>) -> T {
        let g2 = {
            let g = self.gamma_of(v);
            g * g
        };
        let va = v.dot(a);
        self.reaction_strength() * g2 * g2 * (a.norm_squared() + g2 * va * va)
    }

    /// Schott energy `G = H − εk γ⁴ (v·a)`.
    pub fn schott_energy(&self, s: &JetState<T>) -> Result<T> {
        let g = self.gamma_of(&s.v);
        let g2 = g * g;
        Ok(self.energy(&s.q, &s.v)? - self.reaction_strength() * g2 * g2 * s.v.dot(&s.a))
    }

    /// `v̈` solved from the equation of motion.
    pub fn jerk(&self, s: &JetState<T>) -> Result<Vec3<T>> {
        let m = self.mass_matrix(&s.v)?;
        let f = self.force(&s.q, &s.v)?;
        let k = self.reaction_strength();
        let residual = (m.apply(&s.a) - f) / k;
        if let MassModel::NonRelativistic { .. } = self.mass_model {
            return Ok(residual);
        }
        let g = gamma(&s.v);
        let g2 = g * g;
        let g4 = g2 * g2;
        let va = s.v.dot(&s.a);
        let three: T = lit(3.0);
        let bracket = residual - s.v * (three * g4 * g2 * va * va) - s.a * (three * g4 * va);
        Ok(kappa_inv(&s.v) * bracket / g2)
    }

    fn check_state(&self, s: &JetState<T>) -> Result<()> {
        guard(&s.v)?;
        let finite = s.q.iter().chain(s.v.iter()).chain(s.a.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(invalid("state", "non-finite component"));
        }
        Ok(())
    }
}

/// Derivative of the jet state.
pub fn ld_rhs<T: Real>(model: &LdModel<T>, s: &JetState<T>) -> Result<JetDerivative<T>> {
    Ok(JetDerivative {
        v: s.v,
        a: s.a,
        jerk: model.jerk(s)?,
    })
}

/// Schott energy of a jet state.
pub fn schott_energy<T: Real>(model: &LdModel<T>, s: &JetState<T>) -> Result<T> {
    model.schott_energy(s)
}

/// Runaway test: `|a| > factor · max(|h(q, v)|, floor)` on `consecutive`
/// accepted steps in a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunawayCriterion<T> {
    pub factor: T,
    pub floor: T,
    pub consecutive: usize,
}

impl<T: Real> RunawayCriterion<T> {
    /// Factor 10, three steps, floor `10⁻¹² / (εβ)`.
    pub fn default_for(model: &LdModel<T>) -> Self {
        Self {
            factor: lit(10.0),
            floor: lit::<T>(1e-12) / model.reaction_time(),
            consecutive: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdControls<T> {
    pub ode: Controls<T>,
    pub runaway: Option<RunawayCriterion<T>>,
}

impl<T: Real> LdControls<T> {
    pub fn new(ode: Controls<T>) -> Self {
        Self { ode, runaway: None }
    }
}

/// State layout: `q, v, a, radiated`.
struct LdSystem<'a, T: Real> {
    model: &'a LdModel<T>,
}

fn jet<T: Real>(y: &[T]) -> JetState<T> {
    JetState {
        q: Vec3::new(y[0], y[1], y[2]),
        v: Vec3::new(y[3], y[4], y[5]),
        a: Vec3::new(y[6], y[7], y[8]),
    }
}

impl<T: Real> System<T> for LdSystem<'_, T> {
    fn dim(&self) -> usize {
        10
    }
    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let s = jet(y);
        let j = self.model.jerk(&s)?;
        dy[0..3].copy_from_slice(s.v.as_slice());
        dy[3..6].copy_from_slice(s.a.as_slice());
        dy[6..9].copy_from_slice(j.as_slice());
        dy[9] = self.model.dissipation(&s.v, &s.a);
        Ok(())
    }
}

fn pack<T: Real>(s: &JetState<T>) -> Vec<T> {
    let mut y = Vec::with_capacity(10);
    y.extend_from_slice(s.q.as_slice());
    y.extend_from_slice(s.v.as_slice());
    y.extend_from_slice(s.a.as_slice());
    y.push(T::zero());
    y
}

fn samples_from<T: Real>(model: &LdModel<T>, sol: &Solution<T>) -> Result<Vec<Sample<T>>> {
    let base = sol.y[0][9];
    sol.t
        .iter()
        .zip(&sol.y)
        .map(|(&t, y)| {
            let s = jet(y);
            Ok(Sample {
                t,
                q: s.q,
                v: s.v,
                a: s.a,
                energy: model.energy(&s.q, &s.v)?,
                schott: model.schott_energy(&s)?,
                radiated: y[9] - base,
            })
        })
        .collect()
}

/// Forward integration over `[t0, t1]`. Runaways are flagged, not resolved.
pub fn integrate_forward<T: Real>(
    model: &LdModel<T>,
    s0: &JetState<T>,
    t0: T,
    t1: T,
    controls: &LdControls<T>,
) -> Result<Trajectory<T>> {
    model.check_state(s0)?;
    if !(t1 > t0) {
        return Err(invalid("t_span", "t1 must exceed t0"));
    }
    let sys = LdSystem { model };
    let mut streak = 0usize;
    let mut flagged: Option<T> = None;
    let mut observer_error: Option<PhysicsError> = None;
    let sol = dopri5(&sys, t0, &pack(s0), t1, &controls.ode, |t, y, _| {
        let Some(crit) = controls.runaway else {
            return StepAction::Continue;
        };
        let s = jet(y);
        let h = match model.manifold_acceleration(&s.q, &s.v) {
            Ok(h) => h,
            Err(e) => {
                observer_error = Some(e);
                return StepAction::Stop;
            }
        };
        if s.a.norm() > crit.factor * h.norm().max(crit.floor) {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= crit.consecutive {
            flagged = Some(t);
            StepAction::Stop
        } else {
            StepAction::Continue
        }
    })?;
    if let Some(e) = observer_error {
        return Err(e);
    }
    let samples = samples_from(model, &sol)?;
    let mut traj = Trajectory::new(samples, Termination::Completed);
    if let Some(t) = flagged {
        let rate = traj.log_acceleration_slope(10);
        traj.termination = Termination::RunawayDetected { t, growth_rate: rate };
    }
    Ok(traj)
}

/// Integrates from the terminal data `(q_T, v_T)` at time `t_final` back to
/// zero, seeded with the zeroth-order manifold acceleration. The result is
/// ordered forward in time and its radiated energy starts at zero.
///
/// The seed is off the true critical manifold by `O(ε)`; that error decays
/// on the time scale `εβ` in reversed time, so the last
/// [`terminal_transient`] of the trajectory should be discarded.
pub fn integrate_backward<T: Real>(
    model: &LdModel<T>,
    q_final: &Vec3<T>,
    v_final: &Vec3<T>,
    t_final: T,
    controls: &LdControls<T>,
) -> Result<Trajectory<T>> {
    if !(t_final > T::zero()) {
        return Err(invalid("T", "terminal time must be positive"));
    }
    let a = model.manifold_acceleration(q_final, v_final)?;
    let s = JetState {
        q: *q_final,
        v: *v_final,
        a,
    };
    model.check_state(&s)?;
    let sys = LdSystem { model };
    let sol = dopri5(&sys, t_final, &pack(&s), T::zero(), &controls.ode, |_, _, _| StepAction::Continue)?;
    let mut samples = samples_from(model, &sol)?;
    samples.reverse();
    let base = samples[0].radiated;
    for s in &mut samples {
        s.radiated -= base;
    }
    Ok(Trajectory::new(samples, Termination::Completed))
}

/// Length `10 εβ` of the terminal transient of [`integrate_backward`].
pub fn terminal_transient<T: Real>(model: &LdModel<T>) -> T {
    lit::<T>(10.0) * model.reaction_time()
}

/// Roots of `εk z³ − z² − ω0² = 0`: the damped pair (positive imaginary
/// part first) and the runaway root near `1/εk`.
pub fn linearized_oscillator_roots<T: Real>(omega0: T, eps_k: T) -> Result<[Complex<T>; 3]> {
    if !(omega0 > T::zero()) || !(eps_k > T::zero()) {
        return Err(invalid("omega0/eps_k", "must be positive"));
    }
    // runaway root z3 = 1/εk + δ with δ (1 + εk δ)² = εk ω0²
    let w2 = omega0 * omega0;
    let target = eps_k * w2;
    let delta = newton_bisect(
        |d: T| {
            let u = T::one() + eps_k * d;
            (d * u * u - target, u * u + lit::<T>(2.0) * eps_k * d * u)
        },
        T::zero(),
        target,
        T::eps() * target,
    )?;
    let z3 = T::one() / eps_k + delta;
    // remaining quadratic z² + δ z + δ z3
    let q = delta * z3;
    let half_d = delta * lit(0.5);
    let disc = half_d * half_d - q;
    let (z1, z2) = if disc < T::zero() {
        let im = (-disc).sqrt();
        (Complex::new(-half_d, im), Complex::new(-half_d, -im))
    } else {
        let r = disc.sqrt();
        (Complex::new(-half_d + r, T::zero()), Complex::new(-half_d - r, T::zero()))
    };
    Ok([z1, z2, Complex::new(z3, T::zero())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{central_potential, uniform_magnetic, NoField, Polynomial};
    use crate::units::FormFactor;
    use nalgebra::Matrix3;

    fn point_model(mass_model: MassModel<f64>, field: Arc<dyn FieldMap<f64>>, eps: f64) -> LdModel<f64> {
        LdModel::new(mass_model, ChargeModel::point(1.0, 1.0).unwrap(), eps, field).unwrap()
    }

    fn controls() -> LdControls<f64> {
        LdControls::new(Controls::with_tolerances(1e-12, 1e-10))
    }

    #[test]
    fn free_soliton_has_zero_jerk() {
        for mm in [MassModel::SemiRelAbraham, MassModel::Relativistic, MassModel::NonRelativistic { mass: 1.0 }] {
            let m = point_model(mm, Arc::new(NoField), 0.1);
            let s = JetState {
                q: Vec3::new(1.0, 2.0, 3.0),
                v: Vec3::new(0.3, -0.1, 0.2),
                a: Vec3::zeros(),
            };
            assert_eq!(ld_rhs(&m, &s).unwrap().jerk, Vec3::zeros());
        }
    }

    #[test]
    fn runaway_rate_at_rest() {
        let m = point_model(MassModel::Relativistic, Arc::new(NoField), 0.3);
        let a = Vec3::new(1e-7, 0.0, 0.0);
        let s = JetState {
            q: Vec3::zeros(),
            v: Vec3::zeros(),
            a,
        };
        let j = m.jerk(&s).unwrap();
        assert!((j - a / m.reaction_time()).norm() < 1e-15);
    }

    #[test]
    fn relativistic_equals_abraham_without_field_mass() {
        // Abraham model with m_e = 0 and m_b = m0 reduces to the relativistic one
        let field: Arc<dyn FieldMap<f64>> = Arc::new(uniform_magnetic(0.7, Vec3::z()).unwrap());
        let rel = point_model(MassModel::Relativistic, field.clone(), 0.2);
        let abr = point_model(MassModel::SemiRelAbraham, field, 0.2);
        let s = JetState {
            q: Vec3::new(0.1, 0.2, 0.3),
            v: Vec3::new(0.5, -0.3, 0.4),
            a: Vec3::new(0.2, 0.7, -0.1),
        };
        let (j1, j2) = (rel.jerk(&s).unwrap(), abr.jerk(&s).unwrap());
        assert!((j1 - j2).norm() < 1e-12 * j1.norm());
        assert!((rel.energy(&s.q, &s.v).unwrap() - abr.energy(&s.q, &s.v).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn jerk_satisfies_the_equation_of_motion() {
        // substitute back into the unsolved form
        let field: Arc<dyn FieldMap<f64>> = Arc::new(central_potential(Arc::new(Polynomial::harmonic(1.0, 1.3, 1.0))));
        let charge = ChargeModel::new(1.0, 1.0, FormFactor::SphereShell(0.05)).unwrap();
        let m = LdModel::new(MassModel::SemiRelAbraham, charge, 0.3, field).unwrap();
        let s = JetState {
            q: Vec3::new(0.3, -0.4, 0.1),
            v: Vec3::new(0.2, 0.5, -0.3),
            a: Vec3::new(-0.4, 0.1, 0.9),
        };
        let j = m.jerk(&s).unwrap();
        let g = gamma(&s.v);
        let va = s.v.dot(&s.a);
        let kap = Matrix3::identity() + s.v * s.v.transpose() * (g * g);
        let rhs = m.force(&s.q, &s.v).unwrap()
            + (kap * j * (g * g) + s.v * (3.0 * g.powi(6) * va * va) + s.a * (3.0 * g.powi(4) * va))
                * m.reaction_strength();
        let lhs = m.mass_matrix(&s.v).unwrap().apply(&s.a);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
    }

    #[test]
    fn velocity_guard_is_an_error() {
        let m = point_model(MassModel::Relativistic, Arc::new(NoField), 0.1);
        let s = JetState {
            q: Vec3::zeros(),
            v: Vec3::new(1.0 - 1e-10, 0.0, 0.0),
            a: Vec3::zeros(),
        };
        assert!(matches!(m.jerk(&s), Err(PhysicsError::Superluminal { .. })));
        assert!(LdModel::new(MassModel::Relativistic, ChargeModel::point(1.0, 1.0).unwrap(), 0.0, Arc::new(NoField)).is_err());
    }

    #[test]
    fn schott_energy_special_cases() {
        let m = point_model(MassModel::SemiRelAbraham, Arc::new(NoField), 0.1);
        let mut s = JetState {
            q: Vec3::zeros(),
            v: Vec3::new(0.4, 0.0, 0.0),
            a: Vec3::zeros(),
        };
        let h = m.energy(&s.q, &s.v).unwrap();
        assert_eq!(m.schott_energy(&s).unwrap(), h);
        s.a = Vec3::new(0.0, 2.0, -1.0);
        assert_eq!(m.schott_energy(&s).unwrap(), h);
    }

    #[test]
    fn field_free_uniform_motion() {
        let m = point_model(MassModel::Relativistic, Arc::new(NoField), 0.1);
        let s0 = JetState {
            q: Vec3::zeros(),
            v: Vec3::new(0.3, 0.4, 0.0),
            a: Vec3::zeros(),
        };
        let traj = integrate_forward(&m, &s0, 0.0, 5.0, &controls()).unwrap();
        let last = traj.last();
        assert!((last.q - s0.v * 5.0).norm() < 1e-12);
        assert!((last.energy - traj.first().energy).abs() < 1e-12);
        assert_eq!(traj.termination, Termination::Completed);
        let back = integrate_backward(&m, &last.q, &last.v, 5.0, &controls()).unwrap();
        assert!(back.samples.iter().all(|x| x.a == Vec3::zeros()));
    }

    #[test]
    fn runaway_is_detected_with_the_expected_rate() {
        let m = point_model(MassModel::Relativistic, Arc::new(NoField), 0.5);
        let tau = m.reaction_time();
        let s0 = JetState {
            q: Vec3::zeros(),
            v: Vec3::zeros(),
            a: Vec3::new(1e-9, 0.0, 0.0),
        };
        let mut c = controls();
        c.runaway = Some(RunawayCriterion::default_for(&m));
        let traj = integrate_forward(&m, &s0, 0.0, 100.0 * tau, &c).unwrap();
        match traj.termination {
            Termination::RunawayDetected { growth_rate, .. } => {
                assert!((growth_rate * tau - 1.0).abs() < 0.01, "{growth_rate}");
            }
            other => panic!("expected runaway, got {other:?}"),
        }
    }

    #[test]
    fn cubic_roots_against_companion_matrix() {
        for (w0, ek) in [(1e3, 1e-8), (1.0, 0.1), (2.0, 0.01)] {
            let z = linearized_oscillator_roots(w0, ek).unwrap();
            // monic companion of z³ − z²/εk − ω0²/εk
            let comp = Matrix3::new(1.0 / ek, 0.0, w0 * w0 / ek, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
            let ev = comp.complex_eigenvalues();
            for r in z.iter() {
                let best = ev.iter().map(|e| (e - r).norm() / r.norm()).fold(f64::INFINITY, f64::min);
                // the companion eigensolver is the weaker of the two at large spread
                assert!(best < 1e-6, "{r} vs {ev:?}");
                let resid = ek * r.powi(3) - r.powi(2) - w0 * w0;
                assert!(resid.norm() < 1e-10 * (ek * r.norm().powi(3) + r.norm_sqr()));
            }
            let sum = z[0] + z[1] + z[2];
            assert!((sum.re - 1.0 / ek).abs() < 1e-10 / ek && sum.im.abs() < 1e-10 / ek);
            assert!(z[0].re < 0.0 && z[1].re < 0.0 && z[2].re > 0.0);
        }
        let z = linearized_oscillator_roots(1e3f64, 1e-8).unwrap();
        assert!((z[0].re + 5e-3).abs() < 1e-6);
        assert!((z[0].im - 1e3).abs() < 1e-6 * 1e3);
        assert!((z[2].re - 1e8).abs() < 1.0);
    }
}
