//! Unit conventions, particle presets and the adiabatic bookkeeping parameter.
//!
//! Internally everything is expressed in Heaviside–Lorentz units with the
//! speed of light set to one. A [`UnitSystem`] fixes the remaining two scales
//! (seconds per internal time unit and kilograms per internal mass unit); the
//! internal length unit is then `c` times the time unit and the internal charge
//! unit follows from `e^2 / (4 pi)` carrying dimension energy times length.

use crate::error::{invalid, Result};
use crate::scalar::{lit, Real};

/// CODATA 2018 values used to build presets.
pub mod si {
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const PROTON_MASS: f64 = 1.672_621_923_69e-27;
    /// Tesla per Gauss.
    pub const TESLA_PER_GAUSS: f64 = 1e-4;
}

/// Scales relating internal (c = 1, Heaviside–Lorentz) quantities to SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem<T> {
    time_unit: T,
    mass_unit: T,
}

impl<T: Real> UnitSystem<T> {
    /// `time_unit` in seconds, `mass_unit` in kilograms.
    pub fn new(time_unit: T, mass_unit: T) -> Result<Self> {
        if !(time_unit > T::zero()) || !time_unit.is_finite() {
            return Err(invalid("time_unit", "must be positive and finite"));
        }
        if !(mass_unit > T::zero()) || !mass_unit.is_finite() {
            return Err(invalid("mass_unit", "must be positive and finite"));
        }
        Ok(Self {
            time_unit,
            mass_unit,
        })
    }

    /// One second, one kilogram. Only usable in `f64`: electron-scale
    /// quantities underflow `f32`.
    pub fn si() -> Self {
        Self::new(T::one(), T::one()).unwrap()
    }

    /// Electron rest mass as mass unit and a caller-chosen time unit (seconds).
    pub fn electron_rest(time_unit: T) -> Self {
        Self::new(time_unit, lit(si::ELECTRON_MASS)).unwrap()
    }

    /// Electron mass and one picosecond; keeps electron numbers of order one
    /// to ten-to-the-twelve, representable in `f32`.
    pub fn electron_picosecond() -> Self {
        Self::electron_rest(lit(1e-12))
    }

    pub fn time_unit(&self) -> T {
        self.time_unit
    }

    pub fn mass_unit(&self) -> T {
        self.mass_unit
    }

    /// Meters per internal length unit.
    pub fn length_unit(&self) -> T {
        self.time_unit * lit(si::SPEED_OF_LIGHT)
    }

    /// Speed of light in internal units; exactly one by construction.
    pub fn speed_of_light(&self) -> T {
        T::one()
    }

    /// Coulombs per internal (Heaviside–Lorentz) charge unit.
    pub fn charge_unit(&self) -> T {
        // evaluated in f64: the intermediate product underflows f32
        let t = self.time_unit.to_f64();
        let l = t * si::SPEED_OF_LIGHT;
        lit((si::VACUUM_PERMITTIVITY * self.mass_unit.to_f64() * l * l * l / (t * t)).sqrt())
    }

    /// Joules per internal energy unit (`M c^2`).
    pub fn energy_unit(&self) -> T {
        let c: T = lit(si::SPEED_OF_LIGHT);
        self.mass_unit * c * c
    }

    /// Tesla per internal magnetic field unit.
    pub fn magnetic_unit(&self) -> T {
        self.mass_unit / (self.time_unit * self.charge_unit())
    }

    /// Volt per meter per internal electric field unit.
    pub fn electric_unit(&self) -> T {
        self.mass_unit * self.length_unit()
            / (self.charge_unit() * self.time_unit * self.time_unit)
    }

    pub fn time_from_si(&self, seconds: T) -> T {
        seconds / self.time_unit
    }
    pub fn time_to_si(&self, t: T) -> T {
        t * self.time_unit
    }
    pub fn length_from_si(&self, meters: T) -> T {
        meters / self.length_unit()
    }
    pub fn length_to_si(&self, x: T) -> T {
        x * self.length_unit()
    }
    pub fn mass_from_si(&self, kg: T) -> T {
        kg / self.mass_unit
    }
    pub fn mass_to_si(&self, m: T) -> T {
        m * self.mass_unit
    }
    pub fn charge_from_si(&self, coulomb: T) -> T {
        coulomb / self.charge_unit()
    }
    pub fn charge_to_si(&self, q: T) -> T {
        q * self.charge_unit()
    }
    /// Angular frequency: rad/s to internal.
    pub fn frequency_from_si(&self, per_second: T) -> T {
        per_second * self.time_unit
    }
    pub fn frequency_to_si(&self, w: T) -> T {
        w / self.time_unit
    }
    pub fn magnetic_from_tesla(&self, tesla: T) -> T {
        tesla / self.magnetic_unit()
    }
    pub fn magnetic_to_tesla(&self, b: T) -> T {
        b * self.magnetic_unit()
    }
    pub fn magnetic_from_gauss(&self, gauss: T) -> T {
        self.magnetic_from_tesla(gauss * lit(si::TESLA_PER_GAUSS))
    }
    pub fn magnetic_to_gauss(&self, b: T) -> T {
        self.magnetic_to_tesla(b) / lit(si::TESLA_PER_GAUSS)
    }
    pub fn electric_from_si(&self, volt_per_meter: T) -> T {
        volt_per_meter / self.electric_unit()
    }
    pub fn electric_to_si(&self, e: T) -> T {
        e * self.electric_unit()
    }
}

/// Radial charge distribution of the rigid charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormFactor<T> {
    /// Point charge; the field energy is taken as already absorbed in the
    /// experimental mass.
    PointLimit,
    /// Charge uniformly spread over a sphere of the given radius.
    SphereShell(T),
    /// Charge uniformly spread over a ball of the given radius.
    UniformBall(T),
}

impl<T: Real> FormFactor<T> {
    pub fn radius(&self) -> Option<T> {
        match *self {
            FormFactor::PointLimit => None,
            FormFactor::SphereShell(r) | FormFactor::UniformBall(r) => Some(r),
        }
    }

    /// Electrostatic self-energy `m_e` for total charge `e`.
    pub fn self_energy(&self, e: T) -> T {
        let pi = T::pi();
        match *self {
            FormFactor::PointLimit => T::zero(),
            FormFactor::SphereShell(r) => e * e / (lit::<T>(8.0) * pi * r),
            FormFactor::UniformBall(r) => lit::<T>(3.0) * e * e / (lit::<T>(20.0) * pi * r),
        }
    }

    /// Charge density at distance `r` from the center (zero outside the
    /// support; the shell is a surface density and reports zero everywhere).
    pub fn density(&self, e: T, r: T) -> T {
        match *self {
            FormFactor::UniformBall(radius) if r <= radius => {
                e / (lit::<T>(4.0 / 3.0) * T::pi() * radius * radius * radius)
            }
            _ => T::zero(),
        }
    }
}

/// Particle identity: charge, masses and form factor.
///
/// The bare and experimental masses are tied by the Abraham
/// renormalization `m0 = m_b + 4/3 m_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeModel<T> {
    e: T,
    m0: T,
    m_b: T,
    m_e: T,
    form_factor: FormFactor<T>,
    beta: T,
}

impl<T: Real> ChargeModel<T> {
    /// Builds a model from the experimental (renormalized) mass.
    pub fn new(e: T, m0: T, form_factor: FormFactor<T>) -> Result<Self> {
        if !(m0 > T::zero()) || !m0.is_finite() {
            return Err(invalid("m0", "experimental mass must be positive"));
        }
        if !e.is_finite() {
            return Err(invalid("e", "charge must be finite"));
        }
        if let Some(r) = form_factor.radius() {
            if !(r > T::zero()) || !r.is_finite() {
                return Err(invalid("radius", "form factor radius must be positive"));
            }
        }
        let m_e = form_factor.self_energy(e);
        let m_b = m0 - lit::<T>(4.0 / 3.0) * m_e;
        Ok(Self {
            e,
            m0,
            m_b,
            m_e,
            form_factor,
            beta: Self::beta_of(e, m0),
        })
    }

    /// Builds a model from the bare mass; `m0` follows from the renormalization.
    pub fn with_bare_mass(e: T, m_b: T, form_factor: FormFactor<T>) -> Result<Self> {
        let m_e = form_factor.self_energy(e);
        Self::new(e, m_b + lit::<T>(4.0 / 3.0) * m_e, form_factor)
    }

    /// Point charge of experimental mass `m0`.
    pub fn point(e: T, m0: T) -> Result<Self> {
        Self::new(e, m0, FormFactor::PointLimit)
    }

    fn beta_of(e: T, m0: T) -> T {
        e * e / (lit::<T>(6.0) * T::pi() * m0)
    }

    pub fn charge(&self) -> T {
        self.e
    }
    pub fn experimental_mass(&self) -> T {
        self.m0
    }
    pub fn bare_mass(&self) -> T {
        self.m_b
    }
    /// Electrostatic self-energy `m_e`.
    pub fn self_energy(&self) -> T {
        self.m_e
    }
    pub fn form_factor(&self) -> FormFactor<T> {
        self.form_factor
    }
    /// `beta = e^2 / (6 pi m0)`, a time.
    pub fn beta(&self) -> T {
        self.beta
    }
    /// Radiation-reaction prefactor `e^2 / (6 pi)`.
    pub fn reaction_coefficient(&self) -> T {
        self.e * self.e / (lit::<T>(6.0) * T::pi())
    }
    /// Nonrelativistic effective mass `m_b + 4/3 m_e`.
    pub fn effective_mass(&self) -> T {
        self.m_b + lit::<T>(4.0 / 3.0) * self.m_e
    }

    /// `beta` recomputed from `(e, m0)`; agrees with [`Self::beta`].
    pub fn recomputed_beta(&self) -> T {
        Self::beta_of(self.e, self.m0)
    }
}

fn preset<T: Real>(units: &UnitSystem<T>, charge_si: f64, mass_si: f64) -> ChargeModel<T> {
    let e = lit(charge_si / units.charge_unit().to_f64());
    let m0 = lit(mass_si / units.mass_unit().to_f64());
    ChargeModel::point(e, m0).expect("preset constants are valid")
}

/// Electron (negative charge) as a point charge in the given unit system.
pub fn electron_preset<T: Real>(units: &UnitSystem<T>) -> ChargeModel<T> {
    preset(units, -si::ELEMENTARY_CHARGE, si::ELECTRON_MASS)
}

/// Proton as a point charge in the given unit system.
pub fn proton_preset<T: Real>(units: &UnitSystem<T>) -> ChargeModel<T> {
    preset(units, si::ELEMENTARY_CHARGE, si::PROTON_MASS)
}

/// Cyclotron angular frequency `|e| B / m0` (internal units).
pub fn cyclotron_frequency<T: Real>(model: &ChargeModel<T>, b: T) -> Result<T> {
    if b < T::zero() {
        return Err(invalid("B", "field strength must be non-negative"));
    }
    Ok(model.charge().abs() * b / model.experimental_mass())
}

/// Reference field `B0` with `beta * omega_c(B0) = 1` and the adiabatic
/// parameter `eps = B_lab / B0`.
pub fn reference_field_and_epsilon<T: Real>(model: &ChargeModel<T>, b_lab: T) -> Result<(T, T)> {
    if !(b_lab > T::zero()) {
        return Err(invalid("B_lab", "laboratory field must be positive"));
    }
    if model.charge() == T::zero() {
        return Err(invalid("e", "neutral particle has no reference field"));
    }
    let b0 = model.experimental_mass() / (model.beta() * model.charge().abs());
    Ok((b0, b_lab / b0))
}
