//! Normal modes and radiative damping of the ideal Penning trap.
//!
//! In the small-velocity, small-radius limit the effective equation
//! decouples into an axial damped oscillator `z̈ = −ω_z² z − βω_z² ż` and the
//! in-plane system `ψ̇ = (A + βV) ψ`, `ψ = (r, u)`, with
//!
//! ```text
//! A = [[0, 1], [½ω_z², ω_c J]],   V = [[0, 0], [½ω_c ω_z² J, (½ω_z² − ω_c²)]]
//! ```
//!
//! and `J (x, y) = (y, −x)`. First-order perturbation theory gives the mode
//! dampings reported by [`mode_analysis`].

use nalgebra::Matrix4;
use num_complex::Complex;

use crate::error::{invalid, PhysicsError, Result};
use crate::scalar::{lit, Real};
use crate::units::{cyclotron_frequency, ChargeModel};

/// Trap parameters. `beta` defaults to the particle's `β` and may be scaled
/// for perturbation studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpec<T> {
    pub charge: ChargeModel<T>,
    pub omega_z: T,
    pub b: T,
    pub beta: T,
}

impl<T: Real> TrapSpec<T> {
    pub fn new(charge: ChargeModel<T>, omega_z: T, b: T) -> Result<Self> {
        if !(omega_z > T::zero()) {
            return Err(invalid("omega_z", "axial frequency must be positive"));
        }
        if !(b > T::zero()) {
            return Err(invalid("B", "field must be positive"));
        }
        Ok(Self {
            beta: charge.beta(),
            charge,
            omega_z,
            b,
        })
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    pub fn omega_c(&self) -> T {
        cyclotron_frequency(&self.charge, self.b).expect("B checked positive")
    }

    /// `λ = ω_c / ω_z`.
    pub fn lambda(&self) -> T {
        self.omega_c() / self.omega_z
    }

    /// `|v|/c`, which must be small for the linear mode picture.
    pub fn velocity_validity(&self, v_max: T) -> T {
        v_max
    }

    /// `r_max ω_z² / ω_c`, which must be small for the linear mode picture.
    pub fn radius_validity(&self, r_max: T) -> T {
        r_max * self.omega_z * self.omega_z / self.omega_c()
    }
}

/// Mode frequencies and signed damping rates.
///
/// `gamma_plus` and `gamma_minus` are amplitude decay rates of the
/// cyclotron and magnetron modes; `gamma_minus < 0` is antifriction.
/// `gamma_z` is the axial friction coefficient in `z̈ + γ_z ż + ω_z² z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeReport<T> {
    pub omega_plus: T,
    pub omega_minus: T,
    pub omega_z: T,
    pub omega_c: T,
    pub lambda: T,
    pub gamma_plus: T,
    pub gamma_minus: T,
    pub gamma_z: T,
    pub critical_field: T,
}

impl<T: Real> ModeReport<T> {
    pub fn lifetime_plus(&self) -> T {
        T::one() / self.gamma_plus.abs()
    }
    pub fn lifetime_minus(&self) -> T {
        T::one() / self.gamma_minus.abs()
    }
    pub fn lifetime_z(&self) -> T {
        T::one() / self.gamma_z.abs()
    }
}

/// `B_c` with `ω_c(B_c) = √2 ω_z`.
pub fn critical_field<T: Real>(charge: &ChargeModel<T>, omega_z: T) -> Result<T> {
    if !(omega_z > T::zero()) {
        return Err(invalid("omega_z", "axial frequency must be positive"));
    }
    if charge.charge() == T::zero() {
        return Err(invalid("e", "neutral particle is not trapped"));
    }
    Ok(lit::<T>(2.0).sqrt() * omega_z * charge.experimental_mass() / charge.charge().abs())
}

/// Analytic mode structure. Fails at and below the stability boundary
/// `λ ≤ √2`.
pub fn mode_analysis<T: Real>(spec: &TrapSpec<T>) -> Result<ModeReport<T>> {
    let wc = spec.omega_c();
    let wz = spec.omega_z;
    let lambda = wc / wz;
    let critical = critical_field(&spec.charge, wz)?;
    let disc = wc * wc - lit::<T>(2.0) * wz * wz;
    if !(disc > T::zero()) {
        return Err(PhysicsError::InstabilityBoundary {
            lambda: lambda.to_f64(),
            critical_field: critical.to_f64(),
        });
    }
    let s = disc.sqrt();
    let half: T = lit(0.5);
    let wp = half * (wc + s);
    // ω_− = ω_z² / (2 ω_+) avoids cancellation for large λ
    let wm = half * wz * wz / wp;
    let b = spec.beta;
    Ok(ModeReport {
        omega_plus: wp,
        omega_minus: wm,
        omega_z: wz,
        omega_c: wc,
        lambda,
        gamma_plus: b * wp * wp * wp / s,
        gamma_minus: -b * wm * wm * wm / s,
        gamma_z: b * wz * wz,
        critical_field: critical,
    })
}

/// `A + βV` acting on `(x, y, u_x, u_y)`.
pub fn oracle_matrix<T: Real>(spec: &TrapSpec<T>) -> Matrix4<T> {
    let wc = spec.omega_c();
    let wz2 = spec.omega_z * spec.omega_z;
    let half: T = lit(0.5);
    let b = spec.beta;
    let z = T::zero();
    let one = T::one();
    // rows: ẋ = u_x, ẏ = u_y, u̇ = ½ω_z² r + ω_c J u + β[½ω_c ω_z² J r + (½ω_z² − ω_c²) u]
    let jr = b * half * wc * wz2;
    let du = b * (half * wz2 - wc * wc);
    Matrix4::new(
        z, z, one, z, //
        z, z, z, one, //
        half * wz2, jr, du, wc, //
        -jr, half * wz2, -wc, du,
    )
}

/// Eigenvalues of [`oracle_matrix`] by a dense eigensolver, sorted by
/// descending imaginary part.
pub fn numeric_eigen_oracle<T: Real>(spec: &TrapSpec<T>) -> [Complex<T>; 4] {
    let ev = oracle_matrix(spec).complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2], ev[3]];
    out.sort_by(|a, b| b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal));
    out
}
