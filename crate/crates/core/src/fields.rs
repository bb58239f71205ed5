//! Static external electromagnetic fields with first spatial derivatives.
//!
//! Gradient matrices use the convention `grad[(i, j)] = ∂_j F_i`, so the
//! convective derivative along `v` is `grad * v`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{invalid, PhysicsError, Result};
use crate::scalar::{lit, Mat3, Real, Vec3};

/// Field values at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample<T: Real> {
    pub e: Vec3<T>,
    pub b: Vec3<T>,
}

/// `∂_j E_i` and `∂_j B_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGradient<T: Real> {
    pub de: Mat3<T>,
    pub db: Mat3<T>,
}

impl<T: Real> FieldGradient<T> {
    pub fn zero() -> Self {
        Self {
            de: Mat3::zeros(),
            db: Mat3::zeros(),
        }
    }
}

/// A time-independent external field.
pub trait FieldMap<T: Real>: Send + Sync + Debug {
    fn sample(&self, x: &Vec3<T>) -> Result<FieldSample<T>>;

    /// Electrostatic potential `φ` with `E = -∇φ` for the electric part.
    /// Purely magnetic maps return zero.
    fn potential(&self, x: &Vec3<T>) -> Result<T>;

    /// Spatial derivatives. The default is a central finite difference.
    fn gradient(&self, x: &Vec3<T>) -> Result<FieldGradient<T>> {
        finite_difference_gradient(self, x)
    }

    fn has_analytic_gradient(&self) -> bool {
        false
    }
}

/// Central-difference gradient with step `max(1e-6, 1e-6 |x|)`.
pub fn finite_difference_gradient<T: Real, M: FieldMap<T> + ?Sized>(map: &M, x: &Vec3<T>) -> Result<FieldGradient<T>> {
    let tiny: T = lit(1e-6);
    let h = tiny.max(tiny * x.norm());
    let mut g = FieldGradient::zero();
    for j in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let fp = map.sample(&xp)?;
        let fm = map.sample(&xm)?;
        let two_h = xp[j] - xm[j];
        g.de.set_column(j, &((fp.e - fm.e) / two_h));
        g.db.set_column(j, &((fp.b - fm.b) / two_h));
    }
    Ok(g)
}

/// Scalar profile with two derivatives, used by the central and axial maps.
pub trait Profile<T: Real>: Send + Sync + Debug {
    fn value(&self, r: T) -> T;
    fn d1(&self, r: T) -> T;
    fn d2(&self, r: T) -> T;

    /// `lim_{r→0} φ'(r)/r` when finite. Central maps refuse to evaluate at
    /// the origin without it.
    fn origin_limit(&self) -> Option<T> {
        None
    }
}

/// `Σ c_k r^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    pub coeffs: Vec<T>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    /// Harmonic potential `φ = ½ (m ω0² / e) r²`, i.e. `eφ = ½ m ω0² r²`.
    pub fn harmonic(m: T, omega0: T, e: T) -> Self {
        Self::new(vec![T::zero(), T::zero(), lit::<T>(0.5) * m * omega0 * omega0 / e])
    }

    /// `φ = -a0 r`.
    pub fn linear(a0: T) -> Self {
        Self::new(vec![T::zero(), -a0])
    }

    /// `φ = s (r² - 1)²`.
    pub fn double_well(s: T) -> Self {
        Self::new(vec![s, T::zero(), lit::<T>(-2.0) * s, T::zero(), s])
    }

    fn eval(coeffs: &[T], r: T) -> T {
        coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * r + c)
    }

    fn derivative(coeffs: &[T]) -> Vec<T> {
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * T::count(k))
            .collect()
    }
}

impl<T: Real> Profile<T> for Polynomial<T> {
    fn value(&self, r: T) -> T {
        Self::eval(&self.coeffs, r)
    }
    fn d1(&self, r: T) -> T {
        Self::eval(&Self::derivative(&self.coeffs), r)
    }
    fn d2(&self, r: T) -> T {
        Self::eval(&Self::derivative(&Self::derivative(&self.coeffs)), r)
    }
    fn origin_limit(&self) -> Option<T> {
        match self.coeffs.get(1) {
            Some(c1) if *c1 != T::zero() => None,
            _ => Some(self.coeffs.get(2).map_or(T::zero(), |c2| lit::<T>(2.0) * *c2)),
        }
    }
}

/// Constant magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformMagnetic<T: Real> {
    b: Vec3<T>,
}

/// `B ≡ strength · axis`, `E ≡ 0`. `axis` must be a unit vector to 1e-12.
pub fn uniform_magnetic<T: Real>(strength: T, axis: Vec3<T>) -> Result<UniformMagnetic<T>> {
    check_unit(&axis)?;
    Ok(UniformMagnetic { b: axis * strength })
}

fn check_unit<T: Real>(axis: &Vec3<T>) -> Result<()> {
    let tol = lit::<T>(1e-12).max(lit::<T>(4.0) * T::eps());
    if (axis.norm() - T::one()).abs() > tol {
        return Err(invalid("axis", format!("|axis| = {:?}, expected 1", axis.norm())));
    }
    Ok(())
}

impl<T: Real> FieldMap<T> for UniformMagnetic<T> {
    fn sample(&self, _x: &Vec3<T>) -> Result<FieldSample<T>> {
        Ok(FieldSample {
            e: Vec3::zeros(),
            b: self.b,
        })
    }
    fn potential(&self, _x: &Vec3<T>) -> Result<T> {
        Ok(T::zero())
    }
    fn gradient(&self, _x: &Vec3<T>) -> Result<FieldGradient<T>> {
        Ok(FieldGradient::zero())
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
}

/// Ideal quadrupole electrostatic potential, without the magnetic part.
///
/// `eφ = ½ m ω_z² (−½x₁² − ½x₂² + x₃²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrupole<T: Real> {
    /// `m ω_z² / e`
    k: T,
}

pub fn quadrupole<T: Real>(m: T, omega_z: T, e: T) -> Result<Quadrupole<T>> {
    if !(omega_z > T::zero()) {
        return Err(invalid("omega_z", "axial frequency must be positive"));
    }
    if !(m > T::zero()) || e == T::zero() {
        return Err(invalid("m/e", "need positive mass and nonzero charge"));
    }
    Ok(Quadrupole { k: m * omega_z * omega_z / e })
}

impl<T: Real> Quadrupole<T> {
    fn shape() -> Vec3<T> {
        Vec3::new(lit(-0.5), lit(-0.5), T::one())
    }
}

impl<T: Real> FieldMap<T> for Quadrupole<T> {
    fn sample(&self, x: &Vec3<T>) -> Result<FieldSample<T>> {
        Ok(FieldSample {
            e: -x.component_mul(&Self::shape()) * self.k,
            b: Vec3::zeros(),
        })
    }
    fn potential(&self, x: &Vec3<T>) -> Result<T> {
        let s = Self::shape();
        let half: T = lit(0.5);
        Ok(half * self.k * (s.x * x.x * x.x + s.y * x.y * x.y + s.z * x.z * x.z))
    }
    fn gradient(&self, _x: &Vec3<T>) -> Result<FieldGradient<T>> {
        Ok(FieldGradient {
            de: -Mat3::from_diagonal(&Self::shape()) * self.k,
            db: Mat3::zeros(),
        })
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
}

/// Penning trap: quadrupole plus uniform `B` along `ẑ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenningTrap<T: Real> {
    quad: Quadrupole<T>,
    magnetic: UniformMagnetic<T>,
}

pub fn penning_trap<T: Real>(m: T, omega_z: T, b: T, e: T) -> Result<PenningTrap<T>> {
    if !(b > T::zero()) {
        return Err(invalid("B", "trap field must be positive"));
    }
    Ok(PenningTrap {
        quad: quadrupole(m, omega_z, e)?,
        magnetic: uniform_magnetic(b, Vec3::z())?,
    })
}

impl<T: Real> FieldMap<T> for PenningTrap<T> {
    fn sample(&self, x: &Vec3<T>) -> Result<FieldSample<T>> {
        let q = self.quad.sample(x)?;
        Ok(FieldSample {
            e: q.e,
            b: self.magnetic.b,
        })
    }
    fn potential(&self, x: &Vec3<T>) -> Result<T> {
        self.quad.potential(x)
    }
    fn gradient(&self, x: &Vec3<T>) -> Result<FieldGradient<T>> {
        self.quad.gradient(x)
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
}

/// Radially symmetric electrostatic potential `φ(|x|)`.
#[derive(Debug, Clone)]
pub struct CentralPotential<T: Real> {
    profile: Arc<dyn Profile<T>>,
}

pub fn central_potential<T: Real>(profile: Arc<dyn Profile<T>>) -> CentralPotential<T> {
    CentralPotential { profile }
}

impl<T: Real> CentralPotential<T> {
    pub fn profile(&self) -> &dyn Profile<T> {
        self.profile.as_ref()
    }
}

impl<T: Real> FieldMap<T> for CentralPotential<T> {
    fn sample(&self, x: &Vec3<T>) -> Result<FieldSample<T>> {
        let r = x.norm();
        let e = if r == T::zero() {
            self.profile.origin_limit().ok_or(PhysicsError::DegenerateProbe)?;
            Vec3::zeros()
        } else {
            -x * (self.profile.d1(r) / r)
        };
        Ok(FieldSample { e, b: Vec3::zeros() })
    }
    fn potential(&self, x: &Vec3<T>) -> Result<T> {
        Ok(self.profile.value(x.norm()))
    }
    fn gradient(&self, x: &Vec3<T>) -> Result<FieldGradient<T>> {
        let r = x.norm();
        let de = if r == T::zero() {
            let l = self.profile.origin_limit().ok_or(PhysicsError::DegenerateProbe)?;
            -Mat3::identity() * l
        } else {
            let n = x / r;
            let nn = n * n.transpose();
            let p1r = self.profile.d1(r) / r;
            -(nn * self.profile.d2(r) + (Mat3::identity() - nn) * p1r)
        };
        Ok(FieldGradient { de, db: Mat3::zeros() })
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
}

/// Electrostatic potential depending on `x₁` only.
#[derive(Debug, Clone)]
pub struct Axial1d<T: Real> {
    profile: Arc<dyn Profile<T>>,
}

pub fn axial_1d<T: Real>(profile: Arc<dyn Profile<T>>) -> Axial1d<T> {
    Axial1d { profile }
}

impl<T: Real> Axial1d<T> {
    pub fn profile(&self) -> &dyn Profile<T> {
        self.profile.as_ref()
    }
}

impl<T: Real> FieldMap<T> for Axial1d<T> {
    fn sample(&self, x: &Vec3<T>) -> Result<FieldSample<T>> {
        Ok(FieldSample {
            e: Vec3::new(-self.profile.d1(x.x), T::zero(), T::zero()),
            b: Vec3::zeros(),
        })
    }
    fn potential(&self, x: &Vec3<T>) -> Result<T> {
        Ok(self.profile.value(x.x))
    }
    fn gradient(&self, x: &Vec3<T>) -> Result<FieldGradient<T>> {
        let mut de = Mat3::zeros();
        de[(0, 0)] = -self.profile.d2(x.x);
        Ok(FieldGradient { de, db: Mat3::zeros() })
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
}

/// Pointwise sum of field maps.
#[derive(Debug, Clone)]
pub struct Superposition<T: Real> {
    maps: Vec<Arc<dyn FieldMap<T>>>,
}

pub fn superpose<T: Real>(maps: Vec<Arc<dyn FieldMap<T>>>) -> Result<Superposition<T>> {
    if maps.is_empty() {
        return Err(invalid("maps", "superposition needs at least one map"));
    }
    Ok(Superposition { maps })
}

impl<T: Real> FieldMap<T> for Superposition<T> {
    fn sample(&self, x: &Vec3<T>) -> Result<FieldSample<T>> {
        let mut out = FieldSample {
            e: Vec3::zeros(),
            b: Vec3::zeros(),
        };
        for m in &self.maps {
            let s = m.sample(x)?;
            out.e += s.e;
            out.b += s.b;
        }
        Ok(out)
    }
    fn potential(&self, x: &Vec3<T>) -> Result<T> {
        self.maps
            .iter()
            .try_fold(T::zero(), |acc, m| Ok(acc + m.potential(x)?))
    }
    fn gradient(&self, x: &Vec3<T>) -> Result<FieldGradient<T>> {
        let mut g = FieldGradient::zero();
        for m in &self.maps {
            let s = m.gradient(x)?;
            g.de += s.de;
            g.db += s.db;
        }
        Ok(g)
    }
    fn has_analytic_gradient(&self) -> bool {
        self.maps.iter().all(|m| m.has_analytic_gradient())
    }
}

/// The zero field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoField;

impl<T: Real> FieldMap<T> for NoField {
    fn sample(&self, _x: &Vec3<T>) -> Result<FieldSample<T>> {
        Ok(FieldSample {
            e: Vec3::zeros(),
            b: Vec3::zeros(),
        })
    }
    fn potential(&self, _x: &Vec3<T>) -> Result<T> {
        Ok(T::zero())
    }
    fn gradient(&self, _x: &Vec3<T>) -> Result<FieldGradient<T>> {
        Ok(FieldGradient::zero())
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
}
