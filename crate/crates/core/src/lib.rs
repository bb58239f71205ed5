//! Effective dynamics of classical radiating charges.
//!
//! Every physics type is generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`.

// `!(x > 0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darwin;
pub mod error;
pub mod fields;
pub mod landau_lifshitz;
pub mod lorentz_dirac;
pub mod memory;
pub mod ode;
pub mod penning;
pub mod quad;
pub mod radiation;
pub mod roots;
pub mod scalar;
pub mod soliton;
pub mod trajectory;
pub mod units;

pub use error::{PhysicsError, Result};

pub type Vec3 = scalar::Vec3<f64>;
pub type ChargeModel = units::ChargeModel<f64>;
pub type FormFactor = units::FormFactor<f64>;
pub type UnitSystem = units::UnitSystem<f64>;
pub type Controls = ode::Controls<f64>;
pub type Trajectory = trajectory::Trajectory<f64>;
pub type Sample = trajectory::Sample<f64>;
pub type Termination = trajectory::Termination<f64>;
pub type LdModel = lorentz_dirac::LdModel<f64>;
pub type LdControls = lorentz_dirac::LdControls<f64>;
pub type JetState = lorentz_dirac::JetState<f64>;
pub type MassModel = lorentz_dirac::MassModel<f64>;
pub type ConstantBDecay = landau_lifshitz::ConstantBDecay<f64>;
pub type TrapSpec = penning::TrapSpec<f64>;
pub type ModeReport = penning::ModeReport<f64>;
pub type DelayModel = memory::DelayModel<f64>;
pub type MemoryKernel = memory::MemoryKernel<f64>;
pub type ManyBodyState = darwin::ManyBodyState<f64>;
pub type ManyBodyRun = darwin::ManyBodyRun<f64>;
pub type WorldPoint = radiation::WorldPoint<f64>;
pub type SampledWorldLine = radiation::SampledWorldLine<f64>;
