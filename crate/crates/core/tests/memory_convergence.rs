use std::sync::Arc;

use num_complex::Complex;
use radreact::fields::{central_potential, Polynomial};
use radreact::lorentz_dirac::linearized_oscillator_roots;
use radreact::memory::{integrate_dde, taylor_reduced_rhs, DelayModel, History};
use radreact::scalar::Vec3;
use radreact::trajectory::fit_power_law;
use radreact::units::{ChargeModel, FormFactor};

/// Damped mode of `m ẍ = −m ω0² x + k x⃛` through `(x0, v0)`.
struct ReducedSolution {
    z: Complex<f64>,
    a: Complex<f64>,
}

impl ReducedSolution {
    fn new(omega0: f64, k_over_m: f64, x0: f64, v0: f64) -> Self {
        let z = linearized_oscillator_roots(omega0, k_over_m).unwrap()[0];
        let a = Complex::new(x0, (x0 * z.re - v0) / z.im);
        Self { z, a }
    }
    fn x(&self, t: f64) -> f64 {
        (self.a * (self.z * t).exp()).re
    }
    fn v(&self, t: f64) -> f64 {
        (self.a * self.z * (self.z * t).exp()).re
    }
}

fn max_deviation(radius: f64) -> f64 {
    let (e, m0, omega0) = (1.0, 1.0, 1.0);
    let field = Arc::new(central_potential(Arc::new(Polynomial::harmonic(m0, omega0, e))));
    let model = DelayModel::new(ChargeModel::new(e, m0, FormFactor::SphereShell(radius)).unwrap(), field).unwrap();
    let red = taylor_reduced_rhs(&model);
    assert!((red.mass - m0).abs() < 1e-14);
    let sol = Arc::new(ReducedSolution::new(omega0, red.jerk_coefficient / red.mass, 1.0, 0.0));
    let hist = {
        let sol = sol.clone();
        History::Function(Arc::new(move |t| Vec3::new(sol.v(t), 0.0, 0.0)))
    };
    let run = integrate_dde(&model, &Vec3::new(sol.x(0.0), 0.0, 0.0), &hist, 20.0, 16).unwrap();
    run.samples.iter().map(|s| (s.q.x - sol.x(s.t)).abs()).fold(0.0, f64::max)
}

#[test]
fn delay_dynamics_converge_linearly_to_taylor_reduction() {
    let radii = [0.4, 0.2, 0.1];
    let errs: Vec<f64> = radii.iter().map(|&r| max_deviation(r)).collect();
    let p = fit_power_law(&radii, &errs);
    println!("errors {errs:?}, exponent {p}");
    assert!((p - 1.0).abs() <= 0.3, "exponent {p}");
}
