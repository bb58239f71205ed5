//! Builds physics objects from a [`RunConfig`] and executes it.
//!
//! Trajectory files and the summaries derived from them are in internal
//! units. Closed-form reports (`penning`, `synchrotron`) use the declared
//! input units.

use std::sync::Arc;

use rayon::prelude::*;

use radreact::darwin::{
    darwin_residual_ratio, integrate_darwin, retarded_twobody_oracle, ManyBodyControls, ManyBodyRun, ManyBodyState, RetardedControls,
};
use radreact::fields::{axial_1d, central_potential, penning_trap, quadrupole, superpose, uniform_magnetic, FieldMap, NoField, Polynomial};
use radreact::landau_lifshitz::{self, constant_b_closed_forms};
use radreact::lorentz_dirac::{integrate_backward, integrate_forward, terminal_transient, JetState, LdControls, LdModel, MassModel, RunawayCriterion};
use radreact::memory::{integrate_dde, DelayModel, History};
use radreact::ode::Controls;
use radreact::penning::{mode_analysis, numeric_eigen_oracle, TrapSpec};
use radreact::scalar::Vec3;
use radreact::trajectory::{fit_power_law, Termination, Trajectory};
use radreact::units::{electron_preset, proton_preset, ChargeModel, FormFactor};

use crate::config::{
    BodySpec, FieldSpec, FormFactorSpec, IntegratorSpec, JetSpec, MassModelSpec, ParticleSpec, Preset, RunConfig, Scenario, SpeedScan, Units,
};
use crate::error::CliError;
use crate::output::{table_csv, trajectory_csv, RunOutput, Summary};

/// Which operation the caller asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Compare,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn charge_model(p: &ParticleSpec, u: &Units) -> Result<ChargeModel<f64>, CliError> {
    Ok(match *p {
        ParticleSpec::Preset { preset: Preset::Electron } => electron_preset(&u.system),
        ParticleSpec::Preset { preset: Preset::Proton } => proton_preset(&u.system),
        ParticleSpec::Explicit { charge, mass, form_factor } => {
            let ff = match form_factor {
                FormFactorSpec::Point => FormFactor::PointLimit,
                FormFactorSpec::SphereShell { radius } => FormFactor::SphereShell(u.length(radius)),
                FormFactorSpec::UniformBall { radius } => FormFactor::UniformBall(u.length(radius)),
            };
            ChargeModel::new(u.charge(charge), u.mass(mass), ff)?
        }
    })
}

fn mass_model(m: &MassModelSpec, u: &Units) -> MassModel<f64> {
    match *m {
        MassModelSpec::Relativistic => MassModel::Relativistic,
        MassModelSpec::SemiRelAbraham => MassModel::SemiRelAbraham,
        MassModelSpec::Nonrelativistic { mass } => MassModel::NonRelativistic { mass: u.mass(mass) },
    }
}

fn field_map(f: &FieldSpec, c: &ChargeModel<f64>, u: &Units) -> Result<Arc<dyn FieldMap<f64>>, CliError> {
    let (m, e) = (c.experimental_mass(), c.charge());
    Ok(match f {
        FieldSpec::None => Arc::new(NoField),
        FieldSpec::UniformMagnetic { strength, axis } => {
            Arc::new(uniform_magnetic(u.magnetic(*strength), Vec3::from(*axis))?)
        }
        FieldSpec::Quadrupole { omega_z } => Arc::new(quadrupole(m, u.frequency(*omega_z), e)?),
        FieldSpec::Penning { omega_z, b } => Arc::new(penning_trap(m, u.frequency(*omega_z), u.magnetic(*b), e)?),
        FieldSpec::Harmonic { omega0 } => {
            if e == 0.0 {
                return Err(config_err("harmonic field needs a charged particle"));
            }
            Arc::new(central_potential(Arc::new(Polynomial::harmonic(m, u.frequency(*omega0), e))))
        }
        FieldSpec::CentralPolynomial { coeffs } => Arc::new(central_potential(Arc::new(Polynomial::new(coeffs.clone())))),
        FieldSpec::AxialPolynomial { coeffs } => Arc::new(axial_1d(Arc::new(Polynomial::new(coeffs.clone())))),
        FieldSpec::Superpose { maps } => {
            let parts = maps.iter().map(|f| field_map(f, c, u)).collect::<Result<Vec<_>, _>>()?;
            Arc::new(superpose(parts)?)
        }
    })
}

fn controls(s: &IntegratorSpec, u: &Units) -> Result<Controls<f64>, CliError> {
    if !(s.abs_tol > 0.0 && s.rel_tol > 0.0) {
        return Err(config_err("integrator tolerances must be positive"));
    }
    let mut c = Controls::with_tolerances(s.abs_tol, s.rel_tol);
    if let Some(h) = s.max_step {
        c = c.max_step(u.time(h));
    }
    if let Some(n) = s.max_steps {
        c.max_steps = n;
    }
    Ok(c)
}

fn position(x: [f64; 3], u: &Units) -> Vec3<f64> {
    Vec3::new(u.length(x[0]), u.length(x[1]), u.length(x[2]))
}

/// Accelerations are given in internal units.
fn jet(j: &JetSpec, u: &Units) -> (Vec3<f64>, Vec3<f64>, Option<Vec3<f64>>) {
    (position(j.q, u), Vec3::from(j.v), j.a.map(Vec3::from))
}

fn termination_summary(s: &mut Summary, ns: &str, t: &Termination<f64>) {
    match *t {
        Termination::Completed => s.text(&format!("{ns}.termination"), "completed"),
        Termination::RunawayDetected { t, growth_rate } => {
            s.text(&format!("{ns}.termination"), "runaway_detected");
            s.num(&format!("{ns}.runaway_t"), t);
            s.num(&format!("{ns}.growth_rate"), growth_rate);
        }
        Termination::CollisionHalt { t, i, j } => {
            s.text(&format!("{ns}.termination"), "collision_halt");
            s.num(&format!("{ns}.collision_t"), t);
            s.int(&format!("{ns}.collision_i"), i);
            s.int(&format!("{ns}.collision_j"), j);
        }
    }
}

/// Keys every trajectory summary carries; all recomputable from the CSV.
fn trajectory_summary(s: &mut Summary, ns: &str, traj: &Trajectory<f64>) {
    let last = traj.last();
    s.int(&format!("{ns}.samples"), traj.len());
    s.num(&format!("{ns}.t_final"), last.t);
    s.num(&format!("{ns}.final_energy"), last.energy);
    s.num(&format!("{ns}.final_schott"), last.schott);
    s.num(&format!("{ns}.radiated_total"), last.radiated);
    termination_summary(s, ns, &traj.termination);
}

fn single_trajectory(out: &mut RunOutput, ns: &str, traj: &Trajectory<f64>) {
    out.files.push(("trajectory.csv".into(), trajectory_csv(&traj.samples)));
    trajectory_summary(&mut out.summary, ns, traj);
}

fn ld_model(
    particle: &ParticleSpec,
    mm: &MassModelSpec,
    epsilon: f64,
    field: &FieldSpec,
    u: &Units,
) -> Result<LdModel<f64>, CliError> {
    let c = charge_model(particle, u)?;
    let f = field_map(field, &c, u)?;
    Ok(LdModel::new(mass_model(mm, u), c, epsilon, f)?)
}

fn bodies(list: &[BodySpec], u: &Units, scale: f64, scale_charges: bool, c: f64) -> Result<ManyBodyState<f64>, CliError> {
    let mut charges = Vec::with_capacity(list.len());
    for b in list {
        let m = charge_model(&b.particle, u)?;
        let m = if scale_charges {
            ChargeModel::new(m.charge() * scale, m.experimental_mass(), m.form_factor())?
        } else {
            m
        };
        charges.push(m);
    }
    let q = list.iter().map(|b| position(b.q, u)).collect();
    let v = list.iter().map(|b| Vec3::from(b.v) * scale).collect();
    Ok(ManyBodyState::new(charges, q, v, c)?)
}

fn many_body_files(out: &mut RunOutput, run: &ManyBodyRun<f64>) {
    for j in 0..run.charges.len() {
        out.files.push((format!("particle_{j}.csv"), trajectory_csv(&run.particle(j).samples)));
    }
}

fn many_body_summary(s: &mut Summary, run: &ManyBodyRun<f64>) -> Result<(), CliError> {
    s.int("darwin.bodies", run.charges.len());
    s.int("darwin.samples", run.samples.len());
    s.num("darwin.t_final", run.last().t);
    s.num("darwin.final_energy", run.last().energy);
    s.num("darwin.energy_drift", run.energy_drift());
    s.num("darwin.momentum_drift", run.momentum_drift()?);
    termination_summary(s, "darwin", &run.termination);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn retarded_run(
    list: &[BodySpec],
    t_end: f64,
    step: f64,
    speed_bound: f64,
    collision_radius: Option<f64>,
    u: &Units,
    scale: f64,
    scale_charges: bool,
) -> Result<ManyBodyRun<f64>, CliError> {
    if list.len() != 2 {
        return Err(config_err("retarded2 needs exactly two bodies"));
    }
    let s = bodies(list, u, scale, scale_charges, 1.0)?;
    let ctl = RetardedControls {
        step: u.time(step),
        speed_bound,
        collision_radius: collision_radius.map(|r| u.length(r)),
    };
    Ok(retarded_twobody_oracle(&s, u.time(t_end), &ctl)?)
}

fn run_plain(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let u = &cfg.units;
    let mut out = RunOutput::default();
    match &cfg.scenario {
        Scenario::LdForward { particle, mass_model: mm, epsilon, field, initial, t_span, integrator, runaway } => {
            let model = ld_model(particle, mm, *epsilon, field, u)?;
            let (q, v, a) = jet(initial, u);
            let a = match a {
                Some(a) => a,
                None => model.manifold_acceleration(&q, &v)?,
            };
            let mut ctl = LdControls::new(controls(integrator, u)?);
            let mut crit = RunawayCriterion::default_for(&model);
            if let Some(r) = runaway {
                crit.factor = r.factor;
                crit.consecutive = r.consecutive;
            }
            ctl.runaway = Some(crit);
            let traj = integrate_forward(&model, &JetState { q, v, a }, u.time(t_span[0]), u.time(t_span[1]), &ctl)?;
            out.summary.num("lorentz_dirac.expected_rate", 1.0 / model.reaction_time());
            single_trajectory(&mut out, "lorentz_dirac", &traj);
        }
        Scenario::LdBackward { particle, mass_model: mm, epsilon, field, terminal, t_final, integrator } => {
            let model = ld_model(particle, mm, *epsilon, field, u)?;
            let (q, v, _) = jet(terminal, u);
            let traj = integrate_backward(&model, &q, &v, u.time(*t_final), &LdControls::new(controls(integrator, u)?))?;
            out.summary.num("lorentz_dirac.terminal_transient", terminal_transient(&model));
            single_trajectory(&mut out, "lorentz_dirac", &traj);
        }
        Scenario::Ll { particle, mass_model: mm, epsilon, field, initial, t_span, integrator } => {
            let model = ld_model(particle, mm, *epsilon, field, u)?;
            let (q, v, _) = jet(initial, u);
            let traj = landau_lifshitz::integrate(&model, &q, &v, u.time(t_span[0]), u.time(t_span[1]), &controls(integrator, u)?)?;
            single_trajectory(&mut out, "landau_lifshitz", &traj);
        }
        Scenario::MemoryDde { particle, field, initial, t_end, substeps } => {
            let c = charge_model(particle, u)?;
            let model = DelayModel::new(c, field_map(field, &c, u)?)?;
            let (q, v, _) = jet(initial, u);
            let traj = integrate_dde(&model, &q, &History::Constant(v), u.time(*t_end), *substeps)?;
            out.summary.num("memory.lag", model.lag());
            out.summary.num("memory.delay_coefficient", model.delay_coefficient());
            single_trajectory(&mut out, "memory", &traj);
        }
        Scenario::Penning { particle, omega_z, b } => {
            let c = charge_model(particle, u)?;
            let spec = TrapSpec::new(c, u.frequency(*omega_z), u.magnetic(*b))?;
            let r = mode_analysis(&spec)?;
            let s = &mut out.summary;
            let f = |x: f64| u.frequency_out(x);
            s.num("penning.omega_plus", f(r.omega_plus));
            s.num("penning.omega_minus", f(r.omega_minus));
            s.num("penning.omega_z", f(r.omega_z));
            s.num("penning.omega_c", f(r.omega_c));
            s.num("penning.lambda", r.lambda);
            s.num("penning.gamma_plus", f(r.gamma_plus));
            s.num("penning.gamma_minus", f(r.gamma_minus));
            s.num("penning.gamma_z", f(r.gamma_z));
            s.num("penning.lifetime_plus", u.time_out(r.lifetime_plus()));
            s.num("penning.lifetime_minus", u.time_out(r.lifetime_minus()));
            s.num("penning.lifetime_z", u.time_out(r.lifetime_z()));
            s.num("penning.critical_field", u.magnetic_out(r.critical_field));
            s.num("penning.beta", u.time_out(spec.beta));
            let ev = numeric_eigen_oracle(&spec);
            for (k, z) in ev.iter().enumerate() {
                s.num(&format!("penning.oracle_eigen_{k}_re"), f(z.re));
                s.num(&format!("penning.oracle_eigen_{k}_im"), f(z.im));
            }
        }
        Scenario::Synchrotron { particle, epsilon, b, gamma0, radius_ratio, numeric } => {
            let c = charge_model(particle, u)?;
            let b = u.magnetic(*b);
            let field = Arc::new(uniform_magnetic(b, Vec3::z())?);
            let model = LdModel::new(MassModel::Relativistic, c, *epsilon, field)?;
            let d = constant_b_closed_forms(&model, b, *gamma0)?;
            let t_ratio = d.time_to_radius_ratio(*radius_ratio)?;
            let s = &mut out.summary;
            s.num("landau_lifshitz.omega_c", u.frequency_out(d.omega_c));
            s.num("landau_lifshitz.damping_rate", u.frequency_out(d.rate()));
            s.num("landau_lifshitz.revolution_ratio", d.revolution_ratio());
            s.num("landau_lifshitz.initial_radius", u.length_out(d.initial_radius()));
            s.num("landau_lifshitz.time_to_radius_ratio", u.time_out(t_ratio));
            s.num(
                "landau_lifshitz.time_to_radius_ratio_ultrarelativistic",
                u.time_out(d.time_to_radius_ratio_ultrarelativistic(*radius_ratio)),
            );
            s.num("landau_lifshitz.revolutions", d.revolutions(t_ratio)?);
            if let Some(n) = numeric {
                let speed = (1.0 - 1.0 / (gamma0 * gamma0)).sqrt();
                let q0 = Vec3::new(d.initial_radius(), 0.0, 0.0);
                let v0 = Vec3::new(0.0, -speed * c.charge().signum(), 0.0);
                let traj = landau_lifshitz::integrate(&model, &q0, &v0, 0.0, u.time(n.t_end), &controls(&n.integrator, u)?)?;
                let worst = traj
                    .samples
                    .iter()
                    .map(|s| {
                        let g = 1.0 / (1.0 - s.v.norm_squared()).sqrt();
                        (g / d.gamma_at(s.t) - 1.0).abs()
                    })
                    .fold(0.0, f64::max);
                out.summary.num("landau_lifshitz.max_gamma_rel_error", worst);
                single_trajectory(&mut out, "landau_lifshitz", &traj);
            }
        }
        Scenario::Darwin { bodies: list, c, t_span, integrator, collision_radius } => {
            let s = bodies(list, u, 1.0, false, *c)?;
            let mut ctl = ManyBodyControls::new(controls(integrator, u)?);
            ctl.collision_radius = collision_radius.map(|r| u.length(r));
            let run = integrate_darwin(&s, u.time(t_span[0]), u.time(t_span[1]), &ctl)?;
            many_body_files(&mut out, &run);
            many_body_summary(&mut out.summary, &run)?;
        }
        Scenario::Retarded2 { bodies: list, t_end, step, speed_bound, collision_radius, .. } => {
            let run = retarded_run(list, *t_end, *step, *speed_bound, *collision_radius, u, 1.0, false)?;
            many_body_files(&mut out, &run);
            many_body_summary(&mut out.summary, &run)?;
            out.summary.num("darwin.residual_ratio", darwin_residual_ratio(&run)?);
        }
        Scenario::CompareLdLl { .. } => return compare_ld_ll(cfg),
    }
    Ok(out)
}

fn compare_ld_ll(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let Scenario::CompareLdLl { particle, mass_model: mm, field, terminal, t_final, epsilons, integrator, grid } = &cfg.scenario else {
        unreachable!("dispatched on kind");
    };
    let u = &cfg.units;
    if epsilons.is_empty() || *grid == 0 {
        return Err(config_err("epsilons must be non-empty and grid positive"));
    }
    let (q, v, _) = jet(terminal, u);
    let t_final = u.time(*t_final);
    let ctl = controls(integrator, u)?;
    let per_eps = epsilons
        .par_iter()
        .map(|&eps| -> Result<_, CliError> {
            let model = ld_model(particle, mm, eps, field, u)?;
            let ld = integrate_backward(&model, &q, &v, t_final, &LdControls::new(ctl))?;
            let s0 = ld.first();
            let ll = landau_lifshitz::integrate(&model, &s0.q, &s0.v, 0.0, t_final, &ctl)?;
            let t1 = t_final - terminal_transient(&model);
            if !(t1 > 0.0) {
                return Err(config_err(format!("t_final shorter than the terminal transient at epsilon = {eps}")));
            }
            Ok((ld.max_position_deviation(&ll, 0.0, t1, *grid), ld, ll))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = RunOutput::default();
    let mut rows = Vec::new();
    for (k, (dev, ld, ll)) in per_eps.iter().enumerate() {
        rows.push(vec![epsilons[k], *dev]);
        out.files.push((format!("ld_{k:02}.csv"), trajectory_csv(&ld.samples)));
        out.files.push((format!("ll_{k:02}.csv"), trajectory_csv(&ll.samples)));
        out.summary.num(&format!("compare.epsilon_{k:02}"), epsilons[k]);
        out.summary.num(&format!("compare.max_deviation_{k:02}"), *dev);
    }
    out.files.push(("deviation.csv".into(), table_csv(&["epsilon", "max_deviation"], &rows)));
    if epsilons.len() >= 2 {
        let devs: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        out.summary.num("compare.exponent", fit_power_law(epsilons, &devs));
    }
    out.summary.text("compare.pair", "ld_backward_vs_ll");
    Ok(out)
}

fn compare_retarded(cfg: &RunConfig, scan: &SpeedScan) -> Result<RunOutput, CliError> {
    let Scenario::Retarded2 { bodies: list, t_end, step, speed_bound, collision_radius, .. } = &cfg.scenario else {
        unreachable!("dispatched on kind");
    };
    let u = &cfg.units;
    if scan.speed_scales.is_empty() || scan.speed_scales.iter().any(|&s| !(s > 0.0)) {
        return Err(config_err("speed_scales must be positive and non-empty"));
    }
    let ratios = scan
        .speed_scales
        .par_iter()
        .map(|&s| -> Result<f64, CliError> {
            // a fixed time span at lower speed covers a shorter arc; stretch it
            let run = retarded_run(list, t_end / s, *step, *speed_bound, *collision_radius, u, s, scan.scale_charges)?;
            if run.termination != Termination::Completed {
                return Err(CliError::Physics(radreact::PhysicsError::InvalidParameter {
                    name: "bodies",
                    reason: format!("retarded run at speed scale {s} did not complete"),
                }));
            }
            Ok(darwin_residual_ratio(&run)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = RunOutput::default();
    let rows: Vec<Vec<f64>> = scan.speed_scales.iter().zip(&ratios).map(|(&s, &r)| vec![s, r]).collect();
    for (k, (s, r)) in scan.speed_scales.iter().zip(&ratios).enumerate() {
        out.summary.num(&format!("compare.speed_scale_{k:02}"), *s);
        out.summary.num(&format!("compare.residual_ratio_{k:02}"), *r);
    }
    if ratios.len() >= 2 {
        out.summary.num("compare.exponent", fit_power_law(&scan.speed_scales, &ratios));
    }
    out.summary.text("compare.pair", "retarded2_vs_darwin");
    out.files.push(("residual.csv".into(), table_csv(&["speed_scale", "residual_ratio"], &rows)));
    Ok(out)
}

/// Executes one configured run in memory.
pub fn execute(cfg: &RunConfig, mode: Mode) -> Result<RunOutput, CliError> {
    let mut out = match (mode, &cfg.scenario) {
        (_, Scenario::CompareLdLl { .. }) => compare_ld_ll(cfg)?,
        (Mode::Compare, Scenario::Retarded2 { compare: Some(scan), .. }) => compare_retarded(cfg, scan)?,
        (Mode::Compare, other) => {
            return Err(config_err(format!(
                "`compare` needs kind compare_ld_ll or retarded2 with a `compare` block, got {}",
                other.kind()
            )))
        }
        (Mode::Run, _) => run_plain(cfg)?,
    };
    out.summary.text("cli.kind", cfg.scenario.kind());
    out.summary.text("cli.name", cfg.name.clone());
    out.summary.text(
        "cli.mode",
        match mode {
            Mode::Run => "run",
            Mode::Compare => "compare",
        },
    );
    let mut files: Vec<&str> = out.files.iter().map(|(n, _)| n.as_str()).collect();
    files.push("summary.txt");
    out.summary.text("cli.files", files.join(" "));
    Ok(out)
}
