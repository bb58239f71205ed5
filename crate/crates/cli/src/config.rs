//! JSON scenario documents.
//!
//! Every physical quantity is explicit; the `units` block says how to read
//! each category. Velocities are always fractions of `c`.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use radreact::units::UnitSystem;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    Internal,
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Internal,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassUnit {
    Internal,
    Kg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum ChargeUnit {
    #[serde(rename = "internal")]
    Internal,
    #[serde(rename = "C")]
    Coulomb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum MagneticUnit {
    #[serde(rename = "internal")]
    Internal,
    #[serde(rename = "T")]
    Tesla,
    #[serde(rename = "G")]
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    Internal,
    RadPerS,
}

/// Internal scales plus the unit of every input category. Outputs are
/// reported in the same units as the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSpec {
    pub time_unit_s: f64,
    pub mass_unit_kg: f64,
    pub length: LengthUnit,
    pub time: TimeUnit,
    pub mass: MassUnit,
    pub charge: ChargeUnit,
    pub magnetic_field: MagneticUnit,
    pub frequency: FrequencyUnit,
}

/// Resolved conversions between the declared units and internal ones.
#[derive(Debug, Clone, Copy)]
pub struct Units {
    pub spec: UnitsSpec,
    pub system: UnitSystem<f64>,
}

impl Units {
    pub fn new(spec: UnitsSpec) -> Result<Self, CliError> {
        let system = UnitSystem::new(spec.time_unit_s, spec.mass_unit_kg).map_err(|e| CliError::Config(format!("units: {e}")))?;
        Ok(Self { spec, system })
    }
    pub fn length(&self, x: f64) -> f64 {
        match self.spec.length {
            LengthUnit::Internal => x,
            LengthUnit::M => self.system.length_from_si(x),
        }
    }
    pub fn time(&self, x: f64) -> f64 {
        match self.spec.time {
            TimeUnit::Internal => x,
            TimeUnit::S => self.system.time_from_si(x),
        }
    }
    pub fn time_out(&self, x: f64) -> f64 {
        match self.spec.time {
            TimeUnit::Internal => x,
            TimeUnit::S => self.system.time_to_si(x),
        }
    }
    pub fn length_out(&self, x: f64) -> f64 {
        match self.spec.length {
            LengthUnit::Internal => x,
            LengthUnit::M => self.system.length_to_si(x),
        }
    }
    pub fn mass(&self, x: f64) -> f64 {
        match self.spec.mass {
            MassUnit::Internal => x,
            MassUnit::Kg => self.system.mass_from_si(x),
        }
    }
    pub fn charge(&self, x: f64) -> f64 {
        match self.spec.charge {
            ChargeUnit::Internal => x,
            ChargeUnit::Coulomb => self.system.charge_from_si(x),
        }
    }
    pub fn magnetic(&self, x: f64) -> f64 {
        match self.spec.magnetic_field {
            MagneticUnit::Internal => x,
            MagneticUnit::Tesla => self.system.magnetic_from_tesla(x),
            MagneticUnit::Gauss => self.system.magnetic_from_gauss(x),
        }
    }
    pub fn magnetic_out(&self, x: f64) -> f64 {
        match self.spec.magnetic_field {
            MagneticUnit::Internal => x,
            MagneticUnit::Tesla => self.system.magnetic_to_tesla(x),
            MagneticUnit::Gauss => self.system.magnetic_to_gauss(x),
        }
    }
    pub fn frequency(&self, x: f64) -> f64 {
        match self.spec.frequency {
            FrequencyUnit::Internal => x,
            FrequencyUnit::RadPerS => self.system.frequency_from_si(x),
        }
    }
    pub fn frequency_out(&self, x: f64) -> f64 {
        match self.spec.frequency {
            FrequencyUnit::Internal => x,
            FrequencyUnit::RadPerS => self.system.frequency_to_si(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FormFactorSpec {
    Point,
    SphereShell { radius: f64 },
    UniformBall { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Electron,
    Proton,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParticleSpec {
    Preset {
        preset: Preset,
    },
    Explicit {
        charge: f64,
        /// Experimental (renormalized) mass.
        mass: f64,
        form_factor: FormFactorSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MassModelSpec {
    Relativistic,
    SemiRelAbraham,
    Nonrelativistic { mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    None,
    UniformMagnetic { strength: f64, axis: [f64; 3] },
    /// Quadrupole of axial frequency `omega_z` for the configured particle.
    Quadrupole { omega_z: f64 },
    Penning { omega_z: f64, b: f64 },
    /// `eφ = ½ m ω0² r²` for the configured particle.
    Harmonic { omega0: f64 },
    /// `φ(r) = Σ c_k r^k`, coefficients in internal units.
    CentralPolynomial { coeffs: Vec<f64> },
    /// `φ(x₁) = Σ c_k x₁^k`, coefficients in internal units.
    AxialPolynomial { coeffs: Vec<f64> },
    Superpose { maps: Vec<FieldSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunawaySpec {
    pub factor: f64,
    pub consecutive: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetSpec {
    pub q: [f64; 3],
    pub v: [f64; 3],
    #[serde(default)]
    pub a: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub particle: ParticleSpec,
    pub q: [f64; 3],
    pub v: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedScan {
    /// Factors applied to all initial velocities.
    pub speed_scales: Vec<f64>,
    /// Scale the charges with the speeds, keeping bound orbits bound.
    pub scale_charges: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericCheck {
    pub t_end: f64,
    pub integrator: IntegratorSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    LdForward {
        particle: ParticleSpec,
        mass_model: MassModelSpec,
        epsilon: f64,
        field: FieldSpec,
        initial: JetSpec,
        t_span: [f64; 2],
        integrator: IntegratorSpec,
        #[serde(default)]
        runaway: Option<RunawaySpec>,
    },
    LdBackward {
        particle: ParticleSpec,
        mass_model: MassModelSpec,
        epsilon: f64,
        field: FieldSpec,
        terminal: JetSpec,
        t_final: f64,
        integrator: IntegratorSpec,
    },
    Ll {
        particle: ParticleSpec,
        mass_model: MassModelSpec,
        epsilon: f64,
        field: FieldSpec,
        initial: JetSpec,
        t_span: [f64; 2],
        integrator: IntegratorSpec,
    },
    MemoryDde {
        particle: ParticleSpec,
        field: FieldSpec,
        /// `v` is the constant velocity on the history window.
        initial: JetSpec,
        t_end: f64,
        substeps: usize,
    },
    Penning {
        particle: ParticleSpec,
        omega_z: f64,
        b: f64,
    },
    Synchrotron {
        particle: ParticleSpec,
        epsilon: f64,
        b: f64,
        gamma0: f64,
        radius_ratio: f64,
        #[serde(default)]
        numeric: Option<NumericCheck>,
    },
    Darwin {
        bodies: Vec<BodySpec>,
        c: f64,
        t_span: [f64; 2],
        integrator: IntegratorSpec,
        #[serde(default)]
        collision_radius: Option<f64>,
    },
    Retarded2 {
        bodies: Vec<BodySpec>,
        t_end: f64,
        step: f64,
        speed_bound: f64,
        #[serde(default)]
        collision_radius: Option<f64>,
        #[serde(default)]
        compare: Option<SpeedScan>,
    },
    CompareLdLl {
        particle: ParticleSpec,
        mass_model: MassModelSpec,
        field: FieldSpec,
        terminal: JetSpec,
        t_final: f64,
        epsilons: Vec<f64>,
        integrator: IntegratorSpec,
        grid: usize,
    },
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::LdForward { .. } => "ld_forward",
            Scenario::LdBackward { .. } => "ld_backward",
            Scenario::Ll { .. } => "ll",
            Scenario::MemoryDde { .. } => "memory_dde",
            Scenario::Penning { .. } => "penning",
            Scenario::Synchrotron { .. } => "synchrotron",
            Scenario::Darwin { .. } => "darwin",
            Scenario::Retarded2 { .. } => "retarded2",
            Scenario::CompareLdLl { .. } => "compare_ld_ll",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub root: String,
}

/// One scenario with its units and output location.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub units: Units,
    pub output_root: String,
    pub scenario: Scenario,
}

/// A family of runs differing in one value, addressed by a JSON pointer into
/// `base`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vary {
    pub pointer: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub name: String,
    pub output_root: String,
    pub runs: Vec<RunConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    Run(RunConfig),
    Sweep(SweepConfig),
}

impl PartialEq for Units {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    #[allow(dead_code)]
    kind: String,
    name: String,
    units: UnitsSpec,
    output: OutputSpec,
    base: Value,
    vary: Vary,
}

fn parse_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn check_name(name: &str) -> Result<(), CliError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("name `{name}` must be non-empty and use only [A-Za-z0-9._-]")))
    }
}

/// Splits a run document into its envelope (`name`, `units`, `output`) and
/// the scenario body.
fn run_from_value(mut doc: Value) -> Result<RunConfig, CliError> {
    let obj = doc.as_object_mut().ok_or_else(|| parse_error("config must be a JSON object"))?;
    let mut take = |key: &str| obj.remove(key).ok_or_else(|| CliError::Config(format!("missing field `{key}`")));
    let name: String = serde_json::from_value(take("name")?).map_err(|e| parse_error(format!("name: {e}")))?;
    let units: UnitsSpec = serde_json::from_value(take("units")?).map_err(|e| parse_error(format!("units: {e}")))?;
    let output: OutputSpec = serde_json::from_value(take("output")?).map_err(|e| parse_error(format!("output: {e}")))?;
    let scenario: Scenario = serde_json::from_value(doc).map_err(parse_error)?;
    check_name(&name)?;
    Ok(RunConfig {
        name,
        units: Units::new(units)?,
        output_root: output.root,
        scenario,
    })
}

/// Tag of a sub-run: the run index and the value it was given.
fn variant_name(index: usize, value: &Value) -> String {
    let raw = match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    let clean: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{index:03}_{clean}")
}

pub fn parse(text: &str) -> Result<Config, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(parse_error)?;
    let kind = doc
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_error("missing string field `kind`"))?;
    if kind != "sweep" {
        return run_from_value(doc).map(Config::Run);
    }
    let sweep: SweepDoc = serde_json::from_value(doc).map_err(parse_error)?;
    check_name(&sweep.name)?;
    if sweep.vary.values.is_empty() {
        return Err(parse_error("vary.values must not be empty"));
    }
    let mut runs = Vec::with_capacity(sweep.vary.values.len());
    for (k, value) in sweep.vary.values.iter().enumerate() {
        let mut body = sweep.base.clone();
        if body.get("kind").and_then(Value::as_str) == Some("sweep") {
            return Err(parse_error("sweeps do not nest"));
        }
        let slot = body
            .pointer_mut(&sweep.vary.pointer)
            .ok_or_else(|| CliError::Config(format!("vary.pointer `{}` does not address a field of base", sweep.vary.pointer)))?;
        *slot = value.clone();
        let obj = body.as_object_mut().ok_or_else(|| parse_error("base must be a JSON object"))?;
        for key in ["name", "units", "output"] {
            if obj.contains_key(key) {
                return Err(CliError::Config(format!("base must not set `{key}`; it is inherited from the sweep")));
            }
        }
        let scenario: Scenario = serde_json::from_value(body).map_err(|e| CliError::Config(format!("run {k}: {e}")))?;
        runs.push(RunConfig {
            name: format!("{}/{}", sweep.name, variant_name(k, value)),
            units: Units::new(sweep.units)?,
            output_root: sweep.output.root.clone(),
            scenario,
        });
    }
    Ok(Config::Sweep(SweepConfig {
        name: sweep.name,
        output_root: sweep.output.root,
        runs,
    }))
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNITS: &str = r#""units": {"time_unit_s": 1e-12, "mass_unit_kg": 9.1093837015e-31, "length": "m", "time": "s", "mass": "kg", "charge": "C", "magnetic_field": "G", "frequency": "rad_per_s"}"#;

    fn penning(extra: &str) -> String {
        format!(r#"{{"kind": "penning", "name": "p", {UNITS}, "output": {{"root": "o"}}, "particle": {{"preset": "electron"}}, "omega_z": 4e8, "b": 6e4{extra}}}"#)
    }

    fn run(text: &str) -> RunConfig {
        match parse(text).unwrap() {
            Config::Run(r) => r,
            Config::Sweep(_) => panic!("expected a single run"),
        }
    }

    #[test]
    fn declared_units_round_trip() {
        let u = run(&penning("")).units;
        assert!((u.time_out(u.time(3.5)) - 3.5).abs() < 1e-15 * 3.5);
        assert!((u.magnetic_out(u.magnetic(6e4)) / 6e4 - 1.0).abs() < 1e-14);
        assert!((u.time(1e-12) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_and_missing_fields_are_rejected() {
        assert!(matches!(parse(&penning(r#", "spin": 1"#)), Err(CliError::Config(_))));
        let no_b = penning("").replace(r#", "b": 6e4"#, "");
        assert!(matches!(parse(&no_b), Err(CliError::Config(_))));
        let bad_unit = penning("").replace(r#""magnetic_field": "G""#, r#""magnetic_field": "g""#);
        assert!(matches!(parse(&bad_unit), Err(CliError::Config(_))));
    }

    #[test]
    fn names_must_be_path_safe() {
        for bad in ["../x", "a/b", ""] {
            let text = penning("").replace(r#""name": "p""#, &format!(r#""name": "{bad}""#));
            assert!(matches!(parse(&text), Err(CliError::Config(_))), "{bad}");
        }
    }

    fn sweep(base_extra: &str, pointer: &str) -> String {
        format!(
            r#"{{"kind": "sweep", "name": "s", {UNITS}, "output": {{"root": "o"}},
            "base": {{"kind": "penning", "particle": {{"preset": "electron"}}, "omega_z": 4e8, "b": 6e4{base_extra}}},
            "vary": {{"pointer": "{pointer}", "values": [5e4, 7e4]}}}}"#
        )
    }

    #[test]
    fn sweep_substitutes_each_value() {
        let Config::Sweep(s) = parse(&sweep("", "/b")).unwrap() else {
            panic!("expected a sweep")
        };
        let names: Vec<_> = s.runs.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["s/000_50000.0", "s/001_70000.0"]);
        match s.runs[1].scenario {
            Scenario::Penning { b, .. } => assert_eq!(b, 7e4),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn sweep_rejects_bad_pointer_and_inherited_keys() {
        assert!(matches!(parse(&sweep("", "/nope")), Err(CliError::Config(_))));
        assert!(matches!(parse(&sweep(r#", "name": "x""#, "/b")), Err(CliError::Config(_))));
    }
}
