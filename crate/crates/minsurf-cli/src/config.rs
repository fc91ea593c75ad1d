//! Scenario configuration: a TOML document validated strictly (unknown
//! keys are errors), plus built-in default specs for every scenario.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use minsurf::coupling::CouplingParams;
use minsurf::engine::StepControl;
use minsurf::surface::{
    make_catenoid, make_enneper, make_helicoid, make_plane, make_tilted_plane, SurfaceModel,
};
use nalgebra::Vector3;

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    /// plane | enneper | catenoid | helicoid | tilted-plane
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_out: Option<f64>,
    #[serde(default)]
    pub boundary: bool,
    /// [re, im] of the constant Gauss map for tilted-plane.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wg_const: Option<[f64; 2]>,
    /// Rigid translation applied to the immersion.
    #[serde(default)]
    pub offset: [f64; 3],
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<SurfaceModel, CliError> {
        let radius = self.radius.unwrap_or(50.0);
        let r_in = self.r_in.unwrap_or(0.2);
        let r_out = self.r_out.unwrap_or(5.0);
        let model = match self.kind.as_str() {
            "plane" => make_plane(radius, self.boundary),
            "enneper" => make_enneper(radius, self.boundary),
            "catenoid" => make_catenoid(r_in, r_out, self.boundary),
            "helicoid" => make_helicoid(r_in, r_out, self.boundary),
            "tilted-plane" => {
                let wg = self.wg_const.unwrap_or([0.0, 0.0]);
                make_tilted_plane(Complex64::new(wg[0], wg[1]), radius, self.boundary)
            }
            other => return Err(CliError::BadSpec(format!("unknown surface kind {other:?}"))),
        }
        .map_err(|e| CliError::BadSpec(e.to_string()))?;
        Ok(model.with_offset(Vector3::new(self.offset[0], self.offset[1], self.offset[2])))
    }

    /// Flat members have identically vanishing curvature; some scenarios
    /// use this to switch into negative-control mode.
    pub fn is_flat(&self) -> bool {
        matches!(self.kind.as_str(), "plane" | "tilted-plane")
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub u: f64,
    pub v: f64,
}

impl StartSpec {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default = "d_dt")]
    pub dt_base: f64,
    #[serde(default = "d_rc")]
    pub r_couple: f64,
    #[serde(default = "d_tmax")]
    pub t_max: f64,
    #[serde(default = "d_guard")]
    pub lambda_guard: f64,
    #[serde(default = "d_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
}

fn d_dt() -> f64 {
    1e-4
}
fn d_rc() -> f64 {
    1e-3
}
fn d_tmax() -> f64 {
    1.0
}
fn d_guard() -> f64 {
    0.1
}
fn d_stride() -> usize {
    100
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec {
            dt_base: d_dt(),
            r_couple: d_rc(),
            t_max: d_tmax(),
            lambda_guard: d_guard(),
            sample_stride: d_stride(),
            checkpoints: Vec::new(),
        }
    }
}

impl ControlSpec {
    pub fn to_control(&self) -> StepControl {
        StepControl {
            dt_base: self.dt_base,
            r_couple: self.r_couple,
            t_max: self.t_max,
            lambda_guard: self.lambda_guard,
            sample_stride: self.sample_stride,
            checkpoints: self.checkpoints.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl OverrideSpec {
    pub fn to_params(&self) -> CouplingParams {
        let mut p = CouplingParams::default();
        if let Some(v) = self.eps_max {
            p.eps_max = v;
        }
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if let Some(v) = self.kappa {
            p.kappa = v;
        }
        p
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub surfaces: Vec<SurfaceSpec>,
    pub starts: Vec<StartSpec>,
    #[serde(default)]
    pub control: ControlSpec,
    pub n_traj: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_out")]
    pub outputs: String,
    #[serde(default)]
    pub overrides: OverrideSpec,
    /// How many leading trajectories get a CSV time series.
    #[serde(default = "d_csv")]
    pub csv_max: u64,
}

fn d_out() -> String {
    "out".into()
}
fn d_csv() -> u64 {
    8
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| CliError::BadSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_traj < 1 {
            return Err(CliError::BadSpec("n_traj must be ≥ 1".into()));
        }
        if self.surfaces.is_empty() || self.surfaces.len() > 2 {
            return Err(CliError::BadSpec("need one or two surfaces".into()));
        }
        for s in &self.surfaces {
            s.build()?;
        }
        if self.starts.is_empty() || self.starts.len() > 2 {
            return Err(CliError::BadSpec("need one or two start points".into()));
        }
        Ok(())
    }
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Scenario-level seed mixes the scenario name hash; trajectory streams
/// are indexed separately.
pub fn scenario_seed(user_seed: u64, name: &str) -> u64 {
    user_seed ^ fnv1a64(name)
}

fn plane_surface() -> SurfaceSpec {
    SurfaceSpec {
        kind: "plane".into(),
        radius: Some(50.0),
        r_in: None,
        r_out: None,
        boundary: false,
        wg_const: None,
        offset: [0.0; 3],
    }
}

fn catenoid_surface(r_in: f64, r_out: f64, boundary: bool) -> SurfaceSpec {
    SurfaceSpec {
        kind: "catenoid".into(),
        radius: None,
        r_in: Some(r_in),
        r_out: Some(r_out),
        boundary,
        wg_const: None,
        offset: [0.0; 3],
    }
}

/// Built-in spec per scenario; CLI flags and config files override it.
pub fn default_spec(name: &str) -> Option<ScenarioSpec> {
    let base = |surfaces: Vec<SurfaceSpec>, starts: Vec<StartSpec>, control: ControlSpec, n| {
        ScenarioSpec {
            name: name.to_string(),
            surfaces,
            starts,
            control,
            n_traj: n,
            seed: 0,
            outputs: format!("out/{name}"),
            overrides: OverrideSpec::default(),
            csv_max: d_csv(),
        }
    };
    let s = |u, v| StartSpec { u, v };
    match name {
        "sto-comp" => Some(base(
            vec![plane_surface()],
            vec![s(0.0, 0.0)],
            ControlSpec::default(),
            1000,
        )),
        "coordinate-qv" => Some(base(
            vec![catenoid_surface(0.05, 20.0, false)],
            vec![s(1.0, 0.0)],
            ControlSpec::default(),
            400,
        )),
        "gauss-occupation" => Some(base(
            vec![catenoid_surface(0.05, 20.0, false)],
            vec![s(1.0, 0.0)],
            ControlSpec {
                dt_base: 1e-3,
                t_max: 50.0,
                ..ControlSpec::default()
            },
            100,
        )),
        "gauss-timechange" => Some(base(
            vec![catenoid_surface(0.05, 20.0, false)],
            vec![s(1.0, 0.0)],
            ControlSpec::default(),
            200,
        )),
        "halfspace" => Some(base(
            vec![
                catenoid_surface(0.05, 20.0, false),
                SurfaceSpec {
                    offset: [0.0, 0.0, 4.0],
                    ..plane_surface()
                },
            ],
            vec![s(1.0, 0.0), s(0.0, 0.0)],
            ControlSpec {
                t_max: 8.0,
                ..ControlSpec::default()
            },
            200,
        )),
        "mirror-coupling-plane" => Some(base(
            vec![plane_surface()],
            vec![s(0.5, 0.0), s(-0.5, 0.0)],
            ControlSpec::default(),
            1000,
        )),
        "liouville-embedded" => Some(base(
            vec![catenoid_surface(0.05, 20.0, false)],
            vec![s(1.05, 0.15), s(1.05, -0.15)],
            ControlSpec {
                t_max: 20.0,
                ..ControlSpec::default()
            },
            200,
        )),
        "max-principle-boundary" => Some(base(
            vec![
                catenoid_surface(0.5, 2.0, true),
                SurfaceSpec {
                    offset: [0.0, 0.0, 2.5],
                    ..plane_surface()
                },
            ],
            vec![s(1.0, 0.0), s(0.0, 0.0)],
            ControlSpec {
                t_max: 10.0,
                ..ControlSpec::default()
            },
            200,
        )),
        _ => None,
    }
}

pub const SCENARIO_NAMES: [&str; 8] = [
    "sto-comp",
    "coordinate-qv",
    "gauss-occupation",
    "gauss-timechange",
    "halfspace",
    "mirror-coupling-plane",
    "liouville-embedded",
    "max-principle-boundary",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for name in SCENARIO_NAMES {
            let spec = default_spec(name).unwrap();
            spec.validate().unwrap();
            let text = spec.to_toml();
            let back = ScenarioSpec::from_toml(&text).unwrap();
            assert_eq!(back.name, spec.name);
            assert_eq!(back.n_traj, spec.n_traj);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
name = "sto-comp"
n_traj = 1
typo_field = 3
surfaces = [{ kind = "plane" }]
starts = [{ u = 0.0, v = 0.0 }]
"#;
        assert!(ScenarioSpec::from_toml(text).is_err());
    }

    #[test]
    fn seed_mixing_separates_scenarios() {
        assert_ne!(scenario_seed(7, "sto-comp"), scenario_seed(7, "halfspace"));
        assert_ne!(scenario_seed(7, "sto-comp"), scenario_seed(8, "sto-comp"));
    }
}
