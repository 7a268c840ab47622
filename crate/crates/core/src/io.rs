//! Run configuration, initial-data presets and output files.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::driver::{DriverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{build_strip_domain, ops, DomainTag, Field, GeometryConfig, InitialData, MacVelocity, PhysParams, TwoPhaseDomain};

pub const SCHEMA: &str = "plaque-fsi/run/v1";

/// Largest grid a config may request.
pub const MAX_CELLS: usize = 1 << 20;

/// Named initial concentrations. `ψ(y)` below is continuous with zero slope
/// on the symmetry plane, on Γ and on Γ_s, so every preset is compatible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Named preset: `zero`, `small-data`, `growth` or `negative-lobe`.
    Preset { name: String },
    Uniform { c0: f64 },
    /// `mean + amplitude · cos(2π kx x / L) · ψ(y)`.
    Cosine { mean: f64, amplitude: f64, #[serde(default = "one")] kx: u32 },
    /// Row-major cell values; velocities default to rest.
    Inline {
        c0: Vec<f64>,
        #[serde(default)]
        u0: Option<Vec<f64>>,
        #[serde(default)]
        v0: Option<Vec<f64>>,
    },
}

fn one() -> u32 {
    1
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Preset { name: "zero".into() }
    }
}

pub const PRESETS: [&str; 4] = ["zero", "small-data", "growth", "negative-lobe"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Store every `every`-th time level in the trajectory CSV.
    #[serde(default = "one_usize")]
    pub every: usize,
    #[serde(default = "yes")]
    pub trajectory: bool,
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { every: 1, trajectory: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub geometry: GeometryConfig,
    pub params: PhysParams,
    pub numerics: DriverConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Layer profile with zero slope at `y = 0`, `h_f` and `h_f + h_s`.
pub fn layer_profile(d: &TwoPhaseDomain, y: f64) -> f64 {
    if y <= d.h_f {
        (PI * y / d.h_f).cos()
    } else {
        -(PI * (y - d.h_f) / d.h_s).cos()
    }
}

fn cosine(d: &TwoPhaseDomain, mean: f64, amplitude: f64, kx: u32) -> Field {
    let dd = d.clone();
    Field::cell_scalar(d, DomainTag::Both, move |x, y| {
        mean + amplitude * (TAU * kx as f64 * x / dd.period).cos() * layer_profile(&dd, y)
    })
}

impl RunConfig {
    /// Full configuration for a named preset.
    pub fn preset(name: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig {
            schema: SCHEMA.into(),
            geometry: GeometryConfig::default(),
            params: PhysParams::default(),
            numerics: DriverConfig::default(),
            initial: InitialConfig::Preset { name: name.into() },
            output: OutputConfig::default(),
        };
        match name {
            "zero" => {}
            "small-data" => {
                cfg.numerics.dt = 0.005;
                cfg.numerics.window0 = 0.02;
                cfg.numerics.t_final = 0.04;
            }
            "growth" => {
                cfg.numerics.dt = 0.02;
                cfg.numerics.window0 = 0.1;
                cfg.numerics.t_final = 1.0;
                cfg.numerics.tol = 1e-7;
                cfg.output.every = 5;
            }
            "negative-lobe" => {
                cfg.numerics.t_final = 0.05;
                cfg.numerics.dt = 0.01;
                cfg.numerics.window0 = 0.05;
            }
            other => return Err(Error::config("initial.name", format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")))),
        }
        Ok(cfg)
    }

    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(json_path(&e), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::config("schema", format!("expected `{SCHEMA}`, got `{}`", self.schema)));
        }
        let g = &self.geometry;
        let cells = g.nx.saturating_mul(g.ny_f.saturating_add(g.ny_s));
        if cells > MAX_CELLS {
            return Err(Error::config("geometry", format!("{cells} cells exceed the limit of {MAX_CELLS}")));
        }
        let d = build_strip_domain(g)?;
        self.params.validate()?;
        self.numerics.validate()?;
        if self.output.every == 0 {
            return Err(Error::config("output.every", "must be at least 1"));
        }
        match &self.initial {
            InitialConfig::Preset { name } => {
                if !PRESETS.contains(&name.as_str()) {
                    return Err(Error::config("initial.name", format!("unknown preset `{name}`; known: {}", PRESETS.join(", "))));
                }
            }
            InitialConfig::Uniform { c0 } => finite("initial.c0", *c0)?,
            InitialConfig::Cosine { mean, amplitude, .. } => {
                finite("initial.mean", *mean)?;
                finite("initial.amplitude", *amplitude)?;
            }
            InitialConfig::Inline { c0, u0, v0 } => {
                let n = d.nx * d.ny();
                check_len("initial.c0", c0, n)?;
                if let Some(u) = u0 {
                    check_len("initial.u0", u, n)?;
                }
                if let Some(v) = v0 {
                    check_len("initial.v0", v, d.nx * (d.ny() + 1))?;
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<TwoPhaseDomain> {
        build_strip_domain(&self.geometry)
    }

    pub fn initial_data(&self, d: &TwoPhaseDomain) -> Result<InitialData> {
        let zero_v = MacVelocity::zeros(d);
        let c0 = match &self.initial {
            InitialConfig::Preset { name } => match name.as_str() {
                "zero" => cosine(d, 0.0, 0.0, 1),
                "small-data" => cosine(d, 1e-3, 5e-4, 1),
                "growth" => cosine(d, 0.3, 0.05, 1),
                "negative-lobe" => cosine(d, 1e-3, 2e-3, 1),
                other => return Err(Error::config("initial.name", format!("unknown preset `{other}`"))),
            },
            InitialConfig::Uniform { c0 } => cosine(d, *c0, 0.0, 1),
            InitialConfig::Cosine { mean, amplitude, kx } => cosine(d, *mean, *amplitude, *kx),
            InitialConfig::Inline { c0, u0, v0 } => {
                let mut c = cosine(d, 0.0, 0.0, 1);
                c.values.copy_from_slice(c0);
                let mut v = zero_v.clone();
                if let Some(u) = u0 {
                    v.u.values.copy_from_slice(u);
                }
                if let Some(vv) = v0 {
                    v.v.values.copy_from_slice(vv);
                }
                return InitialData::new(d, v, c);
            }
        };
        InitialData::new(d, zero_v, c0)
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

fn check_len(field: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::config(field, format!("expected {n} values, got {}", v.len())));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::config(field, format!("non-finite value {x}")));
    }
    Ok(())
}

/// Best-effort field name from a serde error (`unknown field`, `missing field`).
fn json_path(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for key in ["unknown field `", "missing field `"] {
        if let Some(i) = msg.find(key) {
            let rest = &msg[i + key.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "<json>".into()
}

/// Long-format trajectory: `t,x,y,field,value`, cell-centred values.
pub fn write_trajectory_csv(mut w: impl Write, d: &TwoPhaseDomain, traj: &Trajectory, every: usize, hash: &str) -> Result<()> {
    writeln!(w, "# config_sha256={hash}")?;
    writeln!(w, "t,x,y,field,value")?;
    let last = traj.levels.len() - 1;
    for (k, s) in traj.levels.iter().enumerate() {
        if k % every != 0 && k != last {
            continue;
        }
        let vc = ops::cell_velocity(d, &s.v);
        for j in 0..d.ny() {
            for i in 0..d.nx {
                let (x, y) = d.cell_center(i, j);
                let mut row = |name: &str, v: f64| writeln!(w, "{},{},{},{},{:e}", s.t, x, y, name, v);
                row("u", vc.at(i, j, 0))?;
                row("v", vc.at(i, j, 1))?;
                row("pi", s.pi.at(i, j, 0))?;
                row("c", s.c.at(i, j, 0))?;
                if !d.is_fluid_row(j) {
                    row("cstar", s.cstar.at(i, j, 0))?;
                    row("g", s.g.at(i, j, 0))?;
                }
            }
        }
    }
    Ok(())
}

/// Reproducibility record written next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema: String,
    pub config_sha256: String,
    pub command: String,
    pub version: String,
    pub grid: GridInfo,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub nx: usize,
    pub ny_f: usize,
    pub ny_s: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Manifest {
    pub fn new(command: &str, hash: &str, d: &TwoPhaseDomain) -> Self {
        Manifest {
            schema: SCHEMA.into(),
            config_sha256: hash.into(),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            grid: GridInfo { nx: d.nx, ny_f: d.ny_f, ny_s: d.ny_s, dx: d.dx, dy: d.dy },
            files: Vec::new(),
        }
    }
}

/// JSON document with the config hash attached at the top level.
pub fn with_hash<T: Serialize>(hash: &str, body: &T) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(body).map_err(|e| Error::Parse(e.to_string()))?;
    match &mut v {
        serde_json::Value::Object(m) => {
            m.insert("config_sha256".into(), hash.into());
            Ok(v)
        }
        _ => Ok(serde_json::json!({ "config_sha256": hash, "data": v })),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Create `dir` and return the path of `name` inside it.
pub fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn json(cfg: &RunConfig) -> String {
        serde_json::to_string(cfg).unwrap()
    }

    #[test]
    fn presets_round_trip() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            let back = RunConfig::from_json(&json(&cfg)).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn zero_thickness_names_field() {
        let mut cfg = RunConfig::preset("zero").unwrap();
        cfg.geometry.h_f = 0.0;
        match RunConfig::from_json(&json(&cfg)) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "geometry.h_f"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_reported() {
        let mut v: serde_json::Value = serde_json::from_str(&json(&RunConfig::preset("zero").unwrap())).unwrap();
        v["params"]["viscosity"] = 1.0.into();
        match RunConfig::from_json(&v.to_string()) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "viscosity"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn presets_are_compatible() {
        for name in ["zero", "small-data", "growth"] {
            let cfg = RunConfig::preset(name).unwrap();
            let d = cfg.domain().unwrap();
            let w0 = cfg.initial_data(&d).unwrap();
            let rep = crate::grid::check_compatibility(&d, &w0, &cfg.params, 0.05).unwrap();
            assert!(rep.pass(), "{name}: {:?}", rep.failures());
        }
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::preset("zero").unwrap();
        let mut b = a.clone();
        b.params.zeta = 2.0;
        assert_ne!(a.hash(), b.hash());
    }
}
