//! Run configuration as flat JSON with dotted keys.
//!
//! ```json
//! { "gas.gamma": 1.1, "gas.dim": 1, "grid.cells": 128, "init.family": "density_mode" }
//! ```
//!
//! Every key is optional and falls back to the defaults below; unknown keys
//! are rejected. Lists (`grid.cells`, `grid.length`, `grid.velocity_points`,
//! `init.k`) accept a scalar, which is repeated along every axis.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::diagnostics::MAX_ORDER;
use crate::discretization::{SpatialGrid, DEFAULT_PERIOD};
use crate::equilibrium::{GasParams, VelocityGrid, DEFAULT_VELOCITY_MARGIN};
use crate::perturbation::DEFAULT_GRAM_TOLERANCE;
use crate::solver::{SolverConfig, Splitting, TransportScheme};
use crate::{Error, Result, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitFamily {
    /// The global equilibrium `M(1, 0)`.
    Equilibrium,
    /// `ρ = 1 + A cos(k·x)`, `u = 0`.
    DensityMode,
    /// `ρ = 1`, `u = A sin(k·x) ê₁`.
    VelocityMode,
    /// `f = A Σ cᵢ eᵢ cos(k·x)` in the perturbation variables.
    BasisPerturbation,
    /// Phase-space field read from a snapshot file.
    Snapshot,
}

impl InitFamily {
    const NAMES: [(&'static str, InitFamily); 5] = [
        ("equilibrium", InitFamily::Equilibrium),
        ("density_mode", InitFamily::DensityMode),
        ("velocity_mode", InitFamily::VelocityMode),
        ("basis_perturbation", InitFamily::BasisPerturbation),
        ("snapshot", InitFamily::Snapshot),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(_, f)| *f == self)
            .map(|(n, _)| *n)
            .expect("listed")
    }

    fn parse(s: &str) -> Option<Self> {
        Self::NAMES.iter().find(|(n, _)| *n == s).map(|(_, f)| *f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub family: InitFamily,
    pub amplitude: f64,
    /// Integer mode numbers; the wave vector is `k_a = 2π k_a / L_a`.
    pub k: Vec<i64>,
    /// Basis coefficients for `basis_perturbation` (`d + 1` entries).
    pub coeffs: Vec<f64>,
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub dim: usize,
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
    pub velocity_points: Vec<usize>,
    pub velocity_margin: f64,
    pub solver: SolverConfig,
    pub init: InitConfig,
    pub diagnostics_order: usize,
    pub stencil_order: usize,
    pub decay_window: (f64, f64),
    pub epsilons: Vec<f64>,
    pub euler_cfl: f64,
    pub euler_dt: Option<f64>,
    pub gram_tolerance: f64,
    pub verify_samples: usize,
    pub verify_random_fields: usize,
    pub snapshot_interval: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_map(Map::new()).expect("defaults are valid")
    }
}

struct Keys {
    map: Map<String, Value>,
    used: BTreeSet<String>,
}

fn err(path: &str, msg: impl Into<String>) -> Error {
    Error::config(path, msg)
}

impl Keys {
    fn get(&mut self, key: &str) -> Option<&Value> {
        self.used.insert(key.to_string());
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| err(key, format!("expected a finite number, got {v}"))),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| err(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| err(key, format!("expected a boolean, got {v}"))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| err(key, format!("expected a string, got {v}"))),
        }
    }

    /// A scalar (repeated `len` times) or an array of exactly `len` entries.
    fn list<T>(
        &mut self,
        key: &str,
        len: usize,
        default: Vec<T>,
        conv: impl Fn(&Value) -> Option<T>,
        what: &str,
    ) -> Result<Vec<T>>
    where
        T: Clone,
    {
        let Some(v) = self.get(key).cloned() else {
            return Ok(default);
        };
        let items: Vec<Value> = match v {
            Value::Array(a) => a,
            other => vec![other; len],
        };
        if items.len() != len {
            return Err(err(
                key,
                format!("expected {len} entries, got {}", items.len()),
            ));
        }
        items
            .iter()
            .map(|x| conv(x).ok_or_else(|| err(key, format!("expected {what}, got {x}"))))
            .collect()
    }

    fn f64_array(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        let Some(v) = self.get(key).cloned() else {
            return Ok(default);
        };
        let Value::Array(items) = v else {
            return Err(err(key, format!("expected an array of numbers, got {v}")));
        };
        items
            .iter()
            .map(|x| {
                x.as_f64()
                    .filter(|y| y.is_finite())
                    .ok_or_else(|| err(key, format!("expected a finite number, got {x}")))
            })
            .collect()
    }
}

fn as_count(v: &Value) -> Option<usize> {
    v.as_u64().and_then(|x| usize::try_from(x).ok())
}

fn as_positive(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite() && *x > 0.0)
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| err("<root>", format!("invalid JSON: {e}")))?;
        match value {
            Value::Object(map) => Self::from_map(map),
            _ => Err(err("<root>", "expected a JSON object")),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Validates and resolves a key map. Every precondition that can be
    /// checked without allocating phase-space storage is checked here.
    pub fn from_map(map: Map<String, Value>) -> Result<Self> {
        for (k, v) in &map {
            if v.is_object() {
                return Err(err(k, "nested objects are not supported; use dotted keys"));
            }
        }
        let mut keys = Keys {
            map,
            used: BTreeSet::new(),
        };

        let dim = keys.u64("gas.dim", 1)? as usize;
        if dim == 0 || dim > MAX_DIM {
            return Err(err(
                "gas.dim",
                Error::InvalidDimension { dim, max: MAX_DIM }.to_string(),
            ));
        }
        let gamma = keys.f64("gas.gamma", 1.1)?;
        let params = GasParams::new(gamma, dim).map_err(|e| err("gas.gamma", e.to_string()))?;

        let cells = keys.list("grid.cells", dim, vec![128; dim], as_count, "a cell count")?;
        let lengths = keys.list(
            "grid.length",
            dim,
            vec![DEFAULT_PERIOD; dim],
            as_positive,
            "a positive period",
        )?;
        SpatialGrid::new(&cells, &lengths).map_err(|e| err("grid.cells", e.to_string()))?;
        let velocity_points = keys.list(
            "grid.velocity_points",
            dim,
            vec![256; dim],
            as_count,
            "a point count",
        )?;
        let velocity_margin = keys.f64("grid.velocity_margin", DEFAULT_VELOCITY_MARGIN)?;
        if !(velocity_margin >= 0.0) {
            return Err(err("grid.velocity_margin", "must be non-negative"));
        }
        VelocityGrid::new(dim, &velocity_points, 1.0)
            .map_err(|e| err("grid.velocity_points", e.to_string()))?;

        let d = SolverConfig::default();
        let splitting = match keys.string("solver.splitting")?.as_deref() {
            None | Some("strang") => Splitting::Strang,
            Some("lie") => Splitting::Lie,
            Some(o) => {
                return Err(err(
                    "solver.splitting",
                    format!("unknown splitting `{o}` (lie | strang)"),
                ))
            }
        };
        let transport = match keys.string("solver.transport")?.as_deref() {
            None | Some("muscl_minmod") => TransportScheme::MusclMinmod,
            Some("upwind1") => TransportScheme::Upwind1,
            Some(o) => {
                return Err(err(
                    "solver.transport",
                    format!("unknown scheme `{o}` (upwind1 | muscl_minmod)"),
                ))
            }
        };
        let solver = SolverConfig {
            cfl: keys.f64("solver.cfl", d.cfl)?,
            t_end: keys.f64("solver.t_end", d.t_end)?,
            epsilon: keys.f64("solver.epsilon", d.epsilon)?,
            splitting,
            transport,
            output_interval: keys.f64("solver.output_interval", d.output_interval)?,
            envelope: keys.opt_f64("solver.envelope")?,
            track_entropy: keys.bool("solver.track_entropy", d.track_entropy)?,
            dt: keys.opt_f64("solver.dt")?,
        };
        solver
            .validate()
            .map_err(|e| err("solver", e.to_string()))?;

        let family_name = keys
            .string("init.family")?
            .unwrap_or_else(|| "density_mode".into());
        let family = InitFamily::parse(&family_name).ok_or_else(|| {
            err(
                "init.family",
                format!(
                    "unknown family `{family_name}` (equilibrium | density_mode | velocity_mode | \
                     basis_perturbation | snapshot)"
                ),
            )
        })?;
        let amplitude = keys.f64("init.amplitude", 1e-3)?;
        let mut k_default = vec![0; dim];
        k_default[0] = 1;
        let k = keys.list(
            "init.k",
            dim,
            k_default,
            |v| v.as_i64(),
            "an integer mode number",
        )?;
        let mut coeffs_default = vec![0.0; dim + 1];
        coeffs_default[0] = 1.0;
        let coeffs = keys.f64_array("init.coeffs", coeffs_default)?;
        if coeffs.len() != dim + 1 {
            return Err(err(
                "init.coeffs",
                format!("expected {} entries, got {}", dim + 1, coeffs.len()),
            ));
        }
        let snapshot = keys.string("init.snapshot")?.map(PathBuf::from);
        if family == InitFamily::Snapshot && snapshot.is_none() {
            return Err(err(
                "init.snapshot",
                "required when init.family is `snapshot`",
            ));
        }
        if family == InitFamily::DensityMode && amplitude.abs() >= 1.0 {
            return Err(err(
                "init.amplitude",
                "density_mode needs |A| < 1 to keep ρ positive",
            ));
        }
        if matches!(family, InitFamily::BasisPerturbation) {
            params
                .require_perturbation_weight()
                .map_err(|e| err("init.family", e.to_string()))?;
        }

        let diagnostics_order = keys.u64("diagnostics.order", 2)? as usize;
        if diagnostics_order > MAX_ORDER {
            return Err(err(
                "diagnostics.order",
                format!("must be at most {MAX_ORDER}"),
            ));
        }
        let stencil_order = keys.u64("diagnostics.stencil_order", 4)? as usize;
        if stencil_order != 2 && stencil_order != 4 {
            return Err(err("diagnostics.stencil_order", "must be 2 or 4"));
        }

        let window_start = keys.f64("decay.window_start", 0.0)?;
        let window_end = keys.f64("decay.window_end", solver.t_end)?;
        if !(window_end > window_start) {
            return Err(err("decay.window_end", "must exceed decay.window_start"));
        }

        let epsilons = keys.f64_array("hydro.epsilons", vec![1e-1, 1e-2, 1e-3])?;
        if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(err(
                "hydro.epsilons",
                "expected a non-empty list of positive values",
            ));
        }
        let euler_cfl = keys.f64("hydro.euler_cfl", 0.4)?;
        if !(euler_cfl > 0.0 && euler_cfl <= 1.0) {
            return Err(err("hydro.euler_cfl", "must lie in (0, 1]"));
        }
        let euler_dt = keys.opt_f64("hydro.euler_dt")?;
        if euler_dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(err("hydro.euler_dt", "must be positive"));
        }

        let gram_tolerance = keys.f64("verify.gram_tolerance", DEFAULT_GRAM_TOLERANCE)?;
        if !(gram_tolerance > 0.0) {
            return Err(err("verify.gram_tolerance", "must be positive"));
        }
        let verify_samples = keys.u64("verify.samples", 20)? as usize;
        let verify_random_fields = keys.u64("verify.random_fields", 100)? as usize;

        let snapshot_interval = keys.opt_f64("output.snapshot_interval")?;
        if snapshot_interval.is_some_and(|s| !(s > 0.0)) {
            return Err(err("output.snapshot_interval", "must be positive"));
        }
        let out_dir = keys.string("output.dir")?.map(PathBuf::from);
        let seed = keys.u64("seed", 1_234_567)?;

        if let Some(unknown) = keys.map.keys().find(|k| !keys.used.contains(*k)) {
            return Err(err(unknown, "unknown key"));
        }

        Ok(Self {
            gamma,
            dim,
            cells,
            lengths,
            velocity_points,
            velocity_margin,
            solver,
            init: InitConfig {
                family,
                amplitude,
                k,
                coeffs,
                snapshot,
            },
            diagnostics_order,
            stencil_order,
            decay_window: (window_start, window_end),
            epsilons,
            euler_cfl,
            euler_dt,
            gram_tolerance,
            verify_samples,
            verify_random_fields,
            snapshot_interval,
            out_dir,
            seed,
        })
    }

    /// Every resolved key; feeding this back through [`RunConfig::from_map`]
    /// reproduces `self`.
    pub fn to_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        let opt = |x: Option<f64>| x.map(Value::from).unwrap_or(Value::Null);
        put("gas.gamma", self.gamma.into());
        put("gas.dim", self.dim.into());
        put("grid.cells", self.cells.clone().into());
        put("grid.length", self.lengths.clone().into());
        put("grid.velocity_points", self.velocity_points.clone().into());
        put("grid.velocity_margin", self.velocity_margin.into());
        put("solver.cfl", self.solver.cfl.into());
        put("solver.t_end", self.solver.t_end.into());
        put("solver.epsilon", self.solver.epsilon.into());
        put(
            "solver.splitting",
            match self.solver.splitting {
                Splitting::Lie => "lie",
                Splitting::Strang => "strang",
            }
            .into(),
        );
        put(
            "solver.transport",
            match self.solver.transport {
                TransportScheme::Upwind1 => "upwind1",
                TransportScheme::MusclMinmod => "muscl_minmod",
            }
            .into(),
        );
        put("solver.output_interval", self.solver.output_interval.into());
        put("solver.envelope", opt(self.solver.envelope));
        put("solver.track_entropy", self.solver.track_entropy.into());
        put("solver.dt", opt(self.solver.dt));
        put("init.family", self.init.family.name().into());
        put("init.amplitude", self.init.amplitude.into());
        put("init.k", self.init.k.clone().into());
        put("init.coeffs", self.init.coeffs.clone().into());
        put(
            "init.snapshot",
            self.init
                .snapshot
                .as_ref()
                .map(|p| Value::from(p.to_string_lossy().into_owned()))
                .unwrap_or(Value::Null),
        );
        put("diagnostics.order", self.diagnostics_order.into());
        put("diagnostics.stencil_order", self.stencil_order.into());
        put("decay.window_start", self.decay_window.0.into());
        put("decay.window_end", self.decay_window.1.into());
        put("hydro.epsilons", self.epsilons.clone().into());
        put("hydro.euler_cfl", self.euler_cfl.into());
        put("hydro.euler_dt", opt(self.euler_dt));
        put("verify.gram_tolerance", self.gram_tolerance.into());
        put("verify.samples", self.verify_samples.into());
        put("verify.random_fields", self.verify_random_fields.into());
        put("output.snapshot_interval", opt(self.snapshot_interval));
        put(
            "output.dir",
            self.out_dir
                .as_ref()
                .map(|p| Value::from(p.to_string_lossy().into_owned()))
                .unwrap_or(Value::Null),
        );
        put("seed", self.seed.into());
        m
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&Value::Object(self.to_map())).expect("plain JSON values")
    }

    pub fn params(&self) -> GasParams {
        GasParams::new(self.gamma, self.dim).expect("validated")
    }

    pub fn spatial_grid(&self) -> SpatialGrid {
        SpatialGrid::new(&self.cells, &self.lengths).expect("validated")
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::for_params(&self.params(), &self.velocity_points, self.velocity_margin)
    }
}
