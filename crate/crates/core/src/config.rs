//! Run configuration read from TOML.
//!
//! ```toml
//! [model]
//! mu = 2.0
//! lambda = 1.0
//! r = 0.1
//! ell = 1.2
//! c_bar = 1.0
//! c_floor = 0.0
//!
//! [claims]
//! kind = "exponential"          # or "hyper_exponential", "shifted_pareto"
//! params = { mean = 0.5 }       # { weights = [..], means = [..] } / { alpha = .., theta = .. }
//!
//! [grid]
//! L = 30.0                      # optional; derived from the model when absent
//! n_x = 2000
//! fft = false
//!
//! [ladder]
//! n = 256
//! eq_factor = 1e-6
//!
//! [solver]
//! tol = 1e-10
//! max_iterations = 10000
//! anderson_depth = 5            # 0 disables acceleration
//!
//! [simulation]
//! paths = 100000
//! seed = 42
//! horizon = 231.0               # optional; ceil(10 ln 10 / r) when absent
//! antithetic = false
//!
//! [verify]
//! points = [[0.0, 0.0], [1.0, 0.5]]
//! constant_rates = [0.5]
//! eps_disc = 0.01               # optional; calibrated by a refined solve when absent
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every section except `model` and `claims` is optional.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::discretization::{ConvolutionMethod, Grid, Operators};
use crate::error::{Error, Result};
use crate::ladder::{LadderSettings, RateLadder, DEFAULT_EQ_FACTOR};
use crate::model::{ClaimDistribution, ModelParams};
use crate::simulate::{default_horizon, McSettings};
use crate::sweep::{Acceleration, SolverSettings};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    claims: RawClaims,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    ladder: RawLadder,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    simulation: RawSimulation,
    #[serde(default)]
    verify: RawVerify,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    mu: f64,
    lambda: f64,
    r: f64,
    ell: f64,
    c_bar: f64,
    c_floor: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaims {
    kind: String,
    params: toml::Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGrid {
    #[serde(rename = "L")]
    length: Option<f64>,
    n_x: usize,
    fft: bool,
}

impl Default for RawGrid {
    fn default() -> Self {
        Self {
            length: None,
            n_x: 2000,
            fft: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawLadder {
    n: usize,
    eq_factor: f64,
}

impl Default for RawLadder {
    fn default() -> Self {
        Self {
            n: 256,
            eq_factor: DEFAULT_EQ_FACTOR,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    tol: f64,
    max_iterations: usize,
    anderson_depth: usize,
}

impl Default for RawSolver {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 10_000,
            anderson_depth: 5,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSimulation {
    paths: usize,
    seed: u64,
    horizon: Option<f64>,
    antithetic: bool,
}

impl Default for RawSimulation {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 42,
            horizon: None,
            antithetic: false,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawVerify {
    points: Option<Vec<[f64; 2]>>,
    constant_rates: Option<Vec<f64>>,
    eps_disc: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: PathBuf,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Points and budgets for the Monte Carlo part of `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub points: Vec<(f64, f64)>,
    pub constant_rates: Vec<f64>,
    pub eps_disc: Option<f64>,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub claims: ClaimDistribution,
    pub grid: Grid,
    pub method: ConvolutionMethod,
    pub ladder: RateLadder,
    pub settings: LadderSettings,
    pub simulation: McSettings,
    pub verify: VerifyConfig,
    pub output_dir: PathBuf,
}

fn number(table: &toml::Table, key: &str) -> Result<f64> {
    match table.get(key) {
        Some(toml::Value::Float(v)) => Ok(*v),
        Some(toml::Value::Integer(v)) => Ok(*v as f64),
        Some(_) => Err(Error::Parse(format!("claims.params.{key} must be a number"))),
        None => Err(Error::Parse(format!("missing claims.params.{key}"))),
    }
}

fn numbers(table: &toml::Table, key: &str) -> Result<Vec<f64>> {
    let err = || Error::Parse(format!("claims.params.{key} must be an array of numbers"));
    match table.get(key) {
        Some(toml::Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                _ => Err(err()),
            })
            .collect(),
        Some(_) => Err(err()),
        None => Err(Error::Parse(format!("missing claims.params.{key}"))),
    }
}

fn claims_from(raw: &RawClaims) -> Result<ClaimDistribution> {
    let allowed: &[&str] = match raw.kind.as_str() {
        "exponential" => &["mean"],
        "hyper_exponential" => &["weights", "means"],
        "shifted_pareto" => &["alpha", "theta"],
        other => {
            return Err(Error::validation(
                "claims.kind",
                format!("unknown claim family `{other}`"),
            ))
        }
    };
    if let Some(extra) = raw.params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Parse(format!("unknown key claims.params.{extra}")));
    }
    let p = &raw.params;
    match raw.kind.as_str() {
        "exponential" => ClaimDistribution::exponential(number(p, "mean")?),
        "hyper_exponential" => ClaimDistribution::hyper_exponential(numbers(p, "weights")?, numbers(p, "means")?),
        _ => ClaimDistribution::shifted_pareto(number(p, "alpha")?, number(p, "theta")?),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let m = &raw.model;
        let params = ModelParams::new(m.mu, m.lambda, m.r, m.ell, m.c_bar, m.c_floor)?;
        let claims = claims_from(&raw.claims)?;
        let length = raw.grid.length.unwrap_or_else(|| Grid::default_length(&params, &claims));
        let grid = Grid::new(length, raw.grid.n_x)?;
        let ladder = RateLadder::new(params.c_bar, params.c_floor, raw.ladder.n)?;
        if !(raw.ladder.eq_factor > 0.0 && raw.ladder.eq_factor.is_finite()) {
            return Err(Error::validation("ladder.eq_factor", "must be positive"));
        }
        let s = &raw.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(Error::validation("solver.tol", "must be positive"));
        }
        if s.max_iterations == 0 {
            return Err(Error::validation("solver.max_iterations", "must be positive"));
        }
        let acceleration = if s.anderson_depth == 0 {
            Acceleration::None
        } else {
            Acceleration::Anderson { depth: s.anderson_depth }
        };
        let settings = LadderSettings {
            solver: SolverSettings {
                tol: s.tol,
                max_iterations: s.max_iterations,
                acceleration,
            },
            eq_factor: raw.ladder.eq_factor,
            check_tol: LadderSettings::default().check_tol,
        };
        let sim = &raw.simulation;
        let horizon = sim.horizon.unwrap_or_else(|| default_horizon(params.r));
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::validation("simulation.horizon", "must be positive"));
        }
        if sim.paths < 2 {
            return Err(Error::validation("simulation.paths", "need at least two paths"));
        }
        let simulation = McSettings {
            paths: sim.paths,
            seed: sim.seed,
            horizon,
            antithetic: sim.antithetic,
        };
        let verify = VerifyConfig {
            points: raw
                .verify
                .points
                .map(|v| v.into_iter().map(|[x, c]| (x, c)).collect())
                .unwrap_or_else(|| vec![(0.0, params.c_floor), (0.0, params.c_bar)]),
            constant_rates: raw.verify.constant_rates.unwrap_or_default(),
            eps_disc: raw.verify.eps_disc,
        };
        for &(_, c) in &verify.points {
            ladder.position(c)?;
        }
        Ok(Self {
            params,
            claims,
            grid,
            method: if raw.grid.fft {
                ConvolutionMethod::Fft
            } else {
                ConvolutionMethod::Direct
            },
            ladder,
            settings,
            simulation,
            verify,
            output_dir: raw.output.dir,
        })
    }

    pub fn operators(&self) -> Operators {
        Operators::new(&self.params, &self.claims, self.grid, self.method)
    }

    /// SHA-256 over every numeric field the surface depends on.
    pub fn surface_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        let p = &self.params;
        for v in [p.mu, p.lambda, p.r, p.ell, p.c_bar, p.c_floor] {
            h.update(v.to_le_bytes());
        }
        h.update(self.claims.kind_name().as_bytes());
        for v in self.claims.numeric_fields() {
            h.update(v.to_le_bytes());
        }
        h.update(self.grid.length().to_le_bytes());
        h.update((self.grid.intervals() as u64).to_le_bytes());
        h.update([matches!(self.method, ConvolutionMethod::Fft) as u8]);
        h.update((self.ladder.steps() as u64).to_le_bytes());
        h.update(self.settings.eq_factor.to_le_bytes());
        h.update(self.settings.solver.tol.to_le_bytes());
        h.update((self.settings.solver.max_iterations as u64).to_le_bytes());
        let depth = match self.settings.solver.acceleration {
            Acceleration::None => 0u64,
            Acceleration::Anderson { depth } => depth as u64,
        };
        h.update(depth.to_le_bytes());
        h.finalize().into()
    }

    /// Same configuration with `grid.n_x` and `ladder.n` doubled.
    pub fn refined(&self) -> Self {
        Self {
            grid: self.grid.refined(),
            ladder: self.ladder.refined(),
            ..self.clone()
        }
    }

    /// Override one numeric key such as `model.ell` or `grid.n_x`.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self> {
        let mut p = self.params;
        let mut grid = self.grid;
        let mut ladder = self.ladder;
        match key {
            "model.mu" => p.mu = value,
            "model.lambda" => p.lambda = value,
            "model.r" => p.r = value,
            "model.ell" => p.ell = value,
            "model.c_bar" => p.c_bar = value,
            "model.c_floor" => p.c_floor = value,
            "grid.L" => grid = Grid::new(value, grid.intervals())?,
            "grid.n_x" => grid = Grid::new(grid.length(), integer(key, value)?)?,
            "ladder.n" => ladder = RateLadder::new(p.c_bar, p.c_floor, integer(key, value)?)?,
            other => return Err(Error::validation("sweep.parameter", format!("cannot sweep `{other}`"))),
        }
        p.validate()?;
        if key.starts_with("model.") {
            ladder = RateLadder::new(p.c_bar, p.c_floor, ladder.steps())?;
        }
        Ok(Self {
            params: p,
            grid,
            ladder,
            ..self.clone()
        })
    }
}

fn integer(key: &str, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as usize)
    } else {
        Err(Error::validation(key, "must be a positive integer"))
    }
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
mu = 2.0
lambda = 1.0
r = 0.1
ell = 1.2
c_bar = 1.0
c_floor = 0.0

[claims]
kind = "exponential"
params = { mean = 0.5 }

[grid]
L = 30.0
n_x = 2000
fft = false
"#;

    #[test]
    fn parses_and_hashes_deterministically() {
        let a = RunConfig::from_toml_str(BASE).unwrap();
        let b = RunConfig::from_toml_str(BASE).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.surface_hash(), b.surface_hash());
        assert_eq!(a.ladder.steps(), 256);
        assert_eq!(a.simulation.horizon, 231.0);
        let c = a.with_value("model.ell", 1.3).unwrap();
        assert_ne!(a.surface_hash(), c.surface_hash());
    }

    #[test]
    fn rejects_bad_parameters_by_field() {
        let bad = BASE.replace("ell = 1.2", "ell = 0.9");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "ell"),
            other => panic!("expected a validation error, got {other:?}"),
        }
        let bad = BASE.replace("c_bar = 1.0", "c_bar = 2.0");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "c_bar"),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_and_schema_errors_are_parse_errors() {
        assert!(matches!(RunConfig::from_toml_str("[model"), Err(Error::Parse(_))));
        let extra = BASE.replace("fft = false", "fft = false\nbogus = 1");
        assert!(matches!(RunConfig::from_toml_str(&extra), Err(Error::Parse(_))));
        let missing = BASE.replace("mu = 2.0\n", "");
        assert!(matches!(RunConfig::from_toml_str(&missing), Err(Error::Parse(_))));
    }

    #[test]
    fn other_claim_families_parse() {
        let hyper = BASE.replace(
            "kind = \"exponential\"\nparams = { mean = 0.5 }",
            "kind = \"hyper_exponential\"\nparams = { weights = [0.5, 0.5], means = [1, 3] }",
        );
        let cfg = RunConfig::from_toml_str(&hyper).unwrap();
        assert_eq!(cfg.claims.mean(), 2.0);
        let pareto = BASE.replace(
            "kind = \"exponential\"\nparams = { mean = 0.5 }",
            "kind = \"shifted_pareto\"\nparams = { alpha = 3.0, theta = 1.0 }",
        );
        assert_eq!(RunConfig::from_toml_str(&pareto).unwrap().claims.mean(), 0.5);
        let unknown = BASE.replace("kind = \"exponential\"", "kind = \"gamma\"");
        assert!(matches!(RunConfig::from_toml_str(&unknown), Err(Error::Validation { .. })));
    }
}
