//! TOML scenario files. Unknown keys are rejected everywhere.

use crate::coeffs::{MatrixFn, ScalarFn, Vec2, VectorFn};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    make_exponential, make_log_growth, make_power_norm, make_scalar_coefficient, HamiltonianModel,
    PowerNormModel,
};
use crate::sampling::SampleBox;
use crate::solver::{GridField, Scheme, SolveOptions, ThetaPolicy, CFL_LIMIT};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    42
}

fn identity() -> MatrixFn {
    MatrixFn::Identity
}

fn unit() -> ScalarFn {
    ScalarFn::constant(1.0)
}

fn yes() -> bool {
    true
}

fn no() -> bool {
    false
}

/// Built-in Hamiltonian families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `|A p|^m - f`
    PowerNorm {
        dim: usize,
        m: f64,
        #[serde(default = "identity")]
        a: MatrixFn,
        #[serde(default = "unit")]
        f: ScalarFn,
        #[serde(default = "yes")]
        coercive: bool,
    },
    /// `|A p|^m - b.p - f`
    PowerNormDrift {
        dim: usize,
        m: f64,
        #[serde(default = "identity")]
        a: MatrixFn,
        #[serde(default = "unit")]
        f: ScalarFn,
        b: VectorFn,
        #[serde(default = "yes")]
        coercive: bool,
    },
    /// `|A p|^m - (A^T c).p - f`
    DegenerateDrift {
        dim: usize,
        m: f64,
        #[serde(default = "identity")]
        a: MatrixFn,
        #[serde(default = "unit")]
        f: ScalarFn,
        c: VectorFn,
        #[serde(default = "no")]
        coercive: bool,
    },
    /// `a(x,t) |p|^m`
    ScalarCoefficient { dim: usize, m: f64, a: ScalarFn },
    /// `exp(|p|)`
    Exponential { dim: usize },
    /// `|p| ln(1 + |p|)`
    LogGrowth { dim: usize },
}

impl ModelConfig {
    pub fn family(&self) -> &'static str {
        match self {
            ModelConfig::PowerNorm { .. } => "power-norm",
            ModelConfig::PowerNormDrift { .. } => "power-norm-drift",
            ModelConfig::DegenerateDrift { .. } => "degenerate-drift",
            ModelConfig::ScalarCoefficient { .. } => "scalar-coefficient",
            ModelConfig::Exponential { .. } => "exponential",
            ModelConfig::LogGrowth { .. } => "log-growth",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::PowerNorm { dim, .. }
            | ModelConfig::PowerNormDrift { dim, .. }
            | ModelConfig::DegenerateDrift { dim, .. }
            | ModelConfig::ScalarCoefficient { dim, .. }
            | ModelConfig::Exponential { dim }
            | ModelConfig::LogGrowth { dim } => *dim,
        }
    }
}

/// Overrides of the family's structure constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub period: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 200, period: 1.0 }
    }
}

/// Initial data `u0` on the period cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// Periodic distance to `center`, times `slope`.
    Distance {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "one")]
        slope: f64,
    },
    Constant { value: f64 },
    /// Any coefficient function evaluated at `t = 0`.
    Function { f: ScalarFn },
}

fn one() -> f64 {
    1.0
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Distance {
            center: [0.0, 0.0],
            slope: 1.0,
        }
    }
}

/// Distance from `a` to `b` on the circle of length `period`.
pub fn periodic_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

impl InitialData {
    pub fn field(&self, dim: usize, grid: &GridConfig) -> Result<GridField> {
        let l = grid.period;
        match self {
            InitialData::Distance { center, slope } => GridField::from_fn(dim, grid.n, l, |x| {
                let d2: f64 = (0..dim)
                    .map(|k| periodic_distance(x[k], center[k], l).powi(2))
                    .sum();
                slope * d2.sqrt()
            }),
            InitialData::Constant { value } => GridField::constant(dim, grid.n, l, *value),
            InitialData::Function { f } => GridField::from_fn(dim, grid.n, l, |x: &Vec2| f.eval(x, 0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_end: f64,
    pub cfl: f64,
    pub scheme: Scheme,
    pub theta: ThetaPolicy,
    pub theta_floor: f64,
    pub headroom: f64,
    pub store_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            t_end: 1.0,
            cfl: CFL_LIMIT,
            scheme: o.scheme,
            theta: o.theta,
            theta_floor: o.theta_floor,
            headroom: o.headroom,
            store_every: o.store_every,
        }
    }
}

impl TimeConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            scheme: self.scheme,
            theta: self.theta,
            cfl: self.cfl,
            theta_floor: self.theta_floor,
            headroom: self.headroom,
            store_every: self.store_every,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    /// Any of `H0`, `H1`, `H2`, `H3`.
    pub hypotheses: Vec<String>,
    pub g_lemma: bool,
    pub integrability: bool,
    pub samples: usize,
    pub sample_box: SampleBox,
    /// Level for the H0 check; defaults to `c0`.
    pub h0_level: Option<f64>,
    pub coercivity_radii: Vec<f64>,
    pub coercivity_threshold: f64,
    /// Levels for the empirical phi when the family has no closed form.
    pub empirical_levels: Vec<f64>,
    pub theorem: bool,
    pub ut_bound: bool,
    /// Re-run the u_t bound with eta halved and store it as a diagnostic.
    pub eta_diagnostic: bool,
    pub corollary_capped: bool,
    pub corollary_decay: bool,
    pub gradient: bool,
    pub gradient_t_from: f64,
    /// Solve again at `2n` to test the stability of `max |Du|`.
    pub gradient_refinement: bool,
    pub tol_constant: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            hypotheses: ["H0", "H1", "H2", "H3"].map(String::from).to_vec(),
            g_lemma: true,
            integrability: true,
            samples: 10_000,
            sample_box: SampleBox::default(),
            h0_level: None,
            coercivity_radii: (0..8).map(|k| 2f64.powi(k)).collect(),
            coercivity_threshold: 100.0,
            empirical_levels: (0..13).map(|k| 2f64.powi(k)).collect(),
            theorem: true,
            ut_bound: true,
            eta_diagnostic: false,
            corollary_capped: true,
            corollary_decay: true,
            gradient: true,
            gradient_t_from: 0.1,
            gradient_refinement: false,
            tol_constant: crate::verify::DEFAULT_TOL_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Any of `json`, `csv`.
    pub formats: Vec<String>,
    pub write_trace: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["json".into(), "csv".into()],
            write_trace: true,
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for h in &self.checks.hypotheses {
            if !["H0", "H1", "H2", "H3"].contains(&h.as_str()) {
                return Err(Error::Config(format!("unknown hypothesis `{h}` in checks.hypotheses")));
            }
        }
        for f in &self.output.formats {
            if !["json", "csv"].contains(&f.as_str()) {
                return Err(Error::Config(format!("unknown output format `{f}`")));
            }
        }
        if !(self.time.t_end > 0.0) {
            return Err(Error::Config(format!("time.t_end = {} must be positive", self.time.t_end)));
        }
        Ok(())
    }

    /// Builds the model and applies the threshold overrides.
    pub fn build_model(&self) -> Result<HamiltonianModel> {
        let mut model = match self.model.clone() {
            ModelConfig::PowerNorm { dim, m, a, f, coercive } => make_power_norm(PowerNormModel {
                m,
                dim,
                a,
                f,
                b: None,
                c: None,
                coercive,
            })?,
            ModelConfig::PowerNormDrift {
                dim,
                m,
                a,
                f,
                b,
                coercive,
            } => make_power_norm(PowerNormModel {
                m,
                dim,
                a,
                f,
                b: Some(b),
                c: None,
                coercive,
            })?,
            ModelConfig::DegenerateDrift {
                dim,
                m,
                a,
                f,
                c,
                coercive,
            } => make_power_norm(PowerNormModel {
                m,
                dim,
                a,
                f,
                b: None,
                c: Some(c),
                coercive,
            })?,
            ModelConfig::ScalarCoefficient { dim, m, a } => make_scalar_coefficient(m, dim, a)?,
            ModelConfig::Exponential { dim } => make_exponential(dim)?,
            ModelConfig::LogGrowth { dim } => make_log_growth(dim)?,
        };
        let t = self.thresholds;
        let mut c = model.constants;
        c.c0 = t.c0.unwrap_or(c.c0);
        c.c1 = t.c1.unwrap_or(c.c1);
        c.c2 = t.c2.unwrap_or(c.c2);
        c.kappa = t.kappa.unwrap_or(c.kappa);
        c.gamma = t.gamma.or(c.gamma);
        model.set_constants(c);
        if let Some(phi) = model.phi.take() {
            model.phi = Some(phi.with_c0(c.c0));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7
[model]
family = "power-norm"
dim = 1
m = 2.0
[grid]
n = 64
L = 1.0
[time]
t_end = 0.5
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ScenarioConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model.family(), "power-norm");
        assert_eq!(cfg.checks.samples, 10_000);
        let m = cfg.build_model().unwrap();
        assert_eq!(m.h(&Vec2::zeros(), 0.0, &Vec2::new(3.0, 0.0)), 8.0);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = EXAMPLE.replace("m = 2.0", "m = 2.0\nexponent = 3");
        let err = ScenarioConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("exponent"), "{err}");
        let bad = EXAMPLE.replace("t_end = 0.5", "t_end = 0.5\ndt = 0.1");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        let bad = format!("{EXAMPLE}\n[checks]\nhypotheses = [\"H5\"]\n");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_small_exponent_at_construction() {
        let cfg = ScenarioConfig::from_toml_str(&EXAMPLE.replace("m = 2.0", "m = 0.5")).unwrap();
        assert!(matches!(cfg.build_model(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn threshold_overrides() {
        let text = format!("{EXAMPLE}\n[thresholds]\nkappa = 0.1\ngamma = 3.0\n");
        let m = ScenarioConfig::from_toml_str(&text).unwrap().build_model().unwrap();
        assert_eq!(m.constants.kappa, 0.1);
        assert_eq!(m.constants.gamma, Some(3.0));
    }

    #[test]
    fn distance_data() {
        assert_eq!(periodic_distance(0.9, 0.0, 1.0), 0.09999999999999998);
        let u = InitialData::default()
            .field(2, &GridConfig { n: 16, period: 1.0 })
            .unwrap();
        assert_eq!(u.values[0], 0.0);
        let k = 8 * 16 + 8;
        assert!((u.values[k] - 0.5f64.hypot(0.5)).abs() < 1e-15);
    }

    #[test]
    fn scalar_coefficient_family() {
        let text = r#"
[model]
family = "scalar-coefficient"
dim = 1
m = 2.0
a = { kind = "sum", terms = [{ kind = "monomial", coef = 1.0, axis = 0, power = 2 }, { kind = "time", coef = 1.0 }] }
"#;
        let m = ScenarioConfig::from_toml_str(text).unwrap().build_model().unwrap();
        assert!(m.is_t_dependent());
        assert_eq!(m.constants.c1, 4.0);
    }
}
