//! Run configuration in TOML.
//!
//! ```toml
//! seed = 7
//!
//! [metric]
//! kind = "perturbation"        # euclidean, hyperbolic_polar, hyperbolic_area,
//!                              # schwarzschild, kottler, perturbation, expression
//! n = 3
//! base = "euclidean"           # perturbation only
//! decay = 1.0                  # optional decay hint τ
//! params = { a = 0.5 }
//! components = [
//!   ["a/r", "0", "0"],
//!   ["0", "a/r", "0"],
//!   ["0", "0", "a/r"],
//! ]
//!
//! [radii]                      # geometric (ratio) or arithmetic (step)
//! start = 8.0
//! ratio = 2.0
//! count = 5
//!
//! [quadrature]
//! degree = 12
//!
//! [[charge]]
//! kind = "mass_classical"
//!
//! [[charge]]
//! kind = "ah_mass"
//! kernel = "V0"
//! measure = "background"
//! ```
//!
//! Component expressions use the grammar of [`crate::expr`]: decimal
//! literals, `+ - * / ^`, the functions `sqrt exp log (ln) sin cos tan sinh
//! cosh tanh`, the chart variables (`x1..xn` and `r` in cartesian charts;
//! `r`, `theta1..`, `phi` in polar charts), the constant `pi` and any names
//! declared under `params`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{Asymptotics, BaseMetric, ComponentMatrix, MetricKind, MetricSpec};
use crate::charges::{ChargeSpec, ConformalKilling, FitOptions};
use crate::chart::{ChartKind, Dimension};
use crate::error::{Error, Result};
use crate::expr::{parse, Params, Scope};
use crate::quadrature::MAX_DEGREE;
use crate::verify::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Euclidean,
    HyperbolicPolar,
    HyperbolicArea,
    Schwarzschild,
    Kottler,
    Perturbation,
    Expression,
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s))
            .map_err(|_| Error::Config(format!("unknown metric kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub kind: MetricName,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<String>>>,
}

impl MetricConfig {
    pub fn new(kind: MetricName, n: usize) -> Self {
        Self {
            kind,
            n,
            m: None,
            center: None,
            base: None,
            chart: None,
            decay: None,
            params: BTreeMap::new(),
            components: None,
        }
    }

    fn reject(&self, key: &str, present: bool) -> Result<()> {
        if present {
            return Err(Error::Config(format!(
                "metric.{key} does not apply to metric kind {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    fn mass(&self) -> Result<f64> {
        let m = self
            .m
            .ok_or_else(|| Error::Config(format!("metric.m is required for {:?}", self.kind)))?;
        if !m.is_finite() {
            return Err(Error::Config("metric.m must be finite".into()));
        }
        Ok(m)
    }

    fn matrix(&self, chart: ChartKind) -> Result<ComponentMatrix> {
        let rows = self
            .components
            .as_ref()
            .ok_or_else(|| Error::Config("metric.components is required".into()))?;
        let names: Vec<String> = self.params.keys().cloned().collect();
        let scope = Scope {
            n: self.n,
            chart,
            params: &names,
        };
        let mut exprs = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (j, text) in row.iter().enumerate() {
                let e = parse(text, &scope)
                    .map_err(|e| Error::Config(format!("metric.components[{}][{}] `{text}`: {e}", i + 1, j + 1)))?;
                out.push(e);
            }
            exprs.push(out);
        }
        let params: Params = self.params.clone();
        ComponentMatrix::new(exprs, params, self.n).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds and validates the metric.
    pub fn build(&self) -> Result<MetricSpec> {
        let n = Dimension::new(self.n).map_err(|e| Error::Config(e.to_string()))?;
        let no_expr = |c: &Self| -> Result<()> {
            c.reject("components", c.components.is_some())?;
            c.reject("params", !c.params.is_empty())?;
            c.reject("base", c.base.is_some())?;
            c.reject("chart", c.chart.is_some())?;
            c.reject("decay", c.decay.is_some())
        };
        let kind = match self.kind {
            MetricName::Euclidean | MetricName::HyperbolicPolar | MetricName::HyperbolicArea => {
                no_expr(self)?;
                self.reject("m", self.m.is_some())?;
                self.reject("center", self.center.is_some())?;
                match self.kind {
                    MetricName::Euclidean => MetricKind::Euclidean,
                    MetricName::HyperbolicPolar => MetricKind::HyperbolicPolar,
                    _ => MetricKind::HyperbolicArea,
                }
            }
            MetricName::Schwarzschild => {
                no_expr(self)?;
                let center = self.center.clone().unwrap_or_else(|| vec![0.0; self.n]);
                if center.len() != self.n {
                    return Err(Error::Config(format!(
                        "metric.center has {} entries, expected {}",
                        center.len(),
                        self.n
                    )));
                }
                MetricKind::Schwarzschild { m: self.mass()?, center }
            }
            MetricName::Kottler => {
                no_expr(self)?;
                self.reject("center", self.center.is_some())?;
                MetricKind::Kottler { m: self.mass()? }
            }
            MetricName::Perturbation => {
                self.reject("m", self.m.is_some())?;
                self.reject("center", self.center.is_some())?;
                self.reject("chart", self.chart.is_some())?;
                let base = self
                    .base
                    .ok_or_else(|| Error::Config("metric.base is required for a perturbation".into()))?;
                MetricKind::Perturbation {
                    base,
                    components: self.matrix(base.chart())?,
                    decay: self.decay,
                }
            }
            MetricName::Expression => {
                self.reject("m", self.m.is_some())?;
                self.reject("center", self.center.is_some())?;
                self.reject("base", self.base.is_some())?;
                self.reject("decay", self.decay.is_some())?;
                let chart = self.chart.unwrap_or(ChartKind::Cartesian);
                MetricKind::Expression {
                    chart,
                    components: self.matrix(chart)?,
                }
            }
        };
        MetricSpec::new(n, kind).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Radius schedule. The radii are schedule radii: euclidean radius for flat
/// metrics and geodesic distance for hyperbolic ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiiConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Explicit list; excludes the other keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

pub const DEFAULT_RADIUS_COUNT: usize = 5;

impl RadiiConfig {
    /// Resolves the schedule. Flat default: `8·2^k`; hyperbolic default: `3 + k`.
    pub fn schedule(&self, asymptotics: Asymptotics) -> Result<Vec<f64>> {
        let radii = if let Some(v) = &self.values {
            if self.start.is_some() || self.ratio.is_some() || self.step.is_some() || self.count.is_some() {
                return Err(Error::Config("radii.values excludes start, ratio, step and count".into()));
            }
            v.clone()
        } else {
            let count = self.count.unwrap_or(DEFAULT_RADIUS_COUNT);
            let progression = match (self.ratio, self.step, asymptotics) {
                (Some(_), Some(_), _) => {
                    return Err(Error::Config("radii.ratio and radii.step are mutually exclusive".into()))
                }
                (Some(q), None, _) => Progression::Geometric(q),
                (None, Some(d), _) => Progression::Arithmetic(d),
                (None, None, Asymptotics::Flat) => Progression::Geometric(2.0),
                (None, None, Asymptotics::Hyperbolic) => Progression::Arithmetic(1.0),
            };
            let start = self.start.unwrap_or(match asymptotics {
                Asymptotics::Flat => 8.0,
                Asymptotics::Hyperbolic => 3.0,
            });
            (0..count)
                .map(|k| match progression {
                    Progression::Geometric(q) => start * q.powi(k as i32),
                    Progression::Arithmetic(d) => start + d * k as f64,
                })
                .collect()
        };
        if radii.len() < 3 {
            return Err(Error::Config(format!("radius schedule needs at least 3 radii, got {}", radii.len())));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("radii must be positive and strictly increasing: {radii:?}")));
        }
        Ok(radii)
    }
}

enum Progression {
    Geometric(f64),
    Arithmetic(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub degree: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { degree: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `report.json` and one CSV per charge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, timings: true }
    }
}

/// Settings of the `verify` subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Inner annulus radius (schedule radius); the outer one defaults to `2·r0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    pub degree: usize,
    pub radial_degree: usize,
    pub points: usize,
    /// Conformal Killing fields to test; all catalog fields by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<ConformalKilling>>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            r0: None,
            r1: None,
            degree: 30,
            radial_degree: 30,
            points: 50,
            fields: None,
        }
    }
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub metric: MetricConfig,
    #[serde(default)]
    pub radii: RadiiConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, rename = "charge", skip_serializing_if = "Vec::is_empty")]
    pub charges: Vec<ChargeSpec>,
}

impl RunConfig {
    pub fn new(metric: MetricConfig) -> Self {
        Self {
            seed: default_seed(),
            metric,
            radii: RadiiConfig::default(),
            quadrature: QuadratureConfig::default(),
            fit: FitOptions::default(),
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
            verify: VerifyConfig::default(),
            charges: Vec::new(),
        }
    }

    /// Parses TOML; syntax errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is always representable in TOML")
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<Validated> {
        let spec = self.metric.build()?;
        let radii = self.radii.schedule(spec.asymptotics())?;
        for d in [self.quadrature.degree, self.verify.degree] {
            if d == 0 || d > MAX_DEGREE {
                return Err(Error::Config(format!("quadrature degree {d} outside 1..={MAX_DEGREE}")));
            }
        }
        if self.verify.radial_degree == 0 || self.verify.radial_degree > 4 * MAX_DEGREE {
            return Err(Error::Config(format!(
                "verify.radial_degree {} outside 1..={}",
                self.verify.radial_degree,
                4 * MAX_DEGREE
            )));
        }
        if self.verify.points == 0 {
            return Err(Error::Config("verify.points must be positive".into()));
        }
        let t = &self.tolerances;
        if !(t.abs_tol > 0.0 && t.rel_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if let Some(s) = self.fit.sigma_hint {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("fit.sigma_hint must be positive".into()));
            }
        }
        for c in &self.charges {
            c.check(&spec).map_err(|e| Error::Config(format!("charge {}: {e}", c.name())))?;
        }
        if let Some(fields) = &self.verify.fields {
            for x in fields {
                x.check(spec.chart(), spec.dim())
                    .map_err(|e| Error::Config(format!("verify.fields: {e}")))?;
            }
        }
        Ok(Validated { spec, radii })
    }
}

/// A configuration that passed [`RunConfig::validate`].
#[derive(Clone, Debug)]
pub struct Validated {
    pub spec: MetricSpec,
    pub radii: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charges::{ChargeKind, KernelFunction, MeasureChoice};

    const SAMPLE: &str = r#"
seed = 3

[metric]
kind = "perturbation"
n = 3
base = "euclidean"
decay = 1.0
params = { a = 0.5 }
components = [["a/r", "0", "0"], ["0", "a/r", "0"], ["0", "0", "a/r"]]

[radii]
start = 4.0
ratio = 3.0
count = 4

[[charge]]
kind = "mass_classical"

[[charge]]
kind = "com_ricci"
alpha = 2
measure = "background"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.charges.len(), 2);
        assert_eq!(cfg.charges[1].kind, ChargeKind::ComRicci { alpha: 2 });
        assert_eq!(cfg.charges[1].measure, MeasureChoice::Background);
        let v = cfg.validate().unwrap();
        assert_eq!(v.radii, vec![4.0, 12.0, 36.0, 108.0]);
        assert_eq!(v.spec.decay_hint(), Some(1.0));
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn kernel_strings() {
        let cfg = RunConfig::from_toml(
            "[metric]\nkind = \"kottler\"\nn = 4\nm = 1.0\n[[charge]]\nkind = \"ah_mass\"\nkernel = \"V2\"\n",
        )
        .unwrap();
        assert_eq!(
            cfg.charges[0].kind,
            ChargeKind::AhMass {
                kernel: KernelFunction::AhValpha(2)
            }
        );
        assert_eq!(cfg.validate().unwrap().radii, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_are_located() {
        let err = RunConfig::from_toml("[metric]\nkind = \"euclidean\"\nn = \"three\"\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let bad_expr = SAMPLE.replace("\"a/r\", \"0\", \"0\"]", "\"a/(r\", \"0\", \"0\"]");
        let err = RunConfig::from_toml(&bad_expr).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("components[1][1]"), "{err}");
        assert!(err.to_string().contains("offset"), "{err}");
    }

    #[test]
    fn rejects_bad_settings() {
        let base = MetricConfig::new(MetricName::Euclidean, 3);
        let mut cfg = RunConfig::new(base.clone());
        cfg.radii.count = Some(2);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = RunConfig::new(base.clone());
        cfg.quadrature.degree = MAX_DEGREE + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::new(base);
        cfg.metric.m = Some(1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::new(MetricConfig::new(MetricName::Schwarzschild, 3));
        assert!(cfg.validate().is_err());
        cfg.metric.m = Some(1.0);
        cfg.charges.push(ChargeSpec::new(ChargeKind::AhRicci { index: 0 }));
        assert!(cfg.validate().is_err());
        assert!("not_a_metric".parse::<MetricName>().is_err());
        assert_eq!("kottler".parse::<MetricName>().unwrap(), MetricName::Kottler);
    }
}
