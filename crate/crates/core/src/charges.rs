//! Boundary integrands and normalized asymptotic charges.
//!
//! Two families are computed on coordinate spheres:
//!
//! * Michel charges `𝕌(V, g, b)(ν)` built from the deviation `h = g - b` and a
//!   kernel function `V` of the background. The classical ADM mass and center
//!   of mass are the euclidean cases `V = 1` and `V = x^α`.
//! * Einstein fluxes `G(X, ν)` (or `G̃(X, ν)` against hyperbolic space) paired
//!   with a conformal Killing field `X` of the background.
//!
//! Center charges are reported unnormalized (`m·c^α`), which is what the flux
//! measures; [`center_from`] divides by a mass when one is available.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Asymptotics, MetricSpec};
use crate::chart::{round_metric_diagonal, sphere_embedding, sphere_embedding_jacobian, ChartKind, ChartPoint};
use crate::error::{Error, Result};
use crate::expr::{seed, HyperDual, Scalar};
use crate::geometry::{christoffel, curvature, invert_spd, modified_einstein_from_deviation, pair, MetricJet, ScalarJet, SymTensorJet, VectorJet, ZERO1};
use crate::limits::{decay_rate, extrapolate, regression_slope, DecayModel, FitTerms, FluxSample, RadialSeries};
use crate::quadrature::{integrate_sphere, level_covector, sphere_volume, unit_normal, Measure, SphereRule};
use crate::{Arr1, Arr2};

/// Elements of the kernel of `(D Scal)^*` of a background.
///
/// Indices `α` are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelFunction {
    ConstOne,
    Coordinate(usize),
    /// `cosh r`, or `√(1+ρ²)` in the area chart.
    AhV0,
    /// `x^α sinh r`, or `x^α ρ`.
    AhValpha(usize),
}

/// Conformal Killing fields of a background.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConformalKilling {
    /// `x^i ∂_i`.
    Dilation,
    /// `r² ∂_α - 2 x^α x^i ∂_i`.
    InvertedTranslation(usize),
    /// `sinh r ∂_r`, the gradient of `V⁽⁰⁾`.
    AhX0,
    /// Gradient of `V^{(α)}`.
    AhXalpha(usize),
}

fn parse_index(s: &str, prefix: &str) -> Option<usize> {
    s.strip_prefix(prefix)?.parse().ok()
}

impl FromStr for KernelFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "one" || s == "1" {
            return Ok(KernelFunction::ConstOne);
        }
        if s == "V0" {
            return Ok(KernelFunction::AhV0);
        }
        if let Some(a) = parse_index(s, "x").filter(|a| *a > 0) {
            return Ok(KernelFunction::Coordinate(a));
        }
        if let Some(a) = parse_index(s, "V").filter(|a| *a > 0) {
            return Ok(KernelFunction::AhValpha(a));
        }
        Err(Error::Config(format!(
            "unknown kernel function `{s}` (expected one, x<α>, V0 or V<α>)"
        )))
    }
}

impl fmt::Display for KernelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFunction::ConstOne => write!(f, "one"),
            KernelFunction::Coordinate(a) => write!(f, "x{a}"),
            KernelFunction::AhV0 => write!(f, "V0"),
            KernelFunction::AhValpha(a) => write!(f, "V{a}"),
        }
    }
}

impl FromStr for ConformalKilling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "dilation" {
            return Ok(ConformalKilling::Dilation);
        }
        if s == "X0" {
            return Ok(ConformalKilling::AhX0);
        }
        if let Some(a) = parse_index(s, "inverted").filter(|a| *a > 0) {
            return Ok(ConformalKilling::InvertedTranslation(a));
        }
        if let Some(a) = parse_index(s, "X").filter(|a| *a > 0) {
            return Ok(ConformalKilling::AhXalpha(a));
        }
        Err(Error::Config(format!(
            "unknown conformal Killing field `{s}` (expected dilation, inverted<α>, X0 or X<α>)"
        )))
    }
}

impl fmt::Display for ConformalKilling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformalKilling::Dilation => write!(f, "dilation"),
            ConformalKilling::InvertedTranslation(a) => write!(f, "inverted{a}"),
            ConformalKilling::AhX0 => write!(f, "X0"),
            ConformalKilling::AhXalpha(a) => write!(f, "X{a}"),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl TryFrom<String> for $t {
            type Error = Error;
            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }
        impl From<$t> for String {
            fn from(v: $t) -> String {
                v.to_string()
            }
        }
    };
}
string_serde!(KernelFunction);
string_serde!(ConformalKilling);

fn check_index(alpha: usize, n: usize, what: &str) -> Result<()> {
    if alpha == 0 || alpha > n {
        return Err(Error::Precondition(format!(
            "{what} index {alpha} outside 1..={n}"
        )));
    }
    Ok(())
}

fn wrong_chart(what: impl fmt::Display, chart: ChartKind) -> Error {
    Error::ChartMismatch(format!("{what} is not defined in the {} chart", chart.name()))
}

impl KernelFunction {
    /// Kernel basis `V⁽⁰⁾, …, V⁽ⁿ⁾` of hyperbolic space.
    pub fn hyperbolic_basis(n: usize) -> Vec<Self> {
        std::iter::once(KernelFunction::AhV0)
            .chain((1..=n).map(KernelFunction::AhValpha))
            .collect()
    }

    /// Affine basis `1, x¹, …, xⁿ` of the euclidean kernel.
    pub fn flat_basis(n: usize) -> Vec<Self> {
        std::iter::once(KernelFunction::ConstOne)
            .chain((1..=n).map(KernelFunction::Coordinate))
            .collect()
    }

    pub fn check(&self, chart: ChartKind, n: usize) -> Result<()> {
        match self {
            KernelFunction::ConstOne => Ok(()),
            KernelFunction::Coordinate(a) if chart == ChartKind::Cartesian => check_index(*a, n, "coordinate"),
            KernelFunction::AhValpha(a) if chart.is_polar() => check_index(*a, n, "kernel"),
            KernelFunction::AhV0 if chart.is_polar() => Ok(()),
            _ => Err(wrong_chart(self, chart)),
        }
    }

    /// Value at chart coordinates `x`; call [`check`](Self::check) first.
    pub fn eval<T: Scalar>(&self, chart: ChartKind, x: &[T]) -> T {
        match (self, chart) {
            (KernelFunction::ConstOne, _) => T::one(),
            (KernelFunction::Coordinate(a), _) => x[a - 1],
            (KernelFunction::AhV0, ChartKind::PolarGeodesic) => x[0].cosh(),
            (KernelFunction::AhV0, _) => (T::one() + x[0] * x[0]).sqrt(),
            (KernelFunction::AhValpha(a), ChartKind::PolarGeodesic) => {
                sphere_embedding(&x[1..])[a - 1] * x[0].sinh()
            }
            (KernelFunction::AhValpha(a), _) => sphere_embedding(&x[1..])[a - 1] * x[0],
        }
    }

    pub fn jet(&self, p: &ChartPoint) -> Result<ScalarJet> {
        self.check(p.kind, p.dim())?;
        let v: HyperDual = self.eval(p.kind, &seed(&p.coords));
        Ok(ScalarJet::from_dual(&v, p.dim()))
    }
}

impl ConformalKilling {
    pub fn flat_fields(n: usize) -> Vec<Self> {
        std::iter::once(ConformalKilling::Dilation)
            .chain((1..=n).map(ConformalKilling::InvertedTranslation))
            .collect()
    }

    pub fn hyperbolic_fields(n: usize) -> Vec<Self> {
        std::iter::once(ConformalKilling::AhX0)
            .chain((1..=n).map(ConformalKilling::AhXalpha))
            .collect()
    }

    /// Field `X⁽ⁱ⁾` of the hyperbolic family, `i ∈ 0..=n`.
    pub fn hyperbolic(i: usize) -> Self {
        if i == 0 {
            ConformalKilling::AhX0
        } else {
            ConformalKilling::AhXalpha(i)
        }
    }

    pub fn check(&self, chart: ChartKind, n: usize) -> Result<()> {
        match self {
            ConformalKilling::Dilation if chart == ChartKind::Cartesian => Ok(()),
            ConformalKilling::InvertedTranslation(a) if chart == ChartKind::Cartesian => {
                check_index(*a, n, "translation")
            }
            ConformalKilling::AhX0 if chart.is_polar() => Ok(()),
            ConformalKilling::AhXalpha(a) if chart.is_polar() => check_index(*a, n, "field"),
            _ => Err(wrong_chart(self, chart)),
        }
    }

    /// `δ^b X = c·V` for the background: returns `(c, V)`.
    pub fn divergence(&self) -> (f64, KernelFunction) {
        match *self {
            ConformalKilling::Dilation => (-1.0, KernelFunction::ConstOne),
            ConformalKilling::InvertedTranslation(a) => (2.0, KernelFunction::Coordinate(a)),
            ConformalKilling::AhX0 => (-1.0, KernelFunction::AhV0),
            ConformalKilling::AhXalpha(a) => (-1.0, KernelFunction::AhValpha(a)),
        }
    }

    /// Components `X^i` at chart coordinates `x`; call [`check`](Self::check) first.
    pub fn eval<T: Scalar>(&self, chart: ChartKind, x: &[T]) -> Vec<T> {
        let n = x.len();
        match (self, chart) {
            (ConformalKilling::Dilation, _) => x.to_vec(),
            (ConformalKilling::InvertedTranslation(a), _) => {
                let r2 = x.iter().fold(T::zero(), |acc, &v| acc + v * v);
                let xa = x[a - 1];
                let mut out: Vec<T> = x.iter().map(|&xi| -(xa * xi).scale(2.0)).collect();
                out[a - 1] = out[a - 1] + r2;
                out
            }
            (ConformalKilling::AhX0, ChartKind::PolarGeodesic) => {
                let mut out = vec![T::zero(); n];
                out[0] = x[0].sinh();
                out
            }
            (ConformalKilling::AhX0, _) => {
                let mut out = vec![T::zero(); n];
                out[0] = x[0] * (T::one() + x[0] * x[0]).sqrt();
                out
            }
            (ConformalKilling::AhXalpha(a), _) => {
                // X = ∇^b V^{(α)}; the round metric is diagonal
                let angles = &x[1..];
                let e = sphere_embedding(angles)[a - 1];
                let jac = sphere_embedding_jacobian(angles);
                let diag = round_metric_diagonal(angles);
                let (radial, warp) = if chart == ChartKind::PolarGeodesic {
                    (e * x[0].cosh(), x[0].sinh())
                } else {
                    (e * (T::one() + x[0] * x[0]), x[0])
                };
                let mut out = vec![radial];
                for (k, d) in diag.iter().enumerate() {
                    out.push(jac[a - 1][k] / (warp * *d));
                }
                out
            }
        }
    }

    pub fn values(&self, p: &ChartPoint) -> Result<Arr1> {
        self.check(p.kind, p.dim())?;
        let mut out = ZERO1;
        for (o, v) in out.iter_mut().zip(self.eval(p.kind, &p.coords)) {
            *o = v;
        }
        Ok(out)
    }

    pub fn jet(&self, p: &ChartPoint) -> Result<VectorJet> {
        self.check(p.kind, p.dim())?;
        let comps: Vec<HyperDual> = self.eval(p.kind, &seed(&p.coords));
        Ok(VectorJet::from_duals(p.clone(), &comps))
    }
}

fn same_point(a: &ChartPoint, b: &ChartPoint) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::ChartMismatch(format!(
            "jets at different points: {:?} ({}) and {:?} ({})",
            a.coords,
            a.kind.name(),
            b.coords,
            b.kind.name()
        )))
    }
}

/// The covector `V(-δ^b h - d tr_b h) + tr_b h dV - h(∇^b V, ·)` for `h = g - b`.
pub fn michel_covector(v: &ScalarJet, h: &SymTensorJet, b: &MetricJet) -> Result<Arr1> {
    same_point(&h.at, &b.at)?;
    let n = b.n;
    let gamma = christoffel(b)?;
    let (binv, _) = b.inverse()?;
    // ∇_k h_ij
    let nabla = |k: usize, i: usize, j: usize| {
        let mut s = h.dt[k][i][j];
        for a in 0..n {
            s -= gamma[a][k][i] * h.t[a][j] + gamma[a][k][j] * h.t[i][a];
        }
        s
    };
    let mut tr = 0.0;
    for i in 0..n {
        for k in 0..n {
            tr += binv[i][k] * h.t[i][k];
        }
    }
    let mut grad_v = ZERO1;
    for l in 0..n {
        grad_v[l] = (0..n).map(|k| binv[l][k] * v.gradient[k]).sum();
    }
    let mut out = ZERO1;
    for j in 0..n {
        let mut div = 0.0;
        let mut dtr = 0.0;
        for i in 0..n {
            for k in 0..n {
                if binv[i][k] != 0.0 {
                    div += binv[i][k] * nabla(k, i, j);
                    dtr += binv[i][k] * nabla(j, i, k);
                }
            }
        }
        let h_grad: f64 = (0..n).map(|l| h.t[j][l] * grad_v[l]).sum();
        out[j] = v.value * (div - dtr) + tr * v.gradient[j] - h_grad;
    }
    Ok(out)
}

/// `𝕌(V, g, b)(ν)` from the deviation `h = g - b`.
pub fn michel_integrand_deviation(v: &ScalarJet, h: &SymTensorJet, b: &MetricJet, nu: &Arr1) -> Result<f64> {
    let u = michel_covector(v, h, b)?;
    Ok((0..b.n).map(|j| u[j] * nu[j]).sum())
}

/// `𝕌(V, g, b)(ν)`.
pub fn michel_integrand(v: &ScalarJet, g: &MetricJet, b: &MetricJet, nu: &Arr1) -> Result<f64> {
    same_point(&g.at, &b.at)?;
    let n = g.n;
    let mut h = SymTensorJet {
        n,
        at: g.at.clone(),
        t: g.g,
        dt: g.dg,
    };
    for i in 0..n {
        for j in 0..n {
            h.t[i][j] -= b.g[i][j];
            for k in 0..n {
                h.dt[k][i][j] -= b.dg[k][i][j];
            }
        }
    }
    michel_integrand_deviation(v, &h, b, nu)
}

/// ADM integrand `Σ (∂_i g_ij - ∂_j g_ii) ν^j` in cartesian coordinates.
pub fn adm_integrand(g: &MetricJet, nu: &Arr1) -> f64 {
    let n = g.n;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (g.dg[i][i][j] - g.dg[j][i][i]) * nu[j];
        }
    }
    s
}

/// Center-of-mass integrand
/// `x^α(∂_i g_ij - ∂_j g_ii)ν^j - (g-e)_{αj}ν^j + tr_e(g-e) ν^α`.
pub fn center_integrand(g: &MetricJet, alpha: usize, nu: &Arr1) -> f64 {
    let n = g.n;
    let a = alpha - 1;
    let x = &g.at.coords;
    let mut off = 0.0;
    let mut tr = 0.0;
    for j in 0..n {
        let e = if a == j { 1.0 } else { 0.0 };
        off += (g.g[a][j] - e) * nu[j];
        tr += g.g[j][j] - 1.0;
    }
    x[a] * adm_integrand(g, nu) - off + tr * nu[a]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureChoice {
    #[default]
    Default,
    Background,
    Metric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChargeKind {
    MassClassical,
    ComClassical { alpha: usize },
    MassRicci,
    ComRicci { alpha: usize },
    AhMass { kernel: KernelFunction },
    AhRicci { index: usize },
}

/// A charge to compute and the measure its sphere integrals use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargeSpec {
    #[serde(flatten)]
    pub kind: ChargeKind,
    #[serde(default)]
    pub measure: MeasureChoice,
}

impl ChargeSpec {
    pub fn new(kind: ChargeKind) -> Self {
        Self {
            kind,
            measure: MeasureChoice::Default,
        }
    }

    pub fn with_measure(kind: ChargeKind, measure: MeasureChoice) -> Self {
        Self { kind, measure }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ChargeKind::MassClassical => "mass_classical".into(),
            ChargeKind::ComClassical { alpha } => format!("com_classical_{alpha}"),
            ChargeKind::MassRicci => "mass_ricci".into(),
            ChargeKind::ComRicci { alpha } => format!("com_ricci_{alpha}"),
            ChargeKind::AhMass { kernel } => format!("ah_mass_{kernel}"),
            ChargeKind::AhRicci { index } => format!("ah_ricci_{index}"),
        }
    }

    pub fn asymptotics(&self) -> Asymptotics {
        match self.kind {
            ChargeKind::AhMass { .. } | ChargeKind::AhRicci { .. } => Asymptotics::Hyperbolic,
            _ => Asymptotics::Flat,
        }
    }

    pub fn is_center(&self) -> bool {
        matches!(self.kind, ChargeKind::ComClassical { .. } | ChargeKind::ComRicci { .. })
    }

    pub fn is_ricci(&self) -> bool {
        matches!(
            self.kind,
            ChargeKind::MassRicci | ChargeKind::ComRicci { .. } | ChargeKind::AhRicci { .. }
        )
    }

    /// Measure actually used: background for Michel charges, the metric for
    /// Einstein fluxes, unless overridden.
    pub fn resolved_measure(&self) -> MeasureChoice {
        match self.measure {
            MeasureChoice::Default if self.is_ricci() => MeasureChoice::Metric,
            MeasureChoice::Default => MeasureChoice::Background,
            m => m,
        }
    }

    /// Constant multiplying the raw flux.
    pub fn normalization(&self, n: usize) -> f64 {
        let nf = n as f64;
        let w = sphere_volume(n);
        match self.kind {
            ChargeKind::MassClassical | ChargeKind::ComClassical { .. } | ChargeKind::AhMass { .. } => {
                1.0 / (2.0 * (nf - 1.0) * w)
            }
            ChargeKind::MassRicci | ChargeKind::AhRicci { .. } => -1.0 / ((nf - 1.0) * (nf - 2.0) * w),
            ChargeKind::ComRicci { .. } => 1.0 / (2.0 * (nf - 1.0) * (nf - 2.0) * w),
        }
    }

    /// Checks that the charge applies to `spec`.
    pub fn check(&self, spec: &MetricSpec) -> Result<()> {
        if spec.asymptotics() != self.asymptotics() {
            return Err(Error::Precondition(format!(
                "{} needs an asymptotically {} metric, {} is asymptotically {}",
                self.name(),
                asymptotics_name(self.asymptotics()),
                spec.name(),
                asymptotics_name(spec.asymptotics())
            )));
        }
        let n = spec.dim();
        let chart = spec.chart();
        match self.kind {
            ChargeKind::ComClassical { alpha } | ChargeKind::ComRicci { alpha } => {
                check_index(alpha, n, "center")
            }
            ChargeKind::AhMass { kernel } => {
                if matches!(kernel, KernelFunction::ConstOne | KernelFunction::Coordinate(_)) {
                    return Err(Error::Precondition(format!(
                        "{kernel} is not in the hyperbolic kernel basis"
                    )));
                }
                kernel.check(chart, n)
            }
            ChargeKind::AhRicci { index } => {
                if index > n {
                    return Err(Error::Precondition(format!("index {index} outside 0..={n}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn asymptotics_name(a: Asymptotics) -> &'static str {
    match a {
        Asymptotics::Flat => "flat",
        Asymptotics::Hyperbolic => "hyperbolic",
    }
}

enum Integrand {
    Michel(KernelFunction),
    Einstein { field: ConformalKilling, modified: bool },
}

fn integrand_of(kind: ChargeKind) -> Integrand {
    match kind {
        ChargeKind::MassClassical => Integrand::Michel(KernelFunction::ConstOne),
        ChargeKind::ComClassical { alpha } => Integrand::Michel(KernelFunction::Coordinate(alpha)),
        ChargeKind::AhMass { kernel } => Integrand::Michel(kernel),
        ChargeKind::MassRicci => Integrand::Einstein {
            field: ConformalKilling::Dilation,
            modified: false,
        },
        ChargeKind::ComRicci { alpha } => Integrand::Einstein {
            field: ConformalKilling::InvertedTranslation(alpha),
            modified: false,
        },
        ChargeKind::AhRicci { index } => Integrand::Einstein {
            field: ConformalKilling::hyperbolic(index),
            modified: true,
        },
    }
}

fn normal_for(g: &Arr2, p: &ChartPoint) -> Result<Arr1> {
    let n = p.dim();
    let (ginv, _) = invert_spd(g, n).ok_or_else(|| Error::DegenerateMetric {
        point: p.coords.clone(),
        reason: "metric is not positive definite".into(),
    })?;
    Ok(unit_normal(&ginv, &level_covector(p), n).0)
}

/// Pointwise integrand of a charge at `p`, with the normal of the chosen measure.
pub fn charge_integrand(spec: &MetricSpec, charge: &ChargeSpec, p: &ChartPoint) -> Result<f64> {
    let background = spec.background();
    let metric_measure = charge.resolved_measure() == MeasureChoice::Metric;
    match integrand_of(charge.kind) {
        Integrand::Michel(kernel) => {
            let b = background.metric_jet(p)?;
            let h = spec.deviation_jet(p)?;
            let nu = if metric_measure {
                normal_for(&spec.metric_values(p)?, p)?
            } else {
                normal_for(&b.g, p)?
            };
            michel_integrand_deviation(&kernel.jet(p)?, &h, &b, &nu)
        }
        Integrand::Einstein { field, modified: false } => {
            let g = spec.metric_jet(p)?;
            let nu = if metric_measure {
                normal_for(&g.g, p)?
            } else {
                normal_for(&background.metric_values(p)?, p)?
            };
            Ok(pair(&curvature(&g)?.einstein, &field.values(p)?, &nu, g.n))
        }
        Integrand::Einstein { field, modified: true } => {
            // built from the deviation: the full tensors are O(e^{2s}) and cancel
            let b = background.metric_jet(p)?;
            let h = spec.deviation_jet2(p)?;
            let nu = if metric_measure {
                normal_for(&spec.metric_values(p)?, p)?
            } else {
                normal_for(&b.g, p)?
            };
            let t = modified_einstein_from_deviation(&b, &h)?;
            Ok(pair(&t, &field.values(p)?, &nu, b.n))
        }
    }
}

/// Sphere integral of a charge at schedule radius `s`.
pub fn flux_sample(spec: &MetricSpec, charge: &ChargeSpec, s: f64, rule: &SphereRule) -> Result<FluxSample> {
    charge.check(spec)?;
    let r = spec.chart_radius(s);
    let measure = match charge.resolved_measure() {
        MeasureChoice::Metric => Measure::Metric(spec),
        _ => Measure::Background,
    };
    let q = integrate_sphere(|p| charge_integrand(spec, charge, p), spec.chart(), r, rule, measure)?;
    let norm = charge.normalization(spec.dim());
    Ok(FluxSample {
        r: s,
        raw_flux: q.value,
        normalized: norm * q.value,
        quad_error: norm.abs() * q.error_estimate,
    })
}

/// Raw flux `∮ G(X, ν)` of the Einstein tensor over the sphere of schedule radius `s`.
pub fn einstein_flux(
    spec: &MetricSpec,
    field: ConformalKilling,
    s: f64,
    measure: MeasureChoice,
    rule: &SphereRule,
) -> Result<FluxSample> {
    field.check(spec.chart(), spec.dim())?;
    let charge = ChargeSpec::with_measure(ChargeKind::MassRicci, measure);
    let r = spec.chart_radius(s);
    let m = match charge.resolved_measure() {
        MeasureChoice::Metric => Measure::Metric(spec),
        _ => Measure::Background,
    };
    let metric_measure = matches!(m, Measure::Metric(_));
    let background = spec.background();
    let q = integrate_sphere(
        |p| {
            let g = spec.metric_jet(p)?;
            let curv = curvature(&g)?;
            let nu = if metric_measure {
                normal_for(&g.g, p)?
            } else {
                normal_for(&background.metric_values(p)?, p)?
            };
            Ok(pair(&curv.einstein, &field.values(p)?, &nu, g.n))
        },
        spec.chart(),
        r,
        rule,
        m,
    )?;
    Ok(FluxSample {
        r: s,
        raw_flux: q.value,
        normalized: q.value,
        quad_error: q.error_estimate,
    })
}

/// Extrapolation settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    #[serde(default)]
    pub terms: FitTerms,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hint: Option<f64>,
}

/// Samples a charge over a radius schedule and extrapolates it.
pub fn compute_charge(
    spec: &MetricSpec,
    charge: &ChargeSpec,
    radii: &[f64],
    rule: &SphereRule,
    fit: FitOptions,
) -> Result<RadialSeries> {
    charge.check(spec)?;
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidRadii("radii must be strictly increasing".into()));
    }
    let samples = radii
        .iter()
        .map(|&s| flux_sample(spec, charge, s, rule))
        .collect::<Result<Vec<_>>>()?;
    let model = match spec.asymptotics() {
        Asymptotics::Flat => DecayModel::Power,
        Asymptotics::Hyperbolic => DecayModel::Exponential,
    };
    extrapolate(&samples, model, fit.sigma_hint, fit.terms)
}

/// Center coordinate `c = (m·c) / m` and its propagated error.
pub fn center_from(unnormalized: &RadialSeries, mass: f64, mass_error: f64) -> Result<(f64, f64)> {
    if !(mass.abs() > (3.0 * mass_error).max(1e-12)) {
        return Err(Error::Precondition(format!(
            "center of mass needs a nonzero mass, got {mass:.3e} ± {mass_error:.1e}"
        )));
    }
    let c = unnormalized.limit / mass;
    let err = unnormalized.limit_error / mass.abs() + c.abs() * mass_error / mass.abs();
    Ok((c, err))
}

pub fn classical_mass(spec: &MetricSpec, radii: &[f64], rule: &SphereRule, fit: FitOptions) -> Result<RadialSeries> {
    compute_charge(spec, &ChargeSpec::new(ChargeKind::MassClassical), radii, rule, fit)
}

pub fn ricci_mass(spec: &MetricSpec, radii: &[f64], rule: &SphereRule, fit: FitOptions) -> Result<RadialSeries> {
    compute_charge(spec, &ChargeSpec::new(ChargeKind::MassRicci), radii, rule, fit)
}

/// Unnormalized classical center series (`m·c^α`).
pub fn classical_center(
    spec: &MetricSpec,
    alpha: usize,
    radii: &[f64],
    rule: &SphereRule,
    fit: FitOptions,
) -> Result<RadialSeries> {
    compute_charge(spec, &ChargeSpec::new(ChargeKind::ComClassical { alpha }), radii, rule, fit)
}

/// Unnormalized Ricci center series (`m·c^α_R`).
pub fn ricci_center(
    spec: &MetricSpec,
    alpha: usize,
    radii: &[f64],
    rule: &SphereRule,
    fit: FitOptions,
) -> Result<RadialSeries> {
    compute_charge(spec, &ChargeSpec::new(ChargeKind::ComRicci { alpha }), radii, rule, fit)
}

pub fn ah_mass(
    spec: &MetricSpec,
    kernel: KernelFunction,
    radii: &[f64],
    rule: &SphereRule,
    fit: FitOptions,
) -> Result<RadialSeries> {
    compute_charge(spec, &ChargeSpec::new(ChargeKind::AhMass { kernel }), radii, rule, fit)
}

pub fn ah_ricci_charge(
    spec: &MetricSpec,
    index: usize,
    radii: &[f64],
    rule: &SphereRule,
    fit: FitOptions,
) -> Result<RadialSeries> {
    compute_charge(spec, &ChargeSpec::new(ChargeKind::AhRicci { index }), radii, rule, fit)
}

/// Jets of the metric and the background at a point, for callers that
/// evaluate integrands by hand.
pub fn jets_at(spec: &MetricSpec, p: &ChartPoint) -> Result<(MetricJet, MetricJet)> {
    Ok((spec.metric_jet(p)?, spec.background().metric_jet(p)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticStatus {
    Pass,
    Warn,
}

/// Parity decay of the metric, compared with `τ + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtReport {
    pub radii: Vec<f64>,
    /// `sup_{S_r} max_ij |g_ij(x) - g_ij(-x)| / 2`.
    pub odd_sup: Vec<f64>,
    /// Fitted decay exponent of the odd part; absent when it vanishes.
    pub exponent: Option<f64>,
    /// Decay rate `τ` of the metric (hint if given, measured otherwise).
    pub tau: Option<f64>,
    pub required: Option<f64>,
    pub status: DiagnosticStatus,
}

/// Exponent shortfall tolerated before the parity condition is flagged.
pub const RT_MARGIN: f64 = 0.3;

/// Samples `g^odd(x) = ½(g(x) - g(-x))` on the schedule spheres and fits its decay.
pub fn rt_diagnostics(spec: &MetricSpec, radii: &[f64], rule: &SphereRule) -> Result<RtReport> {
    if spec.asymptotics() != Asymptotics::Flat {
        return Err(Error::Precondition(
            "parity conditions apply to asymptotically flat metrics".into(),
        ));
    }
    let n = spec.dim();
    let mut odd_sup = Vec::with_capacity(radii.len());
    let mut scale: f64 = 0.0;
    for &r in radii {
        let mut sup: f64 = 0.0;
        for i in 0..rule.len() {
            let p = rule.point(i, ChartKind::Cartesian, r);
            let q = ChartPoint::cartesian(p.coords.iter().map(|x| -x).collect());
            let hp: crate::catalog::Mat<f64> = spec.deviation(&p.coords)?;
            let hq: crate::catalog::Mat<f64> = spec.deviation(&q.coords)?;
            for a in 0..n {
                for b in 0..n {
                    sup = sup.max(0.5 * (hp[a][b] - hq[a][b]).abs());
                    scale = scale.max(hp[a][b].abs());
                }
            }
        }
        odd_sup.push(sup);
    }
    // odd parts at rounding level count as zero
    let exponent = if odd_sup.iter().all(|v| *v > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
        let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = odd_sup.iter().map(|v| v.ln()).collect();
        regression_slope(&xs, &ys).map(|s| -s)
    } else {
        None
    };
    let tau = match spec.decay_hint() {
        Some(t) => Some(t),
        None => decay_rate(spec, radii, rule)?.tau,
    };
    let required = tau.map(|t| t + 1.0);
    let status = match (exponent, required) {
        (Some(e), Some(req)) if e < req - RT_MARGIN => DiagnosticStatus::Warn,
        _ => DiagnosticStatus::Pass,
    };
    Ok(RtReport {
        radii: radii.to_vec(),
        odd_sup,
        exponent,
        tau,
        required,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::MetricSpec;
    use crate::geometry::{divergence_vector, dscal_adjoint, killing_operator, tensor_norm};
    use crate::quadrature::sphere_rule;

    #[test]
    fn names_round_trip() {
        for k in KernelFunction::hyperbolic_basis(4)
            .into_iter()
            .chain(KernelFunction::flat_basis(3))
        {
            assert_eq!(k.to_string().parse::<KernelFunction>().unwrap(), k);
        }
        for x in ConformalKilling::hyperbolic_fields(3)
            .into_iter()
            .chain(ConformalKilling::flat_fields(3))
        {
            assert_eq!(x.to_string().parse::<ConformalKilling>().unwrap(), x);
        }
        assert!("V".parse::<KernelFunction>().is_err());
        assert!("x0".parse::<KernelFunction>().is_err());
    }

    #[test]
    fn hyperbolic_kernel_and_pairing() {
        for (spec, kind) in [
            (MetricSpec::hyperbolic_polar(3).unwrap(), ChartKind::PolarGeodesic),
            (MetricSpec::hyperbolic_area(4).unwrap(), ChartKind::PolarArea),
        ] {
            let n = spec.dim();
            let angles: Vec<f64> = (0..n - 1).map(|k| 0.4 + 0.5 * k as f64).collect();
            let p = ChartPoint::polar(kind, 1.3, &angles);
            let jet = spec.metric_jet(&p).unwrap();
            let curv = curvature(&jet).unwrap();
            for i in 0..=n {
                let v = KernelFunction::hyperbolic_basis(n)[i];
                let x = ConformalKilling::hyperbolic(i);
                let vj = v.jet(&p).unwrap();
                let adj = dscal_adjoint(&jet, &vj, &curv).unwrap();
                assert!(tensor_norm(&jet, &adj).unwrap() < 1e-10);
                let div = divergence_vector(&jet, &x.jet(&p).unwrap()).unwrap();
                assert!((div + n as f64 * vj.value).abs() < 1e-10);
                let tf = killing_operator(&jet, &x.jet(&p).unwrap()).unwrap().trace_free;
                assert!(tensor_norm(&jet, &tf).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn michel_reduces_to_adm() {
        let spec = MetricSpec::schwarzschild(3, 1.3, Some(vec![0.2, -0.1, 0.3])).unwrap();
        let p = ChartPoint::cartesian(vec![3.0, -4.0, 2.0]);
        let (g, b) = jets_at(&spec, &p).unwrap();
        let nu = normal_for(&b.g, &p).unwrap();
        let one = KernelFunction::ConstOne.jet(&p).unwrap();
        let m = michel_integrand(&one, &g, &b, &nu).unwrap();
        assert!((m - adm_integrand(&g, &nu)).abs() < 1e-14);
        let x2 = KernelFunction::Coordinate(2).jet(&p).unwrap();
        let c = michel_integrand(&x2, &g, &b, &nu).unwrap();
        assert!((c - center_integrand(&g, 2, &nu)).abs() < 1e-13);
        let via_h = michel_integrand_deviation(&x2, &spec.deviation_jet(&p).unwrap(), &b, &nu).unwrap();
        assert!((c - via_h).abs() < 1e-13);
    }

    #[test]
    fn michel_vanishes_on_background() {
        let spec = MetricSpec::hyperbolic_area(3).unwrap();
        let p = ChartPoint::polar(ChartKind::PolarArea, 2.0, &[1.0, 0.5]);
        let (g, b) = jets_at(&spec, &p).unwrap();
        let v = KernelFunction::AhV0.jet(&p).unwrap();
        assert_eq!(michel_integrand(&v, &g, &b, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn schwarzschild_flux_closed_form() {
        // -(n-1) ∂_r ψ with ψ = (1 + m/2r)⁴: 4m/r² (1 + m/2r)³ in n = 3
        let m = 1.0;
        let spec = MetricSpec::schwarzschild(3, m, None).unwrap();
        for r in [50.0, 500.0] {
            let p = ChartPoint::cartesian(vec![r, 0.0, 0.0]);
            let v = charge_integrand(&spec, &ChargeSpec::new(ChargeKind::MassClassical), &p).unwrap();
            let exact = 4.0 * m / (r * r) * (1.0 + m / (2.0 * r)).powi(3);
            assert!((v - exact).abs() < 1e-14 * exact, "r={r}: {v} vs {exact}");
        }
    }

    #[test]
    fn hyperbolic_einstein_flux_closed_form() {
        let spec = MetricSpec::hyperbolic_polar(3).unwrap();
        let rule = sphere_rule(3, 8).unwrap();
        let s = einstein_flux(&spec, ConformalKilling::AhX0, 1.5, MeasureChoice::Metric, &rule).unwrap();
        let expected = 1.0 * 4.0 * std::f64::consts::PI * 1.5f64.sinh().powi(3);
        assert!((s.raw_flux - expected).abs() < 1e-11 * expected);
    }

    #[test]
    fn charge_preconditions() {
        let rule = sphere_rule(3, 4).unwrap();
        let k = MetricSpec::kottler(3, 1.0).unwrap();
        assert!(classical_mass(&k, &[3.0, 4.0, 5.0], &rule, FitOptions::default()).is_err());
        let e = MetricSpec::euclidean(3).unwrap();
        assert!(ah_mass(&e, KernelFunction::AhV0, &[3.0, 4.0, 5.0], &rule, FitOptions::default()).is_err());
        let c = ChargeSpec::new(ChargeKind::ComClassical { alpha: 4 });
        assert!(c.check(&e).is_err());
    }

    #[test]
    fn parity_diagnostics() {
        let rule = sphere_rule(3, 6).unwrap();
        let radii = [8.0, 16.0, 32.0, 64.0, 128.0];
        let centered = rt_diagnostics(&MetricSpec::schwarzschild(3, 1.0, None).unwrap(), &radii, &rule).unwrap();
        assert_eq!(centered.exponent, None);
        assert_eq!(centered.status, DiagnosticStatus::Pass);
        let shifted = MetricSpec::schwarzschild(3, 1.0, Some(vec![1.0, 0.5, 0.0])).unwrap();
        let rt = rt_diagnostics(&shifted, &radii, &rule).unwrap();
        assert!((rt.exponent.unwrap() - 2.0).abs() < 0.1, "{:?}", rt.exponent);
        assert_eq!(rt.status, DiagnosticStatus::Pass);
        assert!(rt_diagnostics(&MetricSpec::kottler(3, 1.0).unwrap(), &radii, &rule).is_err());
    }

    #[test]
    fn euclidean_center_needs_mass() {
        let e = MetricSpec::euclidean(3).unwrap();
        let rule = sphere_rule(3, 4).unwrap();
        let radii = [8.0, 16.0, 32.0];
        let m = classical_mass(&e, &radii, &rule, FitOptions::default()).unwrap();
        assert_eq!(m.limit, 0.0);
        let mc = classical_center(&e, 1, &radii, &rule, FitOptions::default()).unwrap();
        assert!(center_from(&mc, m.limit, m.limit_error).is_err());
    }
}
