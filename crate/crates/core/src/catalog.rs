//! Reference geometries and user-defined metrics, with exact 2-jets.
//!
//! Every metric is written once as a generic closed form over [`Scalar`], so
//! the same code gives values (`f64`), 2-jets (`HyperDual`) and, for the
//! kernel checks, jets of first-derivative quantities (nested duals).
//!
//! Besides `g` itself each spec can produce the deviation `g - b` from its
//! background directly. For the catalog metrics this is done analytically,
//! which keeps the charge integrands accurate at radii where `g - b` is far
//! below the rounding level of `g`.

use serde::{Deserialize, Serialize};

use crate::chart::{round_metric_diagonal, ChartKind, ChartPoint, Dimension};
use crate::error::{Error, Result};
use crate::expr::{eval, seed, Expr, HyperDual, Params, Scalar, Vars};
use crate::geometry::{MetricJet, SymTensorJet, ZERO2, ZERO3};
use crate::MAX_DIM;

pub type Mat<T> = [[T; MAX_DIM]; MAX_DIM];

/// Background model a metric is asymptotic to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asymptotics {
    Flat,
    Hyperbolic,
}

/// A base geometry for perturbations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMetric {
    Euclidean,
    HyperbolicPolar,
    HyperbolicArea,
}

impl BaseMetric {
    pub fn chart(self) -> ChartKind {
        match self {
            BaseMetric::Euclidean => ChartKind::Cartesian,
            BaseMetric::HyperbolicPolar => ChartKind::PolarGeodesic,
            BaseMetric::HyperbolicArea => ChartKind::PolarArea,
        }
    }

    pub fn from_chart(chart: ChartKind) -> Self {
        match chart {
            ChartKind::Cartesian => BaseMetric::Euclidean,
            ChartKind::PolarGeodesic => BaseMetric::HyperbolicPolar,
            ChartKind::PolarArea => BaseMetric::HyperbolicArea,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseMetric::Euclidean => "euclidean",
            BaseMetric::HyperbolicPolar => "hyperbolic_polar",
            BaseMetric::HyperbolicArea => "hyperbolic_area",
        }
    }
}

/// A symmetric matrix of parsed component expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentMatrix {
    pub exprs: Vec<Vec<Expr>>,
    pub params: Params,
}

impl ComponentMatrix {
    pub fn new(exprs: Vec<Vec<Expr>>, params: Params, n: usize) -> Result<Self> {
        if exprs.len() != n || exprs.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSpec(format!(
                "component matrix must be {n}×{n}"
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if exprs[i][j] != exprs[j][i] {
                    return Err(Error::InvalidSpec(format!(
                        "components ({},{}) and ({},{}) differ; the matrix must be symmetric",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let mut used = Vec::new();
        for e in exprs.iter().flatten() {
            e.params(&mut used);
        }
        if let Some(p) = used.iter().find(|p| !params.contains_key(*p)) {
            return Err(Error::InvalidSpec(format!("parameter `{p}` has no value")));
        }
        Ok(Self { exprs, params })
    }

    fn eval<T: Scalar>(&self, chart: ChartKind, x: &[T]) -> Result<Mat<T>> {
        let n = x.len();
        let vars = Vars::new(chart, x.to_vec())?;
        let mut out = [[T::zero(); MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in i..n {
                let e = &self.exprs[i][j];
                let v = if e.is_zero_literal() {
                    T::zero()
                } else {
                    eval(e, &vars, &self.params)?
                };
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricKind {
    Euclidean,
    /// `b = dr² + sinh²r g_S`.
    HyperbolicPolar,
    /// `b = (1+ρ²)⁻¹ dρ² + ρ² g_S`.
    HyperbolicArea,
    /// `(1 + m/(2|x-c|^{n-2}))^{4/(n-2)} e`.
    Schwarzschild { m: f64, center: Vec<f64> },
    /// `(1 + ρ² - 2m/ρ^{n-2})⁻¹ dρ² + ρ² g_S` in the area-radius chart.
    Kottler { m: f64 },
    /// `base + H` with `H` given componentwise.
    Perturbation {
        base: BaseMetric,
        components: ComponentMatrix,
        decay: Option<f64>,
    },
    /// Full component matrix in the given chart; the chart fixes the background.
    Expression {
        chart: ChartKind,
        components: ComponentMatrix,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    pub n: Dimension,
    pub kind: MetricKind,
}

impl MetricSpec {
    pub fn new(n: Dimension, kind: MetricKind) -> Result<Self> {
        let spec = Self { n, kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(Dimension::new(n)?, MetricKind::Euclidean)
    }

    pub fn hyperbolic_polar(n: usize) -> Result<Self> {
        Self::new(Dimension::new(n)?, MetricKind::HyperbolicPolar)
    }

    pub fn hyperbolic_area(n: usize) -> Result<Self> {
        Self::new(Dimension::new(n)?, MetricKind::HyperbolicArea)
    }

    pub fn schwarzschild(n: usize, m: f64, center: Option<Vec<f64>>) -> Result<Self> {
        let center = center.unwrap_or_else(|| vec![0.0; n]);
        Self::new(Dimension::new(n)?, MetricKind::Schwarzschild { m, center })
    }

    pub fn kottler(n: usize, m: f64) -> Result<Self> {
        Self::new(Dimension::new(n)?, MetricKind::Kottler { m })
    }

    pub fn dim(&self) -> usize {
        self.n.get()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        self.n.check_chart(self.chart())?;
        match &self.kind {
            MetricKind::Schwarzschild { m, center } => {
                if !m.is_finite() {
                    return Err(Error::InvalidSpec("schwarzschild mass must be finite".into()));
                }
                if center.len() != n || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "schwarzschild center must have {n} finite coordinates"
                    )));
                }
            }
            MetricKind::Kottler { m } if !m.is_finite() => {
                return Err(Error::InvalidSpec("kottler mass must be finite".into()));
            }
            MetricKind::Perturbation { components, decay, .. } => {
                if components.exprs.len() != n {
                    return Err(Error::InvalidSpec(format!("component matrix must be {n}×{n}")));
                }
                if matches!(decay, Some(t) if !(*t > 0.0)) {
                    return Err(Error::InvalidSpec("decay hint must be positive".into()));
                }
            }
            MetricKind::Expression { components, .. } if components.exprs.len() != n => {
                return Err(Error::InvalidSpec(format!("component matrix must be {n}×{n}")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MetricKind::Euclidean => "euclidean",
            MetricKind::HyperbolicPolar => "hyperbolic_polar",
            MetricKind::HyperbolicArea => "hyperbolic_area",
            MetricKind::Schwarzschild { .. } => "schwarzschild",
            MetricKind::Kottler { .. } => "kottler",
            MetricKind::Perturbation { .. } => "perturbation",
            MetricKind::Expression { .. } => "expression",
        }
    }

    /// Chart the metric is presented in.
    pub fn chart(&self) -> ChartKind {
        match &self.kind {
            MetricKind::Euclidean | MetricKind::Schwarzschild { .. } => ChartKind::Cartesian,
            MetricKind::HyperbolicPolar => ChartKind::PolarGeodesic,
            MetricKind::HyperbolicArea | MetricKind::Kottler { .. } => ChartKind::PolarArea,
            MetricKind::Perturbation { base, .. } => base.chart(),
            MetricKind::Expression { chart, .. } => *chart,
        }
    }

    pub fn asymptotics(&self) -> Asymptotics {
        match self.chart() {
            ChartKind::Cartesian => Asymptotics::Flat,
            _ => Asymptotics::Hyperbolic,
        }
    }

    /// Chart radius of the sphere at schedule radius `s`.
    ///
    /// Schedules are in coordinate radius for flat-type metrics and in
    /// geodesic radius of the background for hyperbolic ones.
    pub fn chart_radius(&self, s: f64) -> f64 {
        match self.chart() {
            ChartKind::PolarArea => s.sinh(),
            _ => s,
        }
    }

    /// True for the two model metrics themselves.
    pub fn is_background(&self) -> bool {
        matches!(
            self.kind,
            MetricKind::Euclidean | MetricKind::HyperbolicPolar | MetricKind::HyperbolicArea
        )
    }

    /// Declared decay rate, when the spec carries one.
    pub fn decay_hint(&self) -> Option<f64> {
        match &self.kind {
            MetricKind::Perturbation { decay, .. } => *decay,
            _ => None,
        }
    }

    /// Einstein constant `λ` with `Ric = λ(n-1) g`, for metrics known to be Einstein.
    pub fn einstein_constant(&self) -> Option<f64> {
        match self.kind {
            MetricKind::Euclidean => Some(0.0),
            MetricKind::HyperbolicPolar | MetricKind::HyperbolicArea => Some(-1.0),
            _ => None,
        }
    }

    /// Radius inside which the chart is excised (points must lie strictly outside).
    pub fn excised_radius(&self) -> f64 {
        match &self.kind {
            MetricKind::Schwarzschild { m, center } => {
                let n = self.dim() as f64;
                let c: f64 = center.iter().map(|v| v * v).sum::<f64>().sqrt();
                (m.abs() / 2.0).powf(1.0 / (n - 2.0)) + c
            }
            MetricKind::Kottler { m } if *m > 0.0 => {
                // horizon: ρ^{n-2}(1+ρ²) = 2m, increasing in ρ
                let k = self.dim() as i32 - 2;
                let f = |rho: f64| rho.powi(k) * (1.0 + rho * rho) - 2.0 * m;
                let (mut lo, mut hi) = (0.0, 1.0);
                while f(hi) < 0.0 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
            _ => 0.0,
        }
    }

    /// Background metric in the same chart.
    pub fn background(&self) -> MetricSpec {
        let kind = match BaseMetric::from_chart(self.chart()) {
            BaseMetric::Euclidean => MetricKind::Euclidean,
            BaseMetric::HyperbolicPolar => MetricKind::HyperbolicPolar,
            BaseMetric::HyperbolicArea => MetricKind::HyperbolicArea,
        };
        MetricSpec { n: self.n, kind }
    }

    fn check_point(&self, p: &ChartPoint) -> Result<()> {
        if p.kind != self.chart() {
            return Err(Error::ChartMismatch(format!(
                "{} metric lives in the {} chart, got a {} point",
                self.name(),
                self.chart().name(),
                p.kind.name()
            )));
        }
        if p.dim() != self.dim() {
            return Err(Error::ChartMismatch(format!(
                "point has {} coordinates, metric dimension is {}",
                p.dim(),
                self.dim()
            )));
        }
        p.validate()?;
        if let MetricKind::Schwarzschild { m, center } = &self.kind {
            let n = self.dim() as f64;
            let d: f64 = p
                .coords
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt();
            if d <= (m.abs() / 2.0).powf(1.0 / (n - 2.0)) || d == 0.0 {
                return Err(p.domain("inside the excised region of the schwarzschild chart"));
            }
        }
        if let MetricKind::Kottler { m } = self.kind {
            let rho = p.coords[0];
            let f = 1.0 + rho * rho - 2.0 * m / rho.powi(self.dim() as i32 - 2);
            if f <= 0.0 {
                return Err(p.domain("kottler metric function is not positive"));
            }
        }
        Ok(())
    }

    /// Metric components at `x` (chart coordinates).
    pub fn components<T: Scalar>(&self, x: &[T]) -> Result<Mat<T>> {
        let n = self.dim();
        match &self.kind {
            MetricKind::Euclidean => Ok(identity(n)),
            MetricKind::HyperbolicPolar | MetricKind::HyperbolicArea | MetricKind::Kottler { .. } => {
                let radial = match &self.kind {
                    MetricKind::HyperbolicPolar => T::one(),
                    MetricKind::HyperbolicArea => (T::one() + x[0] * x[0]).recip(),
                    MetricKind::Kottler { m } => kottler_f(x[0], *m, n).recip(),
                    _ => unreachable!(),
                };
                let warp = match &self.kind {
                    MetricKind::HyperbolicPolar => x[0].sinh(),
                    _ => x[0],
                };
                Ok(warped(radial, warp, &x[1..]))
            }
            MetricKind::Schwarzschild { .. } => {
                let psi_minus_one = self.deviation::<T>(x)?[0][0];
                let mut g = identity(n);
                for (i, row) in g.iter_mut().enumerate().take(n) {
                    row[i] = T::one() + psi_minus_one;
                }
                Ok(g)
            }
            MetricKind::Perturbation { base, components, .. } => {
                let b = base_spec(self.n, *base).components(x)?;
                let h = components.eval(base.chart(), x)?;
                Ok(add(&b, &h, n))
            }
            MetricKind::Expression { chart, components } => components.eval(*chart, x),
        }
    }

    /// `g - b` at `x`, evaluated without cancellation where a closed form exists.
    pub fn deviation<T: Scalar>(&self, x: &[T]) -> Result<Mat<T>> {
        let n = self.dim();
        match &self.kind {
            MetricKind::Euclidean | MetricKind::HyperbolicPolar | MetricKind::HyperbolicArea => {
                Ok([[T::zero(); MAX_DIM]; MAX_DIM])
            }
            MetricKind::Schwarzschild { m, center } => {
                let nf = n as f64;
                let d2 = x
                    .iter()
                    .zip(center)
                    .fold(T::zero(), |acc, (&xi, &c)| {
                        let t = xi - T::cst(c);
                        acc + t * t
                    });
                // a = m / (2 d^{n-2})
                let a = d2.powf(-(nf - 2.0) / 2.0).scale(m / 2.0);
                let psi_minus_one = (a.ln_1p().scale(4.0 / (nf - 2.0))).exp_m1();
                let mut h = [[T::zero(); MAX_DIM]; MAX_DIM];
                for (i, row) in h.iter_mut().enumerate().take(n) {
                    row[i] = psi_minus_one;
                }
                Ok(h)
            }
            MetricKind::Kottler { m } => {
                let rho = x[0];
                let one_plus = T::one() + rho * rho;
                let mass_term = rho.powi(-(n as i32 - 2)).scale(2.0 * m);
                let mut h = [[T::zero(); MAX_DIM]; MAX_DIM];
                h[0][0] = mass_term / (kottler_f(rho, *m, n) * one_plus);
                Ok(h)
            }
            MetricKind::Perturbation { base, components, .. } => components.eval(base.chart(), x),
            MetricKind::Expression { .. } => {
                let g = self.components(x)?;
                let b = self.background().components(x)?;
                Ok(sub(&g, &b, n))
            }
        }
    }

    /// Exact 2-jet of the metric at `p`.
    pub fn metric_jet(&self, p: &ChartPoint) -> Result<MetricJet> {
        self.check_point(p)?;
        let x = seed(&p.coords);
        let comps: Mat<HyperDual> = self.components(&x)?;
        let jet = MetricJet::from_duals(p.clone(), &comps);
        if matches!(self.kind, MetricKind::Perturbation { .. } | MetricKind::Expression { .. }) {
            jet.validate()?;
        } else {
            jet.inverse()?;
        }
        Ok(jet)
    }

    /// Metric components at `p` without derivatives.
    pub fn metric_values(&self, p: &ChartPoint) -> Result<Mat<f64>> {
        self.check_point(p)?;
        self.components(&p.coords)
    }

    /// `g - b` and its first derivatives at `p`.
    pub fn deviation_jet(&self, p: &ChartPoint) -> Result<SymTensorJet> {
        self.check_point(p)?;
        let n = self.dim();
        let x = seed(&p.coords);
        let h: Mat<HyperDual> = self.deviation(&x)?;
        let mut out = SymTensorJet {
            n,
            at: p.clone(),
            t: ZERO2,
            dt: ZERO3,
        };
        for i in 0..n {
            for j in 0..n {
                out.t[i][j] = h[i][j].value;
                for k in 0..n {
                    out.dt[k][i][j] = h[i][j].grad[k];
                }
            }
        }
        Ok(out)
    }

    /// 2-jet of `h = g - b`, stored in a [`MetricJet`] (which `h` is not: it
    /// need not be positive definite).
    pub fn deviation_jet2(&self, p: &ChartPoint) -> Result<MetricJet> {
        self.check_point(p)?;
        let h: Mat<HyperDual> = self.deviation(&seed(&p.coords))?;
        Ok(MetricJet::from_duals(p.clone(), &h))
    }
}

/// Background of a metric spec (euclidean for flat-type, the matching hyperbolic chart otherwise).
pub fn background_of(spec: &MetricSpec) -> MetricSpec {
    spec.background()
}

fn base_spec(n: Dimension, base: BaseMetric) -> MetricSpec {
    let kind = match base {
        BaseMetric::Euclidean => MetricKind::Euclidean,
        BaseMetric::HyperbolicPolar => MetricKind::HyperbolicPolar,
        BaseMetric::HyperbolicArea => MetricKind::HyperbolicArea,
    };
    MetricSpec { n, kind }
}

fn kottler_f<T: Scalar>(rho: T, m: f64, n: usize) -> T {
    T::one() + rho * rho - rho.powi(-(n as i32 - 2)).scale(2.0 * m)
}

fn identity<T: Scalar>(n: usize) -> Mat<T> {
    let mut g = [[T::zero(); MAX_DIM]; MAX_DIM];
    for (i, row) in g.iter_mut().enumerate().take(n) {
        row[i] = T::one();
    }
    g
}

/// `radial dr² + warp² g_S`.
fn warped<T: Scalar>(radial: T, warp: T, angles: &[T]) -> Mat<T> {
    let mut g = [[T::zero(); MAX_DIM]; MAX_DIM];
    g[0][0] = radial;
    let w2 = warp * warp;
    for (a, d) in round_metric_diagonal(angles).into_iter().enumerate() {
        g[a + 1][a + 1] = w2 * d;
    }
    g
}

fn add<T: Scalar>(a: &Mat<T>, b: &Mat<T>, n: usize) -> Mat<T> {
    let mut out = *a;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

fn sub<T: Scalar>(a: &Mat<T>, b: &Mat<T>, n: usize) -> Mat<T> {
    let mut out = *a;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j] - b[i][j];
        }
    }
    out
}

/// Coordinate change between the two polar presentations of hyperbolic space
/// (`ρ = sinh r`), or the identity on a single chart.
#[derive(Clone, Debug)]
pub struct ChartMap {
    pub source: ChartPoint,
    pub image: ChartPoint,
    /// Source coordinates as 2-jets in the image coordinates.
    old_of_new: Vec<HyperDual>,
    /// `∂(old^i)/∂(new^a)` as 2-jets, indexed `[i][a]`.
    jacobian: Vec<Vec<HyperDual>>,
}

/// Maps `p` into the chart `to` and returns the data needed to move jets along.
pub fn chart_transfer(p: &ChartPoint, to: ChartKind) -> Result<ChartMap> {
    p.validate()?;
    let n = p.dim();
    let mut new_coords = p.coords.clone();
    match (p.kind, to) {
        (a, b) if a == b => {}
        (ChartKind::PolarGeodesic, ChartKind::PolarArea) => new_coords[0] = p.coords[0].sinh(),
        (ChartKind::PolarArea, ChartKind::PolarGeodesic) => new_coords[0] = p.coords[0].asinh(),
        (a, b) => {
            return Err(Error::ChartMismatch(format!(
                "no transfer from {} to {}",
                a.name(),
                b.name()
            )))
        }
    }
    let image = ChartPoint::new(to, new_coords)?;
    let y = seed(&image.coords);
    let mut old_of_new = y.clone();
    let mut jacobian: Vec<Vec<HyperDual>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|a| HyperDual::constant(n, if i == a { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    match (p.kind, to) {
        (ChartKind::PolarGeodesic, ChartKind::PolarArea) => {
            // r = asinh ρ, dr/dρ = (1 + ρ²)^{-1/2}
            old_of_new[0] = y[0].asinh();
            jacobian[0][0] = (HyperDual::constant(n, 1.0) + y[0] * y[0]).powf(-0.5);
        }
        (ChartKind::PolarArea, ChartKind::PolarGeodesic) => {
            // ρ = sinh r, dρ/dr = cosh r
            old_of_new[0] = y[0].sinh();
            jacobian[0][0] = y[0].cosh();
        }
        _ => {}
    }
    Ok(ChartMap {
        source: p.clone(),
        image,
        old_of_new,
        jacobian,
    })
}

impl ChartMap {
    /// Pulls a metric jet at the source point back to the image chart.
    pub fn transfer_jet(&self, jet: &MetricJet) -> Result<MetricJet> {
        if !jet.at.same_as(&self.source) {
            return Err(Error::ChartMismatch("jet is not at the source point of the map".into()));
        }
        let n = jet.n;
        // δx = x(y) - x0 as 2-jets with zero value
        let delta: Vec<HyperDual> = self
            .old_of_new
            .iter()
            .zip(&self.source.coords)
            .map(|(x, &x0)| {
                let mut d = *x;
                d.value = x.value - x0;
                d
            })
            .collect();
        // Second-order Taylor expansion of g_ij(x(y)); exact to second order at y0.
        let mut g_comp = [[HyperDual::constant(n, 0.0); MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                let mut acc = HyperDual::constant(n, jet.g[i][j]);
                for k in 0..n {
                    acc = acc + delta[k].scale(jet.dg[k][i][j]);
                    for l in 0..n {
                        acc = acc + (delta[k] * delta[l]).scale(0.5 * jet.ddg[k][l][i][j]);
                    }
                }
                g_comp[i][j] = acc;
            }
        }
        let mut out = [[HyperDual::constant(n, 0.0); MAX_DIM]; MAX_DIM];
        for a in 0..n {
            for b in 0..n {
                let mut acc = HyperDual::constant(n, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        acc = acc + g_comp[i][j] * self.jacobian[i][a] * self.jacobian[j][b];
                    }
                }
                out[a][b] = acc;
            }
        }
        Ok(MetricJet::from_duals(self.image.clone(), &out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curvature;

    #[test]
    fn euclidean_jet_is_identity() {
        let spec = MetricSpec::euclidean(4).unwrap();
        let jet = spec
            .metric_jet(&ChartPoint::cartesian(vec![1.0, -2.0, 0.5, 3.0]))
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(jet.g[i][j], if i == j { 1.0 } else { 0.0 });
                assert!(jet.dg.iter().flatten().flatten().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn schwarzschild_value_at_ten() {
        let spec = MetricSpec::schwarzschild(3, 1.0, None).unwrap();
        let jet = spec
            .metric_jet(&ChartPoint::cartesian(vec![10.0, 0.0, 0.0]))
            .unwrap();
        assert!((jet.g[0][0] - 1.05f64.powi(4)).abs() < 1e-14);
        assert!(jet.g[0][1].abs() < 1e-16);
    }

    #[test]
    fn schwarzschild_excision() {
        let spec = MetricSpec::schwarzschild(3, 1.0, Some(vec![1.0, 0.0, 0.0])).unwrap();
        assert!(spec
            .metric_jet(&ChartPoint::cartesian(vec![1.2, 0.0, 0.0]))
            .is_err());
        assert!(spec
            .metric_jet(&ChartPoint::cartesian(vec![3.0, 0.0, 0.0]))
            .is_ok());
    }

    #[test]
    fn kottler_massless_is_hyperbolic_area() {
        let k = MetricSpec::kottler(3, 0.0).unwrap();
        let b = MetricSpec::hyperbolic_area(3).unwrap();
        let p = ChartPoint::polar(ChartKind::PolarArea, 2.3, &[0.7, 1.9]);
        let jk = k.metric_jet(&p).unwrap();
        let jb = b.metric_jet(&p).unwrap();
        assert_eq!(jk.g, jb.g);
        assert_eq!(jk.dg, jb.dg);
        assert_eq!(jk.ddg, jb.ddg);
    }

    #[test]
    fn kottler_rejects_nonpositive_metric_function() {
        let k = MetricSpec::kottler(3, 1.0).unwrap();
        let p = ChartPoint::polar(ChartKind::PolarArea, 0.5, &[0.7, 1.9]);
        assert!(matches!(k.metric_jet(&p), Err(Error::Domain { .. })));
    }

    #[test]
    fn modified_einstein_from_deviation_matches_direct() {
        use crate::geometry::{curvature, modified_einstein_from_deviation};
        let names = vec![];
        let scope = crate::expr::Scope {
            n: 3,
            chart: ChartKind::PolarGeodesic,
            params: &names,
        };
        let e = |t: &str| crate::expr::parse(t, &scope).unwrap();
        let comps = vec![
            vec![e("exp(-r)*(1 + 0.3*cos(theta1))"), e("0.2*exp(-r)"), e("0")],
            vec![e("0.2*exp(-r)"), e("exp(r)*sin(theta1)"), e("0.1*exp(r)")],
            vec![e("0"), e("0.1*exp(r)"), e("0.5*exp(r)")],
        ];
        let perturbed = MetricSpec::new(
            Dimension::new(3).unwrap(),
            MetricKind::Perturbation {
                base: BaseMetric::HyperbolicPolar,
                components: ComponentMatrix::new(comps, Params::new(), 3).unwrap(),
                decay: None,
            },
        )
        .unwrap();
        let cases = [
            (MetricSpec::kottler(3, 0.7).unwrap(), ChartPoint::polar(ChartKind::PolarArea, 2.5, &[0.9, 1.3])),
            (MetricSpec::kottler(4, 0.7).unwrap(), ChartPoint::polar(ChartKind::PolarArea, 2.5, &[0.9, 1.3, 2.1])),
            (perturbed, ChartPoint::polar(ChartKind::PolarGeodesic, 1.7, &[0.9, 1.3])),
        ];
        for (k, p) in cases {
            let n = k.dim();
            let direct = curvature(&k.metric_jet(&p).unwrap()).unwrap().modified_einstein;
            let b = k.background().metric_jet(&p).unwrap();
            let e = modified_einstein_from_deviation(&b, &k.deviation_jet2(&p).unwrap()).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (e[i][j] - direct[i][j]).abs() < 1e-9 * (1.0 + direct[i][j].abs()),
                        "{i}{j}: {} {}",
                        e[i][j],
                        direct[i][j]
                    );
                }
            }
            let h0 = k.background();
            let e0 = modified_einstein_from_deviation(&b, &h0.deviation_jet2(&p).unwrap()).unwrap();
            assert!(e0.iter().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn backgrounds() {
        let s = MetricSpec::schwarzschild(3, 1.0, None).unwrap();
        assert_eq!(background_of(&s).kind, MetricKind::Euclidean);
        let k = MetricSpec::kottler(4, 1.0).unwrap();
        assert_eq!(background_of(&k).kind, MetricKind::HyperbolicArea);
        let names = vec![];
        let zero = crate::expr::parse(
            "0",
            &crate::expr::Scope {
                n: 3,
                chart: ChartKind::PolarGeodesic,
                params: &names,
            },
        )
        .unwrap();
        let comps = ComponentMatrix::new(vec![vec![zero; 3]; 3], Params::new(), 3).unwrap();
        let p = MetricSpec::new(
            Dimension::new(3).unwrap(),
            MetricKind::Perturbation {
                base: BaseMetric::HyperbolicPolar,
                components: comps,
                decay: Some(3.0),
            },
        )
        .unwrap();
        assert_eq!(background_of(&p).kind, MetricKind::HyperbolicPolar);
    }

    #[test]
    fn deviation_matches_difference() {
        for spec in [
            MetricSpec::schwarzschild(4, 2.0, Some(vec![0.3, 0.0, -0.2, 0.1])).unwrap(),
            MetricSpec::kottler(3, 1.5).unwrap(),
        ] {
            let p = match spec.chart() {
                ChartKind::Cartesian => ChartPoint::cartesian(vec![3.0, 1.0, -2.0, 0.5]),
                k => ChartPoint::polar(k, 2.5, &[1.0, 2.0]),
            };
            let g = spec.metric_values(&p).unwrap();
            let b = spec.background().metric_values(&p).unwrap();
            let h: Mat<f64> = spec.deviation(&p.coords).unwrap();
            for i in 0..spec.dim() {
                for j in 0..spec.dim() {
                    assert!((g[i][j] - b[i][j] - h[i][j]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn geodesic_to_area_transfer() {
        let p = ChartPoint::polar(ChartKind::PolarGeodesic, 1f64.asinh(), &[0.6, 2.0]);
        let map = chart_transfer(&p, ChartKind::PolarArea).unwrap();
        assert!((map.image.coords[0] - 1.0).abs() < 1e-15);
        for r in [0.4, 1.0, 2.5] {
            let p = ChartPoint::polar(ChartKind::PolarGeodesic, r, &[0.6, 2.0]);
            let map = chart_transfer(&p, ChartKind::PolarArea).unwrap();
            let moved = map
                .transfer_jet(&MetricSpec::hyperbolic_polar(3).unwrap().metric_jet(&p).unwrap())
                .unwrap();
            let direct = MetricSpec::hyperbolic_area(3)
                .unwrap()
                .metric_jet(&map.image)
                .unwrap();
            let scale = 1.0 + r.sinh().powi(2);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((moved.g[i][j] - direct.g[i][j]).abs() < 1e-12 * scale);
                    for k in 0..3 {
                        assert!((moved.dg[k][i][j] - direct.dg[k][i][j]).abs() < 1e-12 * scale);
                        for l in 0..3 {
                            assert!(
                                (moved.ddg[k][l][i][j] - direct.ddg[k][l][i][j]).abs()
                                    < 1e-12 * scale
                            );
                        }
                    }
                }
            }
            let c = curvature(&moved).unwrap();
            assert!((c.scal + 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn chart_transfer_identity_and_incompatible() {
        let p = ChartPoint::cartesian(vec![1.0, 2.0, 3.0]);
        let map = chart_transfer(&p, ChartKind::Cartesian).unwrap();
        assert_eq!(map.image, p);
        let jet = MetricSpec::schwarzschild(3, 1.0, None)
            .unwrap()
            .metric_jet(&p)
            .unwrap();
        let moved = map.transfer_jet(&jet).unwrap();
        assert_eq!(moved.g, jet.g);
        assert!(chart_transfer(&p, ChartKind::PolarArea).is_err());
    }
}
