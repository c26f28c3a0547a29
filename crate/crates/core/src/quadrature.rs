//! Product quadrature on coordinate spheres and annuli.
//!
//! A rule of degree `D` on `S^{n-1}` is a tensor product of Gauss rules in the
//! cosines of the polar angles and the trapezoid rule in the azimuth. The
//! angle `θ_k` carries the density `sin^{n-1-k} θ_k`, so in `t = cos θ_k` the
//! weight is `(1-t²)^{(n-2-k)/2}` and the matching Gauss–Gegenbauer rule is
//! used. For `n = 3` this is plain Gauss–Legendre. With `⌈(D+1)/2⌉` points per
//! polar angle and `D+1` azimuth points the rule integrates every polynomial
//! of degree `≤ D` in the embedding coordinates exactly.
//!
//! Nodes are evaluated in parallel with rayon. Results are collected in node
//! order and summed with a fixed pairwise tree, so the value does not depend
//! on the number of worker threads.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::catalog::MetricSpec;
use crate::chart::{angular_density, sphere_embedding, ChartKind, ChartPoint, Dimension};
use crate::error::{Error, Result};
use crate::geometry::invert_spd;
use crate::{Arr1, Arr2, MAX_DIM};

/// Largest supported rule degree.
pub const MAX_DEGREE: usize = 60;

/// Volume `ω_{n-1}` of the unit sphere in `ℝⁿ`.
pub fn sphere_volume(n: usize) -> f64 {
    // ω_{k} = 2π/(k-1) · ω_{k-2}, ω_0 = 2, ω_1 = 2π
    let k = n - 1;
    let mut w = if k % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        w *= 2.0 * PI / (j as f64 - 1.0);
        j += 2;
    }
    w
}

/// `∫_0^π sin^m θ dθ`.
fn sine_moment(m: usize) -> f64 {
    match m {
        0 => PI,
        1 => 2.0,
        _ => (m as f64 - 1.0) / m as f64 * sine_moment(m - 2),
    }
}

/// Gauss rule with `npts` nodes for the weight `(1-t²)^{(m-1)/2}` on `[-1, 1]`.
///
/// Golub–Welsch for the initial nodes, then Newton on the orthonormal
/// recurrence and Christoffel weights, which are accurate to rounding.
pub fn gauss_gegenbauer(npts: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(npts > 0 && m > 0);
    let lambda = m as f64 / 2.0;
    let beta = |k: usize| {
        let k = k as f64;
        k * (k + 2.0 * lambda - 1.0) / (4.0 * (k + lambda) * (k + lambda - 1.0))
    };
    let mu0 = sine_moment(m);
    let mut jacobi = DMatrix::<f64>::zeros(npts, npts);
    for k in 1..npts {
        let b = beta(k).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    // orthonormal p̂_0..p̂_npts and the derivative of p̂_npts
    let eval = |t: f64| {
        let mut p_prev = 0.0;
        let mut p = 1.0 / mu0.sqrt();
        let mut d_prev = 0.0;
        let mut d = 0.0;
        let mut sum_sq = p * p;
        for k in 0..npts {
            let b_next = beta(k + 1).sqrt();
            let b_here = if k == 0 { 0.0 } else { beta(k).sqrt() };
            let p_next = (t * p - b_here * p_prev) / b_next;
            let d_next = (p + t * d - b_here * d_prev) / b_next;
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
            if k + 1 < npts {
                sum_sq += p * p;
            }
        }
        (p, d, sum_sq)
    };
    let mut weights = vec![0.0; npts];
    for (t, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..3 {
            let (p, d, _) = eval(*t);
            if d != 0.0 {
                *t -= p / d;
            }
        }
        *w = 1.0 / eval(*t).2;
    }
    // enforce the reflection symmetry exactly
    for i in 0..npts / 2 {
        let j = npts - 1 - i;
        let t = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -t;
        nodes[j] = t;
        weights[i] = w;
        weights[j] = w;
    }
    if npts % 2 == 1 {
        nodes[npts / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(npts: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_gegenbauer(npts, 1);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        t.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|w| half * w).collect(),
    )
}

#[derive(Clone, Debug)]
pub struct SphereRule {
    pub n: usize,
    pub degree: usize,
    /// Unit-sphere points.
    pub nodes: Vec<Vec<f64>>,
    /// The same points as `(θ1, …, θ_{n-2}, φ)`.
    pub angles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Lower-degree rule used for the error estimate.
    pub embedded: Option<Box<SphereRule>>,
}

/// Degree of the embedded rule paired with a rule of degree `d`.
fn embedded_degree(d: usize) -> usize {
    d.saturating_sub((d / 4).max(2))
}

fn product_rule(n: usize, degree: usize) -> SphereRule {
    let npolar = (degree + 1).div_ceil(2);
    let nazim = degree + 1;
    let polar: Vec<(Vec<f64>, Vec<f64>)> = (0..n - 2)
        .map(|k| {
            let (t, w) = gauss_gegenbauer(npolar, n - 2 - k);
            (t.iter().map(|t| t.acos()).collect(), w)
        })
        .collect();
    let total = npolar.pow((n - 2) as u32) * nazim;
    let mut nodes = Vec::with_capacity(total);
    let mut angles = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let dphi = 2.0 * PI / nazim as f64;
    for flat in 0..total {
        let mut rest = flat;
        let j = rest % nazim;
        rest /= nazim;
        let mut a = vec![0.0; n - 1];
        let mut w = dphi;
        for k in (0..n - 2).rev() {
            let i = rest % npolar;
            rest /= npolar;
            a[k] = polar[k].0[i];
            w *= polar[k].1[i];
        }
        a[n - 2] = dphi * (j as f64 + 0.5);
        nodes.push(sphere_embedding(&a));
        angles.push(a);
        weights.push(w);
    }
    SphereRule {
        n,
        degree,
        nodes,
        angles,
        weights,
        embedded: None,
    }
}

/// Product rule on `S^{n-1}` exact up to `degree`, with its embedded companion.
pub fn sphere_rule(n: usize, degree: usize) -> Result<SphereRule> {
    let dim = Dimension::new(n)?;
    dim.check_chart(ChartKind::PolarGeodesic)?;
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(format!(
            "degree {degree} exceeds the maximum {MAX_DEGREE}"
        )));
    }
    let mut rule = product_rule(n, degree);
    rule.embedded = Some(Box::new(product_rule(n, embedded_degree(degree))));
    Ok(rule)
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Chart point of node `i` on the coordinate sphere of radius `r`.
    pub fn point(&self, i: usize, chart: ChartKind, r: f64) -> ChartPoint {
        match chart {
            ChartKind::Cartesian => {
                ChartPoint::cartesian(self.nodes[i].iter().map(|x| r * x).collect())
            }
            _ => ChartPoint::polar(chart, r, &self.angles[i]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

/// Which area/volume element the integral is taken against.
#[derive(Clone, Copy, Debug)]
pub enum Measure<'a> {
    /// The model metric of the chart.
    Background,
    /// The induced measure of a metric.
    Metric(&'a MetricSpec),
}

impl Measure<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Background => "background",
            Measure::Metric(_) => "metric",
        }
    }
}

/// Covector `dr` of the level function whose level sets are the coordinate spheres.
pub fn level_covector(p: &ChartPoint) -> Arr1 {
    let mut c = [0.0; MAX_DIM];
    match p.kind {
        ChartKind::Cartesian => {
            let r = p.radius();
            for (ci, x) in c.iter_mut().zip(&p.coords) {
                *ci = x / r;
            }
        }
        _ => c[0] = 1.0,
    }
    c
}

/// Outward unit normal `ν^i = g^{ij}c_j / |c|_g` and `|c|_g`.
pub fn unit_normal(ginv: &Arr2, covector: &Arr1, n: usize) -> (Arr1, f64) {
    let mut nu = [0.0; MAX_DIM];
    let mut norm2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            nu[i] += ginv[i][j] * covector[j];
        }
        norm2 += nu[i] * covector[i];
    }
    let norm = norm2.sqrt();
    for v in nu.iter_mut().take(n) {
        *v /= norm;
    }
    (nu, norm)
}

/// Ratio of the induced area element of `g` on the coordinate sphere to the
/// round measure the rule weights integrate against.
pub fn area_factor(g: &Arr2, p: &ChartPoint) -> Result<f64> {
    let n = p.dim();
    let (ginv, sqrt_det) = invert_spd(g, n).ok_or_else(|| Error::DegenerateMetric {
        point: p.coords.clone(),
        reason: "metric is not positive definite".into(),
    })?;
    let (_, norm) = unit_normal(&ginv, &level_covector(p), n);
    Ok(sqrt_det * norm * reference_factor(p))
}

/// Ratio of the volume element of `g` to `dr` times the round measure.
pub fn volume_factor(g: &Arr2, p: &ChartPoint) -> Result<f64> {
    let n = p.dim();
    let (_, sqrt_det) = invert_spd(g, n).ok_or_else(|| Error::DegenerateMetric {
        point: p.coords.clone(),
        reason: "metric is not positive definite".into(),
    })?;
    Ok(sqrt_det * reference_factor(p))
}

/// Coordinate measure relative to `dr` times the round measure.
fn reference_factor(p: &ChartPoint) -> f64 {
    match p.kind {
        ChartKind::Cartesian => p.radius().powi(p.dim() as i32 - 1),
        _ => 1.0 / angular_density(&p.coords[1..]),
    }
}

fn background_area(chart: ChartKind, r: f64, n: usize) -> f64 {
    let k = n as i32 - 1;
    match chart {
        ChartKind::Cartesian | ChartKind::PolarArea => r.powi(k),
        ChartKind::PolarGeodesic => r.sinh().powi(k),
    }
}

fn background_volume(chart: ChartKind, r: f64, n: usize) -> f64 {
    let k = n as i32 - 1;
    match chart {
        ChartKind::Cartesian => r.powi(k),
        ChartKind::PolarGeodesic => r.sinh().powi(k),
        ChartKind::PolarArea => r.powi(k) / (1.0 + r * r).sqrt(),
    }
}

/// Fixed-shape pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn check_measure(measure: &Measure, chart: ChartKind, n: usize) -> Result<()> {
    if let Measure::Metric(spec) = measure {
        if spec.chart() != chart || spec.dim() != n {
            return Err(Error::ChartMismatch(format!(
                "measure of a {}-dimensional {} metric used on a {}-dimensional {} sphere",
                spec.dim(),
                spec.chart().name(),
                n,
                chart.name()
            )));
        }
    }
    Ok(())
}

fn evaluate_nodes<F>(points: &[(ChartPoint, f64)], f: &F) -> Result<f64>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync,
{
    let terms: Vec<Result<f64>> = points
        .par_iter()
        .map(|(p, w)| {
            let v = f(p)?;
            if !v.is_finite() {
                return Err(Error::PoisonedIntegrand {
                    point: p.coords.clone(),
                    value: v,
                });
            }
            Ok(v * w)
        })
        .collect();
    let terms: Vec<f64> = terms.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

fn sphere_points(
    rule: &SphereRule,
    chart: ChartKind,
    r: f64,
    measure: &Measure,
    scale: f64,
) -> Result<Vec<(ChartPoint, f64)>> {
    (0..rule.len())
        .map(|i| {
            let p = rule.point(i, chart, r);
            let j = match measure {
                Measure::Background => background_area(chart, r, rule.n),
                Measure::Metric(spec) => area_factor(&spec.metric_values(&p)?, &p)?,
            };
            Ok((p, rule.weights[i] * j * scale))
        })
        .collect()
}

fn sphere_value<F>(f: &F, chart: ChartKind, r: f64, rule: &SphereRule, measure: &Measure) -> Result<f64>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync,
{
    evaluate_nodes(&sphere_points(rule, chart, r, measure, 1.0)?, f)
}

/// `∮_{S_r} f` over the coordinate sphere of radius `r` in `chart`.
pub fn integrate_sphere<F>(
    f: F,
    chart: ChartKind,
    r: f64,
    rule: &SphereRule,
    measure: Measure,
) -> Result<QuadratureResult>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync,
{
    check_measure(&measure, chart, rule.n)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidRadii(format!("sphere radius {r} must be positive")));
    }
    let value = sphere_value(&f, chart, r, rule, &measure)?;
    let (error_estimate, extra) = match &rule.embedded {
        Some(low) => (
            (value - sphere_value(&f, chart, r, low, &measure)?).abs(),
            low.len(),
        ),
        None => (0.0, 0),
    };
    Ok(QuadratureResult {
        value,
        error_estimate,
        nodes_used: rule.len() + extra,
    })
}

fn annulus_value<F>(
    f: &F,
    chart: ChartKind,
    (r0, r1): (f64, f64),
    rule: &SphereRule,
    radial_degree: usize,
    measure: &Measure,
) -> Result<(f64, usize)>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync,
{
    let (rs, ws) = gauss_legendre((radial_degree + 1).div_ceil(2), r0, r1);
    let mut points = Vec::with_capacity(rs.len() * rule.len());
    for (&r, &wr) in rs.iter().zip(&ws) {
        for i in 0..rule.len() {
            let p = rule.point(i, chart, r);
            let j = match measure {
                Measure::Background => background_volume(chart, r, rule.n),
                Measure::Metric(spec) => volume_factor(&spec.metric_values(&p)?, &p)?,
            };
            points.push((p, rule.weights[i] * wr * j));
        }
    }
    let count = points.len();
    Ok((evaluate_nodes(&points, f)?, count))
}

/// `∫_{A(r₀, r₁)} f` with Gauss–Legendre in the radius.
pub fn integrate_annulus<F>(
    f: F,
    chart: ChartKind,
    r0: f64,
    r1: f64,
    rule: &SphereRule,
    radial_degree: usize,
    measure: Measure,
) -> Result<QuadratureResult>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync,
{
    check_measure(&measure, chart, rule.n)?;
    if !(r0 < r1) || !(r0 > 0.0) || !r1.is_finite() {
        return Err(Error::InvalidRadii(format!(
            "annulus needs 0 < r0 < r1, got ({r0}, {r1})"
        )));
    }
    let (value, used) = annulus_value(&f, chart, (r0, r1), rule, radial_degree, &measure)?;
    let (error_estimate, extra) = match &rule.embedded {
        Some(low) => {
            let (v, k) = annulus_value(
                &f,
                chart,
                (r0, r1),
                low,
                embedded_degree(radial_degree),
                &measure,
            )?;
            ((value - v).abs(), k)
        }
        None => (0.0, 0),
    };
    Ok(QuadratureResult {
        value,
        error_estimate,
        nodes_used: used + extra,
    })
}
