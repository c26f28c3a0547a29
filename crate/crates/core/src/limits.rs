//! Extrapolation of radial flux series to infinite radius, and decay-rate fits.
//!
//! A series `v(x_k)` is fitted by least squares to
//!
//! ```text
//! power:        v∞ + c₁ x^{-σ} [+ c₂ x^{-σ-1}]
//! exponential:  v∞ + c₁ e^{-σx} [+ c₂ e^{-(σ+2)x}]
//! ```
//!
//! where `x` is the coordinate radius for flat charts and the geodesic radius
//! for hyperbolic ones. The linear coefficients are solved exactly for each
//! trial `σ`; `σ` itself comes from a log-spaced scan refined by golden-section
//! search, unless a hint fixes it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::catalog::{Asymptotics, MetricSpec};
use crate::error::{Error, Result};
use crate::quadrature::SphereRule;

/// One sphere integral of a charge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxSample {
    /// Schedule radius: coordinate radius (flat) or geodesic radius (hyperbolic).
    pub r: f64,
    pub raw_flux: f64,
    pub normalized: f64,
    /// Quadrature error estimate in the units of `normalized`.
    pub quad_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    Power,
    Exponential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTerms {
    /// Two terms when at least five samples are available, one otherwise.
    #[default]
    Auto,
    Single,
    Two,
}

/// Fitted model and its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: DecayModel,
    pub terms: usize,
    pub sigma: f64,
    pub sigma_hinted: bool,
    pub coefficients: Vec<f64>,
    /// Largest absolute residual of the fit.
    pub residual: f64,
    /// Change of the limit when the smallest radius is dropped (absent if too few samples).
    pub drop_change: Option<f64>,
    pub propagated_quadrature: f64,
}

/// Samples with their extrapolated limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSeries {
    pub samples: Vec<FluxSample>,
    pub limit: f64,
    pub limit_error: f64,
    pub fit: FitReport,
}

#[derive(Clone, Copy, Debug)]
struct Fit {
    limit: f64,
    sigma: f64,
    coefficients: [f64; 3],
    residual: f64,
    /// `∂(limit)/∂v_k` bound: Σ_k |a_k| q_k.
    propagated: f64,
}

fn basis(model: DecayModel, x: f64, sigma: f64, term: usize) -> f64 {
    match (model, term) {
        (_, 0) => 1.0,
        (DecayModel::Power, 1) => x.powf(-sigma),
        (DecayModel::Power, _) => x.powf(-sigma - 1.0),
        (DecayModel::Exponential, 1) => (-sigma * x).exp(),
        (DecayModel::Exponential, _) => (-(sigma + 2.0) * x).exp(),
    }
}

/// Linear least squares for fixed `σ`. Columns are scaled to unit max norm
/// before the SVD solve.
fn linear_fit(model: DecayModel, xs: &[f64], vs: &[f64], qs: &[f64], sigma: f64, terms: usize) -> Option<Fit> {
    let rows = xs.len();
    let cols = terms + 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for (i, &x) in xs.iter().enumerate() {
        for j in 0..cols {
            a[(i, j)] = basis(model, x, sigma, j);
        }
    }
    let mut scales = vec![1.0; cols];
    for (j, s) in scales.iter_mut().enumerate() {
        let m = a.column(j).amax();
        if !(m > 0.0) || !m.is_finite() {
            return None;
        }
        *s = m;
        a.column_mut(j).scale_mut(1.0 / m);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return None;
    }
    let pinv = svd.pseudo_inverse(0.0).ok()?;
    let coef = &pinv * DVector::from_column_slice(vs);
    let fitted = &a * &coef;
    let residual = fitted
        .iter()
        .zip(vs)
        .map(|(f, v)| (f - v).abs())
        .fold(0.0, f64::max);
    let mut coefficients = [0.0; 3];
    for j in 0..cols {
        coefficients[j] = coef[j] / scales[j];
    }
    // the limit is the first row of the pseudo-inverse applied to v
    let propagated = (0..rows).map(|k| pinv[(0, k)].abs() * qs[k]).sum::<f64>() / scales[0];
    Some(Fit {
        limit: coefficients[0],
        sigma,
        coefficients,
        residual,
        propagated,
    })
}

fn sum_sq_residual(model: DecayModel, xs: &[f64], vs: &[f64], sigma: f64, terms: usize) -> f64 {
    let zeros = vec![0.0; xs.len()];
    match linear_fit(model, xs, vs, &zeros, sigma, terms) {
        Some(f) => {
            let c = f.coefficients;
            xs.iter()
                .zip(vs)
                .map(|(&x, &v)| {
                    let m: f64 = (0..=terms).map(|j| c[j] * basis(model, x, sigma, j)).sum();
                    (m - v) * (m - v)
                })
                .sum()
        }
        None => f64::INFINITY,
    }
}

const SIGMA_MIN: f64 = 0.05;
const SIGMA_MAX: f64 = 12.0;

fn fit_sigma(model: DecayModel, xs: &[f64], vs: &[f64], terms: usize) -> Option<f64> {
    let steps = 240;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| SIGMA_MIN * (SIGMA_MAX / SIGMA_MIN).powf(i as f64 / steps as f64))
        .collect();
    let costs: Vec<f64> = grid.iter().map(|&s| sum_sq_residual(model, xs, vs, s, terms)).collect();
    let (best, _) = costs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(steps)];
    // golden section on log σ
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let cost = |t: f64| sum_sq_residual(model, xs, vs, t.exp(), terms);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = cost(d);
        }
    }
    let t = 0.5 * (a + b);
    let refined = t.exp();
    if cost(t) <= costs[best] {
        Some(refined)
    } else {
        Some(grid[best])
    }
}

fn fit_once(
    model: DecayModel,
    xs: &[f64],
    vs: &[f64],
    qs: &[f64],
    hint: Option<f64>,
    terms: usize,
) -> Result<Fit> {
    let sigma = match hint {
        Some(s) => s,
        None => fit_sigma(model, xs, vs, terms)
            .ok_or_else(|| Error::Extrapolation("no admissible decay exponent".into()))?,
    };
    linear_fit(model, xs, vs, qs, sigma, terms)
        .ok_or_else(|| Error::Extrapolation("singular least-squares system".into()))
}

/// Extrapolates a flux series to infinite radius.
pub fn extrapolate(
    samples: &[FluxSample],
    model: DecayModel,
    hint: Option<f64>,
    terms: FitTerms,
) -> Result<RadialSeries> {
    if samples.len() < 3 {
        return Err(Error::Extrapolation(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if samples.windows(2).any(|w| !(w[1].r > w[0].r)) {
        return Err(Error::InvalidRadii("radii must be strictly increasing".into()));
    }
    if let Some(s) = hint {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Extrapolation(format!("decay hint {s} must be positive")));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.r).collect();
    let vs: Vec<f64> = samples.iter().map(|s| s.normalized).collect();
    let qs: Vec<f64> = samples.iter().map(|s| s.quad_error).collect();
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Extrapolation("non-finite sample".into()));
    }
    let max_q = qs.iter().copied().fold(0.0, f64::max);

    // a constant series is its own limit
    if vs.iter().all(|v| *v == vs[0]) {
        return Ok(RadialSeries {
            samples: samples.to_vec(),
            limit: vs[0],
            limit_error: max_q,
            fit: FitReport {
                model,
                terms: 0,
                sigma: 0.0,
                sigma_hinted: hint.is_some(),
                coefficients: vec![vs[0]],
                residual: 0.0,
                drop_change: None,
                propagated_quadrature: max_q,
            },
        });
    }

    let nterms = match terms {
        FitTerms::Single => 1,
        FitTerms::Two => 2,
        FitTerms::Auto if samples.len() >= 5 => 2,
        FitTerms::Auto => 1,
    };
    if samples.len() < nterms + 2 {
        return Err(Error::Extrapolation(format!(
            "a {nterms}-term fit needs at least {} samples",
            nterms + 2
        )));
    }
    let fit = fit_once(model, &xs, &vs, &qs, hint, nterms)?;

    // Stability: refit without the smallest radius. The refit keeps at least
    // one redundant sample, dropping to fewer terms if needed, since an exact
    // interpolation says nothing about the stability of the limit.
    let remaining = xs.len() - 1;
    let drop_terms = (1..=nterms).rev().find(|t| remaining >= t + 3);
    let drop_change = drop_terms.and_then(|t| {
        fit_once(model, &xs[1..], &vs[1..], &qs[1..], hint, t)
            .ok()
            .map(|f| (f.limit - fit.limit).abs())
    });
    let limit_error = fit
        .residual
        .max(drop_change.unwrap_or(0.0))
        .max(fit.propagated);
    Ok(RadialSeries {
        samples: samples.to_vec(),
        limit: fit.limit,
        limit_error,
        fit: FitReport {
            model,
            terms: nterms,
            sigma: fit.sigma,
            sigma_hinted: hint.is_some(),
            coefficients: fit.coefficients[..=nterms].to_vec(),
            residual: fit.residual,
            drop_change,
            propagated_quadrature: fit.propagated,
        },
    })
}

/// Slope of a least-squares line through `(x, y)`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx > 0.0 {
        Some(sxy / sxx)
    } else {
        None
    }
}

/// Measured decay of `g - b` over a radius schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub radii: Vec<f64>,
    /// `sup_{S_r} max_ij |h_ij| / √(b_ii b_jj)` per radius.
    pub sup_deviation: Vec<f64>,
    /// Fitted rate; absent when `g = b` identically.
    pub tau: Option<f64>,
    /// `(n-2)/2` (flat) or `n/2` (hyperbolic).
    pub threshold: f64,
    pub satisfied: Option<bool>,
}

/// Fits `sup |g - b| ~ r^{-τ}` (flat) or `~ e^{-τ s}` (hyperbolic).
///
/// Components are rescaled by the diagonal background metric, so in the
/// polar charts this measures the deviation in a background-orthonormal
/// coordinate frame.
pub fn decay_rate(spec: &MetricSpec, radii: &[f64], rule: &SphereRule) -> Result<DecayReport> {
    let n = spec.dim();
    if rule.n != n {
        return Err(Error::UnsupportedQuadrature(format!(
            "rule is for S^{}, metric has dimension {n}",
            rule.n - 1
        )));
    }
    let background = spec.background();
    let mut sup_deviation = Vec::with_capacity(radii.len());
    for &s in radii {
        let r = spec.chart_radius(s);
        let mut sup: f64 = 0.0;
        for i in 0..rule.len() {
            let p = rule.point(i, spec.chart(), r);
            let h: crate::catalog::Mat<f64> = spec.deviation(&p.coords)?;
            let b = background.metric_values(&p)?;
            for a in 0..n {
                for c in 0..n {
                    sup = sup.max(h[a][c].abs() / (b[a][a] * b[c][c]).sqrt());
                }
            }
        }
        sup_deviation.push(sup);
    }
    let nf = n as f64;
    let threshold = match spec.asymptotics() {
        Asymptotics::Flat => (nf - 2.0) / 2.0,
        Asymptotics::Hyperbolic => nf / 2.0,
    };
    let tau = if sup_deviation.iter().all(|v| *v > 0.0) {
        let ys: Vec<f64> = sup_deviation.iter().map(|v| v.ln()).collect();
        let xs: Vec<f64> = match spec.asymptotics() {
            Asymptotics::Flat => radii.iter().map(|r| r.ln()).collect(),
            Asymptotics::Hyperbolic => radii.to_vec(),
        };
        regression_slope(&xs, &ys).map(|s| -s)
    } else {
        None
    };
    Ok(DecayReport {
        radii: radii.to_vec(),
        sup_deviation,
        tau,
        threshold,
        satisfied: tau.map(|t| t > threshold),
    })
}
