//! Executable checks of the integral and pointwise identities.
//!
//! * [`pohozaev_check`]: the Einstein-tensor flux through the boundary of an
//!   annulus, paired with a conformal Killing field `X`, equals
//!   `(n-2)/(2n) ∫ Scal·δX` over the annulus.
//! * [`kernel_check`]: on an Einstein metric with `Ric = λ(n-1)g`,
//!   `Hess(δX) + λ(δX)g = 0` for every conformal Killing field.
//! * [`pairing_check`]: the background kernel functions solve
//!   `(D Scal)^*V = 0` and pair with the conformal Killing fields through
//!   `δX = c·n·V`.
//! * [`equivalence_report`]: classical and Ricci versions of each charge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Asymptotics, Mat, MetricSpec};
use crate::chart::{ChartKind, ChartPoint};
use crate::charges::{
    center_from, compute_charge, rt_diagnostics, ChargeKind, ChargeSpec, ConformalKilling, DiagnosticStatus,
    FitOptions, KernelFunction,
};
use crate::error::{Error, Result};
use crate::expr::{seed, HyperDual, Scalar};
use crate::geometry::{
    curvature, divergence_vector, dscal_adjoint, hessian, killing_operator, pair, tensor_norm, MetricJet, ScalarJet,
    ZERO2,
};
use crate::limits::{decay_rate, RadialSeries};
use crate::quadrature::{
    integrate_annulus, integrate_sphere, level_covector, sphere_rule, unit_normal, Measure, QuadratureResult,
    SphereRule,
};
use crate::MAX_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance for pointwise identities.
    pub abs_tol: f64,
    /// Relative tolerance for integral identities.
    pub rel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-6,
        }
    }
}

/// Outcome of an integral identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// Size of the integrands, `∮|G(X,ν)|` on both spheres plus the bulk `∫|…|`.
    pub scale: f64,
    pub boundary_quad_error: f64,
    pub bulk_quad_error: f64,
    /// Largest trace-free Killing defect of `X` for the metric, at sampled nodes.
    pub killing_defect: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

fn finish_identity(
    name: String,
    lhs: f64,
    rhs: f64,
    scale: f64,
    errors: (f64, f64),
    killing_defect: f64,
    tol: &Tolerances,
    mut warnings: Vec<String>,
) -> IdentityReport {
    let residual = (lhs - rhs).abs();
    let denom = lhs.abs().max(rhs.abs()).max(scale);
    let relative_residual = if denom > 0.0 { residual / denom } else { 0.0 };
    let pass = residual <= tol.abs_tol.max(tol.rel_tol * denom);
    if killing_defect > tol.abs_tol {
        warnings.push(format!(
            "X is not conformal Killing for this metric (defect {killing_defect:.2e}); the identity picks up an extra bulk term"
        ));
    }
    IdentityReport {
        name,
        lhs,
        rhs,
        residual,
        relative_residual,
        scale,
        boundary_quad_error: errors.0,
        bulk_quad_error: errors.1,
        killing_defect,
        pass,
        warnings,
    }
}

fn g_normal(g: &MetricJet) -> Result<[f64; MAX_DIM]> {
    let (ginv, _) = g.inverse()?;
    Ok(unit_normal(&ginv, &level_covector(&g.at), g.n).0)
}

/// Einstein-tensor flux `∮_{S_r} G(X, ν_g) dσ_g` and `∮ |G(X, ν_g)| dσ_g`.
fn boundary_flux(spec: &MetricSpec, x: ConformalKilling, r: f64, rule: &SphereRule) -> Result<(QuadratureResult, f64)> {
    let integrand = |p: &ChartPoint| -> Result<f64> {
        let g = spec.metric_jet(p)?;
        let curv = curvature(&g)?;
        Ok(pair(&curv.einstein, &x.values(p)?, &g_normal(&g)?, g.n))
    };
    let q = integrate_sphere(integrand, spec.chart(), r, rule, Measure::Metric(spec))?;
    let abs = integrate_sphere(
        |p: &ChartPoint| integrand(p).map(f64::abs),
        spec.chart(),
        r,
        rule,
        Measure::Metric(spec),
    )?;
    Ok((q, abs.value))
}

fn killing_defect(spec: &MetricSpec, x: ConformalKilling, r: f64) -> Result<f64> {
    let probe = sphere_rule(spec.dim(), 3)?;
    let mut worst: f64 = 0.0;
    for i in 0..probe.len() {
        let p = probe.point(i, spec.chart(), r);
        let g = spec.metric_jet(&p)?;
        let tf = killing_operator(&g, &x.jet(&p)?)?.trace_free;
        worst = worst.max(tensor_norm(&g, &tf)?);
    }
    Ok(worst)
}

/// Integrated Bianchi identity on the annulus between chart radii `r0` and `r1`.
///
/// The boundary term is `F(r1) - F(r0)` with `F(r) = ∮_{S_r} G(X, ν) dσ`, so
/// swapping the radii negates both sides.
pub fn pohozaev_check(
    spec: &MetricSpec,
    x: ConformalKilling,
    r0: f64,
    r1: f64,
    rule: &SphereRule,
    radial_degree: usize,
    tol: &Tolerances,
) -> Result<IdentityReport> {
    x.check(spec.chart(), spec.dim())?;
    if r0 == r1 {
        return Err(Error::InvalidRadii("annulus radii must differ".into()));
    }
    let n = spec.dim() as f64;
    let (f0, a0) = boundary_flux(spec, x, r0, rule)?;
    let (f1, a1) = boundary_flux(spec, x, r1, rule)?;
    let lhs = f1.value - f0.value;

    let (lo, hi, sign) = if r0 < r1 { (r0, r1, 1.0) } else { (r1, r0, -1.0) };
    let bulk = |p: &ChartPoint| -> Result<f64> {
        let g = spec.metric_jet(p)?;
        let scal = curvature(&g)?.scal;
        Ok(scal * divergence_vector(&g, &x.jet(p)?)?)
    };
    let factor = (n - 2.0) / (2.0 * n);
    let b = integrate_annulus(bulk, spec.chart(), lo, hi, rule, radial_degree, Measure::Metric(spec))?;
    let b_abs = integrate_annulus(
        |p: &ChartPoint| bulk(p).map(f64::abs),
        spec.chart(),
        lo,
        hi,
        rule,
        radial_degree,
        Measure::Metric(spec),
    )?;
    let rhs = sign * factor * b.value;
    let scale = a0 + a1 + factor * b_abs.value;
    let defect = killing_defect(spec, x, lo)?.max(killing_defect(spec, x, hi)?);
    Ok(finish_identity(
        format!("pohozaev/{}/{}", spec.name(), x),
        lhs,
        rhs,
        scale,
        (f0.error_estimate + f1.error_estimate, factor * b.error_estimate),
        defect,
        tol,
        Vec::new(),
    ))
}

/// Pointwise kernel identity on an Einstein metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub field: ConformalKilling,
    pub lambda: f64,
    /// Whether `λ` came from the catalog or from the scalar curvature.
    pub lambda_from_catalog: bool,
    /// `max |Ric - λ(n-1)g|_g` over the samples.
    pub einstein_defect: f64,
    /// `max |Hess(δX) + λ(δX)g|_g`.
    pub max_residual: f64,
    /// `max |Δ(δX) - nλ δX|`.
    pub max_trace_residual: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Generic inverse by Gauss–Jordan elimination (the input is positive definite).
fn invert_generic<T: Scalar>(a: &[[T; MAX_DIM]; MAX_DIM], n: usize) -> [[T; MAX_DIM]; MAX_DIM] {
    let mut m = *a;
    let mut inv = [[T::zero(); MAX_DIM]; MAX_DIM];
    for (i, row) in inv.iter_mut().enumerate().take(n) {
        row[i] = T::one();
    }
    for c in 0..n {
        let pivot = m[c][c].recip();
        for j in 0..n {
            m[c][j] = m[c][j] * pivot;
            inv[c][j] = inv[c][j] * pivot;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for j in 0..n {
                    m[r][j] = m[r][j] - f * m[c][j];
                    inv[r][j] = inv[r][j] - f * inv[c][j];
                }
            }
        }
    }
    inv
}

/// 2-jet of `δ^g X`, from third derivatives of `g` via nested hyper-duals.
pub fn divergence_jet(spec: &MetricSpec, x: ConformalKilling, p: &ChartPoint) -> Result<ScalarJet> {
    with_large_stack(|| divergence_jet_inner(spec, x, p))
}

fn divergence_jet_inner(spec: &MetricSpec, x: ConformalKilling, p: &ChartPoint) -> Result<ScalarJet> {
    type S = HyperDual<f64>;
    let n = p.dim();
    spec.metric_jet(p)?;
    x.check(p.kind, n)?;
    let inner: Vec<S> = seed(&p.coords);
    let outer: Vec<HyperDual<S>> = seed(&inner);
    let g: Box<Mat<HyperDual<S>>> = Box::new(spec.components(&outer)?);
    let field: Vec<HyperDual<S>> = x.eval(p.kind, &outer);
    let mut g0 = [[S::zero(); MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            g0[i][j] = g[i][j].value;
        }
    }
    let ginv = invert_generic(&g0, n);
    // δX = -(∂_i X^i + ½ X^k g^{ij} ∂_k g_ij)
    let mut u = S::zero();
    for i in 0..n {
        u = u + field[i].grad[i];
    }
    for k in 0..n {
        let mut t = S::zero();
        for i in 0..n {
            for j in 0..n {
                t = t + ginv[i][j] * g[i][j].grad[k];
            }
        }
        u = u + field[k].value * t.scale(0.5);
    }
    Ok(ScalarJet::from_dual(&(-u), n))
}

/// Runs `f` on a thread with room for nested-dual temporaries.
fn with_large_stack<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(256 << 20)
            .spawn_scoped(s, f)
            .expect("spawn verification thread")
            .join()
            .expect("verification thread panicked")
    })
}

/// Random points inside the chart domain of `spec`, reproducible from `seed`.
pub fn sample_points(spec: &MetricSpec, count: usize, seed: u64) -> Result<Vec<ChartPoint>> {
    let n = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count + 100 {
            return Err(Error::Precondition(format!(
                "could not sample {count} points inside the domain of the {} metric",
                spec.name()
            )));
        }
        let p = match spec.chart() {
            ChartKind::Cartesian => {
                let r0 = 1.5 * spec.excised_radius() + 1.0;
                let r = rng.gen_range(r0..10.0 * r0);
                let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-3 {
                    continue;
                }
                ChartPoint::cartesian(dir.iter().map(|v| v / norm * r).collect())
            }
            kind => {
                let s = rng.gen_range(0.3..3.0);
                let mut angles: Vec<f64> = (0..n - 2).map(|_| rng.gen_range(0.1..3.04)).collect();
                angles.push(rng.gen_range(0.0..std::f64::consts::TAU));
                ChartPoint::polar(kind, spec.chart_radius(s), &angles)
            }
        };
        match spec.metric_jet(&p) {
            Ok(_) => out.push(p),
            Err(Error::Domain { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Checks `Hess(δX) + λ(δX)g = 0` and `Δ(δX) = nλ δX` at the given points.
pub fn kernel_check(spec: &MetricSpec, x: ConformalKilling, points: &[ChartPoint], tol: &Tolerances) -> Result<KernelReport> {
    x.check(spec.chart(), spec.dim())?;
    let n = spec.dim();
    let nf = n as f64;
    // Einstein validation
    let mut defect: f64 = 0.0;
    let mut lambda_est = Vec::with_capacity(points.len());
    let mut jets = Vec::with_capacity(points.len());
    for p in points {
        let g = spec.metric_jet(p)?;
        let c = curvature(&g)?;
        lambda_est.push(c.scal / (nf * (nf - 1.0)));
        jets.push((g, c));
    }
    let (lambda, from_catalog) = match spec.einstein_constant() {
        Some(l) => (l, true),
        None => (
            lambda_est.iter().sum::<f64>() / lambda_est.len().max(1) as f64,
            false,
        ),
    };
    for (g, c) in &jets {
        let mut d = ZERO2;
        for i in 0..n {
            for j in 0..n {
                d[i][j] = c.ricci[i][j] - lambda * (nf - 1.0) * g.g[i][j];
            }
        }
        defect = defect.max(tensor_norm(g, &d)?);
    }
    if defect > tol.abs_tol {
        return Err(Error::NotEinstein {
            defect,
            tolerance: tol.abs_tol,
        });
    }
    let residuals = with_large_stack(|| -> Result<(f64, f64)> {
        let mut worst: f64 = 0.0;
        let mut worst_trace: f64 = 0.0;
        for (p, (g, _)) in points.iter().zip(&jets) {
            let u = divergence_jet_inner(spec, x, p)?;
            let mut t = hessian(g, &u)?;
            let lap = -crate::geometry::trace(g, &t)?;
            for i in 0..n {
                for j in 0..n {
                    t[i][j] += lambda * u.value * g.g[i][j];
                }
            }
            worst = worst.max(tensor_norm(g, &t)?);
            worst_trace = worst_trace.max((lap - nf * lambda * u.value).abs());
        }
        Ok((worst, worst_trace))
    })?;
    Ok(KernelReport {
        field: x,
        lambda,
        lambda_from_catalog: from_catalog,
        einstein_defect: defect,
        max_residual: residuals.0,
        max_trace_residual: residuals.1,
        samples: points.len(),
        pass: residuals.0 <= tol.abs_tol && residuals.1 <= tol.abs_tol,
    })
}

/// Kernel membership and divergence pairing for one index of the background family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub kernel: KernelFunction,
    pub field: ConformalKilling,
    /// `max |(D Scal)^*_b V|_b`.
    pub adjoint_residual: f64,
    /// `max |δ^b X - c·n·V|`.
    pub divergence_residual: f64,
    /// `max |(δ^b)^*X + (1/n)(δ^b X) b|_b`.
    pub killing_residual: f64,
    pub pass: bool,
}

/// Checks every kernel function and conformal Killing field of the background of `spec`.
pub fn pairing_check(spec: &MetricSpec, points: &[ChartPoint], tol: &Tolerances) -> Result<Vec<PairingReport>> {
    let b = spec.background();
    let n = spec.dim();
    let fields = match b.asymptotics() {
        Asymptotics::Flat => ConformalKilling::flat_fields(n),
        Asymptotics::Hyperbolic => ConformalKilling::hyperbolic_fields(n),
    };
    let jets = points
        .iter()
        .map(|p| {
            let j = b.metric_jet(p)?;
            let c = curvature(&j)?;
            Ok((j, c))
        })
        .collect::<Result<Vec<_>>>()?;
    fields
        .into_iter()
        .map(|x| {
            let (c, v) = x.divergence();
            let mut adj: f64 = 0.0;
            let mut div: f64 = 0.0;
            let mut kil: f64 = 0.0;
            for (p, (jet, curv)) in points.iter().zip(&jets) {
                let vj = v.jet(p)?;
                adj = adj.max(tensor_norm(jet, &dscal_adjoint(jet, &vj, curv)?)?);
                let xj = x.jet(p)?;
                div = div.max((divergence_vector(jet, &xj)? - c * n as f64 * vj.value).abs());
                kil = kil.max(tensor_norm(jet, &killing_operator(jet, &xj)?.trace_free)?);
            }
            Ok(PairingReport {
                kernel: v,
                field: x,
                adjoint_residual: adj,
                divergence_residual: div,
                killing_residual: kil,
                pass: adj <= tol.abs_tol && div <= tol.abs_tol && kil <= tol.abs_tol,
            })
        })
        .collect()
}

/// One row of the classical-versus-Ricci comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub name: String,
    pub classical: f64,
    pub classical_error: f64,
    pub ricci: f64,
    pub ricci_error: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

fn compare(name: String, a: (f64, f64), b: (f64, f64), warnings: Vec<String>) -> EquivalenceRow {
    let difference = (a.0 - b.0).abs();
    // a floor at rounding level so that two exact zeros or exact values compare equal
    let floor = 1e-12 * a.0.abs().max(b.0.abs()).max(1.0);
    let tolerance = a.1 + b.1 + floor;
    EquivalenceRow {
        name,
        classical: a.0,
        classical_error: a.1,
        ricci: b.0,
        ricci_error: b.1,
        difference,
        tolerance,
        pass: difference <= tolerance,
        warnings,
    }
}

fn limit_of(s: &RadialSeries) -> (f64, f64) {
    (s.limit, s.limit_error)
}

/// Computes both versions of every applicable charge and compares their limits.
pub fn equivalence_report(spec: &MetricSpec, radii: &[f64], rule: &SphereRule, fit: FitOptions) -> Result<EquivalenceReport> {
    let n = spec.dim();
    let mut warnings = Vec::new();
    let decay = decay_rate(spec, radii, rule)?;
    if decay.satisfied == Some(false) {
        warnings.push(format!(
            "measured decay rate {:.3} does not exceed {:.3}",
            decay.tau.unwrap_or(f64::NAN),
            decay.threshold
        ));
    }
    let mut rows = Vec::new();
    let run = |kind: ChargeKind| compute_charge(spec, &ChargeSpec::new(kind), radii, rule, fit);
    match spec.asymptotics() {
        Asymptotics::Flat => {
            let m = run(ChargeKind::MassClassical)?;
            let mr = run(ChargeKind::MassRicci)?;
            rows.push(compare("mass".into(), limit_of(&m), limit_of(&mr), Vec::new()));
            let rt = rt_diagnostics(spec, radii, rule)?;
            for alpha in 1..=n {
                let mut row_warn = Vec::new();
                if rt.status == DiagnosticStatus::Warn {
                    row_warn.push(format!(
                        "parity decay exponent {:.3} below τ+1 = {:.3}",
                        rt.exponent.unwrap_or(f64::NAN),
                        rt.required.unwrap_or(f64::NAN)
                    ));
                }
                let c = run(ChargeKind::ComClassical { alpha })?;
                let cr = run(ChargeKind::ComRicci { alpha })?;
                let pair_c = center_from(&c, m.limit, m.limit_error);
                let pair_r = center_from(&cr, m.limit, m.limit_error);
                match (pair_c, pair_r) {
                    (Ok(a), Ok(b)) => rows.push(compare(format!("center_{alpha}"), a, b, row_warn)),
                    _ => {
                        // zero mass: compare the unnormalized fluxes instead
                        row_warn.push("mass is zero; comparing m·c".into());
                        rows.push(compare(format!("m_center_{alpha}"), limit_of(&c), limit_of(&cr), row_warn));
                    }
                }
            }
        }
        Asymptotics::Hyperbolic => {
            for (i, v) in KernelFunction::hyperbolic_basis(n).into_iter().enumerate() {
                let a = run(ChargeKind::AhMass { kernel: v })?;
                let b = run(ChargeKind::AhRicci { index: i })?;
                rows.push(compare(format!("ah_{i}"), limit_of(&a), limit_of(&b), Vec::new()));
            }
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(EquivalenceReport { rows, warnings, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_x0_closed_form() {
        let spec = MetricSpec::hyperbolic_polar(3).unwrap();
        let rule = sphere_rule(3, 12).unwrap();
        let rep = pohozaev_check(&spec, ConformalKilling::AhX0, 1.0, 2.0, &rule, 30, &Tolerances::default()).unwrap();
        let closed = 4.0 * std::f64::consts::PI * (2f64.sinh().powi(3) - 1f64.sinh().powi(3));
        assert!((rep.lhs - closed).abs() < 1e-10 * closed);
        assert!((rep.rhs - closed).abs() < 1e-10 * closed);
        assert!(rep.pass);
        let swapped = pohozaev_check(&spec, ConformalKilling::AhX0, 2.0, 1.0, &rule, 30, &Tolerances::default()).unwrap();
        assert!((swapped.lhs + rep.lhs).abs() < 1e-12 * closed);
        assert!(swapped.pass);
    }

    #[test]
    fn euclidean_is_trivial() {
        let spec = MetricSpec::euclidean(3).unwrap();
        let rule = sphere_rule(3, 6).unwrap();
        let rep = pohozaev_check(&spec, ConformalKilling::InvertedTranslation(2), 1.0, 2.0, &rule, 6, &Tolerances::default())
            .unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn divergence_jet_matches_closed_form() {
        let spec = MetricSpec::hyperbolic_polar(3).unwrap();
        let p = ChartPoint::polar(ChartKind::PolarGeodesic, 1.2, &[0.8, 2.0]);
        let u = divergence_jet(&spec, ConformalKilling::AhX0, &p).unwrap();
        // δX⁽⁰⁾ = -3 cosh r
        assert!((u.value + 3.0 * 1.2f64.cosh()).abs() < 1e-13);
        assert!((u.gradient[0] + 3.0 * 1.2f64.sinh()).abs() < 1e-13);
        assert!((u.hessian[0][0] + 3.0 * 1.2f64.cosh()).abs() < 1e-12);
        assert!(u.gradient[1].abs() < 1e-13);
    }

    #[test]
    fn kernel_identity_on_models() {
        let tol = Tolerances::default();
        let e = MetricSpec::euclidean(3).unwrap();
        let pts = sample_points(&e, 5, 1).unwrap();
        for x in ConformalKilling::flat_fields(3) {
            let rep = kernel_check(&e, x, &pts, &tol).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
        let h = MetricSpec::hyperbolic_area(3).unwrap();
        let pts = sample_points(&h, 5, 2).unwrap();
        for x in ConformalKilling::hyperbolic_fields(3) {
            let rep = kernel_check(&h, x, &pts, &tol).unwrap();
            assert!(rep.pass, "{rep:?}");
            assert_eq!(rep.lambda, -1.0);
        }
    }

    #[test]
    fn kottler_is_rejected() {
        let k = MetricSpec::kottler(3, 1.0).unwrap();
        let pts = sample_points(&k, 3, 3).unwrap();
        let err = kernel_check(&k, ConformalKilling::AhX0, &pts, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::NotEinstein { .. }));
    }

    #[test]
    fn pairing_on_backgrounds() {
        let tol = Tolerances::default();
        for spec in [MetricSpec::euclidean(4).unwrap(), MetricSpec::hyperbolic_polar(4).unwrap()] {
            let pts = sample_points(&spec, 5, 4).unwrap();
            for row in pairing_check(&spec, &pts, &tol).unwrap() {
                assert!(row.pass, "{row:?}");
            }
        }
    }

    #[test]
    fn backgrounds_are_equivalent() {
        let rule = sphere_rule(3, 4).unwrap();
        let e = equivalence_report(&MetricSpec::euclidean(3).unwrap(), &[8.0, 16.0, 32.0], &rule, FitOptions::default())
            .unwrap();
        assert!(e.pass);
        assert!(e.rows.iter().all(|r| r.classical == 0.0 && r.ricci == 0.0));
        let h = equivalence_report(&MetricSpec::hyperbolic_polar(3).unwrap(), &[3.0, 4.0, 5.0], &rule, FitOptions::default())
            .unwrap();
        assert!(h.pass, "{h:?}");
    }
}
