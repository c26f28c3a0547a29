//! Orchestration of the subcommands: charges, diagnostics, verdicts and the
//! JSON/CSV outputs.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::{Asymptotics, MetricSpec};
use crate::charges::{
    center_from, compute_charge, flux_sample, rt_diagnostics, ChargeKind, ChargeSpec, ConformalKilling,
    KernelFunction, RtReport,
};
use crate::config::{RunConfig, Validated};
use crate::error::{Error, Result};
use crate::limits::{decay_rate, DecayReport, FitReport, FluxSample};
use crate::quadrature::sphere_rule;
use crate::verify::{
    equivalence_report, kernel_check, pairing_check, pohozaev_check, sample_points, EquivalenceReport,
    IdentityReport, KernelReport, PairingReport,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyKind {
    Pohozaev,
    Kernel,
    Equivalence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Mass,
    Center,
    AhMass,
    Verify(VerifyKind),
    Sweep,
}

impl Command {
    pub fn name(self) -> String {
        match self {
            Command::Mass => "mass".into(),
            Command::Center => "center".into(),
            Command::AhMass => "ah-mass".into(),
            Command::Verify(k) => format!("verify {}", serde_json::to_value(k).unwrap().as_str().unwrap()),
            Command::Sweep => "sweep".into(),
        }
    }
}

/// A value with an error bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeOutcome {
    pub name: String,
    pub charge: ChargeSpec,
    pub samples: Vec<FluxSample>,
    /// Extrapolated limit; for center charges this is `m·c`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
    /// Center coordinate, normalized by the classical mass.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ChargeOutcome {
    fn failed(charge: ChargeSpec, e: &Error) -> Self {
        Self {
            name: charge.name(),
            charge,
            samples: Vec::new(),
            limit: None,
            fit: None,
            center: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rt: Option<RtReport>,
    /// Classical mass used to normalize centers when it was not requested itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalizing_mass: Option<Estimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub identities: Vec<IdentityReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub kernel: Vec<KernelReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairing: Vec<PairingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub charges: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    /// The effective configuration, as TOML that reparses to the same run.
    pub config: String,
    pub charges: Vec<ChargeOutcome>,
    pub diagnostics: Diagnostics,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    /// Whether any requested charge failed to compute.
    pub fn any_charge_failed(&self) -> bool {
        self.charges.iter().any(|c| c.error.is_some())
    }

    pub fn all_verdicts_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Charges a command computes when the config requests none.
pub fn default_charges(command: Command, spec: &MetricSpec) -> Result<Vec<ChargeSpec>> {
    let n = spec.dim();
    let flat = spec.asymptotics() == Asymptotics::Flat;
    let k = |kind| ChargeSpec::new(kind);
    let ah = |indices: std::ops::RangeInclusive<usize>| {
        let basis = KernelFunction::hyperbolic_basis(n);
        let mut out = Vec::new();
        for i in indices {
            out.push(k(ChargeKind::AhMass { kernel: basis[i] }));
            out.push(k(ChargeKind::AhRicci { index: i }));
        }
        out
    };
    Ok(match (command, flat) {
        (Command::Mass | Command::Sweep, true) => vec![k(ChargeKind::MassClassical), k(ChargeKind::MassRicci)],
        (Command::Mass | Command::Sweep, false) => ah(0..=0),
        (Command::Center, true) => {
            let mut out = vec![k(ChargeKind::MassClassical)];
            out.extend((1..=n).map(|alpha| k(ChargeKind::ComClassical { alpha })));
            out.extend((1..=n).map(|alpha| k(ChargeKind::ComRicci { alpha })));
            out
        }
        (Command::Center, false) => ah(1..=n),
        (Command::AhMass, false) => ah(0..=n),
        (Command::AhMass, true) => {
            return Err(Error::Config(format!(
                "ah-mass needs an asymptotically hyperbolic metric, got {}",
                spec.name()
            )))
        }
        (Command::Verify(_), _) => Vec::new(),
    })
}

/// Runs a command. Configuration problems are returned as [`Error::Config`];
/// computational failures are recorded in the report.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    let Validated { spec, radii } = cfg.validate()?;
    let charges = if cfg.charges.is_empty() {
        default_charges(command, &spec)?
    } else {
        cfg.charges.clone()
    };
    let mut effective = cfg.clone();
    if !matches!(command, Command::Verify(_)) {
        effective.charges = charges.clone();
    }
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: command.name(),
        config: effective.to_toml(),
        charges: Vec::new(),
        diagnostics: Diagnostics::default(),
        verdicts: Vec::new(),
        timings: None,
    };
    let mut charge_times = Vec::new();
    match command {
        Command::Verify(kind) => run_verify(kind, cfg, &spec, &radii, &mut report),
        Command::Sweep => {
            let rule = sphere_rule(spec.dim(), cfg.quadrature.degree)?;
            for c in charges {
                let t = Instant::now();
                let samples: Result<Vec<FluxSample>> =
                    radii.iter().map(|&s| flux_sample(&spec, &c, s, &rule)).collect();
                report.charges.push(match samples {
                    Ok(samples) => ChargeOutcome {
                        name: c.name(),
                        charge: c,
                        samples,
                        limit: None,
                        fit: None,
                        center: None,
                        error: None,
                    },
                    Err(e) => ChargeOutcome::failed(c, &e),
                });
                charge_times.push((c.name(), t.elapsed().as_secs_f64()));
            }
        }
        Command::Mass | Command::Center | Command::AhMass => {
            let rule = sphere_rule(spec.dim(), cfg.quadrature.degree)?;
            for c in &charges {
                let t = Instant::now();
                report.charges.push(match compute_charge(&spec, c, &radii, &rule, cfg.fit) {
                    Ok(series) => ChargeOutcome {
                        name: c.name(),
                        charge: *c,
                        limit: Some(Estimate {
                            value: series.limit,
                            error: series.limit_error,
                        }),
                        fit: Some(series.fit),
                        samples: series.samples,
                        center: None,
                        error: None,
                    },
                    Err(e) => ChargeOutcome::failed(*c, &e),
                });
                charge_times.push((c.name(), t.elapsed().as_secs_f64()));
            }
            normalize_centers(&spec, &radii, &rule, cfg, &mut report);
            match decay_rate(&spec, &radii, &rule) {
                Ok(d) => {
                    if d.satisfied == Some(false) {
                        report.diagnostics.warnings.push(format!(
                            "measured decay rate {:.3} does not exceed the threshold {:.3}",
                            d.tau.unwrap_or(f64::NAN),
                            d.threshold
                        ));
                    }
                    report.diagnostics.decay = Some(d);
                }
                Err(e) => report.diagnostics.warnings.push(format!("decay diagnostic failed: {e}")),
            }
            if charges.iter().any(|c| c.is_center()) && spec.asymptotics() == Asymptotics::Flat {
                match rt_diagnostics(&spec, &radii, &rule) {
                    Ok(rt) => report.diagnostics.rt = Some(rt),
                    Err(e) => report.diagnostics.warnings.push(format!("parity diagnostic failed: {e}")),
                }
            }
            pair_verdicts(&mut report);
        }
    }
    if cfg.output.timings {
        report.timings = Some(Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            charges: charge_times,
        });
    }
    Ok(report)
}

fn normalize_centers(spec: &MetricSpec, radii: &[f64], rule: &crate::quadrature::SphereRule, cfg: &RunConfig, report: &mut RunReport) {
    let centers: Vec<usize> = (0..report.charges.len())
        .filter(|&i| report.charges[i].charge.is_center() && report.charges[i].limit.is_some())
        .collect();
    if centers.is_empty() {
        return;
    }
    let requested = report
        .charges
        .iter()
        .find(|c| c.charge.kind == ChargeKind::MassClassical)
        .and_then(|c| c.limit);
    let mass = match requested {
        Some(m) => m,
        None => match compute_charge(spec, &ChargeSpec::new(ChargeKind::MassClassical), radii, rule, cfg.fit) {
            Ok(s) => {
                let m = Estimate {
                    value: s.limit,
                    error: s.limit_error,
                };
                report.diagnostics.normalizing_mass = Some(m);
                m
            }
            Err(e) => {
                report
                    .diagnostics
                    .warnings
                    .push(format!("centers left unnormalized: classical mass failed: {e}"));
                return;
            }
        },
    };
    for i in centers {
        let c = &mut report.charges[i];
        let limit = c.limit.expect("filtered on limit");
        let series = crate::limits::RadialSeries {
            samples: Vec::new(),
            limit: limit.value,
            limit_error: limit.error,
            fit: c.fit.clone().expect("limit comes with a fit"),
        };
        match center_from(&series, mass.value, mass.error) {
            Ok((value, error)) => c.center = Some(Estimate { value, error }),
            Err(e) => report.diagnostics.warnings.push(format!("{}: {e}", c.name)),
        }
    }
}

fn agree(name: String, a: &ChargeOutcome, b: &ChargeOutcome, use_center: bool) -> Option<Verdict> {
    let pick = |c: &ChargeOutcome| if use_center { c.center } else { c.limit };
    let (x, y) = (pick(a)?, pick(b)?);
    let diff = (x.value - y.value).abs();
    let tol = x.error + y.error + 1e-12 * x.value.abs().max(y.value.abs()).max(1.0);
    Some(Verdict {
        name,
        pass: diff <= tol,
        detail: format!(
            "{} = {:.10e} ± {:.2e}, {} = {:.10e} ± {:.2e}, |diff| = {:.2e}",
            a.name, x.value, x.error, b.name, y.value, y.error, diff
        ),
    })
}

/// Compares every classical charge with its Ricci counterpart.
fn pair_verdicts(report: &mut RunReport) {
    let find = |kind: ChargeKind| report.charges.iter().find(|c| c.charge.kind == kind);
    let mut out = Vec::new();
    for c in &report.charges {
        let (partner, name, center) = match c.charge.kind {
            ChargeKind::MassClassical => (ChargeKind::MassRicci, "mass".to_string(), false),
            ChargeKind::ComClassical { alpha } => (ChargeKind::ComRicci { alpha }, format!("center_{alpha}"), true),
            ChargeKind::AhMass {
                kernel: KernelFunction::AhV0,
            } => (ChargeKind::AhRicci { index: 0 }, "ah_0".to_string(), false),
            ChargeKind::AhMass {
                kernel: KernelFunction::AhValpha(i),
            } => (ChargeKind::AhRicci { index: i }, format!("ah_{i}"), false),
            _ => continue,
        };
        if let Some(p) = find(partner) {
            if let Some(v) = agree(format!("{name}: classical = ricci"), c, p, center) {
                out.push(v);
            }
        }
    }
    report.verdicts.extend(out);
}

fn run_verify(kind: VerifyKind, cfg: &RunConfig, spec: &MetricSpec, radii: &[f64], report: &mut RunReport) {
    let tol = cfg.tolerances;
    let v = &cfg.verify;
    let fields = v.fields.clone().unwrap_or_else(|| match spec.asymptotics() {
        Asymptotics::Flat => ConformalKilling::flat_fields(spec.dim()),
        Asymptotics::Hyperbolic => ConformalKilling::hyperbolic_fields(spec.dim()),
    });
    let mut fail = |name: String, e: Error| {
        report.verdicts.push(Verdict {
            name,
            pass: false,
            detail: e.to_string(),
        })
    };
    match kind {
        VerifyKind::Pohozaev => {
            let rule = match sphere_rule(spec.dim(), v.degree) {
                Ok(r) => r,
                Err(e) => return fail("pohozaev".into(), e),
            };
            let s0 = v.r0.unwrap_or(1.0);
            let r0 = match v.r0 {
                Some(s) => spec.chart_radius(s),
                None => spec.chart_radius(1.0).max(2.0 * spec.excised_radius()),
            };
            let r1 = match v.r1 {
                Some(s) => spec.chart_radius(s),
                None if v.r0.is_some() => spec.chart_radius(2.0 * s0),
                None => 2.0 * r0,
            };
            let mut verdicts = Vec::new();
            for x in fields {
                let name = format!("pohozaev {x}");
                match pohozaev_check(spec, x, r0, r1, &rule, v.radial_degree, &tol) {
                    Ok(rep) => {
                        verdicts.push(Verdict {
                            name,
                            pass: rep.pass,
                            detail: format!(
                                "lhs = {:.10e}, rhs = {:.10e}, relative residual = {:.2e}",
                                rep.lhs, rep.rhs, rep.relative_residual
                            ),
                        });
                        report.diagnostics.identities.push(rep);
                    }
                    Err(e) => verdicts.push(Verdict {
                        name,
                        pass: false,
                        detail: e.to_string(),
                    }),
                }
            }
            report.verdicts.extend(verdicts);
        }
        VerifyKind::Kernel => {
            let points = match sample_points(spec, v.points, cfg.seed) {
                Ok(p) => p,
                Err(e) => return fail("kernel".into(), e),
            };
            for x in fields {
                let name = format!("kernel {x}");
                match kernel_check(spec, x, &points, &tol) {
                    Ok(rep) => {
                        report.verdicts.push(Verdict {
                            name,
                            pass: rep.pass,
                            detail: format!(
                                "λ = {}, max |Hess u + λug| = {:.2e}, max |Δu - nλu| = {:.2e}",
                                rep.lambda, rep.max_residual, rep.max_trace_residual
                            ),
                        });
                        report.diagnostics.kernel.push(rep);
                    }
                    Err(e) => report.verdicts.push(Verdict {
                        name,
                        pass: false,
                        detail: e.to_string(),
                    }),
                }
            }
            let bg_points = sample_points(&spec.background(), v.points, cfg.seed);
            match bg_points.and_then(|p| pairing_check(spec, &p, &tol)) {
                Ok(rows) => {
                    for row in rows {
                        report.verdicts.push(Verdict {
                            name: format!("pairing {} / {}", row.kernel, row.field),
                            pass: row.pass,
                            detail: format!(
                                "adjoint {:.2e}, divergence {:.2e}, killing {:.2e}",
                                row.adjoint_residual, row.divergence_residual, row.killing_residual
                            ),
                        });
                        report.diagnostics.pairing.push(row);
                    }
                }
                Err(e) => report.verdicts.push(Verdict {
                    name: "pairing".into(),
                    pass: false,
                    detail: e.to_string(),
                }),
            }
        }
        VerifyKind::Equivalence => {
            let rule = match sphere_rule(spec.dim(), cfg.quadrature.degree) {
                Ok(r) => r,
                Err(e) => return fail("equivalence".into(), e),
            };
            match equivalence_report(spec, radii, &rule, cfg.fit) {
                Ok(rep) => {
                    for row in &rep.rows {
                        report.verdicts.push(Verdict {
                            name: format!("equivalence {}", row.name),
                            pass: row.pass,
                            detail: format!(
                                "classical {:.10e} ± {:.2e}, ricci {:.10e} ± {:.2e}",
                                row.classical, row.classical_error, row.ricci, row.ricci_error
                            ),
                        });
                    }
                    report.diagnostics.warnings.extend(rep.warnings.iter().cloned());
                    report.diagnostics.equivalence = Some(rep);
                }
                Err(e) => fail("equivalence".into(), e),
            }
        }
    }
}

/// Formats a number with 17 significant digits.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `r,raw_flux,normalized,quad_error`, one row per radius.
pub fn series_csv(samples: &[FluxSample]) -> String {
    let mut out = String::from("r,raw_flux,normalized,quad_error\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            sig17(s.r),
            sig17(s.raw_flux),
            sig17(s.normalized),
            sig17(s.quad_error)
        );
    }
    out
}

/// Writes `report.json` and one `<charge>.csv` per charge with samples.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    for c in &report.charges {
        if !c.samples.is_empty() {
            std::fs::write(dir.join(format!("{}.csv", c.name)), series_csv(&c.samples))?;
        }
    }
    Ok(())
}

/// Human-readable summary.
pub fn render_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", report.command);
    if !report.charges.is_empty() {
        let _ = writeln!(out, "{:<22} {:>22} {:>10} {:>22}", "charge", "limit", "± error", "center");
        for c in &report.charges {
            match (&c.error, c.limit) {
                (Some(e), _) => {
                    let _ = writeln!(out, "{:<22} error: {e}", c.name);
                }
                (None, Some(l)) => {
                    let center = c
                        .center
                        .map(|e| format!("{:.10} ± {:.1e}", e.value, e.error))
                        .unwrap_or_default();
                    let _ = writeln!(out, "{:<22} {:>22.12e} {:>10.2e} {:>22}", c.name, l.value, l.error, center);
                }
                (None, None) => {
                    let last = c.samples.last().map(|s| s.normalized).unwrap_or(f64::NAN);
                    let _ = writeln!(out, "{:<22} {:>22.12e}  (at r = {})", c.name, last, c.samples.last().map(|s| s.r).unwrap_or(f64::NAN));
                }
            }
        }
    }
    for v in &report.verdicts {
        let _ = writeln!(out, "[{}] {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    for w in &report.diagnostics.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    if let Some(rt) = &report.diagnostics.rt {
        if let Some(e) = rt.exponent {
            let _ = writeln!(out, "parity exponent {e:.3} ({:?})", rt.status);
        }
    }
    out
}
