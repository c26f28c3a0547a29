use asyminv::catalog::MetricSpec;
use asyminv::charges::{rt_diagnostics, DiagnosticStatus};
use asyminv::chart::{ChartKind, ChartPoint};
use asyminv::config::RunConfig;
use asyminv::geometry::curvature;
use asyminv::quadrature::sphere_rule;
use asyminv::run::{run, Command};
use asyminv::MAX_DIM;

fn einstein_at(spec: &MetricSpec, p: &ChartPoint) -> [[f64; MAX_DIM]; MAX_DIM] {
    curvature(&spec.metric_jet(p).unwrap()).unwrap().einstein
}

/// `|∇^i G_ij|` with `∂G` by fourth-order central differences, relative to `|∂G|`.
fn bianchi_defect(spec: &MetricSpec, p: &ChartPoint) -> f64 {
    let n = spec.dim();
    let jet = spec.metric_jet(p).unwrap();
    let c = curvature(&jet).unwrap();
    let (ginv, _) = jet.inverse().unwrap();
    let h = 1e-3;
    let shifted = |k: usize, d: f64| {
        let mut q = p.clone();
        q.coords[k] += d;
        einstein_at(spec, &q)
    };
    let mut dg = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    let mut scale: f64 = 0.0;
    for k in 0..n {
        let (p1, m1, p2, m2) = (shifted(k, h), shifted(k, -h), shifted(k, 2.0 * h), shifted(k, -2.0 * h));
        for i in 0..n {
            for j in 0..n {
                dg[k][i][j] = (8.0 * (p1[i][j] - m1[i][j]) - (p2[i][j] - m2[i][j])) / (12.0 * h);
                scale = scale.max(dg[k][i][j].abs());
            }
        }
    }
    let gamma = &c.christoffel;
    let g = &c.einstein;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut div = 0.0;
        for i in 0..n {
            for k in 0..n {
                let mut cov = dg[k][i][j];
                for l in 0..n {
                    cov -= gamma[l][k][i] * g[l][j] + gamma[l][k][j] * g[i][l];
                }
                div += ginv[i][k] * cov;
            }
        }
        worst = worst.max(div.abs());
    }
    worst / scale
}

#[test]
fn contracted_bianchi_identity() {
    let translated = MetricSpec::schwarzschild(4, 1.5, Some(vec![0.3, -0.2, 0.1, 0.0])).unwrap();
    let p = ChartPoint::cartesian(vec![1.1, 0.7, -0.4, 0.9]);
    assert!(bianchi_defect(&translated, &p) < 1e-7);

    let kottler = MetricSpec::kottler(3, 1.0).unwrap();
    let p = ChartPoint::polar(ChartKind::PolarArea, 2.0, &[1.1, 0.4]);
    assert!(bianchi_defect(&kottler, &p) < 1e-7);

    let cfg = RunConfig::from_toml(
        r#"
[metric]
kind = "perturbation"
n = 3
base = "euclidean"
params = { a = 0.4 }
components = [
  ["a*x1*x2/r^3", "a/r^2", "0"],
  ["a/r^2", "a*sin(x3)/r", "a*x1/r^2"],
  ["0", "a*x1/r^2", "a/r"],
]
"#,
    )
    .unwrap();
    let spec = cfg.metric.build().unwrap();
    let p = ChartPoint::cartesian(vec![1.3, -0.8, 0.6]);
    assert!(bianchi_defect(&spec, &p) < 1e-7);
}

fn odd_perturbation() -> RunConfig {
    let mut cfg = RunConfig::from_toml(
        r#"
[metric]
kind = "perturbation"
n = 3
base = "euclidean"
decay = 1.0
params = { a = 0.5 }
components = [
  ["a/r + a*x1/r^2", "0", "0"],
  ["0", "a/r + a*x1/r^2", "0"],
  ["0", "0", "a/r + a*x1/r^2"],
]
"#,
    )
    .unwrap();
    cfg.output.timings = false;
    cfg
}

#[test]
fn odd_term_triggers_parity_warning() {
    let spec = odd_perturbation().metric.build().unwrap();
    let rule = sphere_rule(3, 8).unwrap();
    let rt = rt_diagnostics(&spec, &[8.0, 16.0, 32.0, 64.0], &rule).unwrap();
    assert_eq!(rt.status, DiagnosticStatus::Warn);
    let e = rt.exponent.unwrap();
    assert!((e - 1.0).abs() < 0.05, "{e}");

    let report = run(Command::Center, &odd_perturbation()).unwrap();
    assert_eq!(report.diagnostics.rt.as_ref().unwrap().status, DiagnosticStatus::Warn);

    let even = MetricSpec::schwarzschild(3, 1.0, None).unwrap();
    assert_eq!(
        rt_diagnostics(&even, &[8.0, 16.0, 32.0], &rule).unwrap().status,
        DiagnosticStatus::Pass
    );
}
