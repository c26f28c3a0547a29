use std::path::PathBuf;
use std::process::ExitCode;

use asyminv::catalog::BaseMetric;
use asyminv::charges::{ChargeKind, ChargeSpec, ConformalKilling, KernelFunction};
use asyminv::chart::ChartKind;
use asyminv::config::{MetricConfig, MetricName, RunConfig};
use asyminv::limits::FitTerms;
use asyminv::run::{render_table, run, series_csv, write_outputs, Command, RunReport, VerifyKind};
use asyminv::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Mass, center of mass and Einstein-flux charges of asymptotically flat and
/// hyperbolic metrics.
///
/// Every option overrides the matching key of the TOML config file.
/// Exit status: 0 on success, 1 when a computation failed or a check did not
/// pass, 2 on configuration errors. Set ASYMINV_THREADS to fix the number of
/// worker threads.
#[derive(Parser, Debug)]
#[command(name = "asyminv", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Classical and Ricci mass.
    Mass,
    /// Classical and Ricci center of mass (asymptotically flat metrics).
    Center,
    /// Asymptotically hyperbolic mass functional and Einstein-flux charges.
    AhMass {
        /// Kernel function: V0 or V<α>.
        #[arg(long)]
        kernel: Option<KernelFunction>,
    },
    /// Check an identity.
    Verify {
        which: Which,
        /// Conformal Killing field to test, e.g. X0, X2, dilation, inverted1 (repeatable).
        #[arg(long = "field")]
        fields: Vec<ConformalKilling>,
        /// Inner annulus radius.
        #[arg(long)]
        r0: Option<f64>,
        /// Outer annulus radius.
        #[arg(long)]
        r1: Option<f64>,
        /// Number of random points for the kernel identity.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Normalized flux at each radius of the schedule, as CSV.
    Sweep,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Which {
    Pohozaev,
    Kernel,
    Equivalence,
}

#[derive(Args, Debug)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Metric kind: euclidean, hyperbolic_polar, hyperbolic_area, schwarzschild, kottler, perturbation, expression.
    #[arg(long, global = true)]
    metric: Option<MetricName>,
    /// Dimension.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Mass parameter.
    #[arg(long, global = true, allow_hyphen_values = true)]
    m: Option<f64>,
    /// Schwarzschild center, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    /// Base metric of a perturbation.
    #[arg(long, global = true, value_parser = parse_serde::<BaseMetric>)]
    base: Option<BaseMetric>,
    /// Chart of an expression metric: cartesian, polar_geodesic, polar_area.
    #[arg(long, global = true, value_parser = parse_serde::<ChartKind>)]
    chart: Option<ChartKind>,
    /// Expression parameter, name=value (repeatable).
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Decay hint τ of a perturbation.
    #[arg(long, global = true)]
    decay: Option<f64>,
    /// Sphere quadrature degree.
    #[arg(long, global = true)]
    degree: Option<usize>,
    /// First radius of the schedule.
    #[arg(long, global = true)]
    radii_start: Option<f64>,
    /// Geometric ratio of the schedule.
    #[arg(long, global = true)]
    radii_ratio: Option<f64>,
    /// Arithmetic step of the schedule.
    #[arg(long, global = true)]
    radii_step: Option<f64>,
    /// Number of radii.
    #[arg(long, global = true)]
    radii_count: Option<usize>,
    /// Explicit radii, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Extrapolation terms: auto, single, two.
    #[arg(long, global = true, value_parser = parse_serde::<FitTerms>)]
    fit_terms: Option<FitTerms>,
    /// Known leading decay exponent of the flux.
    #[arg(long, global = true)]
    sigma_hint: Option<f64>,
    /// Absolute tolerance of identity checks
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    /// Relative tolerance of identity checks and charge comparisons
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Seed for sampled points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report.json and per-charge CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave wall-clock timings out of the report.
    #[arg(long, global = true)]
    no_timings: bool,
    /// Print the JSON report instead of the table.
    #[arg(long, global = true)]
    json: bool,
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s)).map_err(|e| e.to_string())
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((k.trim().to_string(), v))
}

fn build_config(o: &Overrides) -> Result<RunConfig, Error> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let kind = o
                .metric
                .ok_or_else(|| Error::Config("no --config file and no --metric given".into()))?;
            let n = o.n.ok_or_else(|| Error::Config("--n is required without a config file".into()))?;
            RunConfig::new(MetricConfig::new(kind, n))
        }
    };
    let m = &mut cfg.metric;
    if let Some(kind) = o.metric {
        m.kind = kind;
    }
    if let Some(n) = o.n {
        m.n = n;
    }
    if o.m.is_some() {
        m.m = o.m;
    }
    if o.center.is_some() {
        m.center = o.center.clone();
    }
    if o.base.is_some() {
        m.base = o.base;
    }
    if o.chart.is_some() {
        m.chart = o.chart;
    }
    if o.decay.is_some() {
        m.decay = o.decay;
    }
    for (k, v) in &o.params {
        m.params.insert(k.clone(), *v);
    }
    if let Some(d) = o.degree {
        cfg.quadrature.degree = d;
        cfg.verify.degree = d;
    }
    let r = &mut cfg.radii;
    if o.radii.is_some() {
        *r = Default::default();
        r.values = o.radii.clone();
    }
    if o.radii_start.is_some() {
        r.start = o.radii_start;
    }
    if o.radii_ratio.is_some() {
        r.ratio = o.radii_ratio;
        r.step = None;
    }
    if o.radii_step.is_some() {
        r.step = o.radii_step;
        r.ratio = None;
    }
    if o.radii_count.is_some() {
        r.count = o.radii_count;
    }
    if let Some(t) = o.fit_terms {
        cfg.fit.terms = t;
    }
    if o.sigma_hint.is_some() {
        cfg.fit.sigma_hint = o.sigma_hint;
    }
    if let Some(t) = o.abs_tol {
        cfg.tolerances.abs_tol = t;
    }
    if let Some(t) = o.rel_tol {
        cfg.tolerances.rel_tol = t;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(dir) = &o.out {
        cfg.output.dir = Some(dir.display().to_string());
    }
    if o.no_timings {
        cfg.output.timings = false;
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("ASYMINV_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("ASYMINV_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn execute(cli: Cli) -> Result<(Command, RunReport, bool), Error> {
    configure_threads()?;
    let mut cfg = build_config(&cli.opts)?;
    let command = match cli.command {
        Cmd::Mass => Command::Mass,
        Cmd::Center => Command::Center,
        Cmd::AhMass { kernel } => {
            if let Some(k) = kernel {
                cfg.charges = vec![ChargeSpec::new(ChargeKind::AhMass { kernel: k })];
                match k {
                    KernelFunction::AhV0 => cfg.charges.push(ChargeSpec::new(ChargeKind::AhRicci { index: 0 })),
                    KernelFunction::AhValpha(i) => {
                        cfg.charges.push(ChargeSpec::new(ChargeKind::AhRicci { index: i }))
                    }
                    _ => {}
                }
            }
            Command::AhMass
        }
        Cmd::Verify {
            which,
            fields,
            r0,
            r1,
            points,
        } => {
            if !fields.is_empty() {
                cfg.verify.fields = Some(fields);
            }
            if r0.is_some() {
                cfg.verify.r0 = r0;
            }
            if r1.is_some() {
                cfg.verify.r1 = r1;
            }
            if let Some(p) = points {
                cfg.verify.points = p;
            }
            Command::Verify(match which {
                Which::Pohozaev => VerifyKind::Pohozaev,
                Which::Kernel => VerifyKind::Kernel,
                Which::Equivalence => VerifyKind::Equivalence,
            })
        }
        Cmd::Sweep => Command::Sweep,
    };
    let report = run(command, &cfg)?;
    if let Some(dir) = &cfg.output.dir {
        write_outputs(&report, dir.as_ref())?;
    }
    Ok((command, report, cli.opts.json))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, report, json) = match execute(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 });
        }
    };
    if json {
        print!("{}", report.to_json());
    } else if command == Command::Sweep {
        for c in &report.charges {
            match &c.error {
                Some(e) => eprintln!("{}: {e}", c.name),
                None => print!("# {}\n{}", c.name, series_csv(&c.samples)),
            }
        }
    } else {
        print!("{}", render_table(&report));
    }
    let failed = match command {
        Command::Verify(_) => !report.all_verdicts_pass(),
        _ => report.any_charge_failed(),
    };
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
