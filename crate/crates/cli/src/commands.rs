use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use pct_core::estimators::log_likelihood;
use pct_core::hypothesis::{FittedPanel, TestReport};
use pct_core::simulation::{qq_study, run_power_study, Case, NuMode, PowerRow, SimConfig, Statistic};
use pct_core::weights::WeightPlan;
use pct_core::{
    build_time_grid, make_weight, npmle, npmple, restrict_to_group, validate_dataset, Error, IcmConfig,
    PanelDataset, StepEstimate,
};

use crate::dataset::read_dataset;
use crate::error::{CliError, Result};
use crate::report::ReportFile;

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn csv_error(out: Option<&Path>, source: csv::Error) -> CliError {
    CliError::Csv {
        path: out.map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string()),
        source,
    }
}

fn load_valid(input: &Path) -> Result<PanelDataset> {
    let d = read_dataset(input)?;
    let report = validate_dataset(&d);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.is_ok() {
        return Err(CliError::Invalid(report));
    }
    Ok(d)
}

pub fn cmd_validate(input: &Path) -> Result<()> {
    let d = read_dataset(input)?;
    let report = validate_dataset(&d);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    if !report.is_ok() {
        return Err(CliError::Invalid(report));
    }
    let grid = build_time_grid(&d)?;
    println!(
        "ok: {} subjects in {} group(s) {:?}, {} observations, {} distinct times",
        d.n(),
        d.k(),
        d.group_sizes(),
        d.total_observations(),
        grid.len()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Npmle,
    Npmple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSelection {
    All,
    Group(usize),
}

impl std::str::FromStr for GroupSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(GroupSelection::All);
        }
        match s.parse::<usize>() {
            Ok(l) if l >= 1 => Ok(GroupSelection::Group(l)),
            _ => Err(format!("expected 'all' or a group number, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateArgs {
    pub input: PathBuf,
    pub method: Method,
    pub group: GroupSelection,
    pub out: Option<PathBuf>,
}

fn write_step(e: &StepEstimate, out: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    let write = |w: &mut csv::Writer<Box<dyn Write>>| -> csv::Result<()> {
        w.write_record(["time", "value"])?;
        for (t, v) in e.support().iter().zip(e.values()) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| csv_error(out, e))
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let d = load_valid(&args.input)?;
    let d = match args.group {
        GroupSelection::All => d,
        GroupSelection::Group(l) => restrict_to_group(&d, l)?,
    };
    // Diagnostics go to stderr when the estimate itself goes to stdout.
    let info = |line: String| {
        if args.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    match args.method {
        Method::Npmple => {
            let e = npmple(&d)?;
            write_step(&e, args.out.as_deref())?;
            info(format!("npmple log-likelihood {:.10}", log_likelihood(&d, &e)));
            Ok(())
        }
        Method::Npmle => {
            let (e, diag) = npmle(&d, &IcmConfig::default())?;
            write_step(&e, args.out.as_deref())?;
            let pseudo = npmple(&d)?;
            info(format!(
                "npmle iterations {}, max Fenchel residual {:.3e}, converged {}",
                diag.iterations, diag.max_fenchel_residual, diag.converged
            ));
            info(format!(
                "npmle log-likelihood {:.10} (npmple {:.10})",
                diag.log_likelihood,
                log_likelihood(&d, &pseudo)
            ));
            if !diag.converged {
                eprintln!("warning: NPMLE did not converge; the best iterate was written");
                return Err(Error::NotConverged(diag).into());
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    U,
    V,
    T12,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TestKind::U => "u",
            TestKind::V => "v",
            TestKind::T12 => "t12",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TestArgs {
    pub input: PathBuf,
    pub weight: WeightPlan,
    pub stat: TestKind,
    pub alpha: f64,
    pub out: Option<PathBuf>,
}

fn method_name(r: &TestReport) -> String {
    serde_json::to_value(r.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn cmd_test(args: &TestArgs) -> Result<ReportFile> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha {} not in (0, 1)", args.alpha)));
    }
    let d = load_valid(&args.input)?;
    let k = d.k();
    match args.stat {
        TestKind::T12 if k != 2 => {
            return Err(CliError::Usage(format!("t12 needs exactly 2 groups, the dataset has {k}")))
        }
        TestKind::U | TestKind::V if k < 2 => {
            return Err(CliError::Usage(format!("chi-square tests need at least 2 groups, the dataset has {k}")))
        }
        _ => {}
    }
    let specs = args.weight.specs(k);
    if let Some(bad) = specs.iter().find(|s| s.group().is_some_and(|l| l > k)) {
        return Err(CliError::Usage(format!("weight {bad} refers to a missing group")));
    }
    let weights = specs
        .iter()
        .map(|&s| make_weight(&d, s))
        .collect::<pct_core::Result<Vec<_>>>()?;

    let icm = IcmConfig::default();
    let fit = FittedPanel::fit(&d, &icm)?;
    let mut tests = match args.stat {
        TestKind::U => vec![fit.chi2_u(&weights)?],
        TestKind::V => vec![fit.chi2_v(&weights)?],
        TestKind::T12 => fit.two_sample(&weights)?.to_vec(),
    };
    for r in &mut tests {
        r.weights = specs.iter().map(ToString::to_string).collect();
    }
    for r in &tests {
        let df = r.df.map(|df| format!(" df {df}")).unwrap_or_default();
        println!(
            "{}: statistic {:.6}{df} p-value {:.6} ({} at alpha {})",
            method_name(r),
            r.statistic,
            r.p_value,
            if r.p_value < args.alpha { "reject" } else { "do not reject" },
            args.alpha
        );
    }
    let report = ReportFile {
        input: args.input.display().to_string(),
        weight: args.weight.to_string(),
        stat: args.stat.to_string(),
        alpha: args.alpha,
        icm,
        tests,
    };
    if let Some(out) = &args.out {
        report.write(out)?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub case: u8,
    pub beta: f64,
    pub sizes: Vec<usize>,
    pub nu: NuMode,
    pub reps: usize,
    pub seed: u64,
    pub weights: Vec<WeightPlan>,
    pub stats: Vec<Statistic>,
    pub alpha: f64,
    pub out: Option<PathBuf>,
}

fn usage(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(m) => CliError::Usage(m),
        other => other.into(),
    }
}

pub const POWER_HEADER: [&str; 14] = [
    "case",
    "beta",
    "group_sizes",
    "nu",
    "alpha",
    "seed",
    "replications",
    "statistic",
    "weight",
    "rejections",
    "valid",
    "failures",
    "rejection_rate",
    "suspect",
];

fn power_record(r: &PowerRow) -> Vec<String> {
    let sizes: Vec<String> = r.group_sizes.iter().map(ToString::to_string).collect();
    vec![
        match r.case {
            Case::One => "1".into(),
            Case::Two => "2".into(),
        },
        r.beta.to_string(),
        sizes.join(";"),
        match r.nu_mode {
            NuMode::FixedOne => "fixed".into(),
            NuMode::Gamma2Half => "gamma".into(),
        },
        r.alpha.to_string(),
        r.seed.to_string(),
        r.replications.to_string(),
        r.statistic.to_string(),
        r.weight.clone(),
        r.rejections.to_string(),
        r.valid.to_string(),
        r.failures.to_string(),
        r.rejection_rate.to_string(),
        r.suspect.to_string(),
    ]
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PowerRow>> {
    let case = Case::try_from(args.case).map_err(usage)?;
    if args.weights.is_empty() || args.stats.is_empty() {
        return Err(CliError::Usage("need at least one weight and one statistic".into()));
    }
    let cfg = SimConfig {
        case,
        beta: args.beta,
        group_sizes: args.sizes.clone(),
        nu_mode: args.nu,
        replications: args.reps,
        seed: args.seed,
        weights: args.weights.clone(),
        statistics: args.stats.clone(),
        alpha: args.alpha,
        icm: IcmConfig::default(),
    };
    cfg.validate().map_err(usage)?;
    let rows = run_power_study(std::slice::from_ref(&cfg)).map_err(usage)?;
    for r in rows.iter().filter(|r| r.suspect) {
        eprintln!(
            "warning: {} with {}: {} of {} replications failed",
            r.statistic, r.weight, r.failures, r.replications
        );
    }
    let out = args.out.as_deref();
    let mut w = csv::Writer::from_writer(sink(out)?);
    let mut write = || -> csv::Result<()> {
        w.write_record(POWER_HEADER)?;
        for r in &rows {
            w.write_record(power_record(r))?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(out, e))?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct QqArgs {
    /// Total sample size, split evenly between the two groups.
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn cmd_qq(args: &QqArgs) -> Result<Vec<(f64, f64)>> {
    if args.n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    let n1 = args.n / 2;
    let mut cfg = SimConfig::two_sample(Case::One, 0.0, n1, args.n - n1, NuMode::FixedOne);
    cfg.replications = args.reps;
    cfg.seed = args.seed;
    let rows = qq_study(&cfg, Statistic::T2).map_err(usage)?;
    let out = args.out.as_deref();
    let mut w = csv::Writer::from_writer(sink(out)?);
    let mut write = || -> csv::Result<()> {
        w.write_record(["theoretical", "empirical"])?;
        for (q, v) in &rows {
            w.write_record([q.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(out, e))?;
    Ok(rows)
}
