use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use heatlab::feynman_kac::{estimate_batch, Summand};
use heatlab::output::{csv_table, fmt_f64, write_outputs, OutputFormat};
use heatlab::simplex_weights::weight_table;
use heatlab::stable_sampler::{run_self_test, SelfTestSizes};
use heatlab::validator::{check_theorem1, check_theorem2, expansion_report, positivity_audit, BoundCheck, Fragment};
use heatlab::{CoefficientEngine, Error, McEstimate, RunConfig};

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat content coefficients and Feynman-Kac cross-checks for fractional Schrödinger operators")]
struct Cli {
    /// TOML run configuration; the built-in unit Gaussian example when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient table C_1..C_5 with every route.
    Coeffs {
        /// Also print the exact simplex weight table.
        #[arg(long)]
        weights: bool,
        #[arg(long, default_value_t = 5)]
        max_order: u32,
    },
    /// Monte Carlo heat content, one row per t.
    Mc(McArgs),
    /// First- and second-order bounds plus the positivity audit.
    Validate,
    /// Stable sampler CF, KS, Laplace and scaling suites.
    SamplerSelftest {
        /// Sample size for the CF, Laplace and scaling suites.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 100_000)]
        ks_samples: usize,
    },
    /// Expansion report: coefficients, MC rows, residuals and order fits.
    Report,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "t", value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    m_steps: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    proposal_center: Option<Vec<f64>>,
    #[arg(long)]
    proposal_sigma: Option<f64>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            e => Failure::Run(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("heatlab: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("heatlab: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::example(),
    };
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
    }
    if let Some(n) = cli.threads {
        cfg.mc.threads = n;
    }
    if let Some(d) = &cli.out {
        cfg.outputs.directory = d.display().to_string();
    }
    if let Some(f) = cli.format {
        cfg.outputs.formats = f.into();
    }
    if let Command::Mc(a) = &cli.command {
        apply_mc_overrides(&mut cfg, a);
    }
    cfg.validate()?;
    match cli.command {
        Command::Coeffs { weights, max_order } => coeffs(&cfg, weights, max_order),
        Command::Mc(_) => mc(&cfg),
        Command::Validate => validate(&cfg),
        Command::SamplerSelftest { samples, ks_samples } => selftest(&cfg, samples, ks_samples),
        Command::Report => report(&cfg),
    }
}

fn apply_mc_overrides(cfg: &mut RunConfig, a: &McArgs) {
    if let Some(x) = a.alpha {
        cfg.alpha = x;
    }
    if let Some(x) = &a.t_list {
        cfg.t_list = x.clone();
    }
    if let Some(x) = a.n_paths {
        cfg.mc.n_paths = x;
    }
    if let Some(x) = a.m_steps {
        cfg.mc.m_steps = x;
    }
    if let Some(x) = &a.proposal_center {
        cfg.mc.proposal_center = Some(x.clone());
    }
    if let Some(x) = a.proposal_sigma {
        cfg.mc.proposal_sigma = Some(x);
    }
}

fn emit<T: Serialize>(cfg: &RunConfig, stem: &str, data: &T, csv: &str) -> Result<(), Failure> {
    let dir = Path::new(&cfg.outputs.directory);
    for p in write_outputs(dir, stem, cfg.outputs.formats, &cfg.digest(), data, csv)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn coeffs(cfg: &RunConfig, weights: bool, max_order: u32) -> Outcome {
    let engine = CoefficientEngine::new(&cfg.potential(), &cfg.grid(), cfg.alpha)?;
    let table = engine.table(&format!("config {}", cfg.digest()))?;
    let rows: Vec<Vec<String>> = table
        .entries
        .iter()
        .map(|e| {
            vec![
                format!("\"{}\"", e.label),
                fmt_f64(e.value),
                e.route.as_str().to_string(),
                e.grid.map(|g| g.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let csv = csv_table(&cfg.digest(), &["label", "value", "route", "grid"], &rows);
    emit(cfg, "coefficients", &table, &csv)?;
    if weights {
        let table = weight_table(max_order, max_order as usize + 1);
        let rows: Vec<Vec<String>> = table
            .iter()
            .map(|r| vec![r.n.to_string(), r.k.to_string(), format!("\"{}\"", r.composition), r.weight.to_string()])
            .collect();
        let csv = csv_table(&cfg.digest(), &["n", "k", "composition", "weight"], &rows);
        print!("{csv}");
        emit(cfg, "weights", &table, &csv)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct McRow {
    t: f64,
    #[serde(flatten)]
    estimate: McEstimate,
    m_steps: usize,
    seed: u64,
}

fn mc(cfg: &RunConfig) -> Outcome {
    let v = cfg.potential();
    let mc = cfg.mc_config(&v)?;
    let batch = estimate_batch(std::slice::from_ref(&v), cfg.alpha, &cfg.t_list, &[Summand::HeatContent], &mc)?;
    let rows: Vec<McRow> = cfg
        .t_list
        .iter()
        .enumerate()
        .map(|(i, &t)| McRow {
            t,
            estimate: batch.get(0, i, Summand::HeatContent).clone(),
            m_steps: mc.m_steps,
            seed: mc.seed,
        })
        .collect();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t),
                fmt_f64(r.estimate.mean),
                fmt_f64(r.estimate.standard_error),
                r.estimate.n_samples.to_string(),
                r.m_steps.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    let csv = csv_table(&cfg.digest(), &["t", "mean", "se", "n", "m", "seed"], &cells);
    emit(cfg, "mc", &rows, &csv)?;
    Ok(true)
}

#[derive(Serialize)]
struct Validation {
    fragments: Vec<Fragment>,
    positivity: heatlab::validator::PositivityAudit,
    passed: bool,
}

fn bound_rows(fragment: &str, checks: &[BoundCheck]) -> Vec<Vec<String>> {
    checks
        .iter()
        .map(|c| {
            vec![
                fragment.to_string(),
                c.name.clone(),
                fmt_f64(c.t),
                fmt_f64(c.estimate),
                c.lower.map(fmt_f64).unwrap_or_default(),
                c.upper.map(fmt_f64).unwrap_or_default(),
                fmt_f64(c.standard_error),
                fmt_f64(c.se_multiple),
                fmt_f64(c.margin),
                c.passed.to_string(),
            ]
        })
        .collect()
}

const BOUND_HEADER: [&str; 10] = ["suite", "check", "t", "estimate", "lower", "upper", "se", "se_multiple", "margin", "passed"];

/// Prints failing checks to stderr as one JSON array.
fn report_failures(failures: &[serde_json::Value]) {
    if !failures.is_empty() {
        eprintln!("{}", serde_json::to_string(failures).expect("serializable"));
    }
}

fn validate(cfg: &RunConfig) -> Outcome {
    let v = cfg.potential();
    let mc = cfg.mc_config(&v)?;
    let mut fragments = vec![check_theorem1(&v, cfg.alpha, &cfg.t_list, &mc, false)?];
    if let Some(gamma) = cfg.validation.gamma {
        fragments.push(check_theorem2(&v, gamma, cfg.alpha, &cfg.t_list, &mc, cfg.validation.moment_samples)?);
    }
    let positivity = positivity_audit(&v, &cfg.grid(), cfg.alpha)?;
    let passed = fragments.iter().all(|f| f.passed) && positivity.passed;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for f in &fragments {
        rows.extend(bound_rows(f.name, &f.checks));
        failures.extend(f.checks.iter().filter(|c| !c.passed).map(|c| serde_json::json!({"suite": f.name, "check": c})));
    }
    failures.extend(positivity.checks.iter().filter(|c| !c.passed).map(|c| serde_json::json!({"suite": "positivity", "check": c})));
    let csv = csv_table(&cfg.digest(), &BOUND_HEADER, &rows);
    emit(cfg, "validate", &Validation { fragments, positivity, passed }, &csv)?;
    report_failures(&failures);
    Ok(passed)
}

fn selftest(cfg: &RunConfig, samples: usize, ks_samples: usize) -> Outcome {
    if samples < 2 || ks_samples < 2 {
        return Err(Failure::Config("sample sizes must be at least 2".into()));
    }
    let sizes = SelfTestSizes {
        cf: samples,
        ks: ks_samples,
        moment: samples,
    };
    let r = run_self_test(cfg.mc.seed, sizes)?;
    let rows: Vec<Vec<String>> = r
        .checks
        .iter()
        .map(|c| vec![c.suite.to_string(), format!("\"{}\"", c.name), fmt_f64(c.statistic), fmt_f64(c.threshold), c.passed.to_string()])
        .collect();
    let csv = csv_table(&cfg.digest(), &["suite", "check", "statistic", "threshold", "passed"], &rows);
    emit(cfg, "selftest", &r, &csv)?;
    let failures: Vec<_> = r.checks.iter().filter(|c| !c.passed).map(|c| serde_json::json!(c)).collect();
    report_failures(&failures);
    Ok(r.passed)
}

#[derive(Serialize)]
struct QuadratureBias {
    t: f64,
    m: usize,
    mean_m: f64,
    mean_2m: f64,
    difference: f64,
    combined_se: f64,
}

fn report(cfg: &RunConfig) -> Outcome {
    let v = cfg.potential();
    let mc = cfg.mc_config(&v)?;
    let r = expansion_report(&v, cfg.alpha, cfg.validation.n_max, &cfg.t_list, &mc, &cfg.grid(), &cfg.digest())?;
    emit(cfg, "report", &r, &r.to_csv())?;

    // Trapezoid bias is judged empirically: rerun at twice the steps.
    let mut fine = mc.clone();
    fine.m_steps *= 2;
    let coarse = estimate_batch(std::slice::from_ref(&v), cfg.alpha, &cfg.t_list, &[Summand::HeatContent], &mc)?;
    let refined = estimate_batch(std::slice::from_ref(&v), cfg.alpha, &cfg.t_list, &[Summand::HeatContent], &fine)?;
    let bias: Vec<QuadratureBias> = cfg
        .t_list
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (a, b) = (coarse.get(0, i, Summand::HeatContent), refined.get(0, i, Summand::HeatContent));
            QuadratureBias {
                t,
                m: mc.m_steps,
                mean_m: a.mean,
                mean_2m: b.mean,
                difference: b.mean - a.mean,
                combined_se: a.standard_error.hypot(b.standard_error),
            }
        })
        .collect();
    let rows: Vec<Vec<String>> = bias
        .iter()
        .map(|b| vec![fmt_f64(b.t), b.m.to_string(), fmt_f64(b.mean_m), fmt_f64(b.mean_2m), fmt_f64(b.difference), fmt_f64(b.combined_se)])
        .collect();
    let csv = csv_table(&cfg.digest(), &["t", "m", "mean_m", "mean_2m", "difference", "combined_se"], &rows);
    emit(cfg, "quadrature_bias", &bias, &csv)?;

    let mut failures: Vec<serde_json::Value> = r
        .rows
        .iter()
        .flat_map(|row| &row.bound_checks)
        .filter(|c| !c.passed)
        .map(|c| serde_json::json!({"suite": "expansion", "check": c}))
        .collect();
    failures.extend(r.fitted_orders.values().filter(|f| !f.passed).map(|f| serde_json::json!({"suite": "order_fit", "check": f})));
    report_failures(&failures);
    Ok(r.passed)
}
