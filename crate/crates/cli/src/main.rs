//! `meixner`: batch front end for the last-passage evaluators.
//!
//! Records go to stdout as JSON Lines (or CSV with `--csv`), diagnostics to
//! stderr. Exit status is 0 when every cross-check agrees, 2 when one
//! disagrees and 1 on usage or runtime errors.

mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meixner::detformulas::{joint_cdf_capped, transition_det, CdfQuery, TransitionQuery};
use meixner::fredholm::KernelVariant;
use meixner::lpp::{OrderedVector, DEFAULT_MAX_STATES};
use meixner::report::{
    crosscheck, run_method, CdfParams, CdfReport, CrosscheckConfig, JointReport, Method, Record, TransitionReport,
    ValueReport,
};
use meixner::scalar::{format_rational, rational_to_f64};
use meixner::weights::{ContourConfig, GeometricParameter};

use output::Sink;

const MAX_STATES_VAR: &str = "MEIXNER_MAX_STATES";

#[derive(Parser)]
#[command(name = "meixner", version, about = "Distribution of geometric last-passage times, computed several ways")]
struct Cli {
    /// Emit CSV instead of JSON Lines.
    #[arg(long, global = true)]
    csv: bool,
    /// Include per-method wall-clock times (makes output run-dependent).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimates of P[G(m,n) <= eta], checked against the determinant formula.
    Simulate(SimulateArgs),
    /// Finite-difference determinant (exact).
    CdfDet(CdfArgs),
    /// Meixner ensemble sum (exact when small, high-precision Gram ratio otherwise).
    CdfMeixner(MeixnerArgs),
    /// Biorthogonal n x n determinant (quadrature).
    CdfBiorth(QuadArgs),
    /// Fredholm determinant of the contour-integral kernel (quadrature).
    CdfFredholm(FredholmArgs),
    /// Runs several methods and reports pairwise agreement.
    Crosscheck(CrosscheckArgs),
    /// Multi-step transition probability of the row-vector chain (exact).
    Transition(TransitionArgs),
    /// P[G(m,m) <= eta1, G(n,n) <= eta2] from the truncated double sum (exact).
    Joint(JointArgs),
}

fn parse_q(s: &str) -> Result<GeometricParameter, String> {
    GeometricParameter::parse(s).map_err(|e| e.to_string())
}

fn parse_vector(s: &str) -> Result<OrderedVector, String> {
    OrderedVector::parse(s).map_err(|e| e.to_string())
}

#[derive(Args, Clone)]
struct CdfArgs {
    /// Geometric parameter as an exact rational, e.g. 1/2.
    #[arg(long, default_value = "1/2", value_parser = parse_q)]
    q: GeometricParameter,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, allow_hyphen_values = true)]
    eta: i64,
}

impl CdfArgs {
    fn query(&self) -> meixner::Result<CdfQuery> {
        CdfQuery::new(self.q.clone(), self.m as usize, self.n as usize, self.eta)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "1/2", value_parser = parse_q)]
    q: GeometricParameter,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Comma-separated thresholds; one record per value.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    eta: Vec<i64>,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MeixnerArgs {
    #[command(flatten)]
    cdf: CdfArgs,
    /// Largest box sum evaluated term by term before switching to the Gram ratio.
    #[arg(long, default_value_t = meixner::meixner::DEFAULT_MAX_TERMS)]
    max_terms: u128,
    /// Decimal digits for the Gram ratio.
    #[arg(long, default_value_t = meixner::meixner::DEFAULT_DIGITS)]
    digits: u32,
}

#[derive(Args, Clone, Default)]
struct ContourArgs {
    /// Inner radius, in (1, r1).
    #[arg(long)]
    r2: Option<f64>,
    /// Outer radius, in (r2, 1/q).
    #[arg(long)]
    r1: Option<f64>,
    /// Initial quadrature nodes per circle.
    #[arg(long)]
    nodes: Option<usize>,
}

impl ContourArgs {
    fn config(&self, q: &GeometricParameter) -> meixner::Result<Option<ContourConfig>> {
        if self.r2.is_none() && self.r1.is_none() && self.nodes.is_none() {
            return Ok(None);
        }
        let d = ContourConfig::default_for(q);
        ContourConfig::new(q, self.r2.unwrap_or(d.r2), self.r1.unwrap_or(d.r1), self.nodes.unwrap_or(d.nodes)).map(Some)
    }
}

#[derive(Args)]
struct QuadArgs {
    #[command(flatten)]
    cdf: CdfArgs,
    #[command(flatten)]
    contour: ContourArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Derivation,
    Printed,
}

impl From<VariantArg> for KernelVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Derivation => KernelVariant::Derivation,
            VariantArg::Printed => KernelVariant::Printed,
        }
    }
}

#[derive(Args)]
struct FredholmArgs {
    #[command(flatten)]
    cdf: CdfArgs,
    #[command(flatten)]
    contour: ContourArgs,
    /// Initial truncation; doubled until the determinant settles.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    trunc: u64,
    #[arg(long, value_enum, default_value = "derivation")]
    variant: VariantArg,
}

#[derive(Args)]
struct CrosscheckArgs {
    #[command(flatten)]
    cdf: CdfArgs,
    #[command(flatten)]
    contour: ContourArgs,
    /// Comma-separated subset of biorth, det, dp, fredholm, mc, meixner.
    #[arg(long, value_delimiter = ',', default_value = "biorth,det,dp,fredholm,mc,meixner")]
    methods: Vec<String>,
    /// Do not add dp when it is missing from --methods.
    #[arg(long)]
    no_anchor: bool,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    trunc: u64,
    #[arg(long, value_enum, default_value = "derivation")]
    variant: VariantArg,
}

#[derive(Args)]
struct TransitionArgs {
    #[arg(long, default_value = "1/2", value_parser = parse_q)]
    q: GeometricParameter,
    #[arg(long, default_value_t = 1)]
    steps: usize,
    /// Start state, comma-separated and weakly increasing.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    x: OrderedVector,
    /// End state, comma-separated and weakly increasing.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    y: OrderedVector,
}

#[derive(Args)]
struct JointArgs {
    #[arg(long, default_value = "1/2", value_parser = parse_q)]
    q: GeometricParameter,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    eta1: i64,
    #[arg(long, allow_hyphen_values = true)]
    eta2: i64,
    /// Largest coordinate summed over; defaults to max(eta1, eta2) + 10.
    #[arg(long)]
    truncation: Option<i64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<meixner::Error> for Failure {
    fn from(e: meixner::Error) -> Self {
        match e {
            meixner::Error::InvalidParameter(_) | meixner::Error::Unordered(_) | meixner::Error::LengthMismatch(..) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn max_states() -> Result<u128, Failure> {
    match std::env::var(MAX_STATES_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{MAX_STATES_VAR} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_MAX_STATES),
    }
}

fn base_config() -> Result<CrosscheckConfig, Failure> {
    Ok(CrosscheckConfig {
        max_states: max_states()?,
        ..CrosscheckConfig::default()
    })
}

/// Emits a single-method record; a failed method is a runtime error.
fn single(sink: &mut Sink, method: Method, cq: &CdfQuery, cfg: &CrosscheckConfig) -> Result<bool, Failure> {
    let entry = run_method(method, cq, cfg);
    let failed = entry.error.clone();
    sink.emit(&Record::Value(ValueReport {
        params: CdfParams::of(cq),
        entry,
    }))?;
    match failed {
        Some(e) => Err(Failure::Runtime(format!("{method}: {e}"))),
        None => Ok(true),
    }
}

/// Runs the command; `Ok(false)` means a cross-check disagreed.
fn run(command: Command, sink: &mut Sink) -> Result<bool, Failure> {
    match command {
        Command::Simulate(a) => {
            let mut cfg = base_config()?;
            cfg.samples = a.samples;
            cfg.seed = a.seed;
            let mut all = true;
            for &eta in &a.eta {
                let cq = CdfQuery::new(a.q.clone(), a.m as usize, a.n as usize, eta)?;
                let report = crosscheck(&cq, &[Method::Det, Method::Mc], &cfg)?;
                all &= emit_cdf(sink, report)?;
            }
            Ok(all)
        }
        Command::CdfDet(a) => single(sink, Method::Det, &a.query()?, &base_config()?),
        Command::CdfMeixner(a) => {
            let cfg = CrosscheckConfig {
                meixner_max_terms: a.max_terms,
                meixner_digits: a.digits,
                ..base_config()?
            };
            single(sink, Method::Meixner, &a.cdf.query()?, &cfg)
        }
        Command::CdfBiorth(a) => {
            let cfg = CrosscheckConfig {
                contour: a.contour.config(&a.cdf.q)?,
                ..base_config()?
            };
            single(sink, Method::Biorth, &a.cdf.query()?, &cfg)
        }
        Command::CdfFredholm(a) => {
            let cfg = CrosscheckConfig {
                contour: a.contour.config(&a.cdf.q)?,
                trunc: a.trunc as usize,
                variant: a.variant.into(),
                ..base_config()?
            };
            single(sink, Method::Fredholm, &a.cdf.query()?, &cfg)
        }
        Command::Crosscheck(a) => {
            let mut methods = a
                .methods
                .iter()
                .map(|s| s.parse::<Method>())
                .collect::<meixner::Result<Vec<_>>>()?;
            if !a.no_anchor && !methods.contains(&Method::Dp) {
                methods.push(Method::Dp);
            }
            let cfg = CrosscheckConfig {
                samples: a.samples,
                seed: a.seed,
                trunc: a.trunc as usize,
                variant: a.variant.into(),
                contour: a.contour.config(&a.cdf.q)?,
                ..base_config()?
            };
            let report = crosscheck(&a.cdf.query()?, &methods, &cfg)?;
            emit_cdf(sink, report)
        }
        Command::Transition(a) => {
            let tq = TransitionQuery::new(a.q.clone(), a.steps, a.x.clone(), a.y.clone())?;
            let p = transition_det(&tq)?;
            sink.emit(&Record::Transition(TransitionReport {
                q: a.q.to_string(),
                steps: a.steps,
                x: a.x.entries().to_vec(),
                y: a.y.entries().to_vec(),
                exact: format_rational(&p),
                value: meixner::report::format_float(rational_to_f64(&p)),
            }))?;
            Ok(true)
        }
        Command::Joint(a) => {
            let truncation = a.truncation.unwrap_or(a.eta1.max(a.eta2) + 10);
            let j = joint_cdf_capped(&a.q, a.m, a.n, a.eta1, a.eta2, truncation, max_states()?)?;
            sink.emit(&Record::Joint(JointReport {
                q: a.q.to_string(),
                m: a.m,
                n: a.n,
                eta1: a.eta1,
                eta2: a.eta2,
                truncation: j.truncation,
                exact: format_rational(&j.value),
                value: meixner::report::format_float(rational_to_f64(&j.value)),
                last_increment: meixner::report::format_float(rational_to_f64(&j.last_increment)),
            }))?;
            Ok(true)
        }
    }
}

fn emit_cdf(sink: &mut Sink, report: CdfReport) -> Result<bool, Failure> {
    for e in &report.methods {
        if let Some(err) = &e.error {
            eprintln!("warning: {} failed: {err}", e.method);
        }
    }
    let agreement = report.agreement;
    if !agreement {
        eprintln!(
            "disagreement for q={} m={} n={} eta={}",
            report.params.q, report.params.m, report.params.n, report.params.eta
        );
    }
    sink.emit(&Record::Cdf(report))?;
    Ok(agreement)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut sink = Sink::stdout(cli.csv, cli.timing);
    let outcome = run(cli.command, &mut sink).and_then(|ok| sink.finish().map(|_| ok));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
