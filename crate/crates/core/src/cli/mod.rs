//! The `simes` command line.
//!
//! Exit codes: 0 success or pass, 1 usage or input error, 2 verification
//! fail, 3 exploratory fail.

pub mod config;

use std::ffi::OsString;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dependence::CorrelationMatrix;
use crate::dist::Marginal;
use crate::orderstats::{tail_event_probability_iid, Boundary};
use crate::procedures::{
    benjamini_hochberg, generalized_critical_values, generalized_simes_test, hochberg,
    simes_critical_values, simes_test, ExchangeableModel, Extreme, MaxMinCdf, PValueVector,
    TestOutcome,
};
use crate::twosample::{tn_null_distribution, tn_test_with, TwoSampleData};
use crate::verify::{self, VerificationReport};
use crate::{Error, Result};

pub use config::{parse_config, parse_config_str};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_EXPLORATORY_FAIL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "simes",
    version,
    about = "Simes-type tests, exact boundary probabilities and inequality checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical values a_j (k = 1: marginal quantiles at jα/n; k ≥ 2:
    /// exchangeable constants from the CDF of the max of k coordinates).
    Critvals(CritvalsArgs),
    /// Run a multiple testing procedure on p-values (one per line).
    Test(TestArgs),
    /// Monte Carlo check of an inequality described by a config file.
    Verify(VerifyArgs),
    /// Exact probability that iid order statistics stay above a boundary.
    Noncross(NoncrossArgs),
    /// Two-sample test based on T_n = max{i : X_(i) ≤ Y_(i)}.
    Twosample(TwosampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// uniform | normal | t | abs-normal | abs-t
    #[arg(long, default_value = "uniform")]
    pub marginal: String,
    /// Degrees of freedom for t marginals.
    #[arg(long)]
    pub nu: Option<u32>,
    /// Common correlation of the exchangeable model (k ≥ 2).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Correlation matrix file; must be equicorrelated when used for k ≥ 2.
    #[arg(long, conflicts_with = "rho")]
    pub sigma: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CritvalsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcedureArg {
    Simes,
    Hochberg,
    Bh,
    Gsimes,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// P-value file; standard input when absent or `-`.
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProcedureArg::Simes)]
    pub procedure: ProcedureArg,
    #[arg(long)]
    pub alpha: f64,
    /// Generalized Simes: reject when at least k order statistics cross.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write a machine-readable report to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's replication count.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Override the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct NoncrossArgs {
    /// `simes` (with --n and --alpha) or a boundary file.
    #[arg(long)]
    pub boundary: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Marginal of the iid variables; the boundary is on this scale.
    #[arg(long, default_value = "uniform")]
    pub marginal: String,
    #[arg(long)]
    pub nu: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TwosampleArgs {
    /// Sample from F, one value per line.
    #[arg(long)]
    pub x: PathBuf,
    /// Sample from G, one value per line.
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    /// Include the full null pmf of T_n.
    #[arg(long)]
    pub pmf: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn metrics(pairs: Vec<(&str, String)>) -> Self {
        Table {
            header: vec!["metric", "value"],
            rows: pairs
                .into_iter()
                .map(|(k, v)| vec![k.to_string(), v])
                .collect(),
        }
    }

    fn thresholds(start: usize, values: &[f64]) -> Self {
        Table {
            header: vec!["j", "threshold"],
            rows: values
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(start + i).to_string(), v.to_string()])
                .collect(),
        }
    }
}

fn render(format: Format, json: &impl Serialize, table: Table) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(json)
                .map_err(|e| Error::Parse(format!("cannot serialize report: {e}")))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Parse(format!("cannot write csv: {e}"));
            w.write_record(&table.header).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::Parse(format!("cannot write csv: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn read_numbers(path: &Path, reader: impl BufRead) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        v.push(t.parse::<f64>().map_err(|_| {
            Error::Parse(format!(
                "{}:{}: expected a number, got '{t}'",
                path.display(),
                i + 1
            ))
        })?);
    }
    Ok(v)
}

fn read_number_file(path: &Path) -> Result<Vec<f64>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_numbers(path, std::io::BufReader::new(f))
}

fn marginal(name: &str, nu: Option<u32>) -> Result<Marginal> {
    let m = Marginal::parse(name, nu)?;
    if nu.is_some() && m.nu().is_none() {
        return Err(Error::InvalidModel(format!(
            "--nu does not apply to marginal '{name}'"
        )));
    }
    Ok(m)
}

impl ModelArgs {
    fn marginal(&self) -> Result<Marginal> {
        marginal(&self.marginal, self.nu)
    }

    fn rho(&self) -> Result<Option<f64>> {
        match (&self.sigma, self.rho) {
            (Some(path), _) => {
                let s = CorrelationMatrix::read(path)?;
                s.common_correlation().map(Some).ok_or_else(|| {
                    Error::Precondition(format!("{} is not equicorrelated", path.display()))
                })
            }
            (None, rho) => Ok(rho),
        }
    }

    /// Boundary `a_k..a_n` for the lower tail.
    fn boundary(&self, n: usize, k: usize, alpha: f64) -> Result<(Boundary, Marginal)> {
        let m = self.marginal()?;
        if k == 1 {
            return Ok((simes_critical_values(n, alpha, m)?, m));
        }
        let rho = self.rho()?.unwrap_or(0.0);
        let model = match m {
            Marginal::Normal => ExchangeableModel::EquicorrelatedNormal { rho },
            Marginal::AbsNormal => ExchangeableModel::EquicorrelatedAbsNormal { rho },
            Marginal::StudentT { nu } => ExchangeableModel::EquicorrelatedT { rho, nu },
            Marginal::AbsStudentT { nu } => ExchangeableModel::EquicorrelatedAbsT { rho, nu },
            Marginal::Uniform => {
                return Err(Error::InvalidModel(
                    "k ≥ 2 needs --marginal normal|t|abs-normal|abs-t".into(),
                ))
            }
        };
        let fk = MaxMinCdf::new(k as u32, Extreme::Max, model)?;
        Ok((generalized_critical_values(n, k, alpha, &fk)?, m))
    }
}

#[derive(Serialize)]
struct CritvalsReport {
    n: usize,
    k: usize,
    alpha: f64,
    marginal: Marginal,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    /// `a_k..a_n`.
    thresholds: Vec<f64>,
}

fn critvals(args: &CritvalsArgs, stdout: &mut dyn Write) -> Result<i32> {
    let (b, m) = args.model.boundary(args.n, args.k, args.alpha)?;
    let report = CritvalsReport {
        n: args.n,
        k: args.k,
        alpha: args.alpha,
        marginal: m,
        rho: if args.k > 1 {
            args.model.rho()?.or(Some(0.0))
        } else {
            None
        },
        thresholds: b.constants().to_vec(),
    };
    let text = render(
        args.output.format,
        &report,
        Table::thresholds(args.k, b.constants()),
    )?;
    emit(args.output.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

fn p_to_statistic(p: f64, m: Marginal) -> Result<f64> {
    if p <= 0.0 {
        Ok(f64::NEG_INFINITY)
    } else if p >= 1.0 {
        Ok(f64::INFINITY)
    } else {
        m.quantile(p)
    }
}

fn run_test(args: &TestArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<i32> {
    let values = match args.input.as_deref() {
        Some(p) if p != Path::new("-") => read_number_file(p)?,
        _ => read_numbers(Path::new("<stdin>"), std::io::BufReader::new(stdin))?,
    };
    let p = PValueVector::new(values)?;
    if args.k != 1 && args.procedure != ProcedureArg::Gsimes {
        return Err(Error::InvalidModel(
            "--k applies to --procedure gsimes only".into(),
        ));
    }
    let outcome: TestOutcome = match args.procedure {
        ProcedureArg::Simes => simes_test(&p, args.alpha)?,
        ProcedureArg::Hochberg => hochberg(&p, args.alpha)?,
        ProcedureArg::Bh => benjamini_hochberg(&p, args.alpha)?,
        ProcedureArg::Gsimes => {
            let (b, m) = args.model.boundary(p.len(), args.k, args.alpha)?;
            let x = p
                .values()
                .iter()
                .map(|&v| p_to_statistic(v, m))
                .collect::<Result<Vec<_>>>()?;
            let mut o = generalized_simes_test(&x, &b)?;
            o.level = Some(args.alpha);
            o
        }
    };
    let verdict = if outcome.reject_global {
        "reject"
    } else {
        "retain"
    };
    let mut line = format!(
        "{verdict}: {:?} at level {} on {} hypotheses",
        outcome.procedure, args.alpha, outcome.n
    );
    if !outcome.rejected.is_empty() {
        let ids: Vec<String> = outcome.rejected.iter().map(|i| i.to_string()).collect();
        line.push_str(&format!("; rejected {}", ids.join(",")));
    }
    line.push('\n');
    stdout
        .write_all(line.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))?;
    if let Some(out) = &args.out {
        let text = render(
            args.format,
            &outcome,
            Table::thresholds(1, &outcome.thresholds),
        )?;
        emit(Some(out), &text, stdout)?;
    }
    Ok(EXIT_OK)
}

fn verification_table(r: &VerificationReport) -> Table {
    let mut m = vec![
        ("check", format!("{:?}", r.check)),
        ("exploratory", r.exploratory.to_string()),
        ("estimate", r.estimate.to_string()),
        ("bound", r.bound.to_string()),
        ("std_error", r.std_error.to_string()),
        (
            "z_margin",
            r.z_margin.map_or(String::new(), |z| z.to_string()),
        ),
        ("pass", r.pass.to_string()),
        ("rejection_rate", r.rejection_rate.to_string()),
        ("accepted", r.accepted.to_string()),
        ("reps", r.config.reps.to_string()),
        ("seed", r.config.seed.to_string()),
    ];
    if let Some(p) = r.independent_exact {
        m.push(("independent_exact", p.to_string()));
    }
    m.push(("wall_time_seconds", r.wall_time_seconds.to_string()));
    Table::metrics(m)
}

fn run_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut config = parse_config(&args.config)?;
    if let Some(r) = args.reps {
        config.reps = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    let report = verify::verify(&config)?;
    let text = render(args.output.format, &report, verification_table(&report))?;
    emit(args.output.out.as_deref(), &text, stdout)?;
    Ok(match (report.pass, report.exploratory) {
        (true, _) => EXIT_OK,
        (false, false) => EXIT_FAIL,
        (false, true) => EXIT_EXPLORATORY_FAIL,
    })
}

#[derive(Serialize)]
struct NoncrossReport {
    n: usize,
    k: usize,
    marginal: Marginal,
    probability: f64,
}

fn noncross(args: &NoncrossArgs, stdout: &mut dyn Write) -> Result<i32> {
    let m = marginal(&args.marginal, args.nu)?;
    let boundary = if args.boundary == "simes" {
        let (Some(n), Some(alpha)) = (args.n, args.alpha) else {
            return Err(Error::InvalidModel(
                "--boundary simes needs --n <N> and --alpha <ALPHA>".into(),
            ));
        };
        simes_critical_values(n, alpha, m)?
    } else {
        Boundary::read(Path::new(&args.boundary))?
    };
    let probability = tail_event_probability_iid(&boundary, |x| m.cdf(x))?;
    let report = NoncrossReport {
        n: boundary.n(),
        k: boundary.start(),
        marginal: m,
        probability,
    };
    let table = Table::metrics(vec![
        ("n", report.n.to_string()),
        ("k", report.k.to_string()),
        ("probability", probability.to_string()),
    ]);
    let text = render(args.output.format, &report, table)?;
    emit(args.output.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

fn twosample(args: &TwosampleArgs, stdout: &mut dyn Write) -> Result<i32> {
    let data = TwoSampleData::new(read_number_file(&args.x)?, read_number_file(&args.y)?)?;
    crate::orderstats::check_level("alpha", args.alpha)?;
    let null = tn_null_distribution(data.n())?;
    let mut outcome = tn_test_with(&data, args.alpha, &null);
    if args.pmf {
        outcome.null_pmf = Some(null.pmf());
    }
    let mut metrics = vec![
        ("n", outcome.n.to_string()),
        ("statistic", outcome.statistic.to_string()),
        ("p_value", outcome.p_value.to_string()),
        ("alpha", outcome.alpha.to_string()),
        ("reject", outcome.reject.to_string()),
    ];
    let names: Vec<String> = (0..=data.n()).map(|t| format!("pmf_{t}")).collect();
    if let Some(pmf) = &outcome.null_pmf {
        for (name, p) in names.iter().zip(pmf) {
            metrics.push((name.as_str(), p.to_string()));
        }
    }
    let text = render(args.output.format, &outcome, Table::metrics(metrics))?;
    emit(args.output.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

/// Runs a parsed command and returns its exit code.
pub fn dispatch(command: &Command, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Critvals(a) => critvals(a, stdout),
        Command::Test(a) => run_test(a, stdin, stdout),
        Command::Verify(a) => run_verify(a, stdout),
        Command::Noncross(a) => noncross(a, stdout),
        Command::Twosample(a) => twosample(a, stdout),
    }
}

/// Parses `args` (including the program name), dispatches, and reports
/// errors on `stderr`.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match dispatch(&cli.command, stdin, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}
