//! Command-line front end. Every subcommand only assembles a plan or loads
//! data and hands it to the library.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;

use crate::detector;
use crate::error::{Error, Result};
use crate::experiments::{self, format_number, ExperimentKind, Executor, OutputFormat, SweepParam, TrialPlan};
use crate::matrices::scm;
use crate::matrix::ComplexMatrix;
use crate::models::{channel_power_from_snr_db, generate_received, Hypothesis, Scenario, SignalLaw};
use crate::rmt::mp_support;

/// Environment variable consulted for the worker count when neither a flag
/// nor the config file sets one.
pub const THREADS_ENV: &str = "RMT_DETECT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rmt-detect", version, about = "Random-matrix signal detection for large antenna arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pooled eigenvalue histogram against the Marchenko-Pastur density
    Esd(ExperimentArgs),
    /// Top eigenvalues of the received, surrogate and spiked Wishart matrices
    EigCompare(ExperimentArgs),
    /// Distribution of the GLRT statistic under both hypotheses
    GlrtDist(ExperimentArgs),
    /// Theoretical and empirical miss probability over an SNR grid
    MissProb(ExperimentArgs),
    /// ROC curves from shared statistic pools
    Roc(ExperimentArgs),
    /// Run the detector on a received-samples CSV file
    Detect(DetectArgs),
    /// Print the Marchenko-Pastur support edges and mass at zero
    MpLaw(MpLawArgs),
    /// Draw one received matrix and write it as a samples CSV file
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalArg {
    Binary,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisArg {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Antenna count P
    #[arg(long)]
    pub antennas: Option<usize>,
    /// Sample count N
    #[arg(long)]
    pub samples: Option<usize>,
    /// Channel taps L
    #[arg(long)]
    pub taps: Option<usize>,
    /// SNR in dB, 10 log10(L σ²)
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Per-tap channel power σ² (linear); overrides --snr-db
    #[arg(long)]
    pub channel_power: Option<f64>,
    /// Transmit symbol distribution
    #[arg(long, value_enum)]
    pub signal: Option<SignalArg>,
    /// Hypothesis to simulate
    #[arg(long, value_enum)]
    pub hypothesis: Option<HypothesisArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Flat JSON object with default values for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; inferred from the --out extension when absent
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Monte Carlo trials per sweep point
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads, 0 for one per core
    #[arg(long)]
    pub threads: Option<usize>,
    /// Master seed (64-bit)
    #[arg(long)]
    pub seed: Option<u64>,
    /// False-alarm probability target, in (0, 1)
    #[arg(long)]
    pub pfa: Option<f64>,
    /// Histogram bins; Freedman-Diaconis when absent
    #[arg(long)]
    pub bins: Option<usize>,
    /// Sample counts N to sweep, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub sweep_samples: Option<Vec<f64>>,
    /// SNR values to sweep in dB, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sweep_snr_db: Option<Vec<f64>>,
    /// False-alarm probabilities to sweep, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub sweep_pfa: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Samples CSV: one row per antenna, interleaved real,imaginary pairs
    #[arg(long)]
    pub input: PathBuf,
    /// False-alarm probability target, in (0, 1)
    #[arg(long, default_value_t = 0.05)]
    pub pfa: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MpLawArgs {
    /// Aspect ratio c = P/N
    #[arg(long)]
    pub c: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Seed (64-bit)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Keys accepted in a config file; same names as the long flags with
/// underscores.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub antennas: Option<usize>,
    pub samples: Option<usize>,
    pub taps: Option<usize>,
    pub snr_db: Option<f64>,
    pub channel_power: Option<f64>,
    pub signal: Option<SignalArg>,
    pub hypothesis: Option<HypothesisArg>,
    pub out: Option<PathBuf>,
    pub format: Option<FormatArg>,
    pub trials: Option<usize>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub pfa: Option<f64>,
    pub bins: Option<usize>,
    pub sweep_samples: Option<Vec<f64>>,
    pub sweep_snr_db: Option<Vec<f64>>,
    pub sweep_pfa: Option<Vec<f64>>,
}

/// Error split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

pub fn load_config(path: &Path) -> std::result::Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed config file {}: {e}", path.display())))
}

impl ExperimentArgs {
    /// Flags win over config values.
    pub fn merged(&self) -> std::result::Result<ExperimentArgs, CliError> {
        let cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => ConfigFile::default(),
        };
        let s = &self.scenario;
        Ok(ExperimentArgs {
            scenario: ScenarioArgs {
                antennas: s.antennas.or(cfg.antennas),
                samples: s.samples.or(cfg.samples),
                taps: s.taps.or(cfg.taps),
                snr_db: s.snr_db.or(cfg.snr_db),
                channel_power: s.channel_power.or(cfg.channel_power),
                signal: s.signal.or(cfg.signal),
                hypothesis: s.hypothesis.or(cfg.hypothesis),
            },
            config: self.config.clone(),
            out: self.out.clone().or(cfg.out),
            format: self.format.or(cfg.format),
            trials: self.trials.or(cfg.trials),
            threads: self.threads.or(cfg.threads),
            seed: self.seed.or(cfg.seed),
            pfa: self.pfa.or(cfg.pfa),
            bins: self.bins.or(cfg.bins),
            sweep_samples: self.sweep_samples.clone().or(cfg.sweep_samples),
            sweep_snr_db: self.sweep_snr_db.clone().or(cfg.sweep_snr_db),
            sweep_pfa: self.sweep_pfa.clone().or(cfg.sweep_pfa),
        })
    }
}

struct Defaults {
    hypothesis: Hypothesis,
    taps: usize,
    snr_db: f64,
}

fn defaults(kind: ExperimentKind) -> Defaults {
    match kind {
        ExperimentKind::EsdOverlay => Defaults {
            hypothesis: Hypothesis::H0,
            taps: 10,
            snr_db: -10.0,
        },
        ExperimentKind::EigComparison => Defaults {
            hypothesis: Hypothesis::H1,
            taps: 10,
            snr_db: -10.0,
        },
        ExperimentKind::GlrtDistribution | ExperimentKind::MissProbSweep => Defaults {
            hypothesis: Hypothesis::H1,
            taps: 10,
            snr_db: -15.5,
        },
        ExperimentKind::Roc => Defaults {
            hypothesis: Hypothesis::H1,
            taps: 1,
            snr_db: -16.0,
        },
    }
}

fn scenario_from(args: &ScenarioArgs, d: &Defaults, seed: u64) -> Scenario {
    let taps = args.taps.unwrap_or(d.taps);
    let channel_power = args
        .channel_power
        .unwrap_or_else(|| channel_power_from_snr_db(args.snr_db.unwrap_or(d.snr_db), taps));
    let hypothesis = match args.hypothesis {
        Some(HypothesisArg::H0) => Hypothesis::H0,
        Some(HypothesisArg::H1) => Hypothesis::H1,
        None => d.hypothesis,
    };
    Scenario {
        antennas: args.antennas.unwrap_or(256),
        samples: args.samples.unwrap_or(512),
        taps,
        channel_power,
        signal_law: match args.signal {
            Some(SignalArg::Gaussian) => SignalLaw::Gaussian,
            _ => SignalLaw::Binary,
        },
        hypothesis,
        seed,
    }
}

/// Plan described by merged arguments.
pub fn build_plan(kind: ExperimentKind, args: &ExperimentArgs) -> Result<TrialPlan> {
    let seed = args.seed.unwrap_or(0);
    let base = scenario_from(&args.scenario, &defaults(kind), 0);
    let mut plan = TrialPlan::new(base, args.trials.unwrap_or(kind.default_trials()), seed)
        .with_p_fa(args.pfa.unwrap_or(0.05))
        .with_bins(args.bins);
    for (param, values) in [
        (SweepParam::Samples, &args.sweep_samples),
        (SweepParam::SnrDb, &args.sweep_snr_db),
        (SweepParam::PFa, &args.sweep_pfa),
    ] {
        if let Some(v) = values {
            plan = plan.with_sweep(param, v.clone());
        }
    }
    plan.validate()?;
    Ok(plan)
}

/// Flag, then config, then [`THREADS_ENV`], then automatic.
fn thread_count(args: &ExperimentArgs) -> std::result::Result<usize, CliError> {
    if let Some(t) = args.threads {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn run_experiment(kind: ExperimentKind, args: &ExperimentArgs, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    let args = args.merged()?;
    let plan = build_plan(kind, &args).map_err(|e| CliError::Usage(e.to_string()))?;
    let exec = Executor::new(thread_count(&args)?)?;
    let result = experiments::run(kind, &plan, &exec)?;
    let chosen = args.format.map(|f| match f {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    });
    match &args.out {
        Some(path) => {
            let format = chosen
                .or_else(|| OutputFormat::from_path(path))
                .unwrap_or(OutputFormat::Csv);
            experiments::write_result(&result, path, format)?;
        }
        None => match chosen.unwrap_or(OutputFormat::Json) {
            OutputFormat::Csv => experiments::write_csv(&result, &mut *stdout)?,
            OutputFormat::Json => experiments::write_json(&result, &mut *stdout)?,
        },
    }
    Ok(())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a `P x N` complex matrix: one row per antenna, `2N` comma-separated
/// numbers per row as interleaved real and imaginary parts. A first line
/// whose first field is not a number is taken as a header.
pub fn read_samples_csv(path: &Path) -> Result<ComplexMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut width = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() % 2 != 0 {
            return Err(parse_error(path, line, format!("odd field count {}", record.len())));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_error(path, line, format!("{} fields, expected {w}", record.len())));
            }
            _ => {}
        }
        let mut values = Vec::with_capacity(record.len());
        for (k, field) in record.iter().enumerate() {
            let v = field
                .parse::<f64>()
                .map_err(|_| parse_error(path, line, format!("field {} is not a number: {field:?}", k + 1)))?;
            values.push(v);
        }
        data.extend(values.chunks(2).map(|p| Complex64::new(p[0], p[1])));
        rows += 1;
    }
    let width = match width {
        Some(w) if w > 0 => w,
        _ => return Err(parse_error(path, 0, "no sample rows")),
    };
    ComplexMatrix::from_vec(rows, width / 2, data)
}

/// Writes `x` in the format read by [`read_samples_csv`], without a header.
pub fn write_samples_csv<W: Write>(x: &ComplexMatrix, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    for i in 0..x.rows() {
        let fields = x.row(i).iter().flat_map(|z| [format_number(z.re), format_number(z.im)]);
        w.write_record(fields)
            .map_err(|e| Error::invalid(format!("CSV write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::invalid(format!("CSV write failed: {e}")))
}

/// Detector verdict on a samples file; `P` and `N` come from its shape.
pub fn detect_file(path: &Path, p_fa: f64) -> Result<detector::DetectionOutcome> {
    let x = read_samples_csv(path)?;
    let c = x.rows() as f64 / x.cols() as f64;
    detector::detect_matrix(&scm(&x)?, p_fa, c)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Runtime(Error::io("<stdout>", e));
    match cli.command {
        Command::Esd(a) => run_experiment(ExperimentKind::EsdOverlay, &a, stdout),
        Command::EigCompare(a) => run_experiment(ExperimentKind::EigComparison, &a, stdout),
        Command::GlrtDist(a) => run_experiment(ExperimentKind::GlrtDistribution, &a, stdout),
        Command::MissProb(a) => run_experiment(ExperimentKind::MissProbSweep, &a, stdout),
        Command::Roc(a) => run_experiment(ExperimentKind::Roc, &a, stdout),
        Command::Detect(a) => {
            if !(a.pfa > 0.0 && a.pfa < 1.0) {
                return Err(CliError::Usage(format!("--pfa must lie in (0, 1), got {}", a.pfa)));
            }
            let outcome = detect_file(&a.input, a.pfa)?;
            let line = serde_json::to_string(&outcome).map_err(Error::from)?;
            writeln!(stdout, "{line}").map_err(io_err)
        }
        Command::MpLaw(a) => {
            let (lo, hi, mass) = mp_support(a.c).map_err(|e| CliError::Usage(e.to_string()))?;
            writeln!(stdout, "a={lo} b={hi} mass={mass}").map_err(io_err)
        }
        Command::Generate(a) => {
            let d = Defaults {
                hypothesis: Hypothesis::H1,
                taps: 10,
                snr_db: -10.0,
            };
            let scenario = scenario_from(&a.scenario, &d, a.seed);
            scenario.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let x = generate_received(&scenario)?;
            match &a.out {
                Some(path) => {
                    let mut buf = Vec::new();
                    write_samples_csv(&x, &mut buf)?;
                    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
                    Ok(())
                }
                None => Ok(write_samples_csv(&x, &mut *stdout)?),
            }
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("rmt-detect").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn mp_law_output() {
        let (code, out, _) = run_args(&["mp-law", "--c", "0.25"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "a=0.25 b=2.25 mass=0");
        let (code, out, _) = run_args(&["mp-law", "--c", "2"]);
        assert_eq!(code, 0);
        assert!(out.trim().ends_with("mass=0.5"));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["mp-law", "--c", "0"]).0, 2);
        let (code, _, err) = run_args(&["roc", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("--bogus"));
        assert_eq!(run_args(&[]).0, 2);
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn single_line_header_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "1,0,0,1\n").unwrap();
        let x = read_samples_csv(&path).unwrap();
        assert_eq!((x.rows(), x.cols()), (1, 2));
        assert_eq!(x[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(x[(0, 1)], Complex64::new(0.0, 1.0));

        std::fs::write(&path, "re0,im0\n1.5,-2\n3,4\n").unwrap();
        let x = read_samples_csv(&path).unwrap();
        assert_eq!((x.rows(), x.cols()), (2, 1));
        assert_eq!(x[(1, 0)], Complex64::new(3.0, 4.0));
    }

    #[test]
    fn malformed_samples_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        for (body, line) in [
            ("1,2,3,4\n1,2\n", 2),
            ("1,2,3\n", 1),
            ("1,2\n3,x\n", 2),
            ("h1,h2\n1,2,3,4\n5,6\n", 3),
        ] {
            std::fs::write(&path, body).unwrap();
            match read_samples_csv(&path) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{body:?}"),
                other => panic!("{body:?}: {other:?}"),
            }
        }
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(b"").unwrap();
        assert!(read_samples_csv(&path).is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"antennas": 32, "samples": 64, "trials": 7, "seed": 5}"#).unwrap();
        let args = ExperimentArgs {
            config: Some(cfg.clone()),
            seed: Some(9),
            ..Default::default()
        };
        let plan = build_plan(ExperimentKind::Roc, &args.merged().unwrap()).unwrap();
        assert_eq!(plan.base.antennas, 32);
        assert_eq!(plan.n_trials, 7);
        assert_eq!(plan.master_seed, 9);
        assert_eq!(plan.base.taps, 1);

        std::fs::write(&cfg, r#"{"antenas": 32}"#).unwrap();
        let err = args.merged().unwrap_err();
        assert!(matches!(&err, CliError::Usage(m) if m.contains("antenas")));
    }

    #[test]
    fn snr_converted_to_channel_power() {
        let args = ExperimentArgs {
            scenario: ScenarioArgs {
                taps: Some(10),
                snr_db: Some(-10.0),
                ..Default::default()
            },
            ..Default::default()
        };
        let plan = build_plan(ExperimentKind::GlrtDistribution, &args).unwrap();
        assert!((plan.base.channel_power - 0.01).abs() < 1e-15);
    }
}
