use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use windtrace::verify::{Precision, VerifyOptions};
use windtrace::{Complex64, Error};

mod tables;

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PRECISION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "windtrace", version, about = "Twisted traces of cycle integrals and their theta completions")]
#[command(allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Fundamental negative discriminant Delta
    #[arg(long, global = true, allow_hyphen_values = true, default_value_t = -3)]
    delta: i64,
    /// Residue r with Delta = r^2 mod 4N
    #[arg(long, global = true, default_value_t = 1)]
    r: i64,
    /// Level N
    #[arg(long, global = true, default_value_t = 1)]
    level: i64,
    #[arg(long, global = true, default_value_t = 12)]
    dmax: i64,
    /// Numerical tolerance, between 1e-12 and 1e-3
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    /// Sample point "u+vi" with v > 0; repeatable
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_tau)]
    tau: Vec<Complex64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when omitted
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = PrecisionArg::Standard)]
    precision: PrecisionArg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gamma0(N) classes of discriminant -d Delta with genus character values, d <= dmax
    Classes,
    /// Traces, Theta* and Theta coefficient functions and constant terms
    Series,
    /// Run the verification criteria and report residuals
    Verify {
        /// Run only these criteria (1..=10); repeatable
        #[arg(long)]
        criterion: Vec<u8>,
        /// Perturb one coefficient inside the given criterion
        #[arg(long, hide = true)]
        perturb: Option<u8>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PrecisionArg {
    Standard,
    High,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Standard => Precision::Standard,
            PrecisionArg::High => Precision::High,
        }
    }
}

/// Parses "u+vi", "u-vi", "vi" or "u".
fn parse_tau(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse {s:?} as u+vi");
    let z = if let Some(body) = t.strip_suffix('i') {
        // split at the last sign that is not the leading one or an exponent sign
        let bytes = body.as_bytes();
        let cut =
            (1..bytes.len()).rev().find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match cut {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            x => x,
        };
        Complex64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?)
    } else {
        Complex64::new(t.parse().map_err(|_| bad())?, 0.0)
    };
    if !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite()) {
        return Err(format!("{s:?} is not in the upper half-plane"));
    }
    Ok(z)
}

/// Validated settings shared by the subcommands.
pub struct RunConfig {
    pub delta: i64,
    pub r: i64,
    pub n: i64,
    pub d_max: i64,
    pub tol: f64,
    pub taus: Vec<Complex64>,
    pub precision: Precision,
}

enum Failure {
    Usage(String),
    Precision(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Precision { .. } => Failure::Precision(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn config(cli: &Cli) -> Result<RunConfig, Failure> {
    if !(1e-12..=1e-3).contains(&cli.tol) {
        return Err(Failure::Usage(format!("--tol {} is outside [1e-12, 1e-3]", cli.tol)));
    }
    if cli.level < 1 {
        return Err(Failure::Usage("--level must be at least 1".into()));
    }
    if cli.dmax < 1 {
        return Err(Failure::Usage("--dmax must be at least 1".into()));
    }
    if matches!(cli.command, Command::Classes | Command::Series) {
        windtrace::qforms::GenusCharContext::new(cli.delta, cli.r, cli.level)?;
    }
    let taus = if cli.tau.is_empty() { vec![Complex64::i()] } else { cli.tau.clone() };
    Ok(RunConfig {
        delta: cli.delta,
        r: cli.r,
        n: cli.level,
        d_max: cli.dmax,
        tol: cli.tol,
        taus,
        precision: cli.precision.into(),
    })
}

fn emit(cli: &Cli, body: &[u8]) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => std::fs::write(path, body).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(body).map_err(|e| Failure::Usage(format!("stdout: {e}"))),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = config(cli)?;
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--threads: {e}")))?;
    }
    let csv = cli.format == Format::Csv;
    match &cli.command {
        Command::Classes => {
            let t = tables::classes(&cfg)?;
            emit(cli, &if csv { tables::classes_csv(&t) } else { tables::to_json(&t) })
        }
        Command::Series => {
            let t = tables::series(&cfg)?;
            emit(cli, &if csv { tables::series_csv(&t) } else { tables::to_json(&t) })
        }
        Command::Verify { criterion, perturb } => {
            let opts = VerifyOptions { precision: cfg.precision, perturb: *perturb };
            let report = tables::verify(&opts, criterion)?;
            emit(cli, &if csv { tables::verify_csv(&report) } else { tables::to_json(&report) })?;
            for c in report.criteria.iter().filter(|c| !c.pass) {
                eprintln!("criterion {} ({}) failed", c.id, c.name);
            }
            if report.criteria.iter().any(|c| c.is_precision_error()) {
                return Err(Failure::Precision("a criterion did not reach its working precision".into()));
            }
            if !report.all_pass {
                let names: Vec<&str> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.name).collect();
                return Err(Failure::Verify(format!("verification failed: {}", names.join(", "))));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::Precision(m) => (EXIT_PRECISION, m),
                Failure::Verify(m) => (EXIT_VERIFY, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_tau;
    use windtrace::Complex64;

    #[test]
    fn tau_strings() {
        assert_eq!(parse_tau("0.4+1.2i").unwrap(), Complex64::new(0.4, 1.2));
        assert_eq!(parse_tau("i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(parse_tau("-0.5+i").unwrap(), Complex64::new(-0.5, 1.0));
        assert_eq!(parse_tau("2i").unwrap(), Complex64::new(0.0, 2.0));
        assert_eq!(parse_tau("1e-1+1e0i").unwrap(), Complex64::new(0.1, 1.0));
        assert!(parse_tau("0.3-1i").is_err());
        assert!(parse_tau("0.3").is_err());
        assert!(parse_tau("abc").is_err());
    }
}
