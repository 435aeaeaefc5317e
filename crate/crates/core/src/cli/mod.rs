//! The `heralded` command line: figure data as CSV, the verification suite,
//! coefficient-cache management and the rate estimate.
//!
//! Exit codes are 0 on success, 1 on a usage or runtime error and 2 when
//! `verify` finds a failing invariant.

pub mod commands;
pub mod config;
pub mod rate;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use commands::Output;
use config::{RunConfig, Settings};

pub use rate::{rate_estimate, RateInputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

const DEFAULTS_HELP: &str = "Defaults: mbar=1, g=1, t-max=20, t-steps=200, n3max=150, method=hybrid, \
pairs=\"1,1;1,3;3,3\", mbar-min=0, mbar-max=5, steps=101, shells=100,200,300, grid-tmax=200, \
collection=0.05, prob=0.03125, rep-rate=769230.77 (1/1.3 µs). \
Precedence: flags > --config file > defaults.";

#[derive(Debug, Parser)]
#[command(name = "heralded", version, about = "Heralded spin-spin entanglement from EPR light", after_help = DEFAULTS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Dump the truncated two-mode squeezed source.
    Epr,
    /// Norm and level populations of one dot against time.
    Evolve,
    /// Time-averaged outcome probabilities against mean photon number.
    ProbGrid,
    /// Success probability against scaled mean photon number for each efficiency.
    Success,
    /// Half-maximum photon number against detector efficiency.
    Mhalf,
    /// First-order loss coefficient against mean photon number.
    Zeta,
    /// Normalized coefficient data collapse; `--build` writes the cache.
    Coeffs,
    /// True and false positive probabilities.
    FalsePositive,
    /// Heralded pairs per minute.
    RateEstimate,
    /// Run the invariant suite.
    Verify,
}

#[derive(Debug, Args)]
struct Flags {
    #[arg(long, global = true, conflicts_with = "mbar")]
    lambda: Option<String>,
    #[arg(long, global = true)]
    mbar: Option<String>,
    #[arg(long, global = true)]
    g: Option<String>,
    #[arg(long, global = true)]
    t: Option<String>,
    #[arg(long = "t-max", global = true)]
    t_max: Option<String>,
    #[arg(long = "t-steps", global = true)]
    t_steps: Option<String>,
    /// Detector efficiency; repeat or separate with commas.
    #[arg(long, global = true)]
    eta: Vec<String>,
    #[arg(long, global = true)]
    nmax: Option<String>,
    #[arg(long, global = true)]
    n3max: Option<String>,
    /// exact, rooftop or hybrid.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    pairs: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    cache: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long = "mbar-min", global = true)]
    mbar_min: Option<String>,
    #[arg(long = "mbar-max", global = true)]
    mbar_max: Option<String>,
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long, global = true)]
    shells: Option<String>,
    #[arg(long = "grid-tmax", global = true)]
    grid_tmax: Option<String>,
    #[arg(long, global = true)]
    collection: Option<String>,
    #[arg(long, global = true)]
    prob: Option<String>,
    #[arg(long = "rep-rate", global = true)]
    rep_rate: Option<String>,
    /// Rooftop spread slope.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Rooftop spread offset.
    #[arg(long, global = true)]
    beta: Option<String>,
    /// Allow building a large coefficient table (and save it to --cache).
    #[arg(long, global = true)]
    build: bool,
    /// Also write a gnuplot script next to --out.
    #[arg(long, global = true)]
    plot: bool,
    /// Flat `key = value` file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Flags {
    fn settings(&self) -> Result<Settings> {
        let mut pairs: Vec<(&str, String)> = [
            ("lambda", &self.lambda),
            ("mbar", &self.mbar),
            ("g", &self.g),
            ("t", &self.t),
            ("t-max", &self.t_max),
            ("t-steps", &self.t_steps),
            ("nmax", &self.nmax),
            ("n3max", &self.n3max),
            ("method", &self.method),
            ("pairs", &self.pairs),
            ("out", &self.out),
            ("cache", &self.cache),
            ("threads", &self.threads),
            ("mbar-min", &self.mbar_min),
            ("mbar-max", &self.mbar_max),
            ("steps", &self.steps),
            ("shells", &self.shells),
            ("grid-tmax", &self.grid_tmax),
            ("collection", &self.collection),
            ("prob", &self.prob),
            ("rep-rate", &self.rep_rate),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect();
        if !self.eta.is_empty() {
            pairs.push(("eta", self.eta.join(",")));
        }
        for (k, on) in [("build", self.build), ("plot", self.plot)] {
            if on {
                pairs.push((k, "true".into()));
            }
        }
        Settings::from_pairs(pairs)
    }
}

/// Merge defaults, the optional config file and the flags.
fn resolve(flags: &Flags) -> Result<RunConfig> {
    let mut s = Settings::defaults();
    if let Some(p) = &flags.config {
        s = s.overridden_by(&Settings::read_file(p)?);
    }
    RunConfig::from_settings(&s.overridden_by(&flags.settings()?))
}

fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<Output> {
    match cmd {
        Command::Epr => commands::epr(cfg),
        Command::Evolve => commands::evolve(cfg),
        Command::ProbGrid => commands::prob_grid(cfg),
        Command::Success => commands::success(cfg),
        Command::Mhalf => commands::mhalf(cfg),
        Command::Zeta => commands::zeta(cfg),
        Command::Coeffs => commands::coeffs(cfg),
        Command::FalsePositive => commands::false_positive(cfg),
        Command::RateEstimate => commands::rate(cfg),
        Command::Verify => commands::verify(cfg),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Serialize `out` as CSV with a header row.
pub fn write_csv<W: Write>(out: &Output, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(&out.header).map_err(csv_error)?;
    for row in &out.rows {
        wr.write_record(row).map_err(csv_error)?;
    }
    wr.flush()?;
    Ok(())
}

/// A gnuplot script plotting every column against the first.
pub fn gnuplot_script(out: &Output, csv_path: &Path) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{}'\nplot \\\n",
        out.header.first().map(String::as_str).unwrap_or("x")
    );
    let name = csv_path.display();
    let series: Vec<String> = (2..=out.header.len())
        .map(|c| format!("  '{name}' using 1:{c} with lines"))
        .collect();
    s.push_str(&series.join(", \\\n"));
    s.push('\n');
    s
}

fn execute(cmd: Command, cfg: &RunConfig) -> Result<Output> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let out = pool.install(|| dispatch(cmd, cfg))?;
    match &cfg.out {
        Some(path) => {
            write_csv(&out, std::fs::File::create(path)?)?;
            if cfg.plot {
                std::fs::write(path.with_extension("gp"), gnuplot_script(&out, path))?;
            }
        }
        None => write_csv(&out, std::io::stdout().lock())?,
    }
    for note in &out.notes {
        eprintln!("{note}");
    }
    Ok(out)
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve(&cli.flags).and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(out) if out.failed => {
            eprintln!("verification failed");
            EXIT_VERIFY
        }
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_become_settings() {
        let cli = Cli::try_parse_from(["heralded", "success", "--eta", "1", "--eta", "0.1,0.01", "--build"]).unwrap();
        let s = cli.flags.settings().unwrap();
        assert_eq!(s.get("eta"), Some("1,0.1,0.01"));
        assert_eq!(s.get("build"), Some("true"));
        assert_eq!(cli.command, Command::Success);
    }

    #[test]
    fn csv_round_trips_floats() {
        let mut out = Output::default();
        out.header = vec!["x".into()];
        let v = 0.1 + 0.2;
        out.rows.push(vec![commands::fmt(v)]);
        out.rows.push(vec![commands::fmt(1.234e-9)]);
        let mut buf = Vec::new();
        write_csv(&out, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let vals: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
        assert_eq!(vals, vec![v, 1.234e-9]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["heralded", "rate-estimate", "--out", "/dev/null"]), EXIT_OK);
        assert_eq!(run(["heralded", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["heralded", "epr", "--lambda", "1.5"]), EXIT_USAGE);
        assert_eq!(run(["heralded", "--help"]), EXIT_OK);
    }
}
