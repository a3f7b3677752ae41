//! `hypermu`: run the verification suites and the tree simulator from the
//! command line.
//!
//! Exit codes: 0 when every check passed, 1 when a check failed, 2 on a
//! usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hypermu::report::{CsvTable, Report};
use hypermu::treesim::{self, PotentialLaw, SimConfig};
use hypermu::verify::{self, EnvelopeConfig, GridSpec, Jobs, Mode, Mu3GridSpec, PathSpec, Region, Schedule};
use hypermu::C64;
use serde::{Deserialize, Serialize};

const BAND_EDGE: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Parser, Debug)]
#[command(name = "hypermu", version, about = "Numerical checks of the μ₂ / μ₃,p contraction bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Randomized (or exact rational) identity suite.
    Identities,
    /// Grid supremum of μ₂ at q = 0.
    ScanMu2,
    /// Grid supremum of μ₃,p near the boundary over a dyadic schedule.
    ScanMu3,
    /// Extrapolated limit along a named path.
    Limit,
    /// Monte-Carlo growth envelope.
    Growth,
    /// Convexity and isometry probe of the hyperbolic quantities.
    Probe,
    /// Population dynamics of the tree recursion.
    Simulate,
    /// Im z_λ as η → 0 across energies.
    Profile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Dist {
    Uniform,
    Bernoulli,
}

/// Options shared by flags and the JSON config file; flags win.
#[derive(clap::Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Opts {
    /// Energy half-width, 0 < E < 2√2.
    #[arg(long = "E", global = true, value_name = "E")]
    #[serde(rename = "E")]
    e: Option<f64>,
    /// Largest Im λ sampled.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Moment exponent, p > 1.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Sample count (population size for `simulate`, energies for `profile`).
    #[arg(long, global = true)]
    n: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Points per grid axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Exact rational arithmetic (identities only).
    #[arg(long, global = true)]
    #[serde(default)]
    exact: bool,
    /// CSV: one row per counterexample.
    #[arg(long, global = true)]
    #[serde(default)]
    verbose: bool,
    /// Worker threads.
    #[arg(long, global = true, env = "HYPERMU_JOBS")]
    jobs: Option<usize>,
    /// JSON file with any of these options.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Named path: sigma1, sigma2, sigma4, iinf-check or skew:a:b.
    #[arg(long, global = true)]
    path: Option<String>,
    /// Real base point of the named path.
    #[arg(long, global = true)]
    x: Option<f64>,
    /// Real energy of the simulation.
    #[arg(long, global = true, allow_hyphen_values = true)]
    energy: Option<f64>,
    /// Im λ of the simulation.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Potential half-width.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true, value_enum)]
    dist: Option<Dist>,
    #[arg(long, global = true)]
    generations: Option<usize>,
}

impl Opts {
    fn merged(self, file: Opts) -> Opts {
        Opts {
            e: self.e.or(file.e),
            eps: self.eps.or(file.eps),
            p: self.p.or(file.p),
            n: self.n.or(file.n),
            seed: self.seed.or(file.seed),
            grid: self.grid.or(file.grid),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
            exact: self.exact || file.exact,
            verbose: self.verbose || file.verbose,
            jobs: self.jobs.or(file.jobs),
            config: self.config,
            path: self.path.or(file.path),
            x: self.x.or(file.x),
            energy: self.energy.or(file.energy),
            eta: self.eta.or(file.eta),
            delta: self.delta.or(file.delta),
            dist: self.dist.or(file.dist),
            generations: self.generations.or(file.generations),
        }
    }

    fn region(&self) -> Result<Region, String> {
        let e = self.e.unwrap_or(2.5);
        if !(e > 0.0 && e < BAND_EDGE) {
            return Err(format!("--E {e} must satisfy 0 < E < 2√2"));
        }
        let region = Region { e, eps: self.eps.unwrap_or(0.5), ..Region::default() };
        region.validate().map_err(|e| e.to_string())?;
        Ok(region)
    }

    fn p(&self) -> Result<f64, String> {
        let p = self.p.unwrap_or(2.0);
        verify::require_strict_exponent(p).map_err(|e| e.to_string())?;
        Ok(p)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }
}

/// A usage or configuration error (exit code 2).
struct Failure(String);

impl From<hypermu::Error> for Failure {
    fn from(e: hypermu::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure(msg)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure(msg.into())
}

/// A finished run: its JSON document and CSV table.
struct Output {
    passed: bool,
    json: String,
    csv: String,
}

fn output<C: Serialize, R: Serialize + CsvTable>(
    kind: &str,
    passed: bool,
    config: &C,
    result: &R,
    verbose: bool,
) -> Result<Output, Failure> {
    Ok(Output { passed, json: Report::new(kind, passed, config, result).to_json()?, csv: result.to_csv(verbose)? })
}

#[derive(Serialize)]
struct IdentitiesEcho {
    n: u64,
    seed: u64,
    mode: Mode,
    region: Region,
}

#[derive(Serialize)]
struct ScanEcho<G> {
    region: Region,
    grid: G,
}

#[derive(Serialize)]
struct LimitEcho {
    path: String,
    x: f64,
    spec: PathSpec,
    schedule: Schedule,
}

#[derive(Serialize)]
struct GrowthEcho {
    region: Region,
    envelope: EnvelopeConfig,
}

#[derive(Serialize)]
struct ProbeEcho {
    n: u64,
    seed: u64,
}

#[derive(Serialize)]
struct ProfileEcho {
    energies: Vec<f64>,
    etas: Vec<f64>,
}

fn run(command: Command, o: &Opts, jobs: Jobs) -> Result<Output, Failure> {
    match command {
        Command::Identities => {
            let region = o.region()?;
            let (mode, default_n) = if o.exact { (Mode::Exact, 1000) } else { (Mode::Float, 100_000) };
            let n = o.n.unwrap_or(default_n);
            let rep = if o.exact {
                verify::run_exact_suite(n, o.seed(), jobs)
            } else {
                verify::run_identity_suite(n, o.seed(), &region, mode, jobs)?
            };
            let echo = IdentitiesEcho { n, seed: o.seed(), mode, region };
            output("identities", rep.passed, &echo, &rep, o.verbose)
        }
        Command::ScanMu2 => {
            let region = o.region()?;
            let grid = o.grid.map_or_else(GridSpec::default, GridSpec::scaled);
            let rep = verify::scan_mu2(&region, &grid, jobs)?;
            output("scan-mu2", rep.passed, &ScanEcho { region, grid }, &rep, o.verbose)
        }
        Command::ScanMu3 => {
            let region = o.region()?;
            let mut grid = Mu3GridSpec::new(o.p()?);
            if let Some(n) = o.grid {
                grid.n_re = n;
                grid.n_lambda_re = n;
            }
            let rep = verify::scan_mu3(&region, &grid, jobs)?;
            output("scan-mu3", rep.passed, &ScanEcho { region, grid }, &rep, o.verbose)
        }
        Command::Limit => {
            let name = o.path.clone().unwrap_or_else(|| "sigma1".into());
            let x = o.x.unwrap_or(1.0);
            let spec = PathSpec::named(&name, x)?;
            let schedule = Schedule::default();
            let rep = verify::limit_along_path(&spec, schedule)?;
            output("limit", rep.converged, &LimitEcho { path: name, x, spec, schedule }, &rep, o.verbose)
        }
        Command::Growth => {
            let region = o.region()?;
            let envelope = EnvelopeConfig::new(o.p()?, o.n.unwrap_or(1_000_000), o.seed());
            let rep = verify::growth_envelope(&region, &envelope, jobs)?;
            output("growth", rep.passed, &GrowthEcho { region, envelope }, &rep, o.verbose)
        }
        Command::Probe => {
            let n = o.n.unwrap_or(10_000);
            let rep = verify::convexity_isometry_probe(n, o.seed(), jobs);
            output("probe", rep.passed, &ProbeEcho { n, seed: o.seed() }, &rep, o.verbose)
        }
        Command::Simulate => {
            let n = usize::try_from(o.n.unwrap_or(1000)).map_err(|_| usage("--n is too large"))?;
            let mut cfg = SimConfig::new(
                n,
                o.generations.unwrap_or(200),
                o.energy.unwrap_or(0.5),
                o.eta.unwrap_or(0.1),
                o.seed(),
            );
            cfg.delta = o.delta.unwrap_or(0.0);
            cfg.dist = match o.dist.unwrap_or(Dist::Uniform) {
                Dist::Uniform => PotentialLaw::Uniform,
                Dist::Bernoulli => PotentialLaw::Bernoulli,
            };
            cfg.p = o.p()?;
            cfg.init = C64::new(0.0, 1.0);
            let series = treesim::run(&cfg, jobs)?;
            let passed = series.stopped_early.is_none();
            output("simulate", passed, &cfg, &series, o.verbose)
        }
        Command::Profile => {
            let count = o.n.unwrap_or(61).max(2);
            let energies: Vec<f64> = (0..count).map(|k| -3.0 + 6.0 * k as f64 / (count - 1) as f64).collect();
            let etas = vec![1e-2, 1e-4, 1e-6, 1e-8];
            let rows = treesim::fixed_point_profile(&energies, &etas)?;
            output("profile", true, &ProfileEcho { energies, etas }, &rows, o.verbose)
        }
    }
}

fn load_config(path: &Path) -> Result<Opts, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    let file = match &cli.opts.config {
        Some(p) => load_config(p)?,
        None => Opts::default(),
    };
    let opts = cli.opts.merged(file);
    let jobs = match opts.jobs {
        Some(0) => return Err(usage("--jobs must be at least 1")),
        Some(n) => Jobs(n),
        None => Jobs::default(),
    };
    if opts.exact && cli.command != Command::Identities {
        return Err(usage("--exact applies to `identities` only"));
    }
    let out = run(cli.command, &opts, jobs)?;
    let body = match opts.format.unwrap_or(Format::Json) {
        Format::Json => out.json + "\n",
        Format::Csv => out.csv,
    };
    match &opts.out {
        Some(p) => std::fs::write(p, body).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{body}"),
    }
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("hypermu: {msg}");
            ExitCode::from(2)
        }
    }
}
