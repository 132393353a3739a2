//! Command-line front end: `simulate`, `classify`, `monodromy`, `section` and
//! `solution-check`.
//!
//! Settings come from flags, then from a flat `key = value` file given by
//! `--config`, then from built-in defaults. Exit code 0 means success, 2 a
//! validation error, 3 a numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dynamics::{self, first_integrals, ExtendedState, FirstIntegrals, SatelliteParams};
use crate::error::Error;
use crate::kovacic::{self, KovacicReport};
use crate::monodromy::{self, GroupRelations, LocalMonodromy};
use crate::nve::FuchsianProblem;
use crate::poincare::{self, SectionSpec};
use crate::report::write_report;
use crate::solutions::{Branch, ParticularSolution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const THREADS_ENV: &str = "GALOIS_SAT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "galois-sat", version, about = "Magnetized rigid satellite: dynamics, variational equations and their Galois groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the full equations of motion and report first-integral drift.
    Simulate(SimulateArgs),
    /// Run Kovacic's algorithm on the normal variational equation and classify its Galois group.
    Classify(CommonArgs),
    /// Numerical monodromy of the algebraized variational equation.
    Monodromy(CommonArgs),
    /// Poincaré section of the reduced system at q2 = π/2.
    Section(SectionArgs),
    /// Compare an integrated particular solution against its closed form.
    SolutionCheck(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    #[arg(long = "C", allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the full JSON report to standard output.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Start on the particular solution at t = 0 with modulus --k.
    #[arg(long = "from-particular")]
    from_particular: bool,
}

#[derive(Debug, Clone, Args)]
struct SectionArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Energy level of the section.
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    /// Number of seeds spread along p1 = 1.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long = "max-crossings")]
    max_crossings: Option<usize>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Config(String),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if !e.is_validation() => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

/// Parsed `key = value` file. Blank lines and `#` comments are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub values: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] =
    &["C", "xi", "k", "tol", "out", "t_final", "from_particular", "h", "seeds", "max_crossings", "t_max"];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let k = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(format!("line {}: unknown key `{k}`", n + 1));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|_| format!("`{key}` has unparsable value `{v}`")))
            .transpose()
    }
}

/// Settings after merging flags, file and defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub xi: f64,
    pub k: f64,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub t_final: f64,
    pub from_particular: bool,
    pub h: f64,
    pub seeds: usize,
    pub max_crossings: usize,
    pub t_max: f64,
}

impl RunConfig {
    fn defaults(command: &Command) -> Self {
        let (c, xi) = match command {
            Command::Simulate(_) => (1.7, 0.3),
            Command::Section(_) => (1.7, 0.1),
            _ => (1.5, 0.2),
        };
        Self {
            c,
            xi,
            k: 0.5,
            tol: 1e-12,
            out: None,
            t_final: 100.0,
            from_particular: false,
            h: 0.0,
            seeds: 12,
            max_crossings: 200,
            t_max: 5000.0,
        }
    }

    fn resolve(command: &Command) -> Result<Self, CliError> {
        let common = match command {
            Command::Simulate(a) => &a.common,
            Command::Section(a) => &a.common,
            Command::Classify(a) | Command::Monodromy(a) | Command::SolutionCheck(a) => a,
        };
        let file = match &common.config {
            Some(p) => ConfigFile::load(p).map_err(CliError::Config)?,
            None => ConfigFile::default(),
        };
        let mut cfg = Self::defaults(command);
        macro_rules! layer {
            ($field:ident, $key:expr, $flag:expr) => {
                if let Some(v) = $flag {
                    cfg.$field = v;
                } else if let Some(v) = file.get($key).map_err(CliError::Config)? {
                    cfg.$field = v;
                }
            };
        }
        layer!(c, "C", common.c);
        layer!(xi, "xi", common.xi);
        layer!(k, "k", common.k);
        layer!(tol, "tol", common.tol);
        if let Some(p) = common.out.clone() {
            cfg.out = Some(p);
        } else if let Some(p) = file.get::<PathBuf>("out").map_err(CliError::Config)? {
            cfg.out = Some(p);
        }
        match command {
            Command::Simulate(a) => {
                layer!(t_final, "t_final", a.t_final);
                let fp = file.get::<bool>("from_particular").map_err(CliError::Config)?;
                cfg.from_particular = a.from_particular || fp.unwrap_or(false);
            }
            Command::Section(a) => {
                layer!(h, "h", a.h);
                layer!(seeds, "seeds", a.seeds);
                layer!(max_crossings, "max_crossings", a.max_crossings);
                layer!(t_max, "t_max", a.t_max);
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        Branch::of(self.c)?;
        if !self.xi.is_finite() {
            return Err(Error::InvalidParams(format!("xi must be finite, got {}", self.xi)).into());
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::InvalidModulus(self.k).into());
        }
        if !(1e-14..=1e-4).contains(&self.tol) {
            return Err(Error::InvalidParams(format!("tol {:e} outside [1e-14, 1e-4]", self.tol)).into());
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidParams(format!("t_final must be positive, got {}", self.t_final)).into());
        }
        Ok(())
    }

    fn params(&self) -> SatelliteParams {
        SatelliteParams::symmetric(self.c, self.xi)
    }
}

/// Writes to the configured file, or to `stdout` when none is set.
fn with_output<F>(out: &Option<PathBuf>, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Drift {
    h: f64,
    h2: f64,
    h3: f64,
    h4: f64,
    m3: Option<f64>,
    max: f64,
}

impl Drift {
    fn between(a: &FirstIntegrals, b: &FirstIntegrals) -> Self {
        let rel = |x: f64, y: f64| (y - x).abs() / x.abs().max(1.0);
        let m3 = a.h5.zip(b.h5).map(|(x, y)| rel(x, y));
        let (h, h2, h3, h4) = (rel(a.h, b.h), rel(a.h2, b.h2), rel(a.h3, b.h3), rel(a.h4, b.h4));
        let max = [h, h2, h3, h4, m3.unwrap_or(0.0)].into_iter().fold(0.0, f64::max);
        Self { h, h2, h3, h4, m3, max }
    }
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    config: RunConfig,
    initial_state: [f64; 9],
    steps: usize,
    initial: FirstIntegrals,
    r#final: FirstIntegrals,
    relative_drift: Drift,
}

/// Default starting point for `simulate`: a generic state on the physical leaf.
pub fn default_initial_state() -> ExtendedState<f64> {
    ExtendedState::on_leaf([0.3, -0.2, 0.9], [0.1, 0.2, 1.0], [1.0, 0.3, -0.1]).expect("fixed state is valid")
}

fn cmd_simulate(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let p = cfg.params();
    p.validate()?;
    let x0 = if cfg.from_particular {
        ParticularSolution::from_c(cfg.c, cfg.k)?.state(0.0)
    } else {
        default_initial_state()
    };
    let traj = dynamics::integrate(&x0, &p, 0.0, cfg.t_final, cfg.tol)?;
    let initial = first_integrals(&x0, &p);
    let fin = first_integrals(&ExtendedState::from_slice(traj.y_end()), &p);
    let summary = SimulateSummary {
        config: cfg.clone(),
        initial_state: x0.to_array(),
        steps: traj.steps.len(),
        relative_drift: Drift::between(&initial, &fin),
        initial,
        r#final: fin,
    };
    with_output(&cfg.out, stdout, |w| dynamics::write_csv(&traj, w))?;
    // keep the CSV stream clean when it goes to standard output
    let sink: &mut dyn Write = if cfg.out.is_some() { stdout } else { stderr };
    write_report(sink, "simulate", &summary)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClassifyReport {
    #[serde(flatten)]
    kovacic: KovacicReport,
    summary: &'static str,
    monodromy_infinity: Option<LocalMonodromy>,
}

fn cmd_classify(cfg: &RunConfig, json: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let fp = FuchsianProblem::family(cfg.c, cfg.k, cfg.xi)?;
    let kov = kovacic::classify(&fp, kovacic::DEFAULT_TOL)?;
    let summary = kov.classification.summary();
    let monodromy_infinity = match monodromy::local_monodromy_infinity(&fp, cfg.tol) {
        Ok(m) => Some(m),
        Err(e) => {
            writeln!(stderr, "warning: monodromy at infinity unavailable: {e}")?;
            None
        }
    };
    let report = ClassifyReport { kovacic: kov, summary, monodromy_infinity };
    if json {
        write_report(&mut *stdout, "classify", &report)?;
    } else {
        writeln!(stdout, "{summary}")?;
    }
    if cfg.out.is_some() {
        with_output(&cfg.out, stdout, |w| write_report(w, "classify", &report))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MonodromyReport {
    config: RunConfig,
    infinity: LocalMonodromy,
    relations: GroupRelations,
}

fn cmd_monodromy(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let fp = FuchsianProblem::family(cfg.c, cfg.k, cfg.xi)?;
    let infinity = monodromy::local_monodromy_infinity(&fp, cfg.tol)?;
    let relations = monodromy::group_relations(&fp, cfg.tol)?;
    let report = MonodromyReport { config: cfg.clone(), infinity, relations };
    with_output(&cfg.out, stdout, |w| write_report(w, "monodromy", &report))
}

#[derive(Debug, Serialize)]
struct SectionSummary {
    seeds: usize,
    points: usize,
    escaped: Vec<usize>,
    max_section_error: f64,
    max_energy_residual: f64,
}

fn cmd_section(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let mut spec = SectionSpec::with_line_seeds(cfg.c, cfg.xi, cfg.h, cfg.seeds);
    spec.max_crossings = cfg.max_crossings;
    spec.t_max = cfg.t_max;
    if spec.seeds.is_empty() {
        return Err(Error::EnergyInfeasible { h: cfg.h, discriminant: f64::NAN }.into());
    }
    let orbits = poincare::run_section(&spec, cfg.tol)?;
    with_output(&cfg.out, stdout, |w| poincare::write_csv(w, &spec, &orbits))?;
    let all = || orbits.iter().flat_map(|o| o.points.iter());
    let summary = SectionSummary {
        seeds: orbits.len(),
        points: all().count(),
        escaped: orbits.iter().filter(|o| o.escaped.is_some()).map(|o| o.seed_id).collect(),
        max_section_error: all().map(|p| (p.q2 - std::f64::consts::FRAC_PI_2).abs()).fold(0.0, f64::max),
        max_energy_residual: all().map(|p| p.energy_residual.abs()).fold(0.0, f64::max),
    };
    let sink: &mut dyn Write = if cfg.out.is_some() { stdout } else { stderr };
    write_report(sink, "section", &summary)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SolutionCheck {
    #[serde(rename = "C")]
    pub c: f64,
    pub k: f64,
    pub period: f64,
    /// Sup-norm distance between the integrated and closed-form states over one period.
    pub sup_error: f64,
    pub energy_closed_form: f64,
    pub energy_error: f64,
}

/// Integrates the full system from Φ(0, k) over one period and measures the distance to the closed form.
pub fn solution_check(c: f64, k: f64, tol: f64) -> crate::Result<SolutionCheck> {
    let sol = ParticularSolution::from_c(c, k)?;
    let p = SatelliteParams::symmetric(c, 0.0);
    let period = sol.periods().0;
    let x0 = sol.state(0.0);
    let traj = dynamics::integrate(&x0, &p, 0.0, period, tol)?;
    let n = 400;
    let sup_error = (0..=n)
        .map(|i| {
            let t = period * i as f64 / n as f64;
            let y = traj.sample(t);
            sol.state(t).to_array().iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let energy_closed_form = sol.energy_level();
    let energy_error = (dynamics::energy(&x0, &p) - energy_closed_form).abs();
    Ok(SolutionCheck { c, k, period, sup_error, energy_closed_form, energy_error })
}

fn cmd_solution_check(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let check = solution_check(cfg.c, cfg.k, cfg.tol)?;
    with_output(&cfg.out, stdout, |w| write_report(w, "solution-check", &check))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // a pool may already exist when called repeatedly in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = configure_threads().and_then(|_| {
        let cfg = RunConfig::resolve(&cli.command)?;
        let json = match &cli.command {
            Command::Classify(a) => a.json,
            _ => false,
        };
        match &cli.command {
            Command::Simulate(_) => cmd_simulate(&cfg, stdout, stderr),
            Command::Classify(_) => cmd_classify(&cfg, json, stdout, stderr),
            Command::Monodromy(_) => cmd_monodromy(&cfg, stdout),
            Command::Section(_) => cmd_section(&cfg, stdout, stderr),
            Command::SolutionCheck(_) => cmd_solution_check(&cfg, stdout),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut full = vec!["galois-sat"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn config_parsing() {
        let c = ConfigFile::parse("# comment\nC = 1.5\n xi=0.2 # trailing\n\nt-final = 5\n").unwrap();
        assert_eq!(c.values["C"], "1.5");
        assert_eq!(c.values["xi"], "0.2");
        assert_eq!(c.values["t_final"], "5");
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("C 1.5").is_err());
    }

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "C = 0.5\nxi = 0.75\nk = 0.6\n").unwrap();
        let cli = Cli::try_parse_from(["galois-sat", "classify", "--config", path.to_str().unwrap(), "--xi", "0.1"]).unwrap();
        let cfg = RunConfig::resolve(&cli.command).unwrap();
        assert_eq!((cfg.c, cfg.xi, cfg.k, cfg.tol), (0.5, 0.1, 0.6, 1e-12));
    }

    #[test]
    fn degenerate_c_exits_2() {
        let (code, _, err) = run_capture(&["simulate", "--C", "1", "--t-final", "1"]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(err.contains("ω"), "{err}");
    }

    #[test]
    fn bad_flag_exits_2() {
        assert_eq!(run_capture(&["classify", "--nope"]).0, EXIT_VALIDATION);
        assert_eq!(run_capture(&["classify", "--k", "1.5"]).0, EXIT_VALIDATION);
    }

    #[test]
    fn negative_xi_accepted() {
        let cli = Cli::try_parse_from(["galois-sat", "classify", "--xi", "-0.3"]).unwrap();
        assert_eq!(RunConfig::resolve(&cli.command).unwrap().xi, -0.3);
    }

    #[test]
    fn classify_prints_summary() {
        let (code, out, _) = run_capture(&["classify", "--C", "1.5", "--xi", "0.2", "--k", "0.5"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "SL2 — necessary condition for integrability violated");
    }

    #[test]
    fn classify_json_is_schema_versioned() {
        let (code, out, _) = run_capture(&["classify", "--C", "0.5", "--xi", "0.75", "--k", "0.6", "--json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["classification"], "Case2Solvable");
        assert!(v["case1"]["candidates"].is_array());
    }

    #[test]
    fn solution_check_default() {
        let c = solution_check(1.5, 0.5, 1e-12).unwrap();
        assert!(c.sup_error < 1e-7, "{}", c.sup_error);
        assert!(c.energy_error < 1e-12);
    }
}
