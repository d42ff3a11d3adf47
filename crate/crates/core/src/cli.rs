//! Command-line front end: `design`, `simulate` and `sweep`.
//!
//! Every parameter can come from a flag or from a flat `key = value`
//! config file (`--config`); flags win. Config keys are the long flag names
//! without the leading dashes. Keys a command does not understand are an
//! error, and everything is validated before any computation starts.
//!
//! Exit codes: 0 success, 1 usage or validation, 2 infeasible design,
//! 3 numerical failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::composite::build_sequence;
use crate::design::PulseDesign;
use crate::dynamics::{IntegratorConfig, PhaseSense};
use crate::error::Error;
use crate::model::DimensionlessParams;
use crate::output::fmt_f64;
use crate::protocol::{run_experiment, ExperimentSpec};
use crate::sweep::{compare_n, sweep, Axis, Execution, SweepParam, SweepSpec, DEFAULT_MAX_N, DEFAULT_POINTS};

const DEFAULT_TF: f64 = 100.0;
const DEFAULT_SAMPLES: usize = 1001;

#[derive(Debug, Parser)]
#[command(name = "magrev", version, about = "Chirped composite-pulse magnetization reversal")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Primary output file
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RK4 steps per pulse
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Worker threads for sweeps (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// In-plane drive direction per composite phase: lagging (-phi_k) or leading (+phi_k)
    #[arg(long, global = true)]
    pub phase_sense: Option<String>,
    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    pub print_config: bool,
    /// Reserved. Runs are deterministic and take no seed; setting this is an error
    #[arg(long, global = true)]
    pub seedless: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design one pulse and write its chirp table
    Design(DesignArgs),
    /// Run one reversal experiment
    Simulate(SimulateArgs),
    /// Scan the final probability over a parameter grid
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Design JSON path (default: output path with a .json extension)
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Trajectory CSV path
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// Feed-forward coefficient k: adds k d cos(theta_ref) to the chirp
    #[arg(long)]
    pub feedforward: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SweepKind {
    /// P versus drive amplitude h
    Amplitude(AmplitudeArgs),
    /// P over pulse count N and anisotropy d
    Nd(NdArgs),
    /// P versus damping alpha
    Alpha(AlphaArgs),
}

#[derive(Debug, Args)]
pub struct AmplitudeArgs {
    #[arg(long)]
    pub h_min: Option<f64>,
    #[arg(long)]
    pub h_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated odd pulse counts
    #[arg(long = "N")]
    pub n: Option<String>,
}

#[derive(Debug, Args)]
pub struct NdArgs {
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub d_min: Option<f64>,
    #[arg(long)]
    pub d_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    /// Comma-separated odd pulse counts
    #[arg(long = "N")]
    pub n: Option<String>,
}

/// Failure of a CLI invocation, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("I/O error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", i + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

/// Merges flags over config-file values and records what was resolved.
struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    fn new(file: BTreeMap<String, String>) -> Self {
        Self {
            file,
            used: BTreeSet::new(),
            resolved: Vec::new(),
        }
    }

    fn get<T>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    raw.parse::<T>()
                        .map_err(|e| CliError::usage(format!("config key `{key}`: {e}")))?,
                ),
                None => default,
            },
        };
        if let Some(v) = &value {
            self.resolved.push((key.to_string(), v.to_string()));
        }
        Ok(value)
    }

    fn require<T>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.get(key, flag, default)?
            .ok_or_else(|| CliError::usage(format!("missing required value `--{key}`")))
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>, default: Option<&str>) -> CliResult<Option<PathBuf>> {
        let flag = flag.map(|p| p.to_string_lossy().into_owned());
        Ok(self.get::<String>(key, flag, default.map(str::to_string))?.map(PathBuf::from))
    }

    fn finish(&self) -> CliResult<()> {
        let unknown: Vec<&str> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::usage(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }

    fn render(&self) -> String {
        self.resolved.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn parse_counts(raw: &str) -> CliResult<Vec<usize>> {
    let counts = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::usage(format!("invalid N list `{raw}`: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    for &n in &counts {
        crate::composite::validate_count(n)?;
    }
    Ok(counts)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let candidate = out.with_extension("json");
    if candidate == out {
        out.with_extension("spec.json")
    } else {
        candidate
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// What a resolved invocation will do.
enum Plan {
    Design {
        h: f64,
        tf: f64,
        samples: usize,
        out: PathBuf,
        json: PathBuf,
    },
    Simulate {
        spec: ExperimentSpec,
        out: PathBuf,
        traj: Option<PathBuf>,
    },
    Sweep {
        spec: SweepSpec,
        counts: Option<Vec<usize>>,
        out: PathBuf,
        execution: Execution,
    },
}

struct Common {
    integrator: IntegratorConfig,
    phase_sense: PhaseSense,
    execution: Execution,
}

fn resolve_common(cli: &CommonArgs, settings: &mut Settings) -> CliResult<Common> {
    if cli.seedless {
        return Err(CliError::usage(
            "--seedless is reserved: runs are deterministic and take no seed",
        ));
    }
    let steps = settings.require("steps", cli.steps, Some(IntegratorConfig::default().steps_per_pulse))?;
    let integrator = IntegratorConfig::with_steps(steps);
    integrator.validate()?;
    let phase_sense: PhaseSense = settings
        .require("phase-sense", cli.phase_sense.clone(), Some("lagging".to_string()))?
        .parse()?;
    let execution = match settings.get("threads", cli.threads, None)? {
        Some(0) => return Err(CliError::usage("--threads must be ≥ 1")),
        Some(n) => Execution::Threads(n),
        None => Execution::Parallel,
    };
    Ok(Common {
        integrator,
        phase_sense,
        execution,
    })
}

fn experiment(params: DimensionlessParams, n: usize, common: &Common) -> ExperimentSpec {
    ExperimentSpec {
        integrator: common.integrator,
        phase_sense: common.phase_sense,
        ..ExperimentSpec::new(params, n)
    }
}

fn resolve(cli: &Cli, settings: &mut Settings) -> CliResult<Plan> {
    let common = resolve_common(&cli.common, settings)?;
    let plan = match &cli.command {
        Command::Design(a) => {
            let h = settings.require("h", a.h, None)?;
            let tf = settings.require("tf", a.tf, None)?;
            let samples = settings.require("samples", a.samples, Some(DEFAULT_SAMPLES))?;
            if samples < 2 {
                return Err(CliError::usage(format!("--samples must be ≥ 2, got {samples}")));
            }
            let out = settings.path("out", cli.common.out.clone(), Some("chirp.csv"))?.unwrap();
            let json = settings.path("json", a.json.clone(), None)?.unwrap_or_else(|| sidecar_path(&out));
            Plan::Design {
                h,
                tf,
                samples,
                out,
                json,
            }
        }
        Command::Simulate(a) => {
            let h = settings.require("h", a.h, None)?;
            let tf = settings.require("tf", a.tf, Some(DEFAULT_TF))?;
            let d = settings.require("d", a.d, Some(0.0))?;
            let alpha = settings.require("alpha", a.alpha, Some(0.0))?;
            let n = settings.require("N", a.n, Some(1))?;
            let traj = settings.path("traj", a.traj.clone(), None)?;
            let feedforward = settings.get("feedforward", a.feedforward, None)?;
            let out = settings.path("out", cli.common.out.clone(), Some("result.json"))?.unwrap();
            let mut spec = experiment(DimensionlessParams::new(h, d, alpha, tf)?, n, &common);
            spec.feedforward = feedforward;
            spec.record_trajectory = traj.is_some();
            spec.validate()?;
            Plan::Simulate { spec, out, traj }
        }
        Command::Sweep { kind } => {
            let (axes, base, counts) = match kind {
                SweepKind::Amplitude(a) => {
                    let h_min = settings.require("h-min", a.h_min, None)?;
                    let h_max = settings.require("h-max", a.h_max, None)?;
                    let points = settings.require("points", a.points, Some(DEFAULT_POINTS))?;
                    let tf = settings.require("tf", a.tf, Some(DEFAULT_TF))?;
                    let d = settings.require("d", a.d, Some(0.0))?;
                    let alpha = settings.require("alpha", a.alpha, Some(0.0))?;
                    let counts = parse_counts(&settings.require("N", a.n.clone(), Some("1".to_string()))?)?;
                    let axis = Axis::linear(SweepParam::H, h_min, h_max, points)?;
                    let params = DimensionlessParams::new(h_min.max(f64::MIN_POSITIVE), d, alpha, tf)?;
                    (vec![axis], experiment(params, counts[0], &common), Some(counts))
                }
                SweepKind::Nd(a) => {
                    let h = settings.require("h", a.h, None)?;
                    let tf = settings.require("tf", a.tf, Some(DEFAULT_TF))?;
                    let alpha = settings.require("alpha", a.alpha, Some(0.0))?;
                    let d_min = settings.require("d-min", a.d_min, Some(0.0))?;
                    let d_max = settings.require("d-max", a.d_max, None)?;
                    let points = settings.require("points", a.points, Some(DEFAULT_POINTS))?;
                    let n_min = settings.require("n-min", a.n_min, Some(1))?;
                    let n_max = settings.require("n-max", a.n_max, Some(DEFAULT_MAX_N))?;
                    let axes = vec![
                        Axis::odd(n_min, n_max)?,
                        Axis::linear(SweepParam::D, d_min, d_max, points)?,
                    ];
                    let params = DimensionlessParams::new(h, d_min, alpha, tf)?;
                    (axes, experiment(params, n_min, &common), None)
                }
                SweepKind::Alpha(a) => {
                    let alpha_min = settings.require("alpha-min", a.alpha_min, Some(0.0))?;
                    let alpha_max = settings.require("alpha-max", a.alpha_max, None)?;
                    let points = settings.require("points", a.points, Some(DEFAULT_POINTS))?;
                    let h = settings.require("h", a.h, None)?;
                    let tf = settings.require("tf", a.tf, Some(DEFAULT_TF))?;
                    let d = settings.require("d", a.d, Some(0.0))?;
                    let counts = parse_counts(&settings.require("N", a.n.clone(), Some("1".to_string()))?)?;
                    let axis = Axis::linear(SweepParam::Alpha, alpha_min, alpha_max, points)?;
                    let params = DimensionlessParams::new(h, d, alpha_min, tf)?;
                    (vec![axis], experiment(params, counts[0], &common), Some(counts))
                }
            };
            let out = settings.path("out", cli.common.out.clone(), Some("sweep.csv"))?.unwrap();
            let spec = SweepSpec::new(axes, base);
            spec.validate()?;
            Plan::Sweep {
                spec,
                counts,
                out,
                execution: common.execution,
            }
        }
    };
    settings.finish()?;
    Ok(plan)
}

#[derive(Serialize)]
struct DesignRecord {
    h: f64,
    tf: f64,
    area: f64,
    min_tf: f64,
    /// coefficients of theta(s), s = t/t_f, lowest order first
    coefficients: [f64; 6],
    omega_0: f64,
    omega_tf: f64,
    sequence_example: crate::composite::SequenceDescription,
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    command: &'a str,
    #[serde(flatten)]
    spec: &'a SweepSpec,
    #[serde(rename = "N_list", skip_serializing_if = "Option::is_none")]
    counts: Option<&'a [usize]>,
}

fn execute(plan: Plan, command: &str) -> CliResult<String> {
    match plan {
        Plan::Design {
            h,
            tf,
            samples,
            out,
            json,
        } => {
            let design = PulseDesign::new(h, tf)?;
            let rows = design.sample_chirp(samples)?;
            let mut csv = String::from("t_over_t0,omega_t0\n");
            for (t, w) in rows {
                csv.push_str(&format!("{},{}\n", fmt_f64(t), fmt_f64(w)));
            }
            write_file(&out, &csv)?;
            let record = DesignRecord {
                h,
                tf,
                area: h * tf,
                min_tf: crate::design::min_duration(h),
                coefficients: design.trajectory.coefficients,
                omega_0: design.omega_start,
                omega_tf: design.omega_end,
                sequence_example: build_sequence(design, 1)?.description(),
            };
            write_file(&json, &(serde_json::to_string_pretty(&record).unwrap() + "\n"))?;
            Ok(format!(
                "wrote {} and {} (omega(0) = {:.6}, omega(t_f) = {:.6})",
                out.display(),
                json.display(),
                design.omega_start,
                design.omega_end
            ))
        }
        Plan::Simulate { spec, out, traj } => {
            let result = run_experiment(&spec)?;
            write_file(&out, &(result.to_json() + "\n"))?;
            if let (Some(path), Some(tr)) = (&traj, &result.trajectory) {
                write_file(path, &tr.to_csv())?;
            }
            Ok(format!("P = {:.6}; wrote {}", result.probability, out.display()))
        }
        Plan::Sweep {
            spec,
            counts,
            out,
            execution,
        } => {
            let csv = match &counts {
                Some(list) if list.len() > 1 => compare_n(&spec, list, execution)?.to_csv(),
                _ => sweep(&spec, execution)?.to_csv(),
            };
            write_file(&out, &csv)?;
            let sidecar = SweepSidecar {
                command,
                spec: &spec,
                counts: counts.as_deref(),
            };
            let side = sidecar_path(&out);
            write_file(&side, &(serde_json::to_string_pretty(&sidecar).unwrap() + "\n"))?;
            Ok(format!("wrote {} and {}", out.display(), side.display()))
        }
    }
}

fn command_name(cli: &Cli) -> &'static str {
    match &cli.command {
        Command::Design(_) => "design",
        Command::Simulate(_) => "simulate",
        Command::Sweep { kind } => match kind {
            SweepKind::Amplitude(_) => "sweep amplitude",
            SweepKind::Nd(_) => "sweep nd",
            SweepKind::Alpha(_) => "sweep alpha",
        },
    }
}

/// Runs a parsed invocation. On success returns the text for stdout.
pub fn run_cli(cli: &Cli) -> CliResult<String> {
    let file = match &cli.common.config {
        Some(path) => parse_config(
            &fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?,
        )?,
        None => BTreeMap::new(),
    };
    let mut settings = Settings::new(file);
    let plan = resolve(cli, &mut settings)?;
    if cli.common.print_config {
        return Ok(settings.render());
    }
    execute(plan, command_name(cli))
}

/// Full entry point: parses `args` (including the program name), runs, prints
/// and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(text) => {
            if text.ends_with('\n') {
                print!("{text}");
            } else {
                println!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("magrev").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn config_parsing() {
        let map = parse_config("# comment\nh = 0.08\n\ntf=100 # trailing\n").unwrap();
        assert_eq!(map["h"], "0.08");
        assert_eq!(map["tf"], "100");
        assert!(parse_config("h 0.08").is_err());
        assert!(parse_config("h = 1\nh = 2").is_err());
    }

    #[test]
    fn flags_override_config_and_print() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "h = 0.05\ntf = 80\nd = 0.01\n").unwrap();
        let cli = parse(&["simulate", "--config", cfg.to_str().unwrap(), "--h", "0.08", "--print-config"]);
        let text = run_cli(&cli).unwrap();
        assert!(text.contains("h = 0.08\n"), "{text}");
        assert!(text.contains("tf = 80\n"));
        assert!(text.contains("d = 0.01\n"));
        assert!(text.contains("steps = 20000\n"));
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "h = 0.08\nbogus = 1\n").unwrap();
        let cli = parse(&["simulate", "--config", cfg.to_str().unwrap(), "--print-config"]);
        let err = run_cli(&cli).unwrap_err();
        assert_eq!(err.code, 1);
        assert!(err.message.contains("bogus"));
        // keys of other commands are unknown here too
        fs::write(&cfg, "h = 0.08\nsamples = 11\n").unwrap();
        assert_eq!(run_cli(&cli).unwrap_err().code, 1);
    }

    #[test]
    fn seedless_rejected() {
        let err = run_cli(&parse(&["design", "--h", "0.08", "--tf", "100", "--seedless"])).unwrap_err();
        assert_eq!(err.code, 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["magrev", "design", "--h", "0.08", "--tf", "100", "--samples", "1"]), 1);
        assert_eq!(main_with_args(["magrev", "design", "--h", "abc"]), 1);
        assert_eq!(main_with_args(["magrev", "simulate", "--h", "0.08", "--N", "2", "--print-config"]), 1);
        assert_eq!(main_with_args(["magrev", "simulate", "--h", "0.08", "--steps", "10", "--print-config"]), 1);
        let err = run_cli(&parse(&["design", "--h", "0.05", "--tf", "60", "--out", "/nonexistent/x.csv"])).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("t_f must be ≥ 62.832 t_0"), "{}", err.message);
    }

    #[test]
    fn count_lists() {
        assert_eq!(parse_counts("1,3, 5").unwrap(), vec![1, 3, 5]);
        assert!(parse_counts("1,2").is_err());
        assert!(parse_counts("x").is_err());
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("a/sweep.csv")), PathBuf::from("a/sweep.json"));
        assert_eq!(sidecar_path(Path::new("a/sweep.json")), PathBuf::from("a/sweep.spec.json"));
    }
}
