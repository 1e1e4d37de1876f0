//! `formctl`: command-line front end for formation-control analysis.
//!
//! Every subcommand prints one JSON document on stdout and, given `--out`,
//! also writes its artifacts there. Domain failures print
//! `{"error": {"code", "message"}}` and exit with status 1; malformed command
//! lines exit with status 2.

mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use formctl_core::control::FormationSystem;
use formctl_core::dynamics::{
    find_equilibrium, integrate, label_equilibrium, monte_carlo, sample_configuration, trial_rng, IntegratorSettings,
    Method, StopReason,
};
use formctl_core::geometry::Configuration;
use formctl_core::io::{read_configuration, read_system, to_json};
use formctl_core::partition::independent_partition;
use formctl_core::spectral::{
    classify_orbit, enumerate_target_orbits, equilibrium_tol, mbif_signature, signature_of, spectral_report,
    Classification, Signature,
};

#[derive(Debug, Parser)]
#[command(name = "formctl", version, about = "Gradient formation control on triangulated Laman graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a system file and check its graph, targets and control laws.
    Validate {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Integrate the gradient flow; writes trajectory.csv, snapshot.svg and
    /// summary.json.
    Simulate {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        input: OneInput,
        #[command(flatten)]
        sampling: BoxArg,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[command(flatten)]
        tol: TolArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Independent partition of a configuration.
    Partition {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        input: OneInput,
        #[command(flatten)]
        sampling: BoxArg,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Hessian signature, per-part signatures and their consistency.
    Signature {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        input: OneInput,
        #[command(flatten)]
        sampling: BoxArg,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Stability class of an equilibrium.
    Classify {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        input: OneInput,
        #[command(flatten)]
        sampling: BoxArg,
        #[command(flatten)]
        tol: TolArgs,
        /// Run the flow to an equilibrium before classifying.
        #[arg(long)]
        equilibrate: bool,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compare the partition-assembled signature with the full Hessian
    /// signature over many samples.
    MbifCheck {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        input: Samples,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        sampling: BoxArg,
        #[command(flatten)]
        tol: TolArgs,
        /// Run the flow to an equilibrium from every sample first.
        #[arg(long)]
        equilibrate: bool,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// One configuration per target orbit, with its classification.
    StableOrbits {
        #[command(flatten)]
        system: SystemArg,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Basin statistics from seeded random initial conditions.
    Montecarlo {
        #[command(flatten)]
        system: SystemArg,
        /// Number of trials.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        sampling: BoxArg,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
struct SystemArg {
    /// System JSON file (graph, targets, law).
    #[arg(long)]
    system: PathBuf,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Also write the report into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exactly one configuration: from a file or drawn from a seed.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct OneInput {
    /// Configuration JSON file.
    #[arg(long, visible_alias = "init")]
    config: Option<PathBuf>,
    /// Draw a random configuration from this seed instead.
    #[arg(long)]
    seed: Option<u64>,
}

/// One configuration from a file, or `--random N` seeded samples.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Samples {
    /// Configuration JSON file.
    #[arg(long, visible_alias = "init")]
    config: Option<PathBuf>,
    /// Number of random samples.
    #[arg(long)]
    random: Option<usize>,
}

#[derive(Debug, Args)]
struct SeedArg {
    /// Master seed for the random samples; sample i uses stream i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BoxArg {
    /// Side of the sampling square [default: twice the largest target].
    #[arg(long = "box")]
    box_size: Option<f64>,
}

#[derive(Debug, Args)]
struct TolArgs {
    /// Alignment tolerance for collinearity tests.
    #[arg(long, default_value = "1e-9")]
    align_tol: f64,
    /// Eigenvalues below this (times max(1, |lambda|max)) count as zero.
    #[arg(long, default_value = "1e-8")]
    zero_tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Adaptive Dormand-Prince 5(4).
    Rk45,
    /// Classical fixed-step Runge-Kutta.
    Rk4,
}

#[derive(Debug, Args)]
struct IntegratorArgs {
    #[arg(long, value_enum, default_value = "rk45")]
    method: MethodArg,
    /// Step size for rk4.
    #[arg(long, default_value = "1e-3")]
    dt: f64,
    /// Relative tolerance for rk45.
    #[arg(long, default_value = "1e-8")]
    rtol: f64,
    /// Absolute tolerance for rk45.
    #[arg(long, default_value = "1e-10")]
    atol: f64,
    /// Final time.
    #[arg(long, default_value = "1e4")]
    t_max: f64,
    /// Stop once the gradient norm falls below this.
    #[arg(long, default_value = "1e-6")]
    grad_stop: f64,
    #[arg(long, default_value_t = 200_000)]
    max_steps: usize,
    /// Record every k-th accepted step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Constant per-edge distance offsets, comma separated, in edge order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bias: Option<Vec<f64>>,
}

impl IntegratorArgs {
    fn settings(&self) -> IntegratorSettings {
        let method = match self.method {
            MethodArg::Rk45 => Method::Rk45Adaptive { rtol: self.rtol, atol: self.atol },
            MethodArg::Rk4 => Method::Rk4Fixed { dt: self.dt },
        };
        IntegratorSettings {
            method,
            t_max: self.t_max,
            grad_stop: self.grad_stop,
            max_steps: self.max_steps,
            bias: self.bias.clone(),
            stride: self.stride,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Domain(formctl_core::Error),
    Io(PathBuf, std::io::Error),
}

impl From<formctl_core::Error> for CliError {
    fn from(e: formctl_core::Error) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Domain(e) => e.code(),
            CliError::Io(..) => "io_error",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Domain(e) => e.to_string(),
            CliError::Io(path, e) => format!("{}: {e}", path.display()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn default_box(sys: &FormationSystem, given: Option<f64>) -> CliResult<f64> {
    let b = given.unwrap_or(2.0 * sys.max_target());
    if !(b > 0.0 && b.is_finite()) {
        return Err(formctl_core::Error::InvalidSettings("box size must be positive".to_string()).into());
    }
    Ok(b)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(path, e))
}

/// A closed stdout (e.g. piped into `head`) is not an error.
fn print_stdout(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Prints `value` and, when `out` is set, writes it to `out/name`.
fn emit<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> CliResult<()> {
    let text = to_json(value);
    if let Some(dir) = out {
        write_file(dir, name, &format!("{text}\n"))?;
    }
    print_stdout(&text);
    Ok(())
}

fn load_one(sys: &FormationSystem, input: &OneInput, sampling: &BoxArg) -> CliResult<Configuration> {
    match (&input.config, input.seed) {
        (Some(path), _) => Ok(read_configuration(path)?),
        (None, Some(seed)) => Ok(sample_configuration(sys, &mut trial_rng(seed, 0), default_box(sys, sampling.box_size)?)),
        (None, None) => unreachable!("clap requires one input"),
    }
}

fn load_samples(sys: &FormationSystem, input: &Samples, seed: u64, sampling: &BoxArg) -> CliResult<Vec<Configuration>> {
    match (&input.config, input.random) {
        (Some(path), _) => Ok(vec![read_configuration(path)?]),
        (None, Some(n)) => {
            let b = default_box(sys, sampling.box_size)?;
            Ok((0..n).map(|i| sample_configuration(sys, &mut trial_rng(seed, i), b)).collect())
        }
        (None, None) => unreachable!("clap requires one input"),
    }
}

fn validate(sys: &FormationSystem, out: Option<&Path>) -> CliResult<()> {
    let g = sys.graph();
    let report = json!({
        "valid": true,
        "n": g.n(),
        "edges": g.edges(),
        "targets": sys.targets_map(),
        "target_orbits": 1usize << g.steps().len(),
    });
    emit(&report, out, "validate.json")
}

#[derive(Serialize)]
struct SimulateSummary {
    stop: StopReason,
    steps: usize,
    t_final: f64,
    potential: f64,
    grad_norm: f64,
    terminal: Configuration,
    /// Target-orbit label when the flow reached the gradient threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<formctl_core::dynamics::SimOutcome>,
}

fn simulate(
    sys: &FormationSystem,
    p0: &Configuration,
    settings: &IntegratorSettings,
    tol: &TolArgs,
    out: &Path,
) -> CliResult<()> {
    let traj = integrate(sys, p0, settings)?;
    write_file(out, "trajectory.csv", &traj.to_csv())?;
    let terminal = traj.terminal();
    let partition = independent_partition(sys.graph(), terminal, tol.align_tol)?;
    let panels = [
        svg::Panel { title: "initial".to_string(), config: p0, partition: None },
        svg::Panel { title: "terminal".to_string(), config: terminal, partition: Some(&partition) },
    ];
    write_file(out, "snapshot.svg", &svg::render(sys, &panels))?;
    let outcome = (traj.stop == StopReason::GradStop).then(|| {
        let targets = enumerate_target_orbits(sys).unwrap_or_default();
        label_equilibrium(sys, &find_equilibrium(sys, terminal, settings).unwrap_or(terminal.clone()), &targets)
    });
    let summary = SimulateSummary {
        stop: traj.stop,
        steps: traj.steps,
        t_final: *traj.times.last().unwrap(),
        potential: *traj.potential.last().unwrap(),
        grad_norm: *traj.grad_norms.last().unwrap(),
        terminal: terminal.clone(),
        outcome,
    };
    emit(&summary, Some(out), "summary.json")
}

fn partition(sys: &FormationSystem, p: &Configuration, tol: &TolArgs, out: Option<&Path>) -> CliResult<()> {
    let part = independent_partition(sys.graph(), p, tol.align_tol)?;
    if let Some(dir) = out {
        let panel = svg::Panel { title: "partition".to_string(), config: p, partition: Some(&part) };
        write_file(dir, "partition.svg", &svg::render(sys, &[panel]))?;
    }
    emit(&part.report(), out, "partition.json")
}

#[derive(Serialize)]
struct Classified {
    configuration: Configuration,
    #[serde(flatten)]
    classification: Classification,
}

#[derive(Serialize)]
struct MbifSample {
    sample: usize,
    configuration: Configuration,
    equilibrium: bool,
    hessian: Signature,
    mbif: Signature,
    per_part: Vec<Signature>,
    agree: bool,
}

#[derive(Serialize)]
#[serde(untagged)]
enum MbifEntry {
    Ok(MbifSample),
    Failed { sample: usize, error: serde_json::Value },
}

#[derive(Serialize)]
struct MbifReport {
    samples: Vec<MbifEntry>,
    total: usize,
    agree: usize,
    equilibria: usize,
    agree_at_equilibria: usize,
    errors: usize,
    summary: String,
}

fn mbif_sample(
    sys: &FormationSystem,
    p: &Configuration,
    tol: &TolArgs,
    settings: Option<&IntegratorSettings>,
) -> formctl_core::Result<(Configuration, bool, Signature, formctl_core::spectral::MbifSignature)> {
    let p = match settings {
        Some(s) => find_equilibrium(sys, p, s)?,
        None => p.clone(),
    };
    let equilibrium = sys.gradient(&p)?.norm() <= equilibrium_tol(sys);
    let full = signature_of(&sys.hessian(&p)?, tol.zero_tol)?;
    let mbif = mbif_signature(sys, &p, tol.align_tol, tol.zero_tol)?;
    Ok((p, equilibrium, full, mbif))
}

fn mbif_check(
    sys: &FormationSystem,
    samples: &[Configuration],
    tol: &TolArgs,
    settings: Option<&IntegratorSettings>,
    out: Option<&Path>,
) -> CliResult<()> {
    let mut entries = Vec::with_capacity(samples.len());
    let (mut agree, mut equilibria, mut agree_eq, mut errors) = (0, 0, 0, 0);
    for (i, p) in samples.iter().enumerate() {
        match mbif_sample(sys, p, tol, settings) {
            Ok((q, equilibrium, hessian, mbif)) => {
                let ok = (hessian.n_plus, hessian.n_minus) == (mbif.total.n_plus, mbif.total.n_minus);
                agree += ok as usize;
                equilibria += equilibrium as usize;
                agree_eq += (ok && equilibrium) as usize;
                entries.push(MbifEntry::Ok(MbifSample {
                    sample: i,
                    configuration: q,
                    equilibrium,
                    hessian,
                    mbif: mbif.total,
                    per_part: mbif.per_part,
                    agree: ok,
                }));
            }
            Err(e) => {
                errors += 1;
                entries.push(MbifEntry::Failed {
                    sample: i,
                    error: json!({ "code": e.code(), "message": e.to_string() }),
                });
            }
        }
    }
    let total = samples.len();
    let summary = format!(
        "mbif-check: {agree}/{total} agree; {agree_eq}/{equilibria} at equilibria; {errors} errors"
    );
    eprintln!("{summary}");
    let report = MbifReport {
        samples: entries,
        total,
        agree,
        equilibria,
        agree_at_equilibria: agree_eq,
        errors,
        summary,
    };
    emit(&report, out, "mbif-check.json")
}

fn stable_orbits(sys: &FormationSystem, tol: &TolArgs, out: Option<&Path>) -> CliResult<()> {
    let orbits = enumerate_target_orbits(sys)?;
    let mut listed = Vec::with_capacity(orbits.len());
    for (index, p) in orbits.into_iter().enumerate() {
        let c = classify_orbit(sys, &p, tol.zero_tol, tol.align_tol)?;
        listed.push(json!({
            "index": index,
            "points": p.points.iter().map(|x| [x.x, x.y]).collect::<Vec<_>>(),
            "class": c.class,
            "signature": c.signature,
        }));
    }
    emit(&json!({ "count": listed.len(), "orbits": listed }), out, "stable-orbits.json")
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Validate { system, out } => validate(&read_system(&system.system)?, out.out.as_deref()),
        Command::Simulate { system, input, sampling, integrator, tol, out } => {
            let sys = read_system(&system.system)?;
            let p0 = load_one(&sys, &input, &sampling)?;
            simulate(&sys, &p0, &integrator.settings(), &tol, &out)
        }
        Command::Partition { system, input, sampling, tol, out } => {
            let sys = read_system(&system.system)?;
            let p = load_one(&sys, &input, &sampling)?;
            partition(&sys, &p, &tol, out.out.as_deref())
        }
        Command::Signature { system, input, sampling, tol, out } => {
            let sys = read_system(&system.system)?;
            let p = load_one(&sys, &input, &sampling)?;
            emit(&spectral_report(&sys, &p, tol.zero_tol, tol.align_tol)?, out.out.as_deref(), "signature.json")
        }
        Command::Classify { system, input, sampling, tol, equilibrate, integrator, out } => {
            let sys = read_system(&system.system)?;
            let mut p = load_one(&sys, &input, &sampling)?;
            if equilibrate {
                p = find_equilibrium(&sys, &p, &integrator.settings())?;
            }
            let classification = classify_orbit(&sys, &p, tol.zero_tol, tol.align_tol)?;
            emit(&Classified { configuration: p, classification }, out.out.as_deref(), "classify.json")
        }
        Command::MbifCheck { system, input, seed, sampling, tol, equilibrate, integrator, out } => {
            let sys = read_system(&system.system)?;
            let samples = load_samples(&sys, &input, seed.seed, &sampling)?;
            let settings = equilibrate.then(|| integrator.settings());
            mbif_check(&sys, &samples, &tol, settings.as_ref(), out.out.as_deref())
        }
        Command::StableOrbits { system, tol, out } => {
            stable_orbits(&read_system(&system.system)?, &tol, out.out.as_deref())
        }
        Command::Montecarlo { system, trials, seed, sampling, integrator, out } => {
            let sys = read_system(&system.system)?;
            let report = monte_carlo(&sys, trials, seed.seed, default_box(&sys, sampling.box_size)?, &integrator.settings())?;
            emit(&report, out.out.as_deref(), "montecarlo.json")
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            print_stdout(&json!({ "error": { "code": e.code(), "message": e.message() } }).to_string());
            ExitCode::from(1)
        }
    }
}
