//! Command-line front end: network construction and validation, reproduction
//! numbers, time integration, endemic equilibria, and parameter sweeps, with
//! JSON/CSV outputs. Exit codes: 0 success, 2 validation error, 3 numerical
//! failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use metapop::sweep::{
    connectivity_to_csv, trajectory_to_csv, AxisSpec, PhaseParameter, SweepSpec,
};
use metapop::{
    build_truncated_power_law, calibrate_power_law, multi_start_scan, DegreeDistribution,
    IncidenceKind, IntegrationControls, MetapopState, MixingKernel, NetworkSpec, Params, RhsKind,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<metapop::Error> for CliError {
    fn from(err: metapop::Error) -> Self {
        use metapop::Error::*;
        match err {
            NonNormalizable(_) | InvalidInput(_) | DimensionMismatch(_) | InvalidParams(_) => {
                CliError::Validation(err.to_string())
            }
            _ => CliError::Numerical(err.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Freq,
    Mass,
}

impl From<ModelKind> for IncidenceKind {
    fn from(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Freq => IncidenceKind::StandardIncidence,
            ModelKind::Mass => IncidenceKind::MassAction,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "metapop",
    about = "Degree-structured metapopulation epidemic toolkit",
    version
)]
struct Cli {
    /// Parameter JSON file (defaults to the built-in baseline set).
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Network JSON file (defaults to a power-law network, exponent 3, k in [3, 30]).
    #[arg(long, global = true)]
    network: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Seed for every random choice this invocation makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver / integrator tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build, validate, or export degree distributions and kernels.
    Net {
        #[command(subcommand)]
        action: NetAction,
    },
    /// Reproduction numbers: closed form, numeric, bounds, certificates.
    R0(R0Args),
    /// Integrate a model and export the trajectory.
    Simulate(SimulateArgs),
    /// Endemic equilibria of the mass-action model.
    Endemic {
        #[command(subcommand)]
        action: EndemicAction,
    },
    /// Phase and migration sweeps.
    Sweep {
        #[command(subcommand)]
        action: SweepAction,
    },
}

#[derive(Subcommand, Debug)]
enum NetAction {
    /// Build a truncated power-law network with the uncorrelated closure.
    Build(NetBuildArgs),
    /// Check row sums and detailed balance of the configured network.
    Validate,
    /// Export the connectivity matrix C as CSV.
    ExportC,
}

#[derive(Args, Debug)]
struct NetBuildArgs {
    #[arg(long, default_value_t = 3.0)]
    exponent: f64,
    #[arg(long, default_value_t = 3)]
    k_min: u32,
    #[arg(long, default_value_t = 30)]
    k_max: u32,
    /// Search k_max (then the exponent) for this mean degree and report the
    /// calibration instead of using --k-max directly.
    #[arg(long)]
    target_mean: Option<f64>,
}

#[derive(Args, Debug)]
struct R0Args {
    #[arg(long, value_enum, default_value_t = ModelKind::Freq)]
    kind: ModelKind,
    /// Override the transmission coefficient from the parameter file.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Freq)]
    kind: ModelKind,
    /// Use the general-kernel right-hand side (reads the kernel from --network).
    #[arg(long)]
    general: bool,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    /// Sampling cadence, years.
    #[arg(long, default_value_t = 1.0)]
    cadence: f64,
    /// Infectious perturbation of the disease-free state, as a fraction of
    /// each class's susceptible density. Zero starts exactly at the DFE.
    #[arg(long, default_value_t = 0.01)]
    perturb: f64,
    /// Multiply each class's perturbation by a seeded uniform factor in
    /// [0.5, 1.5].
    #[arg(long)]
    jitter: bool,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum EndemicAction {
    /// Multi-start fixed-point solve.
    Solve(EndemicSolveArgs),
    /// Scan H(c * ones) over a logarithmic range of c.
    Hscan(HscanArgs),
}

#[derive(Args, Debug)]
struct EndemicSolveArgs {
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct HscanArgs {
    #[arg(long, default_value_t = 1e-6)]
    c_min: f64,
    #[arg(long, default_value_t = 1e4)]
    c_max: f64,
    #[arg(long, default_value_t = 81)]
    steps: usize,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum SweepAction {
    /// R0 grid over (beta or delta) x k_max.
    Phase(PhaseArgs),
    /// Steady-state prevalence by degree across migration rates.
    Migration(MigrationArgs),
}

#[derive(Args, Debug)]
struct PhaseArgs {
    /// Which parameter the first axis varies.
    #[arg(long, default_value = "beta")]
    param: String,
    #[arg(long)]
    min: f64,
    #[arg(long)]
    max: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long)]
    log: bool,
    #[arg(long, default_value_t = 10)]
    kmax_min: u32,
    #[arg(long, default_value_t = 60)]
    kmax_max: u32,
    #[arg(long, default_value_t = 6)]
    kmax_steps: usize,
    #[arg(long, default_value_t = 3.0)]
    exponent: f64,
    #[arg(long, default_value_t = 3)]
    k_min: u32,
    /// Fraction of cells to cross-check against the dense NGM.
    #[arg(long, default_value_t = 0.05)]
    cross_check: f64,
}

#[derive(Args, Debug)]
struct MigrationArgs {
    /// Comma-separated diffusion rates applied to all four compartments.
    #[arg(long, value_delimiter = ',', required = true)]
    d_values: Vec<f64>,
    #[arg(long, default_value_t = 20_000.0)]
    t_transient: f64,
    #[arg(long, default_value_t = 0.01)]
    perturb: f64,
    #[arg(long)]
    beta: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let params = load_params(&cli)?;
    let output = match &cli.command {
        Command::Net { action } => run_net(&cli, action)?,
        Command::R0(args) => run_r0(&cli, params, args)?,
        Command::Simulate(args) => run_simulate(&cli, params, args)?,
        Command::Endemic { action } => run_endemic(&cli, params, action)?,
        Command::Sweep { action } => run_sweep(&cli, params, action)?,
    };
    write_output(&cli, &output)
}

fn load_params(cli: &Cli) -> CliResult<Params> {
    let params = match &cli.params {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<Params>(&text)
                .map_err(|e| CliError::Validation(format!("malformed parameter file: {e}")))?
        }
        None => Params::baseline_tb(0.0017),
    };
    let bad = params.violations();
    if !bad.is_empty() {
        return Err(CliError::Validation(format!(
            "invalid parameters:\n  {}",
            bad.join("\n  ")
        )));
    }
    Ok(params)
}

fn load_network(cli: &Cli) -> CliResult<(DegreeDistribution, MixingKernel)> {
    match &cli.network {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
            let spec: NetworkSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("malformed network file: {e}")))?;
            Ok(spec.build()?)
        }
        None => {
            let dist = build_truncated_power_law(3.0, 3, 30)?;
            let kernel = MixingKernel::uncorrelated(&dist);
            Ok((dist, kernel))
        }
    }
}

fn write_output(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))
}

fn run_net(cli: &Cli, action: &NetAction) -> CliResult<String> {
    match action {
        NetAction::Build(args) => {
            let (dist, calibration) = match args.target_mean {
                Some(target) => {
                    let cal =
                        calibrate_power_law(target, args.exponent, args.k_min, args.k_max, 1e-6)?;
                    let dist = build_truncated_power_law(cal.exponent, cal.k_min, cal.k_max)?;
                    (dist, Some(cal))
                }
                None => (
                    build_truncated_power_law(args.exponent, args.k_min, args.k_max)?,
                    None,
                ),
            };
            let kernel = MixingKernel::uncorrelated(&dist);
            let spec = NetworkSpec::from_parts(&dist, &kernel);
            let payload = serde_json::json!({
                "network": spec,
                "mean_degree": dist.mean_degree(),
                "calibration": calibration,
            });
            to_json(&payload)
        }
        NetAction::Validate => {
            let (dist, kernel) = load_network(cli)?;
            let violations = metapop::validate_consistency(&dist, kernel.rows());
            let payload = serde_json::json!({
                "classes": dist.len(),
                "mean_degree": dist.mean_degree(),
                "uncorrelated": kernel.is_uncorrelated(),
                "violations": violations,
            });
            if violations.is_empty() {
                to_json(&payload)
            } else {
                Err(CliError::Validation(
                    serde_json::to_string_pretty(&payload).unwrap_or_default(),
                ))
            }
        }
        NetAction::ExportC => {
            let (dist, kernel) = load_network(cli)?;
            Ok(connectivity_to_csv(&dist, kernel.connectivity()))
        }
    }
}

fn run_r0(cli: &Cli, mut params: Params, args: &R0Args) -> CliResult<String> {
    if let Some(beta) = args.beta {
        params.beta = beta;
    }
    params = params.validated()?;
    let (dist, _) = load_network(cli)?;
    let report = match args.kind {
        ModelKind::Freq => metapop::r0_dual_path_freq(&params, &dist)?,
        ModelKind::Mass => metapop::r0_mass_structured(&params, &dist)?,
    };
    match cli.format {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Csv => {
            let (lo, hi) = report.bounds.unwrap_or((f64::NAN, f64::NAN));
            Ok(format!(
                "value,method,lower,upper\n{},{:?},{},{}\n",
                report.value, report.method, lo, hi
            ))
        }
    }
}

fn initial_state(
    params: &Params,
    dist: &DegreeDistribution,
    perturb: f64,
    jitter: bool,
    seed: u64,
) -> CliResult<MetapopState> {
    if !(0.0..1.0).contains(&perturb) {
        return Err(CliError::Validation(format!(
            "perturbation fraction must lie in [0, 1), got {perturb}"
        )));
    }
    let mut state = metapop::dfe(params, dist);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..dist.len() {
        let factor = if jitter { rng.gen_range(0.5..1.5) } else { 1.0 };
        let seed_density = perturb * factor * state.s[k];
        state.s[k] -= seed_density;
        state.i[k] = seed_density;
    }
    Ok(state)
}

fn run_simulate(cli: &Cli, mut params: Params, args: &SimulateArgs) -> CliResult<String> {
    if let Some(beta) = args.beta {
        params.beta = beta;
    }
    params = params.validated()?;
    let (dist, kernel) = load_network(cli)?;
    let state0 = initial_state(&params, &dist, args.perturb, args.jitter, cli.seed)?;
    let kind = if args.general {
        RhsKind::General(args.kind.into())
    } else {
        match args.kind {
            ModelKind::Freq => RhsKind::UncorrelatedFreq,
            ModelKind::Mass => RhsKind::UncorrelatedMass,
        }
    };
    let controls = IntegrationControls {
        rel_tol: cli.tol.max(1e-13),
        sample_interval: args.cadence,
        ..Default::default()
    };
    let traj = metapop::integrate(
        kind,
        &state0,
        &params,
        &dist,
        Some(&kernel),
        args.t_end,
        &controls,
    )?;
    match cli.format {
        OutputFormat::Csv => Ok(trajectory_to_csv(&traj, &dist)),
        OutputFormat::Json => to_json(&traj),
    }
}

fn run_endemic(cli: &Cli, params: Params, action: &EndemicAction) -> CliResult<String> {
    let (dist, _) = load_network(cli)?;
    match action {
        EndemicAction::Solve(args) => {
            let mut params = params;
            if let Some(beta) = args.beta {
                params.beta = beta;
            }
            params = params.validated()?;
            let r0 = metapop::r0_mass_structured(&params, &dist)?;
            let tol = cli.tol.max(1e-13);
            let solutions = multi_start_scan(
                &params,
                &dist,
                args.starts,
                cli.seed,
                args.damping,
                tol,
                args.max_iter,
            )?;
            let payload = serde_json::json!({
                "r0_mass": r0,
                "solutions": solutions,
            });
            to_json(&payload)
        }
        EndemicAction::Hscan(args) => {
            let mut params = params;
            if let Some(beta) = args.beta {
                params.beta = beta;
            }
            params = params.validated()?;
            if args.steps < 2 || !(args.c_max > args.c_min) || args.c_min <= 0.0 {
                return Err(CliError::Validation(
                    "hscan needs c_max > c_min > 0 and at least 2 steps".into(),
                ));
            }
            let n = dist.len();
            let mut out = String::from("c,h\n");
            for i in 0..args.steps {
                let t = i as f64 / (args.steps - 1) as f64;
                let c = (args.c_min.ln() + t * (args.c_max.ln() - args.c_min.ln())).exp();
                let z = DVector::from_element(n, c);
                let h = metapop::h_function(&z, &params, &dist)?;
                out.push_str(&format!("{c},{h}\n"));
            }
            Ok(out)
        }
    }
}

fn run_sweep(cli: &Cli, params: Params, action: &SweepAction) -> CliResult<String> {
    match action {
        SweepAction::Phase(args) => {
            let parameter = match args.param.as_str() {
                "beta" => PhaseParameter::Beta,
                "delta" => PhaseParameter::Delta,
                other => {
                    return Err(CliError::Validation(format!(
                        "unknown sweep parameter '{other}'; use beta or delta"
                    )))
                }
            };
            let spec = SweepSpec {
                parameter,
                axis: AxisSpec {
                    name: args.param.clone(),
                    min: args.min,
                    max: args.max,
                    steps: args.steps,
                    log: args.log,
                },
                kmax_axis: AxisSpec {
                    name: "kmax".into(),
                    min: args.kmax_min as f64,
                    max: args.kmax_max as f64,
                    steps: args.kmax_steps,
                    log: false,
                },
                base: params,
                exponent: args.exponent,
                k_min: args.k_min,
                cross_check_fraction: args.cross_check,
            };
            let grid = metapop::sweep_r0_phase(&spec)?;
            match cli.format {
                OutputFormat::Csv => Ok(grid.to_csv()),
                OutputFormat::Json => to_json(&grid),
            }
        }
        SweepAction::Migration(args) => {
            let mut params = params;
            if let Some(beta) = args.beta {
                params.beta = beta;
            }
            params = params.validated()?;
            let (dist, _) = load_network(cli)?;
            let state0 = initial_state(&params, &dist, args.perturb, false, cli.seed)?;
            let table = metapop::sweep_migration(
                &args.d_values,
                &params,
                &dist,
                &state0,
                args.t_transient,
                &IntegrationControls::default(),
            )?;
            match cli.format {
                OutputFormat::Csv => Ok(table.to_csv()),
                OutputFormat::Json => to_json(&table),
            }
        }
    }
}
