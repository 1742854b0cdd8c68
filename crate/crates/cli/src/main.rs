//! `vqsci` command-line driver.
//!
//! Results go to standard output or `--output`; diagnostics and timings go
//! to standard error. Exit status is 0 on success, 1 for invalid input and
//! 2 when a computation fails.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vqsci::driver::{
    convergence_study, dissociation_curve, mitigation_demo, run, Mode, NoiseSpec, RunConfig,
    CURVE_CSV_HEADER, STUDY_CSV_HEADER,
};
use vqsci::matrix::{load_fixture, MatrixFixture};
use vqsci::optimizer::{Method, OptimizerConfig};
use vqsci::oracle::fixture_ordering;
use vqsci::pauli::{encode_matrix, stream_entry_terms, BitEncoding, PaddingPolicy};
use vqsci::resources::{benchmark_table, ResourceProfile, CSV_HEADER};

#[derive(Debug, Parser)]
#[command(
    name = "vqsci",
    version,
    about = "Variational quantum SCI on a simulated statevector"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the Pauli decomposition of a fixture matrix, one `<re> <im> <axes>`
    /// line per term (axes position 0 is qubit 0). Coefficients are
    /// electronic, in hartree, without nuclear repulsion.
    Encode(EncodeArgs),
    /// Minimise the energy of one fixture. JSON result, or with
    /// `--format csv` the optimiser trace with columns
    /// iteration,energy_hartree,stderr_hartree,best_so_far_hartree.
    Solve(SolveArgs),
    /// Solve several geometries. CSV columns: distance_angstrom, molecule,
    /// qubits, layers, tail_mean_hartree, tail_std_hartree, sci_exact_hartree,
    /// fci_reference_hartree, delta_sci_hartree, delta_fci_hartree, iterations.
    Curve(CurveArgs),
    /// Energy error against determinant count for a range of register
    /// sizes. CSV columns: qubits, determinants, layers, tail_mean_hartree,
    /// tail_std_hartree, sci_exact_hartree, delta_sci_hartree,
    /// delta_fci_hartree, sci_error_hartree, iterations, converged.
    Study(StudyArgs),
    /// Qubit and Pauli-string counts. Without arguments, prints the table
    /// of the benchmark molecules. CSV columns: molecule, N, M, d_fci,
    /// d_sci, q_vqe, q_fci, q_sci, p_upper_sci, sparsity_bound.
    Resources(ResourceArgs),
    /// Compare readout-noise bias with and without calibration-matrix
    /// mitigation at the exactly optimised parameters (JSON only).
    MitigateDemo(MitigateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the result to PATH instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Matrix fixture (JSON).
    #[arg(long, value_name = "PATH")]
    matrix: PathBuf,
    /// Encode only the 2^Q highest-weight configurations, leading one at
    /// |0...0>. Default: the whole matrix in stored order.
    #[arg(long, value_name = "Q")]
    qubits: Option<usize>,
    /// Handling of matrices smaller than 2^Q: reject, or pad the diagonal
    /// above the Gershgorin bound (hartree).
    #[arg(long, value_enum, default_value_t = Padding::Reject)]
    padding: Padding,
    /// Build the sum from the per-entry term stream (same output).
    #[arg(long)]
    stream: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Padding {
    Reject,
    Gershgorin,
}

impl From<Padding> for PaddingPolicy {
    fn from(p: Padding) -> Self {
        match p {
            Padding::Reject => PaddingPolicy::Reject,
            Padding::Gershgorin => PaddingPolicy::Gershgorin,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Noiseless expectation values or shot sampling.
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Layers of CNOT ring plus Ry rotations. Default: per-qubit schedule.
    #[arg(long, value_name = "L")]
    layers: Option<usize>,
    /// Comma-separated layer counts for 1, 2, 3, ... qubits, used in place
    /// of the default schedule.
    #[arg(long, value_name = "L1,L2,...", value_delimiter = ',')]
    layer_schedule: Option<Vec<usize>>,
    /// Shots per Pauli string (sampled mode).
    #[arg(long, value_name = "S", default_value_t = 20_000)]
    shots: u64,
    /// Seed for sampling and the optimiser.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Uniform readout flip probabilities "p01,p10" (sampled mode).
    #[arg(long, value_name = "P01,P10", conflicts_with = "noise_file")]
    noise: Option<String>,
    /// Per-qubit readout flip probabilities, one "p01 p10" line per qubit.
    #[arg(long, value_name = "PATH")]
    noise_file: Option<PathBuf>,
    /// Calibration-matrix readout mitigation (sampled mode).
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    mitigation: Switch,
    /// Derivative-free optimiser.
    #[arg(long, value_enum, default_value_t = OptimizerArg::Cobyla)]
    optimizer: OptimizerArg,
    /// Cap on energy evaluations. Default: 50000 exact, 300 sampled.
    #[arg(long, value_name = "N")]
    max_iters: Option<usize>,
    /// Final trust-region radius or simplex size (radian).
    /// Default: 1e-6 exact, 1e-4 sampled.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// Initial optimiser step (radian).
    #[arg(long, value_name = "X", default_value_t = 0.5)]
    step: f64,
    /// Encode the Hamiltonian through the per-entry term stream.
    #[arg(long)]
    stream: bool,
    /// Handling of subsets smaller than 2^Q.
    #[arg(long, value_enum, default_value_t = Padding::Reject)]
    padding: Padding,
    /// Selection tolerance against the reference energy (hartree).
    #[arg(long, value_name = "HARTREE", default_value_t = vqsci::CHEMICAL_ACCURACY)]
    threshold: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Cobyla,
    Simplex,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Matrix fixture (JSON).
    #[arg(long, value_name = "PATH")]
    matrix: PathBuf,
    /// Register size. Default: smallest size reaching the threshold.
    #[arg(long, value_name = "Q")]
    qubits: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
    /// Result format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// Fixtures, or directories whose *.json files are all used. Points are
    /// ordered by the fixtures' distance_angstrom.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    matrix: Vec<PathBuf>,
    /// Register size. Default: selected per geometry.
    #[arg(long, value_name = "Q")]
    qubits: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
    /// Result format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Matrix fixture (JSON).
    #[arg(long, value_name = "PATH")]
    matrix: PathBuf,
    /// Smallest register size.
    #[arg(long, value_name = "Q", default_value_t = 1)]
    q_min: usize,
    /// Largest register size. Default: largest power of two in the fixture.
    #[arg(long, value_name = "Q")]
    q_max: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
    /// Result format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ResourceArgs {
    /// Electron count N.
    #[arg(long, value_name = "N", requires_all = ["orbitals", "dsci"])]
    electrons: Option<u64>,
    /// Spin-orbital count M.
    #[arg(long, value_name = "M", requires_all = ["electrons", "dsci"])]
    orbitals: Option<u64>,
    /// Number of selected determinants.
    #[arg(long, value_name = "D", requires_all = ["electrons", "orbitals"])]
    dsci: Option<u128>,
    /// Label for the row.
    #[arg(long, value_name = "NAME", default_value = "molecule")]
    name: String,
    /// Result format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct MitigateArgs {
    /// Matrix fixture (JSON).
    #[arg(long, value_name = "PATH")]
    matrix: PathBuf,
    /// Register size. Default: smallest size reaching the threshold.
    #[arg(long, value_name = "Q")]
    qubits: Option<usize>,
    /// Layers. Default: per-qubit schedule.
    #[arg(long, value_name = "L")]
    layers: Option<usize>,
    /// Shots per Pauli string.
    #[arg(long, value_name = "S", default_value_t = 100_000)]
    shots: u64,
    /// Seed for sampling.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Uniform readout flip probabilities "p01,p10".
    #[arg(
        long,
        value_name = "P01,P10",
        default_value = "0.02,0.02",
        conflicts_with = "noise_file"
    )]
    noise: String,
    /// Per-qubit readout flip probabilities, one "p01 p10" line per qubit.
    #[arg(long, value_name = "PATH")]
    noise_file: Option<PathBuf>,
    /// Independent energy estimates averaged per arm.
    #[arg(long, value_name = "N", default_value_t = 20)]
    repeats: u64,
    /// Derivative-free optimiser for the exact optimisation.
    #[arg(long, value_enum, default_value_t = OptimizerArg::Cobyla)]
    optimizer: OptimizerArg,
    #[command(flatten)]
    out: OutputArgs,
}

/// Failure with its exit status.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<vqsci::Error> for Failure {
    fn from(e: vqsci::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn invalid(message: impl Into<String>) -> Failure {
    Failure::Validation(message.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let started = Instant::now();
    let outcome = configure_threads().and_then(|()| dispatch(cli.command));
    match outcome {
        Ok(()) => {
            eprintln!("wall clock: {:.3} s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(Failure::Validation(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("VQSCI_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        invalid(format!(
            "VQSCI_THREADS must be a positive integer, got '{value}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("cannot start thread pool: {e}")))
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Encode(args) => encode(args),
        Command::Solve(args) => solve(args),
        Command::Curve(args) => curve(args),
        Command::Study(args) => study(args),
        Command::Resources(args) => resources(args),
        Command::MitigateDemo(args) => mitigate(args),
    }
}

fn load(path: &Path) -> CliResult<MatrixFixture> {
    load_fixture(path).map_err(|e| Failure::from(vqsci::Error::from(e)))
}

fn emit(out: &OutputArgs, text: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Runtime(format!("cannot serialise result: {e}")))
}

fn encode(args: EncodeArgs) -> CliResult<()> {
    let fixture = load(&args.matrix)?;
    let padding = PaddingPolicy::from(args.padding);
    let (matrix, encoding) = match args.qubits {
        Some(q) => {
            let encoding = BitEncoding::new(q).map_err(|e| Failure::from(vqsci::Error::from(e)))?;
            let ordering =
                fixture_ordering(&fixture).map_err(|e| Failure::from(vqsci::Error::from(e)))?;
            let size = encoding.capacity().min(fixture.dimension());
            let sub = fixture
                .matrix
                .principal_submatrix(&ordering, size)
                .map_err(|e| Failure::from(vqsci::Error::from(e)))?;
            (sub, encoding)
        }
        None => (
            fixture.matrix.clone(),
            BitEncoding::for_dimension(fixture.dimension()),
        ),
    };
    let sum = if args.stream {
        stream_entry_terms(&matrix, encoding, padding).map(|s| s.combine())
    } else {
        encode_matrix(&matrix, encoding, padding)
    }
    .map_err(|e| Failure::from(vqsci::Error::from(e)))?;
    eprintln!("{} terms on {} qubits", sum.len(), sum.qubits());
    emit(&args.out, &sum.to_text())
}

fn run_config(args: &RunArgs, qubits: Option<usize>) -> CliResult<RunConfig> {
    let mode = match args.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Sampled => Mode::Sampled,
    };
    let mut config = match mode {
        Mode::Exact => RunConfig::exact(),
        Mode::Sampled => RunConfig::sampled(args.shots, args.seed),
    };
    let defaults = config.optimizer;
    config.qubits = qubits;
    config.layers = args.layers;
    config.layer_schedule = args.layer_schedule.clone();
    config.shots = args.shots;
    config.seed = args.seed;
    config.noise = noise_spec(args.noise.as_deref(), args.noise_file.as_deref())?;
    config.mitigation = args.mitigation == Switch::On;
    config.stream = args.stream;
    config.padding = args.padding.into();
    config.threshold = args.threshold;
    config.optimizer = OptimizerConfig {
        method: optimizer_method(args.optimizer),
        max_iterations: args.max_iters.unwrap_or(defaults.max_iterations),
        initial_step: args.step,
        convergence_tol: args.tol.unwrap_or(defaults.convergence_tol),
        seed: args.seed,
    };
    Ok(config)
}

fn optimizer_method(arg: OptimizerArg) -> Method {
    match arg {
        OptimizerArg::Cobyla => Method::Cobyla,
        OptimizerArg::Simplex => Method::NelderMead,
    }
}

fn noise_spec(uniform: Option<&str>, file: Option<&Path>) -> CliResult<Option<NoiseSpec>> {
    match (uniform, file) {
        (_, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read noise file {}: {e}", path.display())))?;
            Ok(Some(NoiseSpec::parse_per_qubit(&text)?))
        }
        (Some(spec), None) => Ok(Some(NoiseSpec::parse_uniform(spec)?)),
        (None, None) => Ok(None),
    }
}

fn solve(args: SolveArgs) -> CliResult<()> {
    let config = run_config(&args.run, args.qubits)?;
    let fixture = load(&args.matrix)?;
    let result = run(&fixture, &config)?;
    if !result.layers_validated {
        eprintln!(
            "warning: {} layers for {} qubits is an extrapolated default",
            result.layers, result.qubits
        );
    }
    if !result.selection.reached {
        eprintln!(
            "warning: no subset of {} reaches the selection threshold",
            fixture.name()
        );
    }
    eprintln!(
        "{}: {} qubits, {} layers, tail mean {:.8} Ha, |delta sci| {:.2e} Ha, {} iterations",
        result.molecule,
        result.qubits,
        result.layers,
        result.energies.tail_mean,
        result.deltas.vs_sci_exact,
        result.iterations
    );
    let text = match args.format {
        Format::Json => to_json(&result)?,
        Format::Csv => result.trace_csv(),
    };
    emit(&args.out, &text)
}

fn expand_paths(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect();
            if found.is_empty() {
                return Err(invalid(format!(
                    "{} holds no .json fixtures",
                    path.display()
                )));
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn curve(args: CurveArgs) -> CliResult<()> {
    let config = run_config(&args.run, args.qubits)?;
    let fixtures = expand_paths(&args.matrix)?
        .iter()
        .map(|p| load(p))
        .collect::<CliResult<Vec<_>>>()?;
    let points = dissociation_curve(&fixtures, &config)?;
    let text = match args.format {
        Format::Json => to_json(&points)?,
        Format::Csv => csv(CURVE_CSV_HEADER, points.iter().map(|p| p.csv_row())),
    };
    emit(&args.out, &text)
}

fn csv(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut text = format!("{header}\n");
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    text
}

fn study(args: StudyArgs) -> CliResult<()> {
    let config = run_config(&args.run, None)?;
    let fixture = load(&args.matrix)?;
    let largest = usize::BITS as usize - 1 - fixture.dimension().leading_zeros() as usize;
    let q_max = args.q_max.unwrap_or(largest.max(1));
    if args.q_min == 0 || args.q_min > q_max {
        return Err(invalid(format!(
            "empty qubit range {}..={q_max}",
            args.q_min
        )));
    }
    let report = convergence_study(&fixture, args.q_min..=q_max, &config)?;
    eprintln!(
        "{}: exact SCI crosses at {:?} determinants, VQ-SCI at {:?}",
        report.molecule, report.crossing_sci, report.crossing_vqe
    );
    let text = match args.format {
        Format::Json => to_json(&report)?,
        Format::Csv => csv(STUDY_CSV_HEADER, report.rows.iter().map(|r| r.csv_row())),
    };
    emit(&args.out, &text)
}

fn resources(args: ResourceArgs) -> CliResult<()> {
    let rows = match (args.electrons, args.orbitals, args.dsci) {
        (Some(n), Some(m), Some(d)) => vec![ResourceProfile::new(&args.name, n, m, d)?],
        _ => benchmark_table(),
    };
    let text = match args.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => csv(CSV_HEADER, rows.iter().map(|r| r.csv_row())),
    };
    emit(&args.out, &text)
}

fn mitigate(args: MitigateArgs) -> CliResult<()> {
    let noise = noise_spec(Some(&args.noise), args.noise_file.as_deref())?
        .expect("a noise specification always has a default");
    let mut config = RunConfig::sampled(args.shots, args.seed);
    config.qubits = args.qubits;
    config.layers = args.layers;
    config.optimizer.method = optimizer_method(args.optimizer);
    let fixture = load(&args.matrix)?;
    let report = mitigation_demo(&fixture, &config, noise, args.repeats)?;
    eprintln!(
        "bias {:.3e} Ha unmitigated, {:.3e} Ha mitigated ({:.1}x)",
        report.unmitigated_bias, report.mitigated_bias, report.bias_reduction
    );
    emit(&args.out, &to_json(&report)?)
}
