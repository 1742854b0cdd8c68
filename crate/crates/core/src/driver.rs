//! End-to-end VQ-SCI runs.
//!
//! A run ranks the fixture's configurations, extracts the top-`2^q`
//! principal submatrix (largest weight first, so the leading determinant
//! maps to `|0…0⟩`), encodes it as a Pauli sum, and minimises the energy of
//! a RealAmplitudes circuit started at `θ = 0`. The reported energy is the
//! mean of the last ten evaluations.
//!
//! Energies in results are totals: the fixture's nuclear repulsion is added
//! to the identity coefficient before minimisation. Deltas are unaffected.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::ansatz::{default_layers, AnsatzSpec};
use crate::error::{Error, Result};
use crate::matrix::{load_fixture, MatrixFixture};
use crate::measurement::{build_calibration, sampled_energy, ReadoutNoise, ShotPlan};
use crate::optimizer::{minimize, tail_statistics, OptimizationTrace, OptimizerConfig};
use crate::oracle::{exact_ground, fixture_ordering, select_minimal_qubits, SelectionReport};
use crate::pauli::{
    encode_matrix, pad_matrix, stream_entry_terms, BitEncoding, PaddingPolicy, PauliSum,
};
use crate::resources::ResourceProfile;
use crate::statevector::exact_expectation;
use crate::CHEMICAL_ACCURACY;

/// Evaluations averaged for the reported energy.
pub const TAIL_WINDOW: usize = 10;

/// Noiseless expectation values or simulated shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            other => Err(format!("unknown mode '{other}' (exact|sampled)")),
        }
    }
}

/// Readout flip probabilities, either shared by every qubit or listed per
/// qubit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    Uniform {
        p01: f64,
        p10: f64,
    },
    /// Entry `j` applies to qubit `j`; must cover the register.
    PerQubit {
        p01: Vec<f64>,
        p10: Vec<f64>,
    },
}

impl NoiseSpec {
    pub fn uniform(p01: f64, p10: f64) -> Self {
        NoiseSpec::Uniform { p01, p10 }
    }

    /// Parses `"p01,p10"`.
    pub fn parse_uniform(spec: &str) -> Result<Self> {
        let pair = parse_pair(spec, ',')
            .ok_or_else(|| Error::Config(format!("noise '{spec}' is not 'p01,p10'")))?;
        Ok(Self::uniform(pair.0, pair.1))
    }

    /// Parses one `p01 p10` line per qubit, qubit 0 first. Blank lines and
    /// `#` comments are skipped; a comma may replace the space.
    pub fn parse_per_qubit(text: &str) -> Result<Self> {
        let (mut p01, mut p10) = (Vec::new(), Vec::new());
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = parse_pair(&line.replace(',', " "), ' ').ok_or_else(|| {
                Error::Config(format!(
                    "noise file line {}: expected 'p01 p10', got '{line}'",
                    n + 1
                ))
            })?;
            p01.push(a);
            p10.push(b);
        }
        if p01.is_empty() {
            return Err(Error::Config("noise file lists no qubits".into()));
        }
        Ok(NoiseSpec::PerQubit { p01, p10 })
    }

    pub fn for_qubits(&self, qubits: usize) -> Result<ReadoutNoise> {
        match self {
            NoiseSpec::Uniform { p01, p10 } => Ok(ReadoutNoise::uniform(*p01, *p10, qubits)?),
            NoiseSpec::PerQubit { p01, p10 } => {
                if p01.len() < qubits {
                    return Err(Error::Config(format!(
                        "noise covers {} qubits but the register has {qubits}",
                        p01.len()
                    )));
                }
                Ok(ReadoutNoise::new(
                    p01[..qubits].to_vec(),
                    p10[..qubits].to_vec(),
                )?)
            }
        }
    }
}

fn parse_pair(text: &str, separator: char) -> Option<(f64, f64)> {
    let mut parts = text
        .split(separator)
        .map(str::trim)
        .filter(|p| !p.is_empty());
    let a = parts.next()?.parse().ok()?;
    let b = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((a, b))
}

/// Settings of a single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    /// Register size; chosen by selection when absent.
    pub qubits: Option<usize>,
    /// Layer count; taken from the schedule when absent.
    pub layers: Option<usize>,
    /// Layer count per register size (entry `q - 1`), used instead of the
    /// default schedule for the sizes it covers.
    pub layer_schedule: Option<Vec<usize>>,
    /// Shots per Pauli string in sampled mode.
    pub shots: u64,
    pub seed: u64,
    pub noise: Option<NoiseSpec>,
    pub mitigation: bool,
    pub optimizer: OptimizerConfig,
    /// Encode through the per-entry term stream instead of the batch encoder.
    pub stream: bool,
    #[serde(skip)]
    pub padding: PaddingPolicy,
    /// Energy tolerance of the selection step (hartree).
    pub threshold: f64,
}

impl RunConfig {
    pub fn exact() -> Self {
        Self {
            mode: Mode::Exact,
            qubits: None,
            layers: None,
            layer_schedule: None,
            shots: 20_000,
            seed: 0,
            noise: None,
            mitigation: false,
            optimizer: OptimizerConfig::exact(),
            stream: false,
            padding: PaddingPolicy::Reject,
            threshold: CHEMICAL_ACCURACY,
        }
    }

    pub fn sampled(shots: u64, seed: u64) -> Self {
        Self {
            mode: Mode::Sampled,
            shots,
            seed,
            optimizer: OptimizerConfig {
                seed,
                ..OptimizerConfig::sampled()
            },
            ..Self::exact()
        }
    }

    /// Layer count for a `qubits`-qubit register and whether it comes
    /// from the caller or a validated part of the default schedule.
    pub fn layers_for(&self, qubits: usize) -> (usize, bool) {
        let scheduled = self
            .layer_schedule
            .as_ref()
            .and_then(|s| s.get(qubits.wrapping_sub(1)).copied());
        match self.layers.or(scheduled) {
            Some(l) => (l, true),
            None => {
                let choice = default_layers(qubits);
                (choice.layers, choice.validated)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.mode == Mode::Sampled && self.shots == 0 {
            return Err(Error::Config("sampled mode needs at least one shot".into()));
        }
        if self.mode == Mode::Exact && (self.noise.is_some() || self.mitigation) {
            return Err(Error::Config(
                "readout noise and mitigation only apply in sampled mode".into(),
            ));
        }
        if self.qubits == Some(0) {
            return Err(Error::Config("qubit count must be at least 1".into()));
        }
        if self.layer_schedule.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(Error::Config("layer schedule must not be empty".into()));
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::Config("selection threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Whether the register size came from selection or from the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitSource {
    Selection,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Units {
    pub energy: &'static str,
    pub distance: &'static str,
    pub angle: &'static str,
}

const UNITS: Units = Units {
    energy: "hartree",
    distance: "angstrom",
    angle: "radian",
};

/// Energies of a run, all totals in hartree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Energies {
    /// Energy of `|0…0⟩`, the leading determinant.
    pub initial: f64,
    pub tail_mean: f64,
    /// `tail_mean` without nuclear repulsion.
    pub electronic_tail_mean: f64,
    pub tail_std: f64,
    pub best: f64,
    pub sci_exact: f64,
    pub fci_reference: Option<f64>,
    pub nuclear_repulsion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deltas {
    /// `|tail mean − sci_exact|`.
    pub vs_sci_exact: f64,
    /// `|tail mean − fci_reference|`.
    pub vs_fci: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub energy: f64,
    pub stderr: f64,
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VqsciResult {
    pub units: Units,
    pub molecule: String,
    pub config: RunConfig,
    pub qubits: usize,
    pub qubit_source: QubitSource,
    pub layers: usize,
    pub layers_validated: bool,
    pub parameters: usize,
    pub determinants: usize,
    pub pauli_terms: usize,
    pub selection: SelectionReport,
    pub energies: Energies,
    pub deltas: Deltas,
    pub converged: bool,
    pub iterations: usize,
    pub circuit_executions: u64,
    pub best_parameters: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub resources: Option<ResourceProfile>,
    /// Kept out of serialised output so identical runs produce identical files.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl VqsciResult {
    /// `iteration,energy,stderr,best_so_far` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,energy_hartree,stderr_hartree,best_so_far_hartree\n");
        let mut best = f64::INFINITY;
        for p in &self.trace {
            best = best.min(p.energy);
            out.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                p.iteration, p.energy, p.stderr, best
            ));
        }
        out
    }
}

/// Encoded problem shared by every evaluation of a run.
struct Problem {
    hamiltonian: PauliSum,
    sci_exact: f64,
    initial: f64,
}

fn prepare_problem(
    fixture: &MatrixFixture,
    ordering: &[usize],
    qubits: usize,
    config: &RunConfig,
) -> Result<Problem> {
    let matrix = &fixture.matrix;
    let encoding = BitEncoding::new(qubits).map_err(Error::from)?;
    let count = encoding.capacity().min(matrix.dimension());
    let sub = matrix
        .principal_submatrix(ordering, count)
        .map_err(Error::from)
        .map_err(Error::at("selection"))?;
    // Surface padding errors before the eigen solve.
    pad_matrix(&sub, encoding, config.padding)
        .map_err(Error::from)
        .map_err(Error::at("encoding"))?;
    let shift = fixture.nuclear_repulsion();
    let sci_exact = exact_ground(&sub)
        .map_err(Error::from)
        .map_err(Error::at("selection"))?
        .energy
        + shift;
    let electronic = if config.stream {
        stream_entry_terms(&sub, encoding, config.padding).map(|s| s.combine())
    } else {
        encode_matrix(&sub, encoding, config.padding)
    }
    .map_err(Error::from)
    .map_err(Error::at("encoding"))?;
    Ok(Problem {
        hamiltonian: electronic.shifted(shift),
        sci_exact,
        initial: sub.get(0, 0).re + shift,
    })
}

/// Runs VQ-SCI on an in-memory fixture.
pub fn run(fixture: &MatrixFixture, config: &RunConfig) -> Result<VqsciResult> {
    let started = Instant::now();
    config.validate()?;
    let selection = select_minimal_qubits(fixture, config.threshold, config.padding)
        .map_err(Error::from)
        .map_err(Error::at("selection"))?;
    let (qubits, qubit_source) = match config.qubits {
        Some(q) => (q, QubitSource::Override),
        None => (selection.chosen_q, QubitSource::Selection),
    };
    let problem = prepare_problem(fixture, &selection.ordering, qubits, config)?;
    let determinants = (1usize << qubits).min(fixture.dimension());

    let (layers, layers_validated) = config.layers_for(qubits);
    let spec = AnsatzSpec::new(qubits, layers);

    let noise = config
        .noise
        .as_ref()
        .map(|n| n.for_qubits(qubits))
        .transpose()
        .map_err(Error::at("measurement"))?;
    let calibration = match (&noise, config.mitigation) {
        (Some(n), true) => Some(
            build_calibration(n, qubits)
                .map_err(Error::from)
                .map_err(Error::at("measurement"))?,
        ),
        (None, true) => Some(
            build_calibration(&ReadoutNoise::uniform(0.0, 0.0, qubits)?, qubits)
                .map_err(Error::from)
                .map_err(Error::at("measurement"))?,
        ),
        _ => None,
    };
    let plan = ShotPlan::new(config.shots.max(1), config.seed)?;
    let mut evaluation = 0u64;
    let mut executions = 0u64;
    let hamiltonian = &problem.hamiltonian;
    let objective = |theta: &[f64]| -> Result<(f64, f64)> {
        let state = spec.prepare_state(theta)?;
        let outcome = match config.mode {
            Mode::Exact => (exact_expectation(&state, hamiltonian)?, 0.0),
            Mode::Sampled => {
                let e = sampled_energy(
                    hamiltonian,
                    &state,
                    &plan,
                    noise.as_ref(),
                    calibration.as_ref(),
                    evaluation,
                )?;
                executions += e.shots;
                (e.energy, e.stderr)
            }
        };
        evaluation += 1;
        Ok(outcome)
    };
    let initial = vec![0.0; spec.parameter_count()];
    let trace = minimize(objective, &initial, &config.optimizer)
        .map_err(Error::from)
        .map_err(Error::at("optimization"))?;

    Ok(assemble(
        fixture,
        config,
        selection,
        qubits,
        qubit_source,
        spec,
        layers_validated,
        determinants,
        &problem,
        trace,
        executions,
        started.elapsed().as_secs_f64(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    fixture: &MatrixFixture,
    config: &RunConfig,
    selection: SelectionReport,
    qubits: usize,
    qubit_source: QubitSource,
    spec: AnsatzSpec,
    layers_validated: bool,
    determinants: usize,
    problem: &Problem,
    trace: OptimizationTrace,
    executions: u64,
    wall_clock_seconds: f64,
) -> VqsciResult {
    let (tail_mean, tail_std) = tail_statistics(&trace, TAIL_WINDOW);
    let fci_reference = fixture.determinants.reference_fci_energy;
    let resources = match (
        fixture.determinants.n_electrons,
        fixture.determinants.n_spin_orbitals,
    ) {
        (Some(n), Some(m)) => {
            ResourceProfile::new(fixture.name(), n as u64, m as u64, determinants as u128).ok()
        }
        _ => None,
    };
    VqsciResult {
        units: UNITS,
        molecule: fixture.name().to_string(),
        config: config.clone(),
        qubits,
        qubit_source,
        layers: spec.layers,
        layers_validated,
        parameters: spec.parameter_count(),
        determinants,
        pauli_terms: problem.hamiltonian.len(),
        selection,
        energies: Energies {
            initial: problem.initial,
            tail_mean,
            electronic_tail_mean: tail_mean - fixture.nuclear_repulsion(),
            tail_std,
            best: trace.best_energy,
            sci_exact: problem.sci_exact,
            fci_reference,
            nuclear_repulsion: fixture.nuclear_repulsion(),
        },
        deltas: Deltas {
            vs_sci_exact: (tail_mean - problem.sci_exact).abs(),
            vs_fci: fci_reference.map(|e| (tail_mean - e).abs()),
        },
        converged: trace.converged,
        iterations: trace.iterations_used,
        circuit_executions: executions,
        best_parameters: trace.best_parameters.clone(),
        trace: trace
            .evaluations
            .iter()
            .enumerate()
            .map(|(iteration, e)| TracePoint {
                iteration,
                energy: e.energy,
                stderr: e.stderr,
            })
            .collect(),
        resources,
        wall_clock_seconds,
    }
}

/// Loads a fixture file and runs it.
pub fn run_path(path: impl AsRef<Path>, config: &RunConfig) -> Result<VqsciResult> {
    let fixture = load_fixture(path)
        .map_err(Error::from)
        .map_err(Error::at("fixture"))?;
    run(&fixture, config)
}

/// One geometry of a dissociation curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub distance_angstrom: Option<f64>,
    pub molecule: String,
    pub qubits: usize,
    pub layers: usize,
    pub tail_mean: f64,
    pub tail_std: f64,
    pub sci_exact: f64,
    pub fci_reference: Option<f64>,
    pub delta_sci: f64,
    pub delta_fci: Option<f64>,
    pub iterations: usize,
}

impl CurvePoint {
    fn from_result(fixture: &MatrixFixture, r: &VqsciResult) -> Self {
        Self {
            distance_angstrom: fixture.provenance_f64("distance_angstrom"),
            molecule: r.molecule.clone(),
            qubits: r.qubits,
            layers: r.layers,
            tail_mean: r.energies.tail_mean,
            tail_std: r.energies.tail_std,
            sci_exact: r.energies.sci_exact,
            fci_reference: r.energies.fci_reference,
            delta_sci: r.deltas.vs_sci_exact,
            delta_fci: r.deltas.vs_fci,
            iterations: r.iterations,
        }
    }
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Runs every geometry (in parallel) and sorts the rows by bond length.
pub fn dissociation_curve(
    fixtures: &[MatrixFixture],
    config: &RunConfig,
) -> Result<Vec<CurvePoint>> {
    if fixtures.is_empty() {
        return Err(Error::Config("a curve needs at least one fixture".into()));
    }
    let mut points: Vec<CurvePoint> = fixtures
        .par_iter()
        .map(|f| run(f, config).map(|r| CurvePoint::from_result(f, &r)))
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| {
        a.distance_angstrom
            .unwrap_or(f64::INFINITY)
            .total_cmp(&b.distance_angstrom.unwrap_or(f64::INFINITY))
    });
    Ok(points)
}

pub const CURVE_CSV_HEADER: &str = "distance_angstrom,molecule,qubits,layers,tail_mean_hartree,tail_std_hartree,sci_exact_hartree,fci_reference_hartree,delta_sci_hartree,delta_fci_hartree,iterations";

impl CurvePoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:?},{:?},{:?},{},{:?},{},{}",
            opt_csv(self.distance_angstrom),
            self.molecule,
            self.qubits,
            self.layers,
            self.tail_mean,
            self.tail_std,
            self.sci_exact,
            opt_csv(self.fci_reference),
            self.delta_sci,
            opt_csv(self.delta_fci),
            self.iterations
        )
    }
}

/// One register size of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub qubits: usize,
    pub determinants: usize,
    pub layers: usize,
    pub tail_mean: f64,
    pub tail_std: f64,
    pub sci_exact: f64,
    pub delta_sci: f64,
    /// Error of the VQ-SCI energy against the reference.
    pub delta_fci: f64,
    /// Error of the exact SCI energy against the reference.
    pub sci_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const STUDY_CSV_HEADER: &str = "qubits,determinants,layers,tail_mean_hartree,tail_std_hartree,sci_exact_hartree,delta_sci_hartree,delta_fci_hartree,sci_error_hartree,iterations,converged";

impl StudyRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
            self.qubits,
            self.determinants,
            self.layers,
            self.tail_mean,
            self.tail_std,
            self.sci_exact,
            self.delta_sci,
            self.delta_fci,
            self.sci_error,
            self.iterations,
            self.converged
        )
    }
}

/// Energy error against determinant count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub units: Units,
    pub molecule: String,
    pub reference_energy: f64,
    pub reference_kind: crate::oracle::ReferenceKind,
    pub threshold: f64,
    pub rows: Vec<StudyRow>,
    /// Smallest determinant count whose exact SCI energy meets the threshold.
    pub crossing_sci: Option<usize>,
    /// Smallest determinant count whose VQ-SCI tail mean meets the threshold.
    pub crossing_vqe: Option<usize>,
}

/// Runs one VQ-SCI calculation per register size in `qubit_range`.
pub fn convergence_study(
    fixture: &MatrixFixture,
    qubit_range: std::ops::RangeInclusive<usize>,
    config: &RunConfig,
) -> Result<ConvergenceStudy> {
    if qubit_range.is_empty() || *qubit_range.start() == 0 {
        return Err(Error::Config(
            "qubit range must be non-empty and start at 1 or more".into(),
        ));
    }
    let selection = select_minimal_qubits(fixture, config.threshold, config.padding)
        .map_err(Error::from)
        .map_err(Error::at("selection"))?;
    let reference = selection.reference_energy;
    let qubits: Vec<usize> = qubit_range.collect();
    let rows: Vec<StudyRow> = qubits
        .par_iter()
        .map(|&q| {
            let cfg = RunConfig {
                qubits: Some(q),
                ..config.clone()
            };
            let r = run(fixture, &cfg)?;
            Ok(StudyRow {
                qubits: q,
                determinants: r.determinants,
                layers: r.layers,
                tail_mean: r.energies.tail_mean,
                tail_std: r.energies.tail_std,
                sci_exact: r.energies.sci_exact,
                delta_sci: r.deltas.vs_sci_exact,
                delta_fci: (r.energies.tail_mean - reference).abs(),
                sci_error: (r.energies.sci_exact - reference).abs(),
                iterations: r.iterations,
                converged: r.converged,
            })
        })
        .collect::<Result<_>>()?;
    let crossing = |error: fn(&StudyRow) -> f64| {
        rows.iter()
            .find(|r| error(r) <= config.threshold)
            .map(|r| r.determinants)
    };
    Ok(ConvergenceStudy {
        units: UNITS,
        molecule: fixture.name().to_string(),
        reference_energy: reference,
        reference_kind: selection.reference_kind,
        threshold: config.threshold,
        crossing_sci: crossing(|r| r.sci_error),
        crossing_vqe: crossing(|r| r.delta_fci),
        rows,
    })
}

/// Shot-noise bias with and without readout mitigation at fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationReport {
    pub units: Units,
    pub molecule: String,
    pub qubits: usize,
    pub shots: u64,
    pub repeats: u64,
    pub noise: NoiseSpec,
    pub parameters: Vec<f64>,
    /// Noiseless energy at `parameters`.
    pub exact_energy: f64,
    pub unmitigated_mean: f64,
    pub unmitigated_stderr: f64,
    pub mitigated_mean: f64,
    pub mitigated_stderr: f64,
    pub unmitigated_bias: f64,
    pub mitigated_bias: f64,
    /// `unmitigated_bias / mitigated_bias`.
    pub bias_reduction: f64,
}

/// Optimises the circuit in exact mode, then estimates the energy at the
/// optimum `repeats` times with noisy shots, with and without mitigation.
pub fn mitigation_demo(
    fixture: &MatrixFixture,
    config: &RunConfig,
    noise: NoiseSpec,
    repeats: u64,
) -> Result<MitigationReport> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    let exact = run(
        fixture,
        &RunConfig {
            mode: Mode::Exact,
            noise: None,
            mitigation: false,
            optimizer: OptimizerConfig {
                method: config.optimizer.method,
                ..OptimizerConfig::exact()
            },
            ..config.clone()
        },
    )?;
    let qubits = exact.qubits;
    let ordering = fixture_ordering(fixture)
        .map_err(Error::from)
        .map_err(Error::at("selection"))?;
    let problem = prepare_problem(
        fixture,
        &ordering,
        qubits,
        &RunConfig {
            stream: false,
            ..config.clone()
        },
    )?;
    let spec = AnsatzSpec::new(qubits, exact.layers);
    let state = spec.prepare_state(&exact.best_parameters)?;
    let exact_energy = exact_expectation(&state, &problem.hamiltonian)?;
    let readout = noise.for_qubits(qubits)?;
    let calibration = build_calibration(&readout, qubits)?;
    let plan = ShotPlan::new(config.shots, config.seed)?;

    let mut raw = Vec::new();
    let mut mitigated = Vec::new();
    for repeat in 0..repeats {
        raw.push(
            sampled_energy(
                &problem.hamiltonian,
                &state,
                &plan,
                Some(&readout),
                None,
                repeat,
            )?
            .energy,
        );
        mitigated.push(
            sampled_energy(
                &problem.hamiltonian,
                &state,
                &plan,
                Some(&readout),
                Some(&calibration),
                repeat,
            )?
            .energy,
        );
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, (var / n).sqrt())
    };
    let (unmitigated_mean, unmitigated_stderr) = stats(&raw);
    let (mitigated_mean, mitigated_stderr) = stats(&mitigated);
    let unmitigated_bias = (unmitigated_mean - exact_energy).abs();
    let mitigated_bias = (mitigated_mean - exact_energy).abs();
    Ok(MitigationReport {
        units: UNITS,
        molecule: fixture.name().to_string(),
        qubits,
        shots: config.shots,
        repeats,
        noise,
        parameters: exact.best_parameters,
        exact_energy,
        unmitigated_mean,
        unmitigated_stderr,
        mitigated_mean,
        mitigated_stderr,
        unmitigated_bias,
        mitigated_bias,
        bias_reduction: unmitigated_bias / mitigated_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{DeterminantSet, HermitianMatrix};
    use std::collections::BTreeMap;

    fn h2_fixture() -> MatrixFixture {
        let m = HermitianMatrix::from_real_dense(2, &[-1.8266, 0.1814, 0.1814, -0.2596]).unwrap();
        let mut d = DeterminantSet::anonymous(2);
        d.nuclear_repulsion = Some(0.7);
        MatrixFixture::new(m, d, BTreeMap::new()).unwrap()
    }

    fn h2_exact() -> f64 {
        let (a, d, b) = (-1.8266f64, -0.2596f64, 0.1814f64);
        (a + d) / 2.0 - (((a - d) / 2.0).powi(2) + b * b).sqrt()
    }

    #[test]
    fn exact_h2_run() {
        let r = run(&h2_fixture(), &RunConfig::exact()).unwrap();
        assert_eq!((r.qubits, r.layers, r.parameters), (1, 0, 1));
        assert_eq!(r.qubit_source, QubitSource::Selection);
        assert!((r.energies.tail_mean - 0.7 - h2_exact()).abs() < 1e-6);
        assert!((r.energies.initial - (-1.8266 + 0.7)).abs() < 1e-12);
        assert!((r.trace[0].energy - r.energies.initial).abs() < 1e-12);
        assert!(r.deltas.vs_sci_exact < 1e-6);
        assert!(r.iterations <= 50);
        assert_eq!(r.circuit_executions, 0);
    }

    #[test]
    fn streaming_trace_is_bit_identical() {
        let batch = run(&h2_fixture(), &RunConfig::exact()).unwrap();
        let stream = run(
            &h2_fixture(),
            &RunConfig {
                stream: true,
                ..RunConfig::exact()
            },
        )
        .unwrap();
        assert_eq!(batch.trace, stream.trace);
    }

    #[test]
    fn qubit_override_with_reject_padding_fails() {
        let config = RunConfig {
            qubits: Some(2),
            ..RunConfig::exact()
        };
        let err = run(&h2_fixture(), &config).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("padding policy 'reject'"), "{err}");
        let padded = RunConfig {
            padding: PaddingPolicy::Gershgorin,
            ..config
        };
        let r = run(&h2_fixture(), &padded).unwrap();
        assert!((r.energies.tail_mean - 0.7 - h2_exact()).abs() < 1e-6);
    }

    #[test]
    fn exact_mode_rejects_noise() {
        let config = RunConfig {
            mitigation: true,
            ..RunConfig::exact()
        };
        assert!(run(&h2_fixture(), &config).unwrap_err().is_validation());
    }

    #[test]
    fn sampled_run_is_seed_deterministic() {
        let config = RunConfig::sampled(2000, 5);
        let a = run(&h2_fixture(), &config).unwrap();
        let b = run(&h2_fixture(), &config).unwrap();
        assert_eq!(a.trace, b.trace);
        assert!(a.circuit_executions > 0);
        let streamed = run(
            &h2_fixture(),
            &RunConfig {
                stream: true,
                ..config
            },
        )
        .unwrap();
        assert_eq!(a.trace, streamed.trace);
    }

    #[test]
    fn noise_specs_parse_and_cover_the_register() {
        assert_eq!(
            NoiseSpec::parse_uniform("0.02, 0.03").unwrap(),
            NoiseSpec::uniform(0.02, 0.03)
        );
        assert!(NoiseSpec::parse_uniform("0.02")
            .unwrap_err()
            .is_validation());
        assert!(NoiseSpec::parse_uniform("0.02,0.03,0.04").is_err());
        let file = NoiseSpec::parse_per_qubit("# qubit rates\n0.01 0.02\n\n0.03,0.04\n").unwrap();
        let readout = file.for_qubits(2).unwrap();
        assert_eq!(readout.p01(), &[0.01, 0.03]);
        assert_eq!(readout.p10(), &[0.02, 0.04]);
        assert_eq!(file.for_qubits(1).unwrap().p01(), &[0.01]);
        assert!(file.for_qubits(3).is_err());
        assert!(NoiseSpec::parse_per_qubit("0.1\n").is_err());
        assert!(NoiseSpec::parse_per_qubit("# empty\n").is_err());
        assert!(NoiseSpec::uniform(0.7, 0.0)
            .for_qubits(1)
            .unwrap_err()
            .is_validation());
    }

    #[test]
    fn layer_schedule_overrides_defaults() {
        let mut config = RunConfig::exact();
        assert_eq!(config.layers_for(5), (5, true));
        assert!(!config.layers_for(9).1);
        config.layer_schedule = Some(vec![0, 1, 2, 3, 7]);
        assert_eq!(config.layers_for(5), (7, true));
        assert_eq!(config.layers_for(6), (11, true));
        config.layers = Some(2);
        assert_eq!(config.layers_for(5), (2, true));
        let empty = RunConfig {
            layer_schedule: Some(vec![]),
            ..RunConfig::exact()
        };
        assert!(run(&h2_fixture(), &empty).unwrap_err().is_validation());
    }

    #[test]
    fn mitigation_reduces_readout_bias() {
        let config = RunConfig::sampled(20_000, 3);
        let report =
            mitigation_demo(&h2_fixture(), &config, NoiseSpec::uniform(0.05, 0.05), 4).unwrap();
        assert!((report.exact_energy - 0.7 - h2_exact()).abs() < 1e-6);
        assert!(report.unmitigated_bias > 0.05, "{report:?}");
        assert!(
            report.mitigated_bias < report.unmitigated_bias / 3.0,
            "{report:?}"
        );
    }
}
