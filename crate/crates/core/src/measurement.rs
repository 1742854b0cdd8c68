//! Shot-based Pauli expectation estimates with readout noise and
//! calibration-matrix mitigation.
//!
//! Each Pauli string is measured by rotating a scratch copy of the state into
//! the string's eigenbasis (`H` for X, `S†` then `H` for Y), computing the
//! exact outcome distribution, passing it through the readout confusion
//! model, and drawing a multinomial histogram of `S` shots. A bitstring `b`
//! contributes the parity `(-1)^{|b ∧ support|}`.
//!
//! Every string draws from its own ChaCha stream keyed by
//! `(seed, evaluation, string index)`, so results do not depend on thread
//! scheduling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use thiserror::Error;

use crate::pauli::{PauliString, PauliSum};
use crate::statevector::Statevector;

/// Size guard for explicit `2^q × 2^q` calibration matrices.
pub const MAX_CALIBRATION_QUBITS: usize = 12;
/// Calibration matrices with a larger condition number are rejected.
pub const MAX_CONDITION_NUMBER: f64 = 1e8;

#[derive(Debug, Error)]
pub enum MeasurementError {
    #[error("invalid readout noise: {0}")]
    InvalidNoise(String),
    #[error("shot count must be at least 1")]
    NoShots,
    #[error("qubit count mismatch: state has {state}, measurement expects {expected}")]
    QubitMismatch { state: usize, expected: usize },
    #[error("calibration for {qubits} qubits exceeds the limit of {MAX_CALIBRATION_QUBITS}")]
    CalibrationTooLarge { qubits: usize },
    #[error("calibration matrix is singular or ill-conditioned (condition number {0:e})")]
    SingularCalibration(f64),
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("sampling failed: {0}")]
    Sampling(String),
}

/// Shots per Pauli string and the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotPlan {
    pub shots: u64,
    pub seed: u64,
}

impl ShotPlan {
    pub fn new(shots: u64, seed: u64) -> Result<Self, MeasurementError> {
        if shots == 0 {
            return Err(MeasurementError::NoShots);
        }
        Ok(Self { shots, seed })
    }

    /// Independent generator for one string of one energy evaluation.
    pub fn rng(&self, evaluation: u64, string_index: u64) -> ChaCha8Rng {
        let key = splitmix(splitmix(splitmix(self.seed) ^ evaluation) ^ string_index);
        ChaCha8Rng::seed_from_u64(key)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-qubit readout flip probabilities: `p01` reads 1 when the qubit is 0,
/// `p10` reads 0 when it is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutNoise {
    p01: Vec<f64>,
    p10: Vec<f64>,
}

impl ReadoutNoise {
    pub fn new(p01: Vec<f64>, p10: Vec<f64>) -> Result<Self, MeasurementError> {
        if p01.len() != p10.len() || p01.is_empty() {
            return Err(MeasurementError::InvalidNoise(format!(
                "need one (p01, p10) pair per qubit, got {} and {}",
                p01.len(),
                p10.len()
            )));
        }
        for &p in p01.iter().chain(&p10) {
            if !(0.0..0.5).contains(&p) {
                return Err(MeasurementError::InvalidNoise(format!(
                    "flip probability {p} is outside [0, 0.5)"
                )));
            }
        }
        Ok(Self { p01, p10 })
    }

    /// Same rates on every qubit.
    pub fn uniform(p01: f64, p10: f64, qubits: usize) -> Result<Self, MeasurementError> {
        Self::new(vec![p01; qubits], vec![p10; qubits])
    }

    /// Parses `"p01,p10"`.
    pub fn parse_uniform(spec: &str, qubits: usize) -> Result<Self, MeasurementError> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| MeasurementError::InvalidNoise(format!("'{spec}' is not 'p01,p10'")))
        };
        match parts.as_slice() {
            [a, b] => Self::uniform(parse(a)?, parse(b)?, qubits),
            _ => Err(MeasurementError::InvalidNoise(format!(
                "'{spec}' is not 'p01,p10'"
            ))),
        }
    }

    pub fn qubits(&self) -> usize {
        self.p01.len()
    }

    pub fn p01(&self) -> &[f64] {
        &self.p01
    }

    pub fn p10(&self) -> &[f64] {
        &self.p10
    }

    /// Confusion matrix of qubit `n`: `[[1−p01, p10], [p01, 1−p10]]`,
    /// indexed `[observed][true]`.
    pub fn confusion(&self, n: usize) -> [[f64; 2]; 2] {
        let (a, b) = (self.p01[n], self.p10[n]);
        [[1.0 - a, b], [a, 1.0 - b]]
    }

    fn is_trivial(&self) -> bool {
        self.p01.iter().chain(&self.p10).all(|&p| p == 0.0)
    }

    /// Applies the confusion model to a probability vector in place.
    pub fn apply(&self, probabilities: &mut [f64]) {
        for n in 0..self.qubits() {
            apply_single_qubit(probabilities, n, self.confusion(n));
        }
    }
}

fn apply_single_qubit(v: &mut [f64], qubit: usize, m: [[f64; 2]; 2]) {
    let bit = 1usize << qubit;
    for k in 0..v.len() {
        if k & bit == 0 {
            let (a0, a1) = (v[k], v[k | bit]);
            v[k] = m[0][0] * a0 + m[0][1] * a1;
            v[k | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Column-stochastic `2^q × 2^q` matrix, `A[observed][true]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix {
    matrix: DMatrix<f64>,
    /// Per-qubit inverse confusion matrices when `matrix` is a tensor product.
    inverse_factors: Option<Vec<[[f64; 2]; 2]>>,
    condition: f64,
}

impl CalibrationMatrix {
    /// Wraps an explicit matrix; mitigation then uses an LU solve.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self, MeasurementError> {
        let n = matrix.nrows();
        if n != matrix.ncols() || n < 2 || !n.is_power_of_two() {
            return Err(MeasurementError::InvalidNoise(format!(
                "calibration matrix must be 2^q square, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        for (j, col) in matrix.column_iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || col.iter().any(|&v| v < 0.0) {
                return Err(MeasurementError::InvalidNoise(format!(
                    "calibration column {j} is not a probability vector (sum {sum})"
                )));
            }
        }
        let sv = matrix.singular_values();
        let condition = sv.max() / sv.min();
        Ok(Self {
            matrix,
            inverse_factors: None,
            condition,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn qubits(&self) -> usize {
        self.matrix.nrows().trailing_zeros() as usize
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn is_tensor_factored(&self) -> bool {
        self.inverse_factors.is_some()
    }
}

/// Tensor product of the per-qubit confusion matrices.
pub fn build_calibration(
    noise: &ReadoutNoise,
    qubits: usize,
) -> Result<CalibrationMatrix, MeasurementError> {
    if qubits > MAX_CALIBRATION_QUBITS {
        return Err(MeasurementError::CalibrationTooLarge { qubits });
    }
    if noise.qubits() != qubits {
        return Err(MeasurementError::QubitMismatch {
            state: qubits,
            expected: noise.qubits(),
        });
    }
    let n = 1usize << qubits;
    // Column `t` is the noisy image of the basis state `t`.
    let mut matrix = DMatrix::zeros(n, n);
    for t in 0..n {
        let mut column = vec![0.0; n];
        column[t] = 1.0;
        noise.apply(&mut column);
        matrix.set_column(t, &DVector::from_vec(column));
    }
    let mut condition = 1.0;
    let mut inverses = Vec::with_capacity(qubits);
    for q in 0..qubits {
        let m = nalgebra::Matrix2::from_fn(|r, c| noise.confusion(q)[r][c]);
        let sv = m.singular_values();
        condition *= sv.max() / sv.min();
        let inv = m
            .try_inverse()
            .ok_or(MeasurementError::SingularCalibration(f64::INFINITY))?;
        inverses.push([[inv[(0, 0)], inv[(0, 1)]], [inv[(1, 0)], inv[(1, 1)]]]);
    }
    Ok(CalibrationMatrix {
        matrix,
        inverse_factors: Some(inverses),
        condition,
    })
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Corrects a histogram: solves `A x = f` for the observed frequencies `f`,
/// then projects `x` onto the probability simplex.
pub fn mitigate_counts(
    raw: &[u64],
    calibration: &CalibrationMatrix,
) -> Result<Vec<f64>, MeasurementError> {
    let n = calibration.matrix.nrows();
    if raw.len() != n {
        return Err(MeasurementError::QubitMismatch {
            state: raw.len().trailing_zeros() as usize,
            expected: calibration.qubits(),
        });
    }
    let total: u64 = raw.iter().sum();
    if total == 0 {
        return Err(MeasurementError::EmptyHistogram);
    }
    if calibration.condition > MAX_CONDITION_NUMBER || !calibration.condition.is_finite() {
        return Err(MeasurementError::SingularCalibration(calibration.condition));
    }
    let mut x: Vec<f64> = raw.iter().map(|&c| c as f64 / total as f64).collect();
    match &calibration.inverse_factors {
        Some(inverses) => {
            for (q, inv) in inverses.iter().enumerate() {
                apply_single_qubit(&mut x, q, *inv);
            }
        }
        None => {
            let solved = calibration
                .matrix
                .clone()
                .lu()
                .solve(&DVector::from_vec(x))
                .ok_or(MeasurementError::SingularCalibration(calibration.condition))?;
            x = solved.iter().copied().collect();
        }
    }
    Ok(project_to_simplex(&x))
}

/// Mean and standard error of a single-string estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Circuit executions spent (zero for the identity).
    pub shots: u64,
}

fn rotate_to_z_basis(state: &mut Statevector, string: &PauliString) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = state.amplitudes_mut();
    for n in 0..string.qubits() {
        let (x, z) = (string.x_mask() >> n & 1 == 1, string.z_mask() >> n & 1 == 1);
        if !x {
            continue;
        }
        let bit = 1usize << n;
        for k in 0..amps.len() {
            if k & bit == 0 {
                let (a0, mut a1) = (amps[k], amps[k | bit]);
                if z {
                    // S† on the |1> component.
                    a1 = Complex64::new(a1.im, -a1.re);
                }
                amps[k] = (a0 + a1) * h;
                amps[k | bit] = (a0 - a1) * h;
            }
        }
    }
}

/// Outcome distribution after basis rotation and readout noise.
pub fn outcome_probabilities(
    state: &Statevector,
    string: &PauliString,
    noise: Option<&ReadoutNoise>,
) -> Vec<f64> {
    let mut scratch = state.clone();
    rotate_to_z_basis(&mut scratch, string);
    let mut p = scratch.probabilities();
    if let Some(noise) = noise {
        noise.apply(&mut p);
    }
    p
}

/// Draws a multinomial histogram by sequential conditional binomials.
pub fn sample_histogram(
    probabilities: &[f64],
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u64>, MeasurementError> {
    let mut counts = vec![0u64; probabilities.len()];
    let mut remaining = shots;
    let mut mass: f64 = probabilities.iter().sum();
    for (k, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probabilities.len() {
            counts[k] = remaining;
            break;
        }
        let ratio = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining, ratio)
            .map_err(|e| MeasurementError::Sampling(e.to_string()))?
            .sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}

fn parity(k: usize, support: u64) -> f64 {
    if (k as u64 & support).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn raw_estimate(counts: &[u64], support: u64, shots: u64) -> Estimate {
    let total: f64 = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * parity(k, support))
        .sum();
    let s = shots as f64;
    let mean = total / s;
    // Parities are ±1, so the sample variance is (1 − mean²)·S/(S−1).
    let variance = if shots > 1 {
        ((1.0 - mean * mean) * s / (s - 1.0)).max(0.0)
    } else {
        0.0
    };
    Estimate {
        mean,
        stderr: (variance / s).sqrt(),
        shots,
    }
}

/// Estimates `⟨ψ|P|ψ⟩` from `plan.shots` simulated shots.
///
/// `evaluation` and `string_index` select the random stream. With a
/// calibration the histogram is mitigated before the parity average and the
/// standard error is scaled by the inverse readout contrast of the support.
pub fn measure_pauli(
    state: &Statevector,
    string: &PauliString,
    plan: &ShotPlan,
    noise: Option<&ReadoutNoise>,
    mitigation: Option<&CalibrationMatrix>,
    evaluation: u64,
    string_index: u64,
) -> Result<Estimate, MeasurementError> {
    if string.qubits() != state.qubits() {
        return Err(MeasurementError::QubitMismatch {
            state: state.qubits(),
            expected: string.qubits(),
        });
    }
    if string.is_identity() {
        return Ok(Estimate {
            mean: 1.0,
            stderr: 0.0,
            shots: 0,
        });
    }
    let noise = noise.filter(|n| !n.is_trivial());
    if let Some(n) = noise {
        if n.qubits() != state.qubits() {
            return Err(MeasurementError::QubitMismatch {
                state: state.qubits(),
                expected: n.qubits(),
            });
        }
    }
    let probabilities = outcome_probabilities(state, string, noise);
    let mut rng = plan.rng(evaluation, string_index);
    let counts = sample_histogram(&probabilities, plan.shots, &mut rng)?;
    let support = string.support();
    let raw = raw_estimate(&counts, support, plan.shots);
    let Some(calibration) = mitigation else {
        return Ok(raw);
    };
    let corrected = mitigate_counts(&counts, calibration)?;
    let mean = corrected
        .iter()
        .enumerate()
        .map(|(k, &p)| p * parity(k, support))
        .sum();
    let gain: f64 = match noise {
        Some(n) => (0..n.qubits())
            .filter(|&q| support >> q & 1 == 1)
            .map(|q| 1.0 / (1.0 - n.p01[q] - n.p10[q]))
            .product(),
        None => 1.0,
    };
    Ok(Estimate {
        mean,
        stderr: raw.stderr * gain,
        shots: plan.shots,
    })
}

/// Sampled energy estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub energy: f64,
    pub stderr: f64,
    /// Circuit executions used by this evaluation.
    pub shots: u64,
}

/// `Σ_k a_k ⟨P_k⟩` with every string sampled independently.
/// `stderr = sqrt(Σ a_k² var_k)`.
pub fn sampled_energy(
    sum: &PauliSum,
    state: &Statevector,
    plan: &ShotPlan,
    noise: Option<&ReadoutNoise>,
    mitigation: Option<&CalibrationMatrix>,
    evaluation: u64,
) -> Result<EnergyEstimate, MeasurementError> {
    if sum.qubits() != state.qubits() {
        return Err(MeasurementError::QubitMismatch {
            state: state.qubits(),
            expected: sum.qubits(),
        });
    }
    let estimates: Vec<Estimate> = sum
        .terms()
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            measure_pauli(
                state, &t.string, plan, noise, mitigation, evaluation, i as u64,
            )
        })
        .collect::<Result<_, _>>()?;
    let mut energy = 0.0;
    let mut variance = 0.0;
    let mut shots = 0;
    for (t, e) in sum.terms().iter().zip(&estimates) {
        let a = t.coefficient.re;
        energy += a * e.mean;
        variance += a * a * e.stderr * e.stderr;
        shots += e.shots;
    }
    Ok(EnergyEstimate {
        energy,
        stderr: variance.sqrt(),
        shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::exact_expectation;

    fn real_state(values: &[f64]) -> Statevector {
        Statevector::from_amplitudes(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .unwrap()
    }

    fn axes(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn identity_short_circuits() {
        let plan = ShotPlan::new(10, 1).unwrap();
        let e = measure_pauli(&real_state(&[1., 0.]), &axes("I"), &plan, None, None, 0, 0).unwrap();
        assert_eq!(
            e,
            Estimate {
                mean: 1.0,
                stderr: 0.0,
                shots: 0
            }
        );
    }

    #[test]
    fn deterministic_z_and_x_outcomes() {
        let plan = ShotPlan::new(100_000, 3).unwrap();
        let z = measure_pauli(&real_state(&[1., 0.]), &axes("Z"), &plan, None, None, 0, 0).unwrap();
        assert!((z.mean - 1.0).abs() < 0.02);
        let h = 0.5f64.sqrt();
        let x = measure_pauli(&real_state(&[h, h]), &axes("X"), &plan, None, None, 0, 0).unwrap();
        assert!((x.mean - 1.0).abs() < 0.02);
        assert!(x.stderr <= 1.0 / (plan.shots as f64).sqrt());
    }

    #[test]
    fn y_rotation_maps_plus_i_to_zero() {
        let h = 0.5f64.sqrt();
        let state =
            Statevector::from_amplitudes(vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)])
                .unwrap();
        let p = outcome_probabilities(&state, &axes("Y"), None);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
    }

    #[test]
    fn rotated_probabilities_reproduce_exact_expectations() {
        // Random complex 3-qubit state against the statevector oracle.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut amps: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let state = Statevector::from_amplitudes(amps).unwrap();
        for s in ["XYZ", "YYI", "ZXX", "IIY", "XXX"] {
            let string = axes(s);
            let p = outcome_probabilities(&state, &string, None);
            let from_p: f64 = p
                .iter()
                .enumerate()
                .map(|(k, &v)| v * parity(k, string.support()))
                .sum();
            let sum = PauliSum::from_text(&format!("1 0 {s}")).unwrap();
            let exact = exact_expectation(&state, &sum).unwrap();
            assert!((from_p - exact).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let plan = ShotPlan::new(1000, 42).unwrap();
        let state = real_state(&[0.6, 0.8]);
        let a = measure_pauli(&state, &axes("Z"), &plan, None, None, 3, 1).unwrap();
        let b = measure_pauli(&state, &axes("Z"), &plan, None, None, 3, 1).unwrap();
        let c = measure_pauli(&state, &axes("Z"), &plan, None, None, 4, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn histogram_sums_to_shots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let counts = sample_histogram(&[0.1, 0.2, 0.0, 0.7], 12345, &mut rng).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 12345);
        assert_eq!(counts[2], 0);
    }

    #[test]
    fn calibration_examples() {
        let id = build_calibration(&ReadoutNoise::uniform(0.0, 0.0, 2).unwrap(), 2).unwrap();
        assert_eq!(id.matrix(), &DMatrix::identity(4, 4));
        let one = build_calibration(&ReadoutNoise::uniform(0.1, 0.05, 1).unwrap(), 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.9, 0.05, 0.1, 0.95]);
        assert!((one.matrix() - expected).amax() < 1e-15);
        let noise = ReadoutNoise::new(vec![0.1, 0.03], vec![0.05, 0.2]).unwrap();
        let two = build_calibration(&noise, 2).unwrap();
        let m = |q: usize| {
            let c = noise.confusion(q);
            DMatrix::from_row_slice(2, 2, &[c[0][0], c[0][1], c[1][0], c[1][1]])
        };
        // Qubit 0 is the low bit, so it is the right-hand Kronecker factor.
        assert!((two.matrix() - m(1).kronecker(&m(0))).amax() < 1e-15);
        assert!(matches!(
            build_calibration(&ReadoutNoise::uniform(0.0, 0.0, 13).unwrap(), 13),
            Err(MeasurementError::CalibrationTooLarge { .. })
        ));
    }

    #[test]
    fn noise_validation() {
        assert!(ReadoutNoise::uniform(0.5, 0.0, 1).is_err());
        assert!(ReadoutNoise::uniform(-0.1, 0.0, 1).is_err());
        assert!(ReadoutNoise::parse_uniform("0.02,0.03", 2).is_ok());
        assert!(ReadoutNoise::parse_uniform("0.02", 2).is_err());
        assert!(ReadoutNoise::parse_uniform("a,b", 2).is_err());
    }

    #[test]
    fn mitigation_examples() {
        let id = build_calibration(&ReadoutNoise::uniform(0.0, 0.0, 1).unwrap(), 1).unwrap();
        assert_eq!(mitigate_counts(&[3, 1], &id).unwrap(), vec![0.75, 0.25]);
        assert!(matches!(
            mitigate_counts(&[0, 0], &id),
            Err(MeasurementError::EmptyHistogram)
        ));

        let noise = ReadoutNoise::uniform(0.1, 0.0, 1).unwrap();
        let cal = build_calibration(&noise, 1).unwrap();
        let p = outcome_probabilities(&real_state(&[1., 0.]), &axes("Z"), Some(&noise));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let counts = sample_histogram(&p, 100_000, &mut rng).unwrap();
        assert!((counts[0] as f64 / 1e5 - 0.9).abs() < 0.01);
        let x = mitigate_counts(&counts, &cal).unwrap();
        assert!((x[0] - 1.0).abs() < 0.02 && x[1] < 0.02);
    }

    #[test]
    fn lu_path_matches_tensor_path() {
        let noise = ReadoutNoise::new(vec![0.04, 0.08], vec![0.02, 0.1]).unwrap();
        let tensor = build_calibration(&noise, 2).unwrap();
        let full = CalibrationMatrix::from_matrix(tensor.matrix().clone()).unwrap();
        assert!(!full.is_tensor_factored());
        let counts = [400, 300, 200, 100];
        let a = mitigate_counts(&counts, &tensor).unwrap();
        let b = mitigate_counts(&counts, &full).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((full.condition_number() - tensor.condition_number()).abs() < 1e-9);
    }

    #[test]
    fn singular_calibration_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let cal = CalibrationMatrix::from_matrix(m).unwrap();
        assert!(matches!(
            mitigate_counts(&[1, 1], &cal),
            Err(MeasurementError::SingularCalibration(_))
        ));
        let not_stochastic = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        assert!(CalibrationMatrix::from_matrix(not_stochastic).is_err());
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_to_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_to_simplex(&[1.1, -0.1]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.6, 0.6, -0.2]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn identity_only_energy_is_exact() {
        let sum = PauliSum::from_text("2.5 0 II\n").unwrap();
        let plan = ShotPlan::new(10, 0).unwrap();
        let e = sampled_energy(
            &sum,
            &Statevector::init_zero(2).unwrap(),
            &plan,
            None,
            None,
            0,
        )
        .unwrap();
        assert_eq!((e.energy, e.stderr, e.shots), (2.5, 0.0, 0));
    }

    #[test]
    fn h2_hf_energy_from_shots() {
        let sum = PauliSum::from_text("-1.0431 0 I\n-0.7835 0 Z\n0.1814 0 X\n").unwrap();
        let plan = ShotPlan::new(20_000, 8).unwrap();
        let e = sampled_energy(&sum, &real_state(&[1., 0.]), &plan, None, None, 0).unwrap();
        assert!((e.energy - -1.8266).abs() <= 3.0 * e.stderr + 1e-12);
        assert_eq!(e.shots, 40_000);
    }
}
